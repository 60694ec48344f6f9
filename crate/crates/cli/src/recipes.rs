//! One function per experiment recipe. Each returns the reports it produced
//! together with the runs and curves worth writing to disk.

use std::sync::Arc;

use anisolab::exponents::exact;
use anisolab::flux::verify_structure_in;
use anisolab::parabolic::forcing_gap_series;
use anisolab::verify::{
    check_data_independence, check_decay_bounds, check_energy_dissipation, check_l1_contraction, check_regularity_transfer,
    check_regularizing, check_steady_convergence, l1_distance_series, sup_distance_series, BoundCheckReport, Envelope,
};
use anisolab::{sola_solve, solve_elliptic, solve_parabolic, EllipticSpec, ProblemSpec, Regime, Trajectory};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, FieldSpec};
use crate::CliError;

/// Series drawn in one plot, with the envelopes certified for it.
#[derive(Debug, Clone)]
pub struct Plot {
    pub name: String,
    pub title: String,
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
    pub envelopes: Vec<(String, Envelope, (f64, f64))>,
}

#[derive(Debug, Clone, Default)]
pub struct RecipeOutput {
    pub reports: Vec<BoundCheckReport>,
    pub runs: Vec<(String, Arc<Trajectory>)>,
    pub plots: Vec<Plot>,
}

pub fn run_recipe(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel)
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    pool.install(|| match cfg.experiment.as_str() {
        "contraction" => contraction(cfg),
        "decay" => decay(cfg),
        "universal" => universal(cfg),
        "regularize" => regularize(cfg),
        "transfer" => transfer(cfg),
        "steady" => steady(cfg),
        "sola" => sola(cfg),
        "structure" => structure(cfg),
        "exponents" => exponents(cfg),
        other => Err(CliError::Other(format!("unknown recipe `{other}`"))),
    })
}

fn solve_all(problems: &[ProblemSpec]) -> Result<Vec<Arc<Trajectory>>, CliError> {
    Ok(problems.par_iter().map(|p| solve_parabolic(p).map(Arc::new)).collect::<anisolab::Result<Vec<_>>>()?)
}

fn paired(cfg: &ExperimentConfig) -> Result<(ProblemSpec, ProblemSpec), CliError> {
    let p = &cfg.problem;
    let pu = cfg.problem_with(&p.initial, &p.forcing, 0)?;
    let pv = cfg.problem_with(&p.initial_v, p.forcing_v.as_ref().unwrap_or(&p.forcing), 1)?;
    Ok((pu, pv))
}

fn gamma(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    if let Some(g) = cfg.verify.gamma {
        return Ok(g);
    }
    let s = verify_structure_in(&cfg.flux_model()?, cfg.verify.samples, cfg.seed, cfg.verify.range)?;
    Ok(if s.strong_monotone_ok { s.worst_gamma.max(0.0) } else { 0.0 })
}

fn window(cfg: &ExperimentConfig) -> (f64, f64) {
    cfg.verify.window.unwrap_or((0.02 * cfg.problem.t_final, cfg.problem.t_final))
}

fn positive(series: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    series.into_iter().filter(|&(t, v)| t > 0.0 && v > 0.0).collect()
}

fn sup_curve(traj: &Trajectory) -> Vec<(f64, f64)> {
    positive(traj.times.iter().zip(&traj.norm_log).map(|(&t, n)| (t, n.sup)).collect())
}

fn decay_plot(name: &str, title: &str, dist: Vec<(f64, f64)>, reports: &[BoundCheckReport]) -> Plot {
    Plot {
        name: name.into(),
        title: title.into(),
        curves: vec![("‖u−v‖∞".into(), positive(dist))],
        envelopes: reports.iter().filter_map(|r| r.envelope.map(|e| (r.name.clone(), e, r.window))).collect(),
    }
}

fn contraction(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let (pu, pv) = paired(cfg)?;
    let runs = solve_all(&[pu.clone(), pv.clone()])?;
    let (u, v) = (&runs[0], &runs[1]);
    let gap = forcing_gap_series(&pu, &pv)?;
    let mut reports = vec![check_l1_contraction(u, v, &pu.initial, &pv.initial, &gap)?];
    if pu.forcing == pv.forcing && u.is_dense() {
        reports.push(check_energy_dissipation(u, v, gamma(cfg)?, cfg.verify.k)?);
    }
    let plot = Plot {
        name: "contraction".into(),
        title: "L1 distance".into(),
        curves: vec![("‖u−v‖₁".into(), positive(l1_distance_series(u, v)?))],
        envelopes: Vec::new(),
    };
    Ok(RecipeOutput { reports, runs: vec![("u".into(), runs[0].clone()), ("v".into(), runs[1].clone())], plots: vec![plot] })
}

fn decay(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let (pu, pv) = paired(cfg)?;
    let runs = solve_all(&[pu.clone(), pv])?;
    let reports = check_decay_bounds(
        &runs[0],
        &runs[1],
        &pu.exponents,
        gamma(cfg)?,
        pu.grid.measure(),
        window(cfg),
        cfg.verify.exponent_tol,
    )?;
    let plot = decay_plot("decay", "sup distance", sup_distance_series(&runs[0], &runs[1])?, &reports);
    Ok(RecipeOutput { reports, runs: vec![("u".into(), runs[0].clone()), ("v".into(), runs[1].clone())], plots: vec![plot] })
}

fn universal_exponent(cfg: &ExperimentConfig) -> Result<f64, CliError> {
    let ev = cfg.exponents()?;
    if ev.regime() != Regime::Universal {
        return Err(CliError::Other(format!("recipe `universal` needs p̄ > 2, got p̄ = {}", ev.p_bar)));
    }
    Ok(1.0 / (ev.p_bar - 2.0))
}

fn universal(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let h2 = universal_exponent(cfg)?;
    let t0 = cfg.verify.t0.unwrap_or(0.5 * cfg.problem.t_final);
    let problems = cfg
        .verify
        .scales
        .iter()
        .enumerate()
        .map(|(i, &s)| cfg.problem_with(&cfg.problem.initial.with_scale(s), &cfg.problem.forcing, i as u64))
        .collect::<anisolab::Result<Vec<_>>>()?;
    let runs = solve_all(&problems)?;
    let mut out = RecipeOutput::default();
    let mut plot = Plot { name: "universal".into(), title: "sup norm".into(), curves: Vec::new(), envelopes: Vec::new() };
    for (i, (traj, &s)) in runs.iter().zip(&cfg.verify.scales).enumerate() {
        // least C with ‖u(t)‖∞ ≤ C t^{−h2} after t0
        let c = traj
            .times
            .iter()
            .zip(&traj.norm_log)
            .filter(|(&t, _)| t >= t0 * (1.0 - 1e-12))
            .map(|(&t, n)| n.sup * t.powf(h2))
            .fold(0.0, f64::max);
        let mut r = BoundCheckReport::new("tail", (t0, traj.final_time()));
        r.fitted_constant = c;
        r.expected_exponent = Some(h2);
        r.passed = c.is_finite();
        r.margin = if r.passed { 0.0 } else { f64::NEG_INFINITY };
        r.details.push(("scale".into(), s));
        r.details.push(("initial_l1".into(), traj.states[0].l1()));
        out.reports.push(r);
        out.runs.push((format!("scale_{i}"), traj.clone()));
        plot.curves.push((format!("scale {s}"), sup_curve(traj)));
    }
    if runs.len() >= 2 {
        let refs: Vec<&Trajectory> = runs.iter().map(|r| r.as_ref()).collect();
        out.reports.push(check_data_independence("defC4", &refs, t0, cfg.verify.rel_tol)?);
    }
    out.plots.push(plot);
    Ok(out)
}

fn regularize(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let ev = cfg.exponents()?;
    let t0 = cfg.verify.t0.unwrap_or(0.1 * cfg.problem.t_final);
    let problems = cfg
        .verify
        .heights
        .iter()
        .map(|&h| cfg.problem_with(&FieldSpec::Spike(h), &cfg.problem.forcing, 0))
        .collect::<anisolab::Result<Vec<_>>>()?;
    let runs = solve_all(&problems)?;
    let f = cfg.problem.forcing.build(cfg.grid()?, cfg.seed.wrapping_add(1000))?;
    let f_norm = f.norm(cfg.verify.m)?;
    let mut out = RecipeOutput::default();
    let mut plot = Plot { name: "regularize".into(), title: "sup norm".into(), curves: Vec::new(), envelopes: Vec::new() };
    for (traj, &h) in runs.iter().zip(&cfg.verify.heights) {
        let mut r = check_regularizing(traj, f_norm, cfg.verify.m, &ev, t0)?;
        r.details.push(("height".into(), h));
        r.details.push(("initial_l1".into(), traj.states[0].l1()));
        out.reports.push(r);
        out.runs.push((format!("height_{h:e}"), traj.clone()));
        plot.curves.push((format!("height {h:e}"), sup_curve(traj)));
    }
    if runs.len() >= 2 && ev.regime() == Regime::Universal {
        let refs: Vec<&Trajectory> = runs.iter().map(|r| r.as_ref()).collect();
        out.reports.push(check_data_independence("defC4", &refs, t0, cfg.verify.rel_tol)?);
    }
    out.plots.push(plot);
    Ok(out)
}

fn transfer(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let (pu, pv) = paired(cfg)?;
    let runs = solve_all(&[pu.clone(), pv])?;
    let w = window(cfg);
    let decay =
        check_decay_bounds(&runs[0], &runs[1], &pu.exponents, 0.0, pu.grid.measure(), w, cfg.verify.exponent_tol)?;
    let uno = decay.into_iter().next().expect("uno report is always present");
    let t0 = cfg.verify.t0.unwrap_or(w.0);
    let r = check_regularity_transfer(&runs[0], &runs[1], &uno, cfg.verify.r, cfg.verify.s, t0)?;
    let plot = decay_plot("transfer", "sup distance", sup_distance_series(&runs[0], &runs[1])?, std::slice::from_ref(&uno));
    Ok(RecipeOutput {
        reports: vec![uno, r],
        runs: vec![("u".into(), runs[0].clone()), ("v".into(), runs[1].clone())],
        plots: vec![plot],
    })
}

fn steady(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let p = &cfg.problem;
    let problems = [cfg.problem_with(&p.initial, &p.forcing, 0)?, cfg.problem_with(&p.initial_v, &p.forcing, 1)?];
    let f = problems[0].forcing.at(0.0).into_owned();
    let spec = EllipticSpec::new(cfg.flux_model()?, f)?.with_tol(cfg.verify.solver_tol)?;
    let w = solve_elliptic(&spec)?;
    let runs = solve_all(&problems)?;
    let mut out = RecipeOutput::default();
    let mut plot = Plot { name: "steady".into(), title: "distance to steady state".into(), curves: Vec::new(), envelopes: Vec::new() };
    for (name, traj) in ["u", "v"].iter().zip(&runs) {
        out.reports.push(check_steady_convergence(traj, &w, cfg.verify.tail_start, cfg.verify.threshold)?);
        let d = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(&t, s)| Ok((t, s.sub(&w)?.sup_norm())))
            .collect::<anisolab::Result<Vec<_>>>()?;
        plot.curves.push((name.to_string(), positive(d)));
        out.runs.push((name.to_string(), traj.clone()));
    }
    out.plots.push(plot);
    Ok(out)
}

fn sola(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let p = cfg.problem_with(&cfg.problem.initial, &cfg.problem.forcing, 0)?;
    let rep = sola_solve(&p, &cfg.verify.levels, cfg.verify.tolerance)?;
    let m = rep.levels.len();
    let mut r = BoundCheckReport::new("sola", (0.0, p.t_final));
    let mut margin = f64::INFINITY;
    let mut ratio = 0.0f64;
    for i in 0..m {
        for j in i + 1..m {
            let (c, b) = (rep.cauchy_matrix[i][j], rep.data_bound_matrix[i][j]);
            margin = margin.min(b + rep.tolerance - c);
            if b > 0.0 {
                ratio = ratio.max(c / b);
            }
        }
    }
    r.fitted_constant = ratio;
    r.margin = if m > 1 { margin } else { 0.0 };
    r.passed = rep.all_satisfied();
    r.details.push(("distinct_runs".into(), rep.distinct_runs() as f64));
    let mut out = RecipeOutput { reports: vec![r], ..Default::default() };
    let mut plot = Plot { name: "sola".into(), title: "sup norm".into(), curves: Vec::new(), envelopes: Vec::new() };
    for (i, (traj, &n)) in rep.trajectories.iter().zip(&rep.levels).enumerate() {
        if rep.trajectories[..i].iter().any(|s| Arc::ptr_eq(s, traj)) {
            continue;
        }
        out.runs.push((format!("level_{n}"), traj.clone()));
        plot.curves.push((format!("level {n}"), sup_curve(traj)));
    }
    out.plots.push(plot);
    Ok(out)
}

fn structure(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let s = verify_structure_in(&cfg.flux_model()?, cfg.verify.samples, cfg.seed, cfg.verify.range)?;
    let window = (-cfg.verify.range, cfg.verify.range);
    let row = |name: &str, ok: bool, constant: f64| {
        let mut r = BoundCheckReport::new(name, window);
        r.passed = ok;
        r.fitted_constant = constant;
        r.margin = if ok { 0.0 } else { -1.0 };
        r
    };
    let mut strong = row("strong_monotone", s.strong_monotone_ok, s.worst_gamma);
    if s.strong_monotone_ok {
        strong.margin = s.worst_gamma;
    }
    for (a, g) in s.axis_worst_gamma.iter().enumerate() {
        strong.details.push((format!("gamma_axis_{a}"), *g));
    }
    Ok(RecipeOutput {
        reports: vec![
            row("coercivity", s.coercivity_ok, 0.0),
            row("growth", s.growth_ok, 0.0),
            row("strict_monotone", s.strict_monotone_ok, 0.0),
            strong,
        ],
        ..Default::default()
    })
}

fn exponents(cfg: &ExperimentConfig) -> Result<RecipeOutput, CliError> {
    let ev = cfg.exponents()?;
    let adm = ev.admissibility();
    let mut a = BoundCheckReport::new("admissible", (0.0, 0.0));
    a.passed = adm.admissible;
    a.margin = if adm.admissible { 0.0 } else { -1.0 };
    a.fitted_constant = ev.p_bar;
    a.details.push(("lower_bound".into(), adm.lower_bound));
    a.details.push(("upper_bound".into(), adm.upper_bound));
    let mut reports = vec![a];

    let (h1, h0) = ev.algebraic_decay_exponents();
    let (e1, e0, _) = exact::difference_exponents(&ev.p)?;
    let p_bar = exact::harmonic_mean(&ev.p)?;
    let two = exact::rational(2.0)?;
    let mut rows = vec![("h1", h1, e1), ("h0", h0, e0)];
    match ev.regime() {
        Regime::Exponential => rows.push(("expo", ev.n_dims as f64 / 2.0, exact::rational(ev.n_dims as f64 / 2.0)?)),
        Regime::Universal => rows.push(("uni", 1.0 / (ev.p_bar - 2.0), (p_bar - two).recip())),
        Regime::Algebraic => {}
    }
    for (name, float, exact_value) in rows {
        let e = exact::to_f64(&exact_value);
        let err = (float - e).abs();
        let mut r = BoundCheckReport::new(&format!("{name}={}", exact::display(&exact_value)), (0.0, 0.0));
        r.fitted_exponent = Some(float);
        r.expected_exponent = Some(e);
        r.margin = 1e-12 * e.abs().max(1.0) - err;
        r.passed = r.margin >= 0.0;
        reports.push(r);
    }
    Ok(RecipeOutput { reports, ..Default::default() })
}
