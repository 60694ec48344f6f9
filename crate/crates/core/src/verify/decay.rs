use crate::error::{Error, Result};
use crate::exponents::{ExponentVector, Regime};
use crate::grid::anisotropic_energy;
use crate::trajectory::Trajectory;

use super::fit::{fit_decay_rate, fit_exponential_rate, fit_power_plus_constant};
use super::{ensure_paired, ensure_same_forcing, sup_distance_series, BoundCheckReport, Envelope};

/// Accepted deviation of a fitted exponent from its closed form on PDE runs.
pub const DEFAULT_EXPONENT_TOL: f64 = 0.15;

const REGULARIZING_RESIDUAL_TOL: f64 = 0.10;

fn in_window(t: f64, w: (f64, f64)) -> bool {
    t >= w.0 * (1.0 - 1e-12) && t <= w.1 * (1.0 + 1e-12)
}

/// Sup-norm decay of `u − v` against every bound that applies to the
/// exponent regime, plus the matching gradient bounds when `gamma > 0`.
///
/// Exponents are fitted on `window`; bound constants are the least ones
/// valid on the window.
pub fn check_decay_bounds(
    u: &Trajectory,
    v: &Trajectory,
    exponents: &ExponentVector,
    gamma: f64,
    domain_measure: f64,
    window: (f64, f64),
    exponent_tol: f64,
) -> Result<Vec<BoundCheckReport>> {
    ensure_paired(u, v)?;
    ensure_same_forcing(u, v)?;
    if !(window.0 > 0.0 && window.0 < window.1 && window.1 <= u.final_time() * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("degenerate window [{}, {}]", window.0, window.1)));
    }
    let n = exponents.n_dims as f64;
    let (h1, h0) = exponents.algebraic_decay_exponents();
    let regime = exponents.regime();
    let second = match regime {
        Regime::Algebraic => None,
        Regime::Exponential => Some(("expo", n / 2.0)),
        Regime::Universal => Some(("uni", 1.0 / (exponents.p_bar - 2.0))),
    };
    let grad_names = |first: &str| format!("grad{first}");

    let dist = sup_distance_series(u, v)?;
    let data = u.states[0].sub(&v.states[0])?.l1();
    let samples: Vec<(f64, f64)> = dist.iter().copied().filter(|&(t, _)| in_window(t, window)).collect();

    if dist.iter().all(|&(_, d)| d == 0.0) {
        let mut out = vec![BoundCheckReport::trivially_passed("uno", window, Some(h1))];
        if let Some((name, h)) = second {
            out.push(BoundCheckReport::trivially_passed(name, window, Some(h)));
        }
        if gamma > 0.0 {
            out.push(BoundCheckReport::trivially_passed("graduno", window, Some(h1)));
            if let Some((name, h)) = second {
                out.push(BoundCheckReport::trivially_passed(&grad_names(name), window, Some(h)));
            }
        }
        return Ok(out);
    }

    let mut reports = Vec::new();

    // algebraic L¹ → L^∞ decay
    let fit = fit_decay_rate(&samples, window)?;
    let mut uno = BoundCheckReport::new("uno", window);
    let data_factor = data.powf(h0);
    let c = samples.iter().map(|&(t, d)| d * t.powf(h1)).fold(0.0, f64::max);
    uno.fitted_constant = c / data_factor;
    uno.fitted_exponent = Some(fit.exponent);
    uno.expected_exponent = Some(h1);
    uno.margin = exponent_tol - (fit.exponent - h1).abs();
    uno.passed = uno.margin >= 0.0;
    uno.envelope = Some(Envelope { c, h: h1, sigma: 0.0 });
    uno.details.push(("fit_residual".into(), fit.residual));
    uno.details.push(("data_l1".into(), data));
    reports.push(uno);

    match second {
        Some(("expo", h)) => {
            let scaled: Vec<(f64, f64)> = samples.iter().map(|&(t, d)| (t, d * t.powf(h))).collect();
            let (_, sigma, residual) = fit_exponential_rate(&scaled, window)?;
            let c = samples.iter().map(|&(t, d)| d / Envelope::shape(h, sigma, t)).fold(0.0, f64::max);
            let mut r = BoundCheckReport::new("expo", window);
            r.fitted_constant = c / data;
            r.expected_exponent = Some(h);
            r.margin = sigma;
            r.passed = sigma > 0.0;
            r.envelope = Some(Envelope { c, h, sigma });
            r.details.push(("rate".into(), sigma));
            r.details.push(("fit_residual".into(), residual));
            r.warnings.push("rate is fitted; its closed form depends on constants not reproduced here".into());
            reports.push(r);
        }
        Some((name, h)) => {
            let fit = fit_decay_rate(&samples, window)?;
            let c = samples.iter().map(|&(t, d)| d * t.powf(h)).fold(0.0, f64::max);
            let mut r = BoundCheckReport::new(name, window);
            r.fitted_constant = c;
            r.fitted_exponent = Some(fit.exponent);
            r.expected_exponent = Some(h);
            r.margin = exponent_tol - (fit.exponent - h).abs();
            r.passed = r.margin >= 0.0;
            r.envelope = Some(Envelope { c, h, sigma: 0.0 });
            r.details.push(("fit_residual".into(), fit.residual));
            reports.push(r);
        }
        None => {}
    }

    if gamma > 0.0 {
        let c0 = domain_measure / (2.0 * gamma);
        // right-endpoint tail sums of the anisotropic energy of u − v
        let mut energy = vec![0.0; u.len()];
        for i in 1..u.len() {
            energy[i] = anisotropic_energy(&u.states[i].sub(&v.states[i])?, exponents)?;
        }
        let mut tail = vec![0.0; u.len()];
        for i in (0..u.len() - 1).rev() {
            tail[i] = tail[i + 1] + (u.times[i + 1] - u.times[i]) * energy[i + 1];
        }
        let sup_reports: Vec<BoundCheckReport> = reports.clone();
        for sup_report in &sup_reports {
            let env = sup_report.envelope.unwrap();
            let mut least = 0.0f64;
            for (i, &t) in u.times.iter().enumerate() {
                if in_window(t, window) {
                    least = least.max(tail[i] / env.at(t).powi(2));
                }
            }
            let mut r = BoundCheckReport::new(&grad_names(&sup_report.name), window);
            r.fitted_constant = least;
            r.expected_exponent = sup_report.expected_exponent.map(|h| 2.0 * h);
            r.margin = c0 - least;
            r.passed = least <= c0 * (1.0 + 1e-9);
            r.details.push(("c0".into(), c0));
            reports.push(r);
        }
    } else {
        reports[0].warnings.push("gradient bounds skipped: no strong monotonicity constant".into());
    }
    Ok(reports)
}

/// Shape of `τ ↦ sup_{t≥τ} ‖u(t)‖∞` over `τ ∈ [t0, T/2]`: it must be finite
/// and follow `C·τ^{−h} + c` with `h` the algebraic decay exponent.
pub fn check_regularizing(
    traj: &Trajectory,
    f_lm_norm: f64,
    m: f64,
    exponents: &ExponentVector,
    t0: f64,
) -> Result<BoundCheckReport> {
    let t_end = traj.final_time();
    if !(t0 > 0.0 && t0 < t_end) {
        return Err(Error::InsufficientData(format!("no samples past t0 = {t0}")));
    }
    let (h1, _) = exponents.algebraic_decay_exponents();
    // running sup from the end
    let mut tail_sup = vec![0.0; traj.len()];
    let mut acc = 0.0f64;
    for i in (0..traj.len()).rev() {
        acc = acc.max(traj.norm_log[i].sup);
        tail_sup[i] = acc;
    }
    let tau_max = (0.5 * t_end).max(t0);
    let series: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&tail_sup)
        .filter(|(&t, _)| t >= t0 * (1.0 - 1e-12) && t <= tau_max)
        .map(|(&t, &s)| (t, s))
        .collect();
    let first = traj.index_near(t0);
    let sup_after = tail_sup[first.min(traj.len() - 1)];

    let mut r = BoundCheckReport::new("defC3", (t0, tau_max));
    r.expected_exponent = Some(h1);
    r.fitted_exponent = Some(h1);
    if m <= 1.0 + exponents.n_dims as f64 / exponents.p_bar {
        r.warnings.push(format!("m = {m} does not exceed 1 + N/p̄"));
    }
    r.details.push(("f_lm_norm".into(), f_lm_norm));
    r.details.push(("sup_after_t0".into(), sup_after));
    if !sup_after.is_finite() {
        r.margin = f64::NEG_INFINITY;
        return Ok(r);
    }
    if series.iter().all(|&(_, s)| s == 0.0) {
        r.passed = true;
        r.details.push(("trivial".into(), 1.0));
        return Ok(r);
    }
    let (c, offset, residual) = fit_power_plus_constant(&series, h1)?;
    r.fitted_constant = c;
    r.margin = REGULARIZING_RESIDUAL_TOL - residual;
    r.passed = residual < REGULARIZING_RESIDUAL_TOL;
    r.details.push(("offset".into(), offset));
    r.details.push(("fit_residual".into(), residual));
    Ok(r)
}

/// `sup_{t≥t0} ‖u(t)‖∞` across runs whose data differ only in size must
/// agree within `rel_tol` (spread measured as `max/min − 1`).
pub fn check_data_independence(name: &str, trajs: &[&Trajectory], t0: f64, rel_tol: f64) -> Result<BoundCheckReport> {
    if trajs.len() < 2 {
        return Err(Error::InsufficientData("need at least two runs".into()));
    }
    let mut values = Vec::new();
    for tr in trajs {
        if tr.final_time() < t0 {
            return Err(Error::InsufficientData(format!("run ends before t0 = {t0}")));
        }
        let s = tr
            .times
            .iter()
            .zip(&tr.norm_log)
            .filter(|(&t, _)| t >= t0 * (1.0 - 1e-12))
            .map(|(_, n)| n.sup)
            .fold(0.0, f64::max);
        values.push(s);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let spread = if hi == 0.0 { 0.0 } else { hi / lo - 1.0 };
    let mut r = BoundCheckReport::new(name, (t0, trajs[0].final_time()));
    r.fitted_constant = hi;
    r.margin = rel_tol - spread;
    r.passed = spread <= rel_tol;
    r.details.push(("spread".into(), spread));
    for (i, v) in values.iter().enumerate() {
        r.details.push((format!("sup_run_{i}"), *v));
    }
    Ok(r)
}
