//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 3 7`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use anisolab::exponents::check_admissible;
use anisolab::parabolic::forcing_gap_series;
use anisolab::verify::{
    check_data_independence, check_decay_bounds, check_energy_dissipation, check_l1_contraction,
    check_regularizing, check_steady_convergence, l1_distance_series, max_increase, random_field,
};
use anisolab::{
    sola_solve, solve_elliptic, solve_parabolic, step_implicit, verify_structure, EllipticSpec, ExponentVector, Field,
    FluxModel, Forcing, Grid, ProblemSpec, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

fn heat_flux(n_dims: usize) -> FluxModel {
    FluxModel::orthotropic(ExponentVector::isotropic(2.0, n_dims).unwrap())
}

fn flux(p: &[f64]) -> FluxModel {
    FluxModel::orthotropic(ExponentVector::new(p.to_vec()).unwrap())
}

fn bump(grid: Grid) -> Field {
    Field::from_fn(grid, |x| x.iter().map(|y| (std::f64::consts::PI * y).sin()).product()).unwrap()
}

fn c1_exponent_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut tuples, mut worst) = (0, 0.0f64);
    while tuples < 100 {
        let n = rng.gen_range(2..=3usize);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(1.5..4.0)).collect();
        if !check_admissible(&p, n).unwrap().admissible {
            continue;
        }
        let ev = ExponentVector::new(p).unwrap();
        let prof = ev.difference_profile(1.0, 1.0, 1.0).unwrap();
        let (nf, pb) = (n as f64, ev.p_bar);
        let denom = nf * (pb - 2.0) + pb;
        worst = worst.max(((prof.h1 - nf / denom) / (nf / denom)).abs());
        worst = worst.max(((prof.h0 - pb / denom) / (pb / denom)).abs());
        tuples += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("100 admissible tuples, worst relative error {worst:.1e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

struct ContractionCase {
    label: &'static str,
    u: Trajectory,
    v: Trajectory,
    gamma: f64,
    elapsed: Duration,
}

fn contraction_cases() -> &'static Vec<ContractionCase> {
    static CASES: OnceLock<Vec<ContractionCase>> = OnceLock::new();
    CASES.get_or_init(|| {
        let setups: [(&'static str, Grid, FluxModel); 2] = [
            ("p=(2,2) 64²", Grid::unit_square(64).unwrap(), heat_flux(2)),
            ("p=(2,2,2.5) 16³", Grid::unit_cube(16).unwrap(), flux(&[2.0, 2.0, 2.5])),
        ];
        setups
            .into_iter()
            .map(|(label, grid, model)| {
                let start = Instant::now();
                let mut rng = ChaCha8Rng::seed_from_u64(5);
                let u0 = bump(grid).scaled(2.0);
                let v0 = random_field(grid, &mut rng).scaled(3.0);
                let f = Forcing::Static(Field::constant(grid, 1.0));
                let pu = ProblemSpec::new(model.clone(), u0, f, 0.5, 1e-3).unwrap();
                let pv = pu.with_initial(v0).unwrap();
                let u = solve_parabolic(&pu).unwrap();
                let v = solve_parabolic(&pv).unwrap();
                let gamma = verify_structure(&model, 100_000, 17).unwrap().worst_gamma;
                ContractionCase { label, u, v, gamma, elapsed: start.elapsed() }
            })
            .collect()
    })
}

fn c2_l1_contraction() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for case in contraction_cases() {
        let series = l1_distance_series(&case.u, &case.v).unwrap();
        let growth = max_increase(&series);
        let gap = forcing_gap_series(&case.u.problem, &case.v.problem).unwrap();
        let report =
            check_l1_contraction(&case.u, &case.v, &case.u.problem.initial, &case.v.problem.initial, &gap).unwrap();
        let good = growth <= 1e-8 && report.passed && case.elapsed < Duration::from_secs(120);
        ok &= good;
        parts.push(format!(
            "{}: max increase {growth:.1e}, ‖u−v‖₁ {:.3e} → {:.3e}, {:.1} s",
            case.label,
            series[0].1,
            series.last().unwrap().1,
            case.elapsed.as_secs_f64()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c3_heat_decay() -> Outcome {
    let start = Instant::now();
    let grid = Grid::unit_square(63).unwrap();
    let model = heat_flux(2);
    let u0 = Field::spike(grid, grid.center_index(), 1e3).unwrap();
    let pu = ProblemSpec::new(model.clone(), u0, Forcing::zero(grid), 0.05, 1e-4).unwrap();
    let pv = pu.with_initial(Field::zeros(grid)).unwrap();
    let (u, v) = (solve_parabolic(&pu).unwrap(), solve_parabolic(&pv).unwrap());
    let reports = check_decay_bounds(&u, &v, &model.exponents, model.gamma, grid.measure(), (1e-3, 5e-2), 0.15).unwrap();
    let uno = reports.iter().find(|r| r.name == "uno").unwrap();
    let h = uno.fitted_exponent.unwrap();
    let elapsed = start.elapsed();
    outcome(
        (h - 1.0).abs() <= 0.15 && uno.passed && elapsed < Duration::from_secs(120),
        format!(
            "fitted exponent {h:.4} (expected 1), fit residual {:.3}, {:.1} s",
            uno.detail("fit_residual").unwrap(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c4_universal_bound() -> Outcome {
    let start = Instant::now();
    let grid = Grid::unit_cube(16).unwrap();
    let model = flux(&[2.5, 2.5, 2.5]);
    let base = bump(grid).scaled(100.0);
    let runs: Vec<Trajectory> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&s| {
            let p = ProblemSpec::new(model.clone(), base.scaled(s), Forcing::zero(grid), 0.1, 1e-3).unwrap();
            solve_parabolic(&p).unwrap()
        })
        .collect();
    let refs: Vec<&Trajectory> = runs.iter().collect();
    let report = check_data_independence("uni", &refs, 0.1, 0.2).unwrap();
    let sups: Vec<String> = runs.iter().map(|r| format!("{:.4e}", r.norm_log.last().unwrap().sup)).collect();
    let elapsed = start.elapsed();
    outcome(
        report.passed && elapsed < Duration::from_secs(600),
        format!(
            "‖u(0.1)‖∞ = [{}] for data ×1/×10/×100 of a height-100 mode, spread {:.1}%, {:.1} s",
            sups.join(", "),
            100.0 * report.detail("spread").unwrap(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_energy() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for case in contraction_cases() {
        let k_half = 0.5 * case.u.problem.initial.sub(&case.v.problem.initial).unwrap().sup_norm();
        for k in [0.0, k_half] {
            let r = check_energy_dissipation(&case.u, &case.v, case.gamma, k).unwrap();
            let rel = r.detail("worst_relative_lhs").unwrap_or(f64::NEG_INFINITY);
            let good = r.passed && rel <= 1e-8;
            ok &= good;
            parts.push(format!("{} k={k:.3}: γ={:.4}, worst relative lhs {rel:.2e}", case.label, case.gamma));
        }
    }
    outcome(ok, parts.join("; "))
}

fn c6_sola() -> Outcome {
    let start = Instant::now();
    let grid = Grid::unit_square(128).unwrap();
    let model = flux(&[2.0, 3.0]);
    let u0 = Field::spike(grid, grid.center_index(), 1e4).unwrap();
    let p = ProblemSpec::new(model, u0, Forcing::zero(grid), 0.05, 1e-3)
        .unwrap()
        .with_newton(1e-13, 60)
        .unwrap();
    let levels = [1.0, 2.0, 4.0, 8.0, 16.0];
    let r = sola_solve(&p, &levels, 1e-8).unwrap();
    let m = levels.len();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..m {
        for j in (0..m).filter(|&j| j != i) {
            worst = worst.max(r.cauchy_matrix[i][j] - r.data_bound_matrix[i][j]);
        }
    }
    let bound_decreasing = (0..m - 2).all(|i| r.data_bound_matrix[i][m - 1] > r.data_bound_matrix[i + 1][m - 1]);
    let finest = r.cauchy_matrix[m - 2][m - 1];
    let elapsed = start.elapsed();
    outcome(
        r.all_satisfied() && worst <= 1e-8 && finest < 1e-3 && bound_decreasing && elapsed < Duration::from_secs(300),
        format!(
            "max(cauchy − bound) {worst:.2e}, finest-pair distance {finest:.3e}, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_steady() -> Outcome {
    let start = Instant::now();
    let grid = Grid::unit_square(64).unwrap();
    let model = heat_flux(2);
    let f = Field::constant(grid, 1.0);
    let w = solve_elliptic(&EllipticSpec::new(model.clone(), f.clone()).unwrap().with_tol(1e-12).unwrap()).unwrap();
    let starts = [
        Field::zeros(grid),
        Field::from_fn(grid, |x| 3.0 * (2.0 * std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin())
            .unwrap(),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for u0 in starts {
        let p = ProblemSpec::new(model.clone(), u0, Forcing::Static(f.clone()), 2.0, 1e-2).unwrap();
        let traj = solve_parabolic(&p).unwrap();
        let r = check_steady_convergence(&traj, &w, 0.1, 1e-4).unwrap();
        ok &= r.passed;
        parts.push(format!("‖u(2)−w‖∞ {:.2e}", r.detail("final_distance").unwrap()));
    }
    let elapsed = start.elapsed();
    outcome(
        ok && elapsed < Duration::from_secs(120),
        format!("{}, {:.1} s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn c8_regularizing() -> Outcome {
    let start = Instant::now();
    let heights = [1e2, 1e3, 1e4];
    let mut ok = true;
    let mut parts = Vec::new();

    let grid = Grid::unit_square(32).unwrap();
    let model = heat_flux(2);
    let f = Field::constant(grid, 1.0);
    let m = 3.0;
    let f_lm = f.norm(m).unwrap();
    let mut residuals = Vec::new();
    for &h in &heights {
        let u0 = Field::spike(grid, grid.center_index(), h).unwrap();
        let p = ProblemSpec::new(model.clone(), u0, Forcing::Static(f.clone()), 0.1, 1e-3).unwrap();
        let traj = solve_parabolic(&p).unwrap();
        let r = check_regularizing(&traj, f_lm, m, &model.exponents, 0.01).unwrap();
        ok &= r.passed;
        residuals.push(format!("{:.3}", r.detail("fit_residual").unwrap_or(f64::NAN)));
    }
    parts.push(format!("heat C·τ⁻¹+c residuals [{}]", residuals.join(", ")));

    let grid = Grid::unit_cube(16).unwrap();
    let model = flux(&[2.5, 2.5, 2.5]);
    let f = Field::constant(grid, 1.0);
    let runs: Vec<Trajectory> = heights
        .iter()
        .map(|&h| {
            let u0 = Field::spike(grid, grid.center_index(), h).unwrap();
            let p = ProblemSpec::new(model.clone(), u0, Forcing::Static(f.clone()), 0.5, 2e-3).unwrap();
            solve_parabolic(&p).unwrap()
        })
        .collect();
    let refs: Vec<&Trajectory> = runs.iter().collect();
    let r = check_data_independence("defC4", &refs, 0.1, 0.2).unwrap();
    ok &= r.passed;
    let sups: Vec<String> = (0..3).map(|i| format!("{:.4e}", r.detail(&format!("sup_run_{i}")).unwrap())).collect();
    parts.push(format!(
        "p̄=2.5 16³ spike masses [{}]: sup_(t≥0.1) [{}], spread {:.1}% (limit 20%)",
        heights.iter().map(|h| format!("{:.3}", h * grid.cell_volume())).collect::<Vec<_>>().join(", "),
        sups.join(", "),
        100.0 * r.detail("spread").unwrap()
    ));
    parts.push(format!("{:.1} s", start.elapsed().as_secs_f64()));
    outcome(ok, parts.join("; "))
}

fn c9_oracles() -> Outcome {
    let grid = Grid::unit_square(16).unwrap();
    let model = heat_flux(2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut linear = 0.0f64;
    for _ in 0..5 {
        let u0 = random_field(grid, &mut rng);
        let f = random_field(grid, &mut rng).scaled(10.0);
        let dt = rng.gen_range(1e-4..1e-1);
        let got = step_implicit(&u0, dt, &f, &model, 1e-14, 40).unwrap();
        linear = linear.max(common::max_abs_diff(got.values(), &common::dense_heat_step(&u0, &f, dt)));
    }

    let single = Grid::single_node(&[1.0, 1.0]).unwrap();
    let quartic = flux(&[4.0, 4.0]);
    let h = single.spacing(0);
    let mut scalar = 0.0f64;
    for _ in 0..20 {
        let (anchor, f, dt) = (rng.gen_range(-3.0..3.0), rng.gen_range(-10.0..10.0), rng.gen_range(1e-3..1.0));
        // a + dt·(4 edges)·a³/h⁴ = anchor + dt·f
        let g = |a: f64| a + dt * 4.0 * a.powi(3) / h.powi(4) - anchor - dt * f;
        let exact = common::bisect(g, -20.0, 20.0);
        let got = step_implicit(
            &Field::new(single, vec![anchor]).unwrap(),
            dt,
            &Field::new(single, vec![f]).unwrap(),
            &quartic,
            1e-15,
            80,
        )
        .unwrap();
        scalar = scalar.max((got.values()[0] - exact).abs());
    }

    let structure = verify_structure(&flux(&[2.0, 3.0]), 100_000, 29).unwrap();
    let bound = 2f64.powf(2.0 - 3.0) - 1e-3;
    outcome(
        linear <= 1e-10 && scalar <= 1e-10 && structure.worst_gamma >= bound,
        format!(
            "linear step error {linear:.1e}, single-node error {scalar:.1e}, worst γ {:.5} (≥ {bound})",
            structure.worst_gamma
        ),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("1", "exponent algebra", c1_exponent_algebra),
        ("2", "L¹ contraction", c2_l1_contraction),
        ("3", "heat decay rate", c3_heat_decay),
        ("4", "universal bound", c4_universal_bound),
        ("5", "energy dissipation", c5_energy),
        ("6", "SOLA Cauchy", c6_sola),
        ("7", "steady convergence", c7_steady),
        ("8", "regularizing effect", c8_regularizing),
        ("9", "oracle equivalence", c9_oracles),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.passed {
            failures += 1;
        }
        println!("{} criterion {id} ({name}): {}", if result.passed { "PASS" } else { "FAIL" }, result.summary);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
