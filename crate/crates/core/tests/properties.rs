//! Cross-module invariants checked on solver output.

use anisolab::parabolic::{forcing_gap_series, read_checkpoint, write_checkpoint};
use anisolab::verify::{check_decay_bounds, check_energy_dissipation, check_l1_contraction};
use anisolab::{solve_parabolic, ExponentVector, Field, FluxModel, Forcing, Grid, ProblemSpec};
use proptest::prelude::*;

fn problem(p: &[f64], u0: Vec<f64>, f: Vec<f64>, dt: f64) -> ProblemSpec {
    let grid = Grid::unit_square(6).unwrap();
    let model = FluxModel::orthotropic(ExponentVector::new(p.to_vec()).unwrap());
    ProblemSpec::new(model, Field::new(grid, u0).unwrap(), Forcing::Static(Field::new(grid, f).unwrap()), 5.0 * dt, dt)
        .unwrap()
        .with_newton(1e-13, 80)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contraction_check_passes_for_shared_forcing(
        u0 in proptest::collection::vec(-5.0f64..5.0, 36),
        v0 in proptest::collection::vec(-5.0f64..5.0, 36),
        f in proptest::collection::vec(-10.0f64..10.0, 36),
        p1 in 1.6f64..3.5,
        p2 in 1.6f64..3.5,
        dt in 1e-3f64..5e-2,
    ) {
        let pu = problem(&[p1, p2], u0, f, dt);
        let pv = pu.with_initial(Field::new(pu.grid, v0).unwrap()).unwrap();
        let (tu, tv) = (solve_parabolic(&pu).unwrap(), solve_parabolic(&pv).unwrap());
        let gap = forcing_gap_series(&pu, &pv).unwrap();
        let r = check_l1_contraction(&tu, &tv, &pu.initial, &pv.initial, &gap).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }

    #[test]
    fn truncated_energy_inequality_holds(
        u0 in proptest::collection::vec(-5.0f64..5.0, 36),
        v0 in proptest::collection::vec(-5.0f64..5.0, 36),
        p1 in 2.0f64..3.5,
        p2 in 2.0f64..3.5,
        k in 0.0f64..3.0,
    ) {
        let pu = problem(&[p1, p2], u0, vec![1.0; 36], 0.01);
        let pv = pu.with_initial(Field::new(pu.grid, v0).unwrap()).unwrap();
        let (tu, tv) = (solve_parabolic(&pu).unwrap(), solve_parabolic(&pv).unwrap());
        let r = check_energy_dissipation(&tu, &tv, pu.flux.gamma, k).unwrap();
        prop_assert!(r.passed, "{:?}", r);
    }
}

#[test]
fn reports_reproduce_from_serialized_runs() {
    let grid = Grid::unit_square(12).unwrap();
    let model = FluxModel::orthotropic(ExponentVector::new(vec![2.0, 2.0]).unwrap());
    let u0 = Field::spike(grid, grid.center_index(), 50.0).unwrap();
    let pu = ProblemSpec::new(model.clone(), u0, Forcing::zero(grid), 0.05, 1e-3).unwrap();
    let pv = pu.with_initial(Field::zeros(grid)).unwrap();
    let (tu, tv) = (solve_parabolic(&pu).unwrap(), solve_parabolic(&pv).unwrap());
    let dir = tempfile::tempdir().unwrap();
    write_checkpoint(&tu, &dir.path().join("u")).unwrap();
    write_checkpoint(&tv, &dir.path().join("v")).unwrap();
    let ru = read_checkpoint(&pu, &dir.path().join("u")).unwrap();
    let rv = read_checkpoint(&pv, &dir.path().join("v")).unwrap();
    let window = (2e-3, 5e-2);
    let a = check_decay_bounds(&tu, &tv, &model.exponents, 1.0, 1.0, window, 0.15).unwrap();
    let b = check_decay_bounds(&ru, &rv, &model.exponents, 1.0, 1.0, window, 0.15).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.passed, y.passed);
        assert!((x.fitted_constant - y.fitted_constant).abs() <= 1e-12 * x.fitted_constant.abs().max(1.0));
    }
}
