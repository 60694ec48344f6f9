//! Stationary problem `−Σᵢ ∂ᵢ aᵢ(x, ∇w) = f` by pseudo-time continuation
//! followed by Newton on the stationary residual.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exponents::ExponentVector;
use crate::flux::FluxModel;
use crate::grid::{truncate_tn, Field, Grid};
use crate::operator::{NewtonSolver, System};

pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;
const INITIAL_PSEUDO_DT: f64 = 1e-3;
const MAX_PSEUDO_DT: f64 = 1e12;
const MAX_PSEUDO_STEPS: usize = 400;
const NEWTON_ITERS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSpec {
    pub grid: Grid,
    pub exponents: ExponentVector,
    pub flux: FluxModel,
    pub forcing: Field,
    pub levels: Option<Vec<f64>>,
    /// Bound on `‖A(w) − f‖∞ / max(1, ‖f‖∞)`.
    pub solver_tol: f64,
}

impl EllipticSpec {
    pub fn new(flux: FluxModel, forcing: Field) -> Result<Self> {
        let spec = Self {
            grid: *forcing.grid(),
            exponents: flux.exponents.clone(),
            flux,
            forcing,
            levels: None,
            solver_tol: DEFAULT_SOLVER_TOL,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.solver_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_levels(mut self, levels: Vec<f64>) -> Result<Self> {
        self.levels = Some(levels);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.solver_tol > 0.0) {
            return Err(Error::InvalidArgument("solver_tol must be positive".into()));
        }
        if !self.forcing.grid().same_shape(&self.grid) {
            return Err(Error::DimensionMismatch("forcing is not on the problem grid".into()));
        }
        if self.exponents != self.flux.exponents || self.exponents.n_dims != self.grid.n_dims() {
            return Err(Error::DimensionMismatch("exponents, flux and grid disagree".into()));
        }
        if let Some(levels) = &self.levels {
            if levels.is_empty() || levels.iter().any(|&n| !(n > 0.0)) || levels.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidArgument("levels must be positive and strictly increasing".into()));
            }
        }
        Ok(())
    }
}

/// Per-level solutions of the truncated problems.
#[derive(Debug, Clone)]
pub struct LevelReport {
    pub levels: Vec<f64>,
    pub solutions: Vec<Field>,
    /// `‖w_n − w_m‖₁` for every pair of levels.
    pub l1_distances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub solution: Field,
    /// Final `‖A(w) − f‖∞`.
    pub residual: f64,
    pub pseudo_steps: usize,
    pub levels: Option<LevelReport>,
}

/// `‖A(w) − f‖∞`.
pub fn stationary_residual(flux: &FluxModel, w: &Field, forcing: &Field) -> Result<f64> {
    let solver = NewtonSolver::new(flux, *w.grid())?;
    let mut r = vec![0.0; w.len()];
    solver.residual(System::Stationary, forcing.values(), w.values(), &mut r);
    Ok(r.iter().fold(0.0, |m, v| m.max(v.abs())))
}

fn solve_single(flux: &FluxModel, forcing: &Field, tol: f64, guess: Option<&Field>) -> Result<(Field, f64, usize)> {
    let grid = *forcing.grid();
    let solver = NewtonSolver::new(flux, grid)?;
    let f = forcing.values();
    let threshold = tol * NewtonSolver::residual_scale(System::Stationary, f);
    let mut r = vec![0.0; grid.len()];
    let sup = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut u = guess.map(|g| g.values().to_vec()).unwrap_or_else(|| vec![0.0; grid.len()]);
    solver.residual(System::Stationary, f, &u, &mut r);
    let mut res = sup(&r);
    let mut dt = INITIAL_PSEUDO_DT;
    let mut steps = 0;
    while res > threshold {
        if steps >= MAX_PSEUDO_STEPS {
            return Err(Error::NonConvergence { residual: res });
        }
        steps += 1;
        // once the pseudo step is long, try to finish directly
        if dt >= 1e4 {
            if let Ok(out) = solver.solve(System::Stationary, f, &u, tol, NEWTON_ITERS) {
                u = out.solution;
                solver.residual(System::Stationary, f, &u, &mut r);
                res = sup(&r);
                break;
            }
        }
        let system = System::Step { dt, anchor: &u };
        match solver.solve(system, f, &u, tol * 1e-2, NEWTON_ITERS) {
            Ok(out) => {
                u = out.solution;
                solver.residual(System::Stationary, f, &u, &mut r);
                res = sup(&r);
                dt = (dt * 2.0).min(MAX_PSEUDO_DT);
            }
            Err(_) if dt > 1e-12 => dt *= 0.25,
            Err(e) => return Err(e),
        }
    }
    if res > threshold {
        return Err(Error::NonConvergence { residual: res });
    }
    Ok((Field::new(grid, u)?, res, steps))
}

/// Solve from the zero field; see [`solve_elliptic_from`].
pub fn solve_elliptic(spec: &EllipticSpec) -> Result<Field> {
    solve_elliptic_from(spec, None).map(|s| s.solution)
}

/// Solve from an optional initial guess. With levels, every truncated datum
/// `T_n(f)` is solved and the finest level's solution is returned.
pub fn solve_elliptic_from(spec: &EllipticSpec, guess: Option<&Field>) -> Result<EllipticSolution> {
    spec.validate()?;
    if let Some(g) = guess {
        if !g.grid().same_shape(&spec.grid) {
            return Err(Error::DimensionMismatch("initial guess is not on the problem grid".into()));
        }
    }
    match &spec.levels {
        None => {
            let (solution, residual, pseudo_steps) = solve_single(&spec.flux, &spec.forcing, spec.solver_tol, guess)?;
            Ok(EllipticSolution { solution, residual, pseudo_steps, levels: None })
        }
        Some(levels) => {
            let runs = levels
                .par_iter()
                .map(|&n| {
                    let f = truncate_tn(&spec.forcing, n)?;
                    solve_single(&spec.flux, &f, spec.solver_tol, guess)
                })
                .collect::<Result<Vec<_>>>()?;
            let solutions: Vec<Field> = runs.iter().map(|r| r.0.clone()).collect();
            let m = solutions.len();
            let mut d = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in i + 1..m {
                    d[i][j] = solutions[i].sub(&solutions[j])?.l1();
                    d[j][i] = d[i][j];
                }
            }
            let (solution, residual, pseudo_steps) = runs.last().cloned().unwrap();
            Ok(EllipticSolution {
                solution,
                residual,
                pseudo_steps,
                levels: Some(LevelReport { levels: levels.clone(), solutions, l1_distances: d }),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::step_implicit;
    use crate::test_oracles::dense_heat_matrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn model(p: &[f64]) -> FluxModel {
        FluxModel::orthotropic(ExponentVector::new(p.to_vec()).unwrap())
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let grid = Grid::unit_square(8).unwrap();
        let spec = EllipticSpec::new(model(&[3.0, 2.5]), Field::zeros(grid)).unwrap();
        assert_eq!(solve_elliptic(&spec).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn poisson_matches_dense_solve() {
        let grid = Grid::unit_square(16).unwrap();
        let f = Field::constant(grid, 1.0);
        let spec = EllipticSpec::new(model(&[2.0, 2.0]), f.clone()).unwrap().with_tol(1e-13).unwrap();
        let w = solve_elliptic(&spec).unwrap();
        let a = dense_heat_matrix(&grid, 0.0, 1.0);
        let b = nalgebra::DVector::from_column_slice(f.values());
        let x = a.lu().solve(&b).unwrap();
        let err = w.values().iter().zip(x.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn nonlinear_solution_is_stationary() {
        let grid = Grid::unit_square(10).unwrap();
        let flux = model(&[2.0, 3.0]);
        let f = Field::from_fn(grid, |x| 5.0 * (x[0] * 3.0).cos() + 2.0).unwrap();
        let tol = 1e-10;
        let spec = EllipticSpec::new(flux.clone(), f.clone()).unwrap().with_tol(tol).unwrap();
        let w = solve_elliptic(&spec).unwrap();
        assert!(stationary_residual(&flux, &w, &f).unwrap() <= tol * f.sup_norm().max(1.0));
        for dt in [1e-3, 1.0, 1e3] {
            let next = step_implicit(&w, dt, &f, &flux, 1e-13, 60).unwrap();
            assert!(next.sub(&w).unwrap().sup_norm() <= 10.0 * tol, "dt = {dt}");
        }
    }

    #[test]
    fn different_initializations_agree() {
        let grid = Grid::unit_square(10).unwrap();
        let f = Field::from_fn(grid, |x| 10.0 * x[0] - 3.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let random = Field::new(grid, (0..grid.len()).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
        for p in [[2.0, 2.0], [2.0, 3.0], [1.7, 2.2]] {
            let tol = 1e-10;
            let spec = EllipticSpec::new(model(&p), f.clone()).unwrap().with_tol(tol).unwrap();
            let a = solve_elliptic_from(&spec, None).unwrap().solution;
            let b = solve_elliptic_from(&spec, Some(&random)).unwrap().solution;
            assert!(a.sub(&b).unwrap().sup_norm() <= 10.0 * tol, "p = {p:?}");
        }
    }

    #[test]
    fn linear_case_scales() {
        let grid = Grid::unit_square(9).unwrap();
        let f = Field::from_fn(grid, |x| (x[0] * 7.0).sin() * x[1]).unwrap();
        let spec = EllipticSpec::new(model(&[2.0, 2.0]), f.clone()).unwrap().with_tol(1e-12).unwrap();
        let w = solve_elliptic(&spec).unwrap();
        let c = 13.0;
        let mut scaled = spec.clone();
        scaled.forcing = f.scaled(c);
        let wc = solve_elliptic(&scaled).unwrap();
        assert!(wc.sub(&w.scaled(c)).unwrap().sup_norm() < 1e-10 * c);
    }

    #[test]
    fn levels_report_finest_solution() {
        let grid = Grid::unit_square(8).unwrap();
        let f = Field::spike(grid, grid.center_index(), 50.0).unwrap();
        let spec = EllipticSpec::new(model(&[2.0, 2.0]), f.clone())
            .unwrap()
            .with_levels(vec![1.0, 10.0, 100.0])
            .unwrap();
        let sol = solve_elliptic_from(&spec, None).unwrap();
        let report = sol.levels.unwrap();
        assert_eq!(report.solutions.len(), 3);
        assert!(report.l1_distances[1][2] < report.l1_distances[0][2]);
        let plain = EllipticSpec::new(model(&[2.0, 2.0]), f).unwrap();
        assert!(sol.solution.sub(&solve_elliptic(&plain).unwrap()).unwrap().sup_norm() < 1e-9);
        assert!(EllipticSpec::new(model(&[2.0, 2.0]), Field::zeros(grid)).unwrap().with_levels(vec![2.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nonnegative_forcing_gives_nonnegative_solution(
            values in proptest::collection::vec(0.0f64..10.0, 64),
            p1 in 1.6f64..3.5,
            p2 in 1.6f64..3.5,
        ) {
            let grid = Grid::unit_square(8).unwrap();
            let f = Field::new(grid, values).unwrap();
            let spec = EllipticSpec::new(model(&[p1, p2]), f).unwrap();
            let w = solve_elliptic(&spec).unwrap();
            prop_assert!(w.values().iter().all(|&v| v >= -1e-9));
        }
    }
}
