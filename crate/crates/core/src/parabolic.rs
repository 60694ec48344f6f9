//! Backward-Euler integration of `u_t − Σᵢ ∂ᵢ aᵢ(x, ∇u) = f` with zero
//! Dirichlet data, and the truncated-data (SOLA) driver.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exponents::ExponentVector;
use crate::flux::FluxModel;
use crate::grid::{truncate_tn, Field, Grid};
use crate::io::{read_field, write_field};
use crate::operator::{NewtonSolver, System};
use crate::trajectory::Trajectory;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
pub const DEFAULT_NEWTON_MAX_ITERS: usize = 60;

/// Source term: fixed in time, or sampled at increasing instants and
/// interpolated linearly between them (held constant outside).
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Static(Field),
    Sampled { times: Vec<f64>, fields: Vec<Field> },
}

impl Forcing {
    pub fn zero(grid: Grid) -> Self {
        Forcing::Static(Field::zeros(grid))
    }

    pub fn sampled(times: Vec<f64>, fields: Vec<Field>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InvalidArgument("forcing samples and times must be non-empty and of equal length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("forcing sample times must increase".into()));
        }
        if fields.iter().any(|f| !f.grid().same_shape(fields[0].grid())) {
            return Err(Error::DimensionMismatch("forcing samples live on different grids".into()));
        }
        Ok(Forcing::Sampled { times, fields })
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self, Forcing::Static(_))
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Forcing::Static(f) => f.grid(),
            Forcing::Sampled { fields, .. } => fields[0].grid(),
        }
    }

    pub fn at(&self, t: f64) -> Cow<'_, Field> {
        match self {
            Forcing::Static(f) => Cow::Borrowed(f),
            Forcing::Sampled { times, fields } => {
                if t <= times[0] {
                    return Cow::Borrowed(&fields[0]);
                }
                for k in 1..times.len() {
                    if t <= times[k] {
                        let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                        let (a, b) = (fields[k - 1].values(), fields[k].values());
                        let v = a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect();
                        return Cow::Owned(Field::from_vec_unchecked(*fields[0].grid(), v));
                    }
                }
                Cow::Borrowed(fields.last().unwrap())
            }
        }
    }

    /// Largest sup norm over the samples.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Forcing::Static(f) => f.sup_norm(),
            Forcing::Sampled { fields, .. } => fields.iter().map(Field::sup_norm).fold(0.0, f64::max),
        }
    }

    pub fn map_fields(&self, g: impl Fn(&Field) -> Result<Field>) -> Result<Self> {
        Ok(match self {
            Forcing::Static(f) => Forcing::Static(g(f)?),
            Forcing::Sampled { times, fields } => Forcing::Sampled {
                times: times.clone(),
                fields: fields.iter().map(g).collect::<Result<_>>()?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub exponents: ExponentVector,
    pub flux: FluxModel,
    pub initial: Field,
    pub forcing: Forcing,
    pub t_final: f64,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub record_every: usize,
}

impl ProblemSpec {
    /// Grid and exponents are taken from `initial` and `flux`.
    pub fn new(flux: FluxModel, initial: Field, forcing: Forcing, t_final: f64, dt: f64) -> Result<Self> {
        let spec = Self {
            grid: *initial.grid(),
            exponents: flux.exponents.clone(),
            flux,
            initial,
            forcing,
            t_final,
            dt,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iters: DEFAULT_NEWTON_MAX_ITERS,
            record_every: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_newton(mut self, tol: f64, max_iters: usize) -> Result<Self> {
        self.newton_tol = tol;
        self.newton_max_iters = max_iters;
        self.validate()?;
        Ok(self)
    }

    pub fn with_record_every(mut self, record_every: usize) -> Result<Self> {
        self.record_every = record_every;
        self.validate()?;
        Ok(self)
    }

    pub fn with_initial(&self, initial: Field) -> Result<Self> {
        let mut s = self.clone();
        s.initial = initial;
        s.validate()?;
        Ok(s)
    }

    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        let mut s = self.clone();
        s.forcing = forcing;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt * (1.0 - 1e-12)) {
            return Err(Error::InvalidArgument(format!("t_final = {} must be at least dt", self.t_final)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidArgument("newton_tol must be positive".into()));
        }
        if self.newton_max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidArgument("newton_max_iters and record_every must be positive".into()));
        }
        if self.exponents != self.flux.exponents || self.exponents.n_dims != self.grid.n_dims() {
            return Err(Error::DimensionMismatch("exponents, flux and grid disagree".into()));
        }
        if !self.initial.grid().same_shape(&self.grid) {
            return Err(Error::DimensionMismatch("initial datum is not on the problem grid".into()));
        }
        if !self.forcing.grid().same_shape(&self.grid) {
            return Err(Error::DimensionMismatch("forcing is not on the problem grid".into()));
        }
        if let Some(h) = &self.flux.h_field {
            if !h.grid().same_shape(&self.grid) {
                return Err(Error::DimensionMismatch("flux coefficient is not on the problem grid".into()));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    /// End time of step `k` (`k = 0` is the initial instant).
    pub fn step_time(&self, k: usize) -> f64 {
        if k >= self.n_steps() {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }

    /// SHA-256 over a canonical byte encoding of every field of the problem.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |x: f64| h.update(x.to_le_bytes());
        put(self.grid.n_dims() as f64);
        self.grid.extents().iter().for_each(|&e| put(e));
        self.grid.resolution().iter().for_each(|&n| put(n as f64));
        self.exponents.p.iter().for_each(|&p| put(p));
        put(self.flux.kind as u8 as f64);
        put(self.flux.epsilon);
        if let Some(hf) = &self.flux.h_field {
            hf.values().iter().for_each(|&v| put(v));
        }
        self.initial.values().iter().for_each(|&v| put(v));
        match &self.forcing {
            Forcing::Static(f) => f.values().iter().for_each(|&v| put(v)),
            Forcing::Sampled { times, fields } => {
                for (t, f) in times.iter().zip(fields) {
                    put(*t);
                    f.values().iter().for_each(|&v| put(v));
                }
            }
        }
        put(self.t_final);
        put(self.dt);
        put(self.newton_tol);
        put(self.newton_max_iters as f64);
        put(self.record_every as f64);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One accepted implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Field,
    pub residual: f64,
    /// Absolute residual threshold the step was held to.
    pub threshold: f64,
    pub iterations: usize,
}

fn check_step_args(state: &Field, dt: f64, forcing: &Field, flux: &FluxModel) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if !state.grid().same_shape(forcing.grid()) {
        return Err(Error::DimensionMismatch("state and forcing grids differ".into()));
    }
    if flux.n_dims() != state.grid().n_dims() {
        return Err(Error::DimensionMismatch("flux and grid dimensions differ".into()));
    }
    Ok(())
}

fn step_with(
    solver: &NewtonSolver<'_>,
    state: &Field,
    dt: f64,
    forcing: &Field,
    tol: f64,
    max_iters: usize,
) -> Result<StepOutcome> {
    let system = System::Step { dt, anchor: state.values() };
    let threshold = tol * NewtonSolver::residual_scale(system, forcing.values());
    let out = solver.solve(system, forcing.values(), state.values(), tol, max_iters)?;
    Ok(StepOutcome {
        state: Field::new(*state.grid(), out.solution)?,
        residual: out.residual,
        threshold,
        iterations: out.iterations,
    })
}

/// Solve `u⁺ + dt·A(u⁺) = u + dt·f` by damped Newton from `u⁺ = u`.
///
/// `tol` bounds the residual sup norm relative to `max(1, ‖u + dt·f‖∞)`.
pub fn step_implicit_outcome(
    state: &Field,
    dt: f64,
    forcing: &Field,
    flux: &FluxModel,
    tol: f64,
    max_iters: usize,
) -> Result<StepOutcome> {
    check_step_args(state, dt, forcing, flux)?;
    let solver = NewtonSolver::new(flux, *state.grid())?;
    step_with(&solver, state, dt, forcing, tol, max_iters)
}

pub fn step_implicit(
    state: &Field,
    dt: f64,
    forcing: &Field,
    flux: &FluxModel,
    tol: f64,
    max_iters: usize,
) -> Result<Field> {
    step_implicit_outcome(state, dt, forcing, flux, tol, max_iters).map(|o| o.state)
}

/// Advance `traj` from its last recorded state (taken at step `from_step`)
/// through step `to_step`, which is always recorded.
fn advance(traj: &mut Trajectory, from_step: usize, to_step: usize) -> Result<()> {
    let problem = Arc::clone(&traj.problem);
    let solver = NewtonSolver::new(&problem.flux, problem.grid)?;
    let n = problem.n_steps();
    let mut u = traj.final_state().clone();
    let mut t = problem.step_time(from_step);
    let mut pending_bound = 0.0f64;
    for k in from_step + 1..=to_step.min(n) {
        let t_new = problem.step_time(k);
        let f = problem.forcing.at(t_new);
        let out = step_with(&solver, &u, t_new - t, &f, problem.newton_tol, problem.newton_max_iters)
            .map_err(|e| Error::SolveFailure { time: t_new, source: Box::new(e) })?;
        pending_bound = pending_bound.max(out.threshold);
        u = out.state;
        t = t_new;
        if k % problem.record_every == 0 || k == n || k == to_step {
            traj.push(t, k, u.clone(), pending_bound)?;
            pending_bound = 0.0;
        }
    }
    Ok(())
}

pub fn solve_parabolic(problem: &ProblemSpec) -> Result<Trajectory> {
    solve_parabolic_until(problem, problem.n_steps())
}

/// Run the first `steps` time steps only; the last one is always recorded.
pub fn solve_parabolic_until(problem: &ProblemSpec, steps: usize) -> Result<Trajectory> {
    problem.validate()?;
    let problem = Arc::new(problem.clone());
    let mut traj = Trajectory::start(Arc::clone(&problem))?;
    let steps = steps.min(problem.n_steps());
    advance(&mut traj, 0, steps)?;
    Ok(traj)
}

/// Continue a partial trajectory of `problem` up to `t_final`.
pub fn continue_parabolic(partial: Trajectory) -> Result<Trajectory> {
    let mut traj = partial;
    let from = *traj.steps.last().unwrap();
    let n = traj.problem.n_steps();
    advance(&mut traj, from, n)?;
    Ok(traj)
}

pub const CHECKPOINT_MAGIC: &str = "# anisolab checkpoint v1";

/// Write every recorded state plus a manifest to `dir`.
pub fn write_checkpoint(traj: &Trajectory, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    let _ = writeln!(manifest, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(manifest, "problem {}", traj.problem.digest());
    let _ = writeln!(manifest, "last_time {:e}", traj.final_time());
    let _ = writeln!(manifest, "step_count {}", traj.steps.last().unwrap());
    for (i, ((t, k), b)) in traj.times.iter().zip(&traj.steps).zip(&traj.residual_bounds).enumerate() {
        let name = format!("state_{i:06}.field");
        write_field(&dir.join(&name), &traj.states[i])?;
        let _ = writeln!(manifest, "sample {k} {t:e} {b:e} {name}");
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// Rebuild the trajectory stored in `dir`; the manifest must name `problem`.
pub fn read_checkpoint(problem: &ProblemSpec, dir: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(dir.join("manifest.txt"))?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(Error::Format("missing checkpoint header".into()));
    }
    let field = |line: Option<&str>, key: &str| -> Result<String> {
        line.and_then(|l| l.strip_prefix(key))
            .map(|v| v.trim().to_string())
            .ok_or_else(|| Error::Format(format!("missing `{key}` entry")))
    };
    let hash = field(lines.next(), "problem ")?;
    if hash != problem.digest() {
        return Err(Error::MismatchedRuns("checkpoint belongs to a different problem".into()));
    }
    let last_time: f64 = field(lines.next(), "last_time ")?
        .parse()
        .map_err(|_| Error::Format("bad last_time".into()))?;
    let step_count: usize = field(lines.next(), "step_count ")?
        .parse()
        .map_err(|_| Error::Format("bad step_count".into()))?;
    let problem = Arc::new(problem.clone());
    let mut traj: Option<Trajectory> = None;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "sample" {
            return Err(Error::Format(format!("bad sample line `{line}`")));
        }
        let bad = |_| Error::Format(format!("bad sample line `{line}`"));
        let k: usize = parts[1].parse().map_err(|_| Error::Format(format!("bad sample line `{line}`")))?;
        let t: f64 = parts[2].parse().map_err(bad)?;
        let b: f64 = parts[3].parse().map_err(bad)?;
        let state = read_field(&dir.join(parts[4]))?;
        match traj.as_mut() {
            None => {
                if k != 0 || t != 0.0 || state != problem.initial {
                    return Err(Error::Format("checkpoint does not start at the initial datum".into()));
                }
                traj = Some(Trajectory::start(Arc::clone(&problem))?);
            }
            Some(tr) => tr.push(t, k, state, b)?,
        }
    }
    let traj = traj.ok_or_else(|| Error::Format("checkpoint holds no samples".into()))?;
    if *traj.steps.last().unwrap() != step_count || traj.final_time() != last_time {
        return Err(Error::Format("manifest summary disagrees with samples".into()));
    }
    Ok(traj)
}

/// Load the checkpoint in `dir` and integrate the remaining steps.
pub fn resume_parabolic(problem: &ProblemSpec, dir: &Path) -> Result<Trajectory> {
    continue_parabolic(read_checkpoint(problem, dir)?)
}

/// `(t_k, ‖f(t_k) − g(t_k)‖₁)` at the end time of every step, the instants at
/// which the scheme samples its forcing. Both problems must share steps.
pub fn forcing_gap_series(a: &ProblemSpec, b: &ProblemSpec) -> Result<Vec<(f64, f64)>> {
    if !a.grid.same_shape(&b.grid) || a.n_steps() != b.n_steps() || a.t_final != b.t_final {
        return Err(Error::MismatchedRuns("problems do not share grid and time steps".into()));
    }
    (1..=a.n_steps())
        .map(|k| {
            let t = a.step_time(k);
            Ok((t, a.forcing.at(t).sub(&b.forcing.at(t))?.l1()))
        })
        .collect()
}

/// Right-endpoint sum `Σ_{t_k ≤ t} (t_k − t_{k−1})·gap_k` of a gap series.
pub fn accumulated_gap(series: &[(f64, f64)], t: f64) -> f64 {
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &(tk, g) in series {
        if tk > t * (1.0 + 1e-12) {
            break;
        }
        acc += (tk - prev) * g;
        prev = tk;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct SolaReport {
    pub levels: Vec<f64>,
    /// One trajectory per level; levels whose truncation leaves the data
    /// unchanged share a single run.
    pub trajectories: Vec<Arc<Trajectory>>,
    pub cauchy_matrix: Vec<Vec<f64>>,
    pub data_bound_matrix: Vec<Vec<f64>>,
    pub satisfied: Vec<Vec<bool>>,
    pub tolerance: f64,
}

impl SolaReport {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().flatten().all(|&s| s)
    }

    pub fn distinct_runs(&self) -> usize {
        let mut n = 0;
        for (i, t) in self.trajectories.iter().enumerate() {
            if !self.trajectories[..i].iter().any(|s| Arc::ptr_eq(s, t)) {
                n += 1;
            }
        }
        n
    }
}

fn truncated_problem(problem: &ProblemSpec, level: f64) -> Result<ProblemSpec> {
    let mut p = problem.clone();
    p.initial = truncate_tn(&problem.initial, level)?;
    p.forcing = problem.forcing.map_fields(|f| truncate_tn(f, level))?;
    Ok(p)
}

/// Solve with data `T_n(u₀)`, `T_n(f)` for every level `n` and compare the
/// runs against the data distance.
pub fn sola_solve(problem: &ProblemSpec, levels: &[f64], tolerance: f64) -> Result<SolaReport> {
    problem.validate()?;
    if levels.is_empty() || levels.iter().any(|&n| !(n > 0.0)) || levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("levels must be positive and strictly increasing".into()));
    }
    let data_sup = problem.initial.sup_norm().max(problem.forcing.sup_norm());
    // every level at or above the data bound truncates nothing
    let effective: Vec<f64> = levels.iter().map(|&n| n.min(data_sup.max(levels[0]))).collect();
    let mut unique: Vec<f64> = Vec::new();
    for &e in &effective {
        if !unique.contains(&e) {
            unique.push(e);
        }
    }
    let problems = unique
        .iter()
        .map(|&n| truncated_problem(problem, n))
        .collect::<Result<Vec<_>>>()?;
    let runs = problems
        .par_iter()
        .map(|p| solve_parabolic(p).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let trajectories: Vec<Arc<Trajectory>> = effective
        .iter()
        .map(|e| Arc::clone(&runs[unique.iter().position(|u| u == e).unwrap()]))
        .collect();

    let m = levels.len();
    let mut cauchy = vec![vec![0.0; m]; m];
    let mut bound = vec![vec![0.0; m]; m];
    let mut satisfied = vec![vec![true; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (&trajectories[i], &trajectories[j]);
            let mut c = 0.0f64;
            if !Arc::ptr_eq(a, b) {
                for (ua, ub) in a.states.iter().zip(&b.states) {
                    c = c.max(ua.sub(ub)?.l1());
                }
            }
            let gap = forcing_gap_series(&a.problem, &b.problem)?;
            let d = a.problem.initial.sub(&b.problem.initial)?.l1() + accumulated_gap(&gap, problem.t_final);
            cauchy[i][j] = c;
            cauchy[j][i] = c;
            bound[i][j] = d;
            bound[j][i] = d;
            satisfied[i][j] = c <= d + tolerance;
            satisfied[j][i] = satisfied[i][j];
        }
    }
    Ok(SolaReport {
        levels: levels.to_vec(),
        trajectories,
        cauchy_matrix: cauchy,
        data_bound_matrix: bound,
        satisfied,
        tolerance,
    })
}
