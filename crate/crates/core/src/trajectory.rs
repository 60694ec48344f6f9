//! Time-indexed sequences of fields with their recorded norms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{anisotropic_energy, Field};
use crate::parabolic::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub l1: f64,
    pub l2: f64,
    pub sup: f64,
    pub energy: f64,
}

impl NormRecord {
    pub fn of(field: &Field, problem: &ProblemSpec) -> Result<Self> {
        Ok(Self {
            l1: field.l1(),
            l2: field.l2(),
            sup: field.sup_norm(),
            energy: anisotropic_energy(field, &problem.exponents)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub problem: Arc<ProblemSpec>,
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    /// Time-step index of each recorded state.
    pub steps: Vec<usize>,
    pub norm_log: Vec<NormRecord>,
    /// Largest absolute Newton residual threshold over the steps that led to
    /// each recorded state (zero for the initial state).
    pub residual_bounds: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn start(problem: Arc<ProblemSpec>) -> Result<Self> {
        let initial = problem.initial.clone();
        let rec = NormRecord::of(&initial, &problem)?;
        Ok(Self {
            problem,
            times: vec![0.0],
            states: vec![initial],
            steps: vec![0],
            norm_log: vec![rec],
            residual_bounds: vec![0.0],
        })
    }

    pub(crate) fn push(&mut self, time: f64, step: usize, state: Field, residual_bound: f64) -> Result<()> {
        let rec = NormRecord::of(&state, &self.problem)?;
        self.times.push(time);
        self.steps.push(step);
        self.states.push(state);
        self.norm_log.push(rec);
        self.residual_bounds.push(residual_bound);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Whether every time step was recorded.
    pub fn is_dense(&self) -> bool {
        self.steps.windows(2).all(|w| w[1] == w[0] + 1)
    }

    /// Recorded index closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &ti) in self.times.iter().enumerate() {
            if (ti - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Check the structural invariants (times start at zero and increase,
    /// norm log matches the states).
    pub fn validate(&self) -> Result<()> {
        if self.times.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("trajectory must start at t = 0".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must increase strictly".into()));
        }
        for (state, rec) in self.states.iter().zip(&self.norm_log) {
            let fresh = NormRecord::of(state, &self.problem)?;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
            if !(close(fresh.l1, rec.l1) && close(fresh.l2, rec.l2) && close(fresh.sup, rec.sup) && close(fresh.energy, rec.energy)) {
                return Err(Error::InvalidArgument("norm log does not match states".into()));
            }
        }
        Ok(())
    }

    /// `(∫_{t0}^{t1} ‖u(τ)‖_{Lˢ}^r dτ)^{1/r}`; see [`lrs_norm`].
    pub fn lrs_norm(&self, r: f64, s: f64, t0: f64, t1: f64) -> Result<f64> {
        lrs_norm(self, r, s, t0, t1)
    }
}

/// Linear interpolation of a sampled series at `t` (clamped at the ends).
fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    for k in 1..times.len() {
        if t <= times[k] {
            let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
            return values[k - 1] + w * (values[k] - values[k - 1]);
        }
    }
    *values.last().unwrap()
}

/// `L^r(t0, t1)` norm of a sampled nonnegative series: trapezoidal rule on the
/// sample instants inside the window (the integrand is interpolated linearly
/// at the window ends), and the maximum over those samples for `r = ∞`.
pub fn lr_of_series(times: &[f64], values: &[f64], r: f64, t0: f64, t1: f64) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return Err(Error::InsufficientData("empty or mismatched series".into()));
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("time exponent {r} < 1")));
    }
    let last = *times.last().unwrap();
    if !(t0 >= times[0] && t0 < t1 && t1 <= last * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("empty time window [{t0}, {t1}]")));
    }
    let t1 = t1.min(last);
    if r.is_infinite() {
        let mut m = interpolate(times, values, t0).max(interpolate(times, values, t1));
        for (&t, &v) in times.iter().zip(values) {
            if t >= t0 && t <= t1 {
                m = m.max(v);
            }
        }
        return Ok(m);
    }
    let mut nodes = vec![(t0, interpolate(times, values, t0))];
    nodes.extend(times.iter().zip(values).filter(|(&t, _)| t > t0 && t < t1).map(|(&t, &v)| (t, v)));
    nodes.push((t1, interpolate(times, values, t1)));
    let integral: f64 = nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powf(r) + w[1].1.powf(r)))
        .sum();
    Ok(integral.powf(1.0 / r))
}

/// `‖u‖_{L^r(t0,t1; L^s(Ω))}` over the recorded states.
pub fn lrs_norm(traj: &Trajectory, r: f64, s: f64, t0: f64, t1: f64) -> Result<f64> {
    let values = traj.states.iter().map(|u| u.norm(s)).collect::<Result<Vec<_>>>()?;
    lr_of_series(&traj.times, &values, r, t0, t1)
}
