//! The discrete operator `A(u) = −div_h a(∇_h u)` and a damped Newton solver
//! for implicit steps and for the stationary problem.
//!
//! `div_h` is the negative adjoint of the forward-difference gradient used by
//! [`anisotropic_energy`](crate::grid::anisotropic_energy), so
//! `Σⱼ A(u)ⱼ vⱼ Πh = Σ_edges a(∇u)·∇v Πh`.

use crate::error::{Error, Result};
use crate::flux::{FluxKind, FluxModel};
use crate::grid::{Field, Grid};

/// Maximum number of step halvings in the damped Newton update.
pub const MAX_HALVINGS: usize = 30;

const CG_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct AxisGeom {
    h: f64,
    stride: usize,
    n: usize,
}

/// Edge-local view of a flux model on a grid.
pub struct DiscreteOperator<'a> {
    model: &'a FluxModel,
    grid: Grid,
    axes: Vec<AxisGeom>,
}

impl<'a> DiscreteOperator<'a> {
    pub fn new(model: &'a FluxModel, grid: Grid) -> Result<Self> {
        if model.n_dims() != grid.n_dims() {
            return Err(Error::DimensionMismatch(format!(
                "flux model of dimension {} on a {}-dimensional grid",
                model.n_dims(),
                grid.n_dims()
            )));
        }
        if let Some(h) = &model.h_field {
            if h.grid() != &grid {
                return Err(Error::DimensionMismatch("perturbation field lives on another grid".into()));
            }
        }
        let axes = (0..grid.n_dims())
            .map(|a| AxisGeom { h: grid.spacing(a), stride: grid.stride(a), n: grid.resolution()[a] })
            .collect();
        Ok(Self { model, grid, axes })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Perturbation level on the edge below node `j` (or on the upper boundary
    /// edge when `upper` is set).
    #[inline]
    fn edge_h(&self, j: usize, lower: Option<usize>) -> f64 {
        match (&self.model.kind, &self.model.h_field) {
            (FluxKind::Perturbed, Some(h)) => {
                let hv = h.values();
                match lower {
                    Some(l) => 0.5 * (hv[j] + hv[l]),
                    None => hv[j],
                }
            }
            _ => 0.0,
        }
    }

    /// `A(u)` at every interior node.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (axis, g) in self.axes.iter().enumerate() {
            let inv_h = 1.0 / g.h;
            for j in 0..u.len() {
                let c = (j / g.stride) % g.n;
                let (lo_val, lo_idx) = if c == 0 { (0.0, None) } else { (u[j - g.stride], Some(j - g.stride)) };
                let (hi_val, hi_idx) = if c == g.n - 1 { (0.0, None) } else { (u[j + g.stride], Some(j + g.stride)) };
                let f_lo = self.model.flux(axis, (u[j] - lo_val) * inv_h, self.edge_h(j, lo_idx));
                let h_hi = match hi_idx {
                    Some(k) => self.edge_h(k, Some(j)),
                    None => self.edge_h(j, None),
                };
                let f_hi = self.model.flux(axis, (hi_val - u[j]) * inv_h, h_hi);
                out[j] += (f_lo - f_hi) * inv_h;
            }
        }
    }

    pub fn apply_field(&self, u: &Field) -> Field {
        let mut out = vec![0.0; u.len()];
        self.apply(u.values(), &mut out);
        Field::from_vec_unchecked(*u.grid(), out)
    }

    /// Linearization of `A` at `u`: per node, per axis, the lower and upper
    /// edge conductances `a'(∇u)/h²`.
    pub fn linearize(&self, u: &[f64]) -> Linearization {
        let n_axes = self.axes.len();
        let mut lo = vec![0.0; u.len() * n_axes];
        let mut hi = vec![0.0; u.len() * n_axes];
        for (axis, g) in self.axes.iter().enumerate() {
            let inv_h = 1.0 / g.h;
            let inv_h2 = inv_h * inv_h;
            for j in 0..u.len() {
                let c = (j / g.stride) % g.n;
                let (lo_val, lo_idx) = if c == 0 { (0.0, None) } else { (u[j - g.stride], Some(j - g.stride)) };
                let (hi_val, hi_idx) = if c == g.n - 1 { (0.0, None) } else { (u[j + g.stride], Some(j + g.stride)) };
                lo[j * n_axes + axis] =
                    self.model.newton_slope(axis, (u[j] - lo_val) * inv_h, self.edge_h(j, lo_idx)) * inv_h2;
                let h_hi = match hi_idx {
                    Some(k) => self.edge_h(k, Some(j)),
                    None => self.edge_h(j, None),
                };
                hi[j * n_axes + axis] = self.model.newton_slope(axis, (hi_val - u[j]) * inv_h, h_hi) * inv_h2;
            }
        }
        Linearization { axes: self.axes.clone(), lo, hi, shift: 0.0, scale: 1.0 }
    }
}

/// Matrix-free `shift·I + scale·J_A`.
pub struct Linearization {
    axes: Vec<AxisGeom>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    shift: f64,
    scale: f64,
}

impl Linearization {
    fn with_shift_scale(mut self, shift: f64, scale: f64) -> Self {
        self.shift = shift;
        self.scale = scale;
        self
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n_axes = self.axes.len();
        for j in 0..v.len() {
            let mut acc = 0.0;
            for (axis, g) in self.axes.iter().enumerate() {
                let c = (j / g.stride) % g.n;
                let v_lo = if c == 0 { 0.0 } else { v[j - g.stride] };
                let v_hi = if c == g.n - 1 { 0.0 } else { v[j + g.stride] };
                acc += self.lo[j * n_axes + axis] * (v[j] - v_lo) + self.hi[j * n_axes + axis] * (v[j] - v_hi);
            }
            out[j] = self.shift * v[j] + self.scale * acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let n_axes = self.axes.len();
        (0..self.lo.len() / n_axes)
            .map(|j| {
                let s: f64 = (0..n_axes).map(|a| self.lo[j * n_axes + a] + self.hi[j * n_axes + a]).sum();
                self.shift + self.scale * s
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Jacobi-preconditioned conjugate gradients for the SPD linearization.
/// Returns the number of iterations used.
fn pcg(op: &Linearization, b: &[f64], x: &mut [f64], max_iters: usize) -> usize {
    let n = b.len();
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return 0;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 0..max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return it;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= CG_RTOL * b_norm {
            return it + 1;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    max_iters
}

/// Which nonlinear system the Newton solver targets.
#[derive(Debug, Clone, Copy)]
pub enum System<'s> {
    /// `x + dt·(A(x) − f) − anchor = 0`
    Step { dt: f64, anchor: &'s [f64] },
    /// `A(x) − f = 0`
    Stationary,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub struct NewtonSolver<'a> {
    op: DiscreteOperator<'a>,
}

impl<'a> NewtonSolver<'a> {
    pub fn new(model: &'a FluxModel, grid: Grid) -> Result<Self> {
        Ok(Self { op: DiscreteOperator::new(model, grid)? })
    }

    pub fn operator(&self) -> &DiscreteOperator<'a> {
        &self.op
    }

    pub fn residual(&self, system: System<'_>, forcing: &[f64], x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        match system {
            System::Step { dt, anchor } => {
                for j in 0..x.len() {
                    out[j] = x[j] - anchor[j] + dt * (out[j] - forcing[j]);
                }
            }
            System::Stationary => {
                for j in 0..x.len() {
                    out[j] -= forcing[j];
                }
            }
        }
    }

    /// Scale against which the residual tolerance is measured.
    pub fn residual_scale(system: System<'_>, forcing: &[f64]) -> f64 {
        match system {
            System::Step { dt, anchor } => {
                let m = anchor.iter().zip(forcing).fold(0.0f64, |m, (a, f)| m.max((a + dt * f).abs()));
                m.max(1.0)
            }
            System::Stationary => sup(forcing).max(1.0),
        }
    }

    /// Damped Newton from `x0` until `‖residual‖∞ ≤ tol · scale`.
    pub fn solve(
        &self,
        system: System<'_>,
        forcing: &[f64],
        x0: &[f64],
        tol: f64,
        max_iters: usize,
    ) -> Result<NewtonOutcome> {
        let n = x0.len();
        let threshold = tol * Self::residual_scale(system, forcing);
        let mut x = x0.to_vec();
        let mut r = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; n];
        let mut dx = vec![0.0; n];
        self.residual(system, forcing, &x, &mut r);
        let mut r_sup = sup(&r);
        let mut r_l2 = norm2(&r);
        for it in 0..max_iters {
            if r_sup <= threshold {
                return Ok(NewtonOutcome { solution: x, residual: r_sup, iterations: it });
            }
            let lin = self.op.linearize(&x);
            let lin = match system {
                System::Step { dt, .. } => lin.with_shift_scale(1.0, dt),
                System::Stationary => lin.with_shift_scale(0.0, 1.0),
            };
            pcg(&lin, &r, &mut dx, 20 * n + 100);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                for j in 0..n {
                    trial[j] = x[j] - lambda * dx[j];
                }
                self.residual(system, forcing, &trial, &mut r_trial);
                let l2 = norm2(&r_trial);
                if l2 < r_l2 && l2.is_finite() {
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::StepFailure { residual: r_sup, iterations: it });
            }
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut r, &mut r_trial);
            r_sup = sup(&r);
            r_l2 = norm2(&r);
        }
        if r_sup <= threshold {
            return Ok(NewtonOutcome { solution: x, residual: r_sup, iterations: max_iters });
        }
        Err(Error::StepFailure { residual: r_sup, iterations: max_iters })
    }
}
