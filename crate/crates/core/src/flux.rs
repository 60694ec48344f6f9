//! Coefficient families `aᵢ(x, ξ)` and an empirical checker for their
//! structure conditions (coercivity, growth, strict and strong monotonicity).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponents::ExponentVector;
use crate::grid::Field;

/// Regularization of the Newton linearization (never of the flux itself).
pub const NEWTON_EPSILON: f64 = 1e-8;

/// Default half-width of the sampling box used by [`verify_structure`].
pub const DEFAULT_SAMPLE_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    /// `|ξᵢ|^{pᵢ−2} ξᵢ`
    OrthotropicPower,
    /// `(ε² + ξᵢ²)^{(pᵢ−2)/2} ξᵢ`
    RegularizedPower,
    /// `|ξᵢ|^{pᵢ−2} ξᵢ + h(x)^{1−1/pᵢ} tanh(ξᵢ)`
    Perturbed,
}

impl FluxKind {
    pub fn name(self) -> &'static str {
        match self {
            FluxKind::OrthotropicPower => "orthotropic",
            FluxKind::RegularizedPower => "regularized",
            FluxKind::Perturbed => "perturbed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    pub kind: FluxKind,
    pub exponents: ExponentVector,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    /// Nominal strong-monotonicity constant; zero when the family is not
    /// strongly monotone.
    pub gamma: f64,
    pub h_field: Option<Field>,
}

/// `γ` of `(|a|^{p−2}a − |b|^{p−2}b)(a−b) ≥ γ|a−b|^p`, valid for `p ≥ 2`.
fn elementary_gamma(p: f64) -> f64 {
    2f64.powf(2.0 - p)
}

impl FluxModel {
    pub fn orthotropic(exponents: ExponentVector) -> Self {
        let n = exponents.n_dims;
        let gamma = if exponents.p_min() >= 2.0 {
            exponents.p.iter().map(|&p| elementary_gamma(p)).fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        Self {
            kind: FluxKind::OrthotropicPower,
            exponents,
            epsilon: 0.0,
            alpha: 1.0,
            beta: vec![1.0; n],
            gamma,
            h_field: None,
        }
    }

    pub fn regularized(exponents: ExponentVector, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be >= 0")));
        }
        let beta = exponents.p.iter().map(|&p| 2f64.powf(((p - 2.0) / 2.0).max(0.0))).collect();
        let gamma = if exponents.p_min() >= 2.0 {
            exponents
                .p
                .iter()
                .map(|&p| elementary_gamma(p) / (p - 1.0))
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        Ok(Self {
            kind: FluxKind::RegularizedPower,
            exponents,
            epsilon,
            alpha: 1.0,
            beta,
            gamma,
            h_field: None,
        })
    }

    pub fn perturbed(exponents: ExponentVector, h_field: Field) -> Result<Self> {
        if h_field.grid().n_dims() != exponents.n_dims {
            return Err(Error::DimensionMismatch("perturbation field dimension".into()));
        }
        if h_field.values().iter().any(|&h| h < 0.0) {
            return Err(Error::InvalidArgument("perturbation field must be nonnegative".into()));
        }
        let base = Self::orthotropic(exponents);
        Ok(Self { kind: FluxKind::Perturbed, h_field: Some(h_field), ..base })
    }

    pub fn n_dims(&self) -> usize {
        self.exponents.n_dims
    }

    /// Largest value of the perturbation field (zero for unperturbed kinds).
    pub fn h_max(&self) -> f64 {
        self.h_field.as_ref().map(|h| h.sup_norm()).unwrap_or(0.0)
    }

    /// Additive constant in the growth bound `|aᵢ| ≤ βᵢ|ξᵢ|^{pᵢ−1} + offset`.
    pub fn growth_offset(&self, axis: usize) -> f64 {
        let p = self.exponents.p[axis];
        match self.kind {
            FluxKind::OrthotropicPower => 0.0,
            FluxKind::RegularizedPower => {
                if p > 2.0 {
                    2f64.powf((p - 2.0) / 2.0) * self.epsilon.powf(p - 1.0)
                } else {
                    0.0
                }
            }
            FluxKind::Perturbed => self.h_max().powf(1.0 - 1.0 / p),
        }
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.n_dims() {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dimension {}",
                self.n_dims()
            )));
        }
        Ok(())
    }

    /// Flux along `axis` for the scalar gradient component `xi` and local
    /// perturbation `h` (ignored by unperturbed kinds).
    #[inline]
    pub fn flux(&self, axis: usize, xi: f64, h: f64) -> f64 {
        let p = self.exponents.p[axis];
        match self.kind {
            FluxKind::OrthotropicPower => power_flux(p, xi),
            FluxKind::RegularizedPower => {
                if p == 2.0 {
                    xi
                } else {
                    (self.epsilon * self.epsilon + xi * xi).powf(0.5 * (p - 2.0)) * xi
                }
            }
            FluxKind::Perturbed => power_flux(p, xi) + h.powf(1.0 - 1.0 / p) * xi.tanh(),
        }
    }

    /// Exact derivative of [`flux`](Self::flux) in `xi`.
    pub fn flux_slope(&self, axis: usize, xi: f64, h: f64) -> Result<f64> {
        let p = self.exponents.p[axis];
        let singular = || Error::SingularDerivative { axis, p };
        match self.kind {
            FluxKind::OrthotropicPower => power_slope(p, xi).ok_or_else(singular),
            FluxKind::RegularizedPower => {
                if self.epsilon == 0.0 {
                    power_slope(p, xi).ok_or_else(singular)
                } else {
                    Ok(regularized_slope(p, self.epsilon, xi))
                }
            }
            FluxKind::Perturbed => {
                let s = power_slope(p, xi).ok_or_else(singular)?;
                let sech = 1.0 / xi.cosh();
                Ok(s + h.powf(1.0 - 1.0 / p) * sech * sech)
            }
        }
    }

    /// Slope used by the Newton linearization: the exact slope with the
    /// power part regularized at [`NEWTON_EPSILON`] so it is finite and positive.
    #[inline]
    pub fn newton_slope(&self, axis: usize, xi: f64, h: f64) -> f64 {
        let p = self.exponents.p[axis];
        match self.kind {
            FluxKind::OrthotropicPower => regularized_slope(p, NEWTON_EPSILON, xi),
            FluxKind::RegularizedPower => {
                regularized_slope(p, self.epsilon.max(NEWTON_EPSILON), xi)
            }
            FluxKind::Perturbed => {
                let sech = 1.0 / xi.cosh();
                regularized_slope(p, NEWTON_EPSILON, xi) + h.powf(1.0 - 1.0 / p) * sech * sech
            }
        }
    }

    /// `aᵢ(ξ)` at the model's reference perturbation level (its maximum).
    pub fn flux_eval(&self, axis: usize, gradient: &[f64]) -> Result<f64> {
        self.check_axis(axis)?;
        self.check_gradient(gradient)?;
        Ok(self.flux(axis, gradient[axis], self.h_max()))
    }

    /// `∂aᵢ/∂ξᵢ` at the model's reference perturbation level.
    pub fn flux_derivative(&self, axis: usize, gradient: &[f64]) -> Result<f64> {
        self.check_axis(axis)?;
        self.check_gradient(gradient)?;
        self.flux_slope(axis, gradient[axis], self.h_max())
    }

    fn check_gradient(&self, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.n_dims() {
            return Err(Error::DimensionMismatch(format!(
                "gradient of length {} for dimension {}",
                gradient.len(),
                self.n_dims()
            )));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("non-finite gradient".into()));
        }
        Ok(())
    }
}

#[inline]
fn power_flux(p: f64, xi: f64) -> f64 {
    if p == 2.0 {
        xi
    } else if xi == 0.0 {
        0.0
    } else {
        xi.abs().powf(p - 2.0) * xi
    }
}

fn power_slope(p: f64, xi: f64) -> Option<f64> {
    if p == 2.0 {
        Some(1.0)
    } else if xi == 0.0 {
        if p > 2.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some((p - 1.0) * xi.abs().powf(p - 2.0))
    }
}

/// `d/dξ (ε² + ξ²)^{(p−2)/2} ξ = (ε² + ξ²)^{(p−4)/2} (ε² + (p−1)ξ²)`
#[inline]
fn regularized_slope(p: f64, eps: f64, xi: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let s = eps * eps + xi * xi;
    s.powf(0.5 * (p - 4.0)) * (eps * eps + (p - 1.0) * xi * xi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub coercivity_ok: bool,
    pub growth_ok: bool,
    pub strict_monotone_ok: bool,
    pub strong_monotone_ok: bool,
    /// Empirical infimum over samples and axes of
    /// `(aᵢ(ξ) − aᵢ(η))(ξᵢ − ηᵢ) / |ξᵢ − ηᵢ|^{pᵢ}`.
    pub worst_gamma: f64,
    pub axis_worst_gamma: Vec<f64>,
    pub sample_count: usize,
}

const REL_SLACK: f64 = 1e-12;

/// Ratio sequence along `ξ = η(1 + 10^{-j})`; a steady decline means the
/// monotonicity ratio degenerates to zero as `ξ → η`.
fn ratio_degenerates(model: &FluxModel, axis: usize, h: f64) -> bool {
    let p = model.exponents.p[axis];
    [0.5, 1.0, 5.0].iter().any(|&eta| {
        let ratio = |j: i32| {
            let xi = eta * (1.0 + 10f64.powi(-j));
            let d = xi - eta;
            (model.flux(axis, xi, h) - model.flux(axis, eta, h)) * d / d.abs().powf(p)
        };
        ratio(10) < (1.0 - 1e-3) * ratio(2)
    })
}

/// Check the structure conditions at pseudo-random pairs `(ξ, η)` drawn
/// uniformly from `[−10, 10]^N`.
pub fn verify_structure(model: &FluxModel, sample_count: usize, seed: u64) -> Result<StructureReport> {
    verify_structure_in(model, sample_count, seed, DEFAULT_SAMPLE_RANGE)
}

pub fn verify_structure_in(
    model: &FluxModel,
    sample_count: usize,
    seed: u64,
    range: f64,
) -> Result<StructureReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
    }
    let n = model.n_dims();
    let h_max = model.h_max();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coercivity_ok = true;
    let mut growth_ok = true;
    let mut strict_monotone_ok = true;
    let mut axis_worst = vec![f64::INFINITY; n];
    let mut xi = vec![0.0; n];
    let mut eta = vec![0.0; n];

    for _ in 0..sample_count {
        for a in 0..n {
            xi[a] = rng.gen_range(-range..=range);
            eta[a] = rng.gen_range(-range..=range);
        }
        let h = if h_max > 0.0 { rng.gen_range(0.0..=h_max) } else { 0.0 };
        for a in 0..n {
            let p = model.exponents.p[a];
            let ax = model.flux(a, xi[a], h);
            let ay = model.flux(a, eta[a], h);
            let xi_p = xi[a].abs().powf(p);

            if ax * xi[a] < model.alpha * xi_p * (1.0 - REL_SLACK) {
                coercivity_ok = false;
            }
            let bound = model.beta[a] * xi[a].abs().powf(p - 1.0) + model.growth_offset(a);
            if ax.abs() > bound * (1.0 + REL_SLACK) {
                growth_ok = false;
            }
            let d = xi[a] - eta[a];
            if d != 0.0 {
                let prod = (ax - ay) * d;
                if !(prod > 0.0) {
                    strict_monotone_ok = false;
                }
                let denom = if p == 2.0 { d * d } else { d.abs().powf(p) };
                axis_worst[a] = axis_worst[a].min(prod / denom);
            }
        }
    }

    let worst_gamma = axis_worst.iter().copied().fold(f64::INFINITY, f64::min);
    let degenerate = (0..n).any(|a| ratio_degenerates(model, a, 0.0) || ratio_degenerates(model, a, h_max));
    let strong_monotone_ok = strict_monotone_ok && worst_gamma > 0.0 && !degenerate;
    Ok(StructureReport {
        coercivity_ok,
        growth_ok,
        strict_monotone_ok,
        strong_monotone_ok,
        worst_gamma,
        axis_worst_gamma: axis_worst,
        sample_count,
    })
}
