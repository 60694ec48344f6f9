//! Exponent algebra: harmonic mean, admissibility window, Sobolev critical
//! exponent and the closed-form exponents of the abstract decay estimates.
//!
//! Everything here is a pure function of its inputs. Where the inputs are
//! finite floats (and therefore rational), the [`exact`] submodule repeats
//! the computations in arbitrary-precision rationals.

use crate::error::{Error, Result};

/// Tolerance used to decide `b == r` when classifying the decay regime.
pub const REGIME_TOL: f64 = 1e-12;

fn validate_exponents(p: &[f64], n_dims: usize) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidExponent("empty exponent list".into()));
    }
    if n_dims < 2 {
        return Err(Error::InvalidExponent(format!("dimension {n_dims} < 2")));
    }
    if p.len() != n_dims {
        return Err(Error::InvalidExponent(format!(
            "{} exponents given for dimension {}",
            p.len(),
            n_dims
        )));
    }
    for (i, &pi) in p.iter().enumerate() {
        if !pi.is_finite() || pi <= 1.0 {
            return Err(Error::InvalidExponent(format!("p[{i}] = {pi} must be a finite number > 1")));
        }
    }
    Ok(())
}

/// Harmonic mean `p̄` with `1/p̄ = (1/N) Σ 1/pᵢ`.
///
/// `p̄ ≥ N` is allowed here; only [`sobolev_critical`] rejects it.
pub fn harmonic_mean(p: &[f64], n_dims: usize) -> Result<f64> {
    validate_exponents(p, n_dims)?;
    let inv_sum: f64 = p.iter().map(|pi| 1.0 / pi).sum();
    Ok(n_dims as f64 / inv_sum)
}

/// `p̄* = N p̄ / (N − p̄)`, defined for `1 < p̄ < N`.
pub fn sobolev_critical(p_bar: f64, n_dims: usize) -> Result<f64> {
    let n = n_dims as f64;
    if !(p_bar > 1.0) || !p_bar.is_finite() {
        return Err(Error::InvalidExponent(format!("harmonic mean {p_bar} must exceed 1")));
    }
    if p_bar >= n {
        return Err(Error::UndefinedCriticalExponent { p_bar, n_dims });
    }
    Ok(n * p_bar / (n - p_bar))
}

/// The exponent vector together with its derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentVector {
    pub p: Vec<f64>,
    pub n_dims: usize,
    pub p_bar: f64,
    /// `None` when `p̄ ≥ N`.
    pub p_star: Option<f64>,
    pub p_max: f64,
    /// `max(p̄*, p_max)`; infinite when `p̄*` is undefined.
    pub p_infty: f64,
}

impl ExponentVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let n_dims = p.len();
        let p_bar = harmonic_mean(&p, n_dims)?;
        let p_star = sobolev_critical(p_bar, n_dims).ok();
        let p_max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p_infty = match p_star {
            Some(ps) => ps.max(p_max),
            None => f64::INFINITY,
        };
        Ok(Self { p, n_dims, p_bar, p_star, p_max, p_infty })
    }

    /// All exponents equal to `p` in dimension `n_dims`.
    pub fn isotropic(p: f64, n_dims: usize) -> Result<Self> {
        Self::new(vec![p; n_dims])
    }

    pub fn p_min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn admissibility(&self) -> AdmissibilityReport {
        admissibility_of(&self.p, self.p_bar)
    }

    /// Exponents `(h1, h0)` of the algebraic L¹→L^∞ decay of differences:
    /// `h1 = N / (N(p̄−2)+p̄)`, `h0 = p̄ / (N(p̄−2)+p̄)`.
    pub fn algebraic_decay_exponents(&self) -> (f64, f64) {
        let n = self.n_dims as f64;
        let denom = n * (self.p_bar - 2.0) + self.p_bar;
        (n / denom, self.p_bar / denom)
    }

    /// Decay regime of solution differences, decided by the sign of `p̄ − 2`.
    pub fn regime(&self) -> Regime {
        Regime::from_gap(self.p_bar - 2.0)
    }

    /// Profile obtained from the abstract machinery with
    /// `r = 2`, `r0 = 1`, `q = p̄*` (∞ when `p̄ = N`) and `b = p̄`.
    pub fn difference_profile(&self, domain_measure: f64, c1: f64, c2: f64) -> Result<DecayProfile> {
        let q = self.p_star.unwrap_or(f64::INFINITY);
        decay_profile(2.0, 1.0, q, self.p_bar, domain_measure, c1, c2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// `pᵢ > 2 − 1/(N+1)`
    pub lower_ok: Vec<bool>,
    /// `pᵢ < p̄ (N+1)/N`
    pub upper_ok: Vec<bool>,
    /// `p̄ < N`
    pub subcritical_ok: bool,
    /// `min pᵢ ≥ 2` (strong monotonicity of the model flux)
    pub model_monotone_ok: bool,
    pub admissible: bool,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

fn admissibility_of(p: &[f64], p_bar: f64) -> AdmissibilityReport {
    let n = p.len() as f64;
    let lower_bound = 2.0 - 1.0 / (n + 1.0);
    let upper_bound = p_bar * (n + 1.0) / n;
    let lower_ok: Vec<bool> = p.iter().map(|&pi| pi > lower_bound).collect();
    let upper_ok: Vec<bool> = p.iter().map(|&pi| pi < upper_bound).collect();
    let subcritical_ok = p_bar < n;
    let model_monotone_ok = p.iter().all(|&pi| pi >= 2.0);
    let admissible = lower_ok.iter().all(|&b| b) && upper_ok.iter().all(|&b| b) && subcritical_ok;
    AdmissibilityReport {
        lower_ok,
        upper_ok,
        subcritical_ok,
        model_monotone_ok,
        admissible,
        lower_bound,
        upper_bound,
    }
}

pub fn check_admissible(p: &[f64], n_dims: usize) -> Result<AdmissibilityReport> {
    let p_bar = harmonic_mean(p, n_dims)?;
    Ok(admissibility_of(p, p_bar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Algebraic,
    Exponential,
    Universal,
}

impl Regime {
    /// Classify from `b − r` (equivalently `p̄ − 2` for the PDE).
    pub fn from_gap(gap: f64) -> Self {
        if gap.abs() <= REGIME_TOL {
            Regime::Exponential
        } else if gap > 0.0 {
            Regime::Universal
        } else {
            Regime::Algebraic
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Algebraic => "algebraic",
            Regime::Exponential => "exponential",
            Regime::Universal => "universal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub r: f64,
    pub r0: f64,
    pub q: f64,
    pub b: f64,
    pub h0: f64,
    pub h1: f64,
    pub regime: Regime,
    /// Universal exponent `1/(b − r)`; only in the universal regime.
    pub h2: Option<f64>,
    /// Exponential rate; only in the exponential regime.
    pub sigma: Option<f64>,
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Exponents of the abstract L^{r0}→L^∞ decay estimate for a function whose
/// level-set truncations satisfy an `(r, q, b)` integral inequality.
///
/// `q` may be `f64::INFINITY`.
pub fn decay_profile(
    r: f64,
    r0: f64,
    q: f64,
    b: f64,
    domain_measure: f64,
    c1: f64,
    c2: f64,
) -> Result<DecayProfile> {
    if !(r0 >= 1.0 && r0 < r && r < q) {
        return Err(Error::InvalidIndices(format!("need 1 <= r0 < r < q, got r0={r0}, r={r}, q={q}")));
    }
    let b0 = (r - r0) / (1.0 - r0 / q);
    if !(b > b0 && b < q) {
        return Err(Error::InvalidIndices(format!("need b0 < b < q with b0 = {b0}, got b = {b}, q = {q}")));
    }
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidIndices(format!("constants must be positive, got c1={c1}, c2={c2}")));
    }
    if !(domain_measure > 0.0) {
        return Err(Error::InvalidIndices(format!("domain measure {domain_measure} must be positive")));
    }
    let h1 = 1.0 / (b - (r - r0) - r0 * b / q);
    let h0 = h1 * (1.0 - b / q) * r0;
    let regime = Regime::from_gap(b - r);
    let kappa = 0.5 * (1.0 - r0 / r);
    let (h2, sigma) = match regime {
        Regime::Algebraic => (None, None),
        Regime::Exponential => {
            let sigma = c1 * kappa / (4.0 * (r - r0) * domain_measure.powf(1.0 - r / q));
            (None, Some(sigma))
        }
        Regime::Universal => (Some(1.0 / (b - r)), None),
    };
    Ok(DecayProfile { r, r0, q, b, h0, h1, regime, h2, sigma, kappa, c1, c2 })
}

/// Rational versions of the exponent formulas.
pub mod exact {
    use crate::error::{Error, Result};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Signed, ToPrimitive, Zero};

    pub fn rational(x: f64) -> Result<BigRational> {
        BigRational::from_float(x).ok_or_else(|| Error::InvalidArgument(format!("{x} is not finite")))
    }

    pub fn harmonic_mean(p: &[f64]) -> Result<BigRational> {
        if p.is_empty() {
            return Err(Error::InvalidExponent("empty exponent list".into()));
        }
        let mut inv_sum = BigRational::zero();
        for &pi in p {
            if !(pi > 1.0) {
                return Err(Error::InvalidExponent(format!("p = {pi} must exceed 1")));
            }
            inv_sum += rational(pi)?.recip();
        }
        Ok(BigRational::from_integer(BigInt::from(p.len())) / inv_sum)
    }

    /// `(h1, h0, h2)`; `q = None` stands for `q = ∞`, `h2` is present when `b > r`.
    pub fn decay_exponents(
        r: &BigRational,
        r0: &BigRational,
        q: Option<&BigRational>,
        b: &BigRational,
    ) -> Result<(BigRational, BigRational, Option<BigRational>)> {
        let b_over_q = q.map(|q| b / q).unwrap_or_else(BigRational::zero);
        let denom = b - (r - r0) - r0 * &b_over_q;
        if !denom.is_positive() {
            return Err(Error::InvalidIndices("non-positive h1 denominator".into()));
        }
        let h1 = denom.recip();
        let h0 = &h1 * (BigRational::one() - &b_over_q) * r0;
        let h2 = if b > r { Some(&h1 + &h0 / (b - r)) } else { None };
        Ok((h1, h0, h2))
    }

    /// Exact `(h1, h0)` for `r = 2`, `r0 = 1`, `q = p̄*`, `b = p̄`.
    pub fn difference_exponents(p: &[f64]) -> Result<(BigRational, BigRational, Option<BigRational>)> {
        let n = BigRational::from_integer(BigInt::from(p.len()));
        let p_bar = harmonic_mean(p)?;
        let q = if p_bar < n { Some(&n * &p_bar / (&n - &p_bar)) } else { None };
        let two = BigRational::from_integer(BigInt::from(2));
        decay_exponents(&two, &BigRational::one(), q.as_ref(), &p_bar)
    }

    pub fn to_f64(x: &BigRational) -> f64 {
        x.to_f64().unwrap_or(f64::NAN)
    }

    pub fn display(x: &BigRational) -> String {
        if x.is_integer() {
            x.numer().to_string()
        } else {
            format!("{}/{}", x.numer(), x.denom())
        }
    }
}
