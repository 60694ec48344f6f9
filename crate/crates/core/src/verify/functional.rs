use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponents::ExponentVector;
use crate::grid::{axis_gradient_norm, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalConstants {
    /// Largest `‖u‖_{p̄*} / Πᵢ‖∂ᵢu‖_{pᵢ}^{1/N}` observed.
    pub sobolev_ratio_max: f64,
    /// Largest `maxᵢ ‖u‖_{pᵢ} / ‖∂ᵢu‖_{pᵢ}` observed.
    pub poincare_ratio_max: f64,
}

/// A nonzero field made of a few Dirichlet sine modes plus compactly
/// supported bumps of random width.
pub fn random_field(grid: Grid, rng: &mut impl Rng) -> Field {
    let d = grid.n_dims();
    loop {
        let modes: Vec<(f64, [f64; 3])> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let mut k = [0.0; 3];
                for a in 0..d {
                    k[a] = rng.gen_range(1..=6) as f64 * std::f64::consts::PI / grid.extents()[a];
                }
                (rng.gen_range(-1.0..1.0), k)
            })
            .collect();
        let bumps: Vec<(f64, [f64; 3], f64)> = (0..rng.gen_range(0..=3))
            .map(|_| {
                let mut c = [0.0; 3];
                for a in 0..d {
                    c[a] = rng.gen_range(0.1..0.9) * grid.extents()[a];
                }
                let hmin = (0..d).map(|a| grid.spacing(a)).fold(0.0, f64::max);
                (rng.gen_range(-2.0..2.0), c, rng.gen_range(3.0 * hmin..0.4f64.max(4.0 * hmin)))
            })
            .collect();
        let mode_weight = rng.gen_range(0.0..1.0);
        let f = Field::from_fn(grid, |x| {
            let s: f64 = modes
                .iter()
                .map(|(amp, k)| amp * (0..d).map(|a| (k[a] * x[a]).sin()).product::<f64>())
                .sum();
            let b: f64 = bumps
                .iter()
                .map(|(amp, c, rho)| {
                    let r2: f64 = (0..d).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>() / (rho * rho);
                    if r2 < 1.0 { amp * (1.0 - r2).powi(2) } else { 0.0 }
                })
                .sum();
            mode_weight * s + b
        })
        .expect("finite by construction");
        if f.sup_norm() > 0.0 {
            return f;
        }
    }
}

fn poincare_ratio(u: &Field, exponents: &ExponentVector) -> Result<f64> {
    let mut worst = 0.0f64;
    for (axis, &p) in exponents.p.iter().enumerate() {
        worst = worst.max(u.norm(p)? / axis_gradient_norm(u, axis, p));
    }
    Ok(worst)
}

fn sobolev_ratio(u: &Field, exponents: &ExponentVector, p_star: f64) -> Result<f64> {
    let n = exponents.n_dims as f64;
    let denom: f64 = exponents
        .p
        .iter()
        .enumerate()
        .map(|(axis, &p)| axis_gradient_norm(u, axis, p).powf(1.0 / n))
        .product();
    Ok(u.norm(p_star)? / denom)
}

fn check_grid(grid: &Grid, exponents: &ExponentVector, sample_count: usize) -> Result<()> {
    if grid.n_dims() != exponents.n_dims {
        return Err(Error::DimensionMismatch("grid and exponents disagree".into()));
    }
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be positive".into()));
    }
    Ok(())
}

/// Empirical lower bounds for the Sobolev and Poincaré constants over
/// `sample_count` seeded random fields. The Poincaré ratio uses the same
/// exponent `pᵢ` on both sides.
pub fn estimate_functional_constants(
    grid: Grid,
    exponents: &ExponentVector,
    sample_count: usize,
    seed: u64,
) -> Result<FunctionalConstants> {
    check_grid(&grid, exponents, sample_count)?;
    let p_star = exponents.p_star.ok_or(Error::UndefinedCriticalExponent {
        p_bar: exponents.p_bar,
        n_dims: exponents.n_dims,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sob = 0.0f64;
    let mut poi = 0.0f64;
    for _ in 0..sample_count {
        let u = random_field(grid, &mut rng);
        sob = sob.max(sobolev_ratio(&u, exponents, p_star)?);
        poi = poi.max(poincare_ratio(&u, exponents)?);
    }
    Ok(FunctionalConstants { sobolev_ratio_max: sob, poincare_ratio_max: poi })
}

/// Poincaré part alone; available for every exponent vector.
pub fn estimate_poincare_constant(grid: Grid, exponents: &ExponentVector, sample_count: usize, seed: u64) -> Result<f64> {
    check_grid(&grid, exponents, sample_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poi = 0.0f64;
    for _ in 0..sample_count {
        poi = poi.max(poincare_ratio(&random_field(grid, &mut rng), exponents)?);
    }
    Ok(poi)
}
