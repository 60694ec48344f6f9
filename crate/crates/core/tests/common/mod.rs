//! Reference computations shared by the integration tests. They rebuild the
//! discrete problems from node coordinates without touching solver code.
#![allow(dead_code)]

use anisolab::{Field, Grid};
use nalgebra::{DMatrix, DVector};

/// Dense `shift·I + scale·L`, `L` the Dirichlet Laplacian on the interior nodes.
pub fn dense_heat_matrix(grid: &Grid, shift: f64, scale: f64) -> DMatrix<f64> {
    let res = grid.resolution().to_vec();
    let n: usize = res.iter().product();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut c = vec![0usize; res.len()];
        let mut rem = i;
        for ax in (0..res.len()).rev() {
            c[ax] = rem % res[ax];
            rem /= res[ax];
        }
        a[(i, i)] += shift;
        for ax in 0..res.len() {
            let h2 = (grid.extents()[ax] / (res[ax] + 1) as f64).powi(2);
            a[(i, i)] += 2.0 * scale / h2;
            for delta in [-1i64, 1] {
                let k = c[ax] as i64 + delta;
                if k < 0 || k >= res[ax] as i64 {
                    continue;
                }
                let mut cc = c.clone();
                cc[ax] = k as usize;
                let j = cc.iter().zip(&res).fold(0, |acc, (&ci, &ni)| acc * ni + ci);
                a[(i, j)] -= scale / h2;
            }
        }
    }
    a
}

/// Backward-Euler heat step by dense LU.
pub fn dense_heat_step(u: &Field, f: &Field, dt: f64) -> Vec<f64> {
    let a = dense_heat_matrix(u.grid(), 1.0, dt);
    let rhs: Vec<f64> = u.values().iter().zip(f.values()).map(|(u, f)| u + dt * f).collect();
    a.lu().solve(&DVector::from_vec(rhs)).expect("nonsingular").iter().copied().collect()
}

/// Root of an increasing scalar function on `[lo, hi]`.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(g(lo) <= 0.0 && g(hi) >= 0.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
