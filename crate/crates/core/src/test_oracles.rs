//! Independent reference computations used by the unit tests.

use nalgebra::DMatrix;

use crate::grid::Grid;

/// Dense `shift·I + scale·L` where `L` is the five/seven-point Dirichlet
/// Laplacian assembled from node coordinates.
pub fn dense_heat_matrix(grid: &Grid, shift: f64, scale: f64) -> DMatrix<f64> {
    let n = grid.len();
    let res = grid.resolution().to_vec();
    let d = res.len();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut c = vec![0usize; d];
        let mut rem = i;
        for ax in (0..d).rev() {
            c[ax] = rem % res[ax];
            rem /= res[ax];
        }
        a[(i, i)] += shift;
        for ax in 0..d {
            let h2 = grid.spacing(ax).powi(2);
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
