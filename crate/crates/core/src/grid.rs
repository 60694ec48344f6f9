//! Rectangular grids, interior-node fields with zero Dirichlet boundary,
//! discrete norms, truncations and the discrete anisotropic energy.
//!
//! Nodes are stored in lexicographic order with the last axis fastest.
//! Gradients are forward differences on every edge along an axis, including
//! the two boundary edges where the ghost value is zero.

use crate::error::{Error, Result};
use crate::exponents::ExponentVector;

pub const MAX_DIMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_dims: usize,
    extents: [f64; MAX_DIMS],
    resolution: [usize; MAX_DIMS],
}

impl Grid {
    /// Grid on `Π [0, extentᵢ]` with `resolution[i] ≥ 2` interior nodes per axis.
    pub fn new(extents: &[f64], resolution: &[usize]) -> Result<Self> {
        if let Some(&n) = resolution.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("resolution {n} < 2")));
        }
        Self::build(extents, resolution)
    }

    /// Degenerate grid with a single interior node, used for scalar oracles.
    pub fn single_node(extents: &[f64]) -> Result<Self> {
        Self::build(extents, &vec![1; extents.len()])
    }

    fn build(extents: &[f64], resolution: &[usize]) -> Result<Self> {
        let n_dims = extents.len();
        if !(2..=MAX_DIMS).contains(&n_dims) {
            return Err(Error::InvalidGrid(format!("dimension {n_dims} not in {{2, 3}}")));
        }
        if resolution.len() != n_dims {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} resolutions",
                n_dims,
                resolution.len()
            )));
        }
        if let Some(&e) = extents.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidGrid(format!("extent {e} must be positive")));
        }
        let mut ext = [1.0; MAX_DIMS];
        let mut res = [1; MAX_DIMS];
        ext[..n_dims].copy_from_slice(extents);
        res[..n_dims].copy_from_slice(resolution);
        Ok(Self { n_dims, extents: ext, resolution: res })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(&[1.0, 1.0], &[n, n])
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::new(&[1.0, 1.0, 1.0], &[n, n, n])
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.n_dims]
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution[..self.n_dims]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / (self.resolution[axis] + 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.n_dims).map(|a| self.spacing(a)).collect()
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.resolution().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one node, `Π hᵢ`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.n_dims).map(|a| self.spacing(a)).product()
    }

    /// `|Ω|`
    pub fn measure(&self) -> f64 {
        self.extents().iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution[axis + 1..self.n_dims].iter().product()
    }

    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIMS] {
        let mut c = [0; MAX_DIMS];
        for a in (0..self.n_dims).rev() {
            c[a] = index % self.resolution[a];
            index /= self.resolution[a];
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords[..self.n_dims]
            .iter()
            .zip(self.resolution())
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Physical position of an interior node.
    pub fn position(&self, index: usize) -> [f64; MAX_DIMS] {
        let c = self.coords(index);
        let mut x = [0.0; MAX_DIMS];
        for a in 0..self.n_dims {
            x[a] = (c[a] + 1) as f64 * self.spacing(a);
        }
        x
    }

    /// Index of the node nearest to the domain centre.
    pub fn center_index(&self) -> usize {
        let c: Vec<usize> = self.resolution().iter().map(|&n| (n - 1) / 2).collect();
        self.index(&c)
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Scalar values on the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    /// Sample `f(x)` at every interior node position.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.n_dims()])
            })
            .collect();
        Self::new(grid, values)
    }

    /// Value `height` at one node, zero elsewhere.
    pub fn spike(grid: Grid, index: usize, height: f64) -> Result<Self> {
        if index >= grid.len() {
            return Err(Error::InvalidField(format!("node {index} out of range")));
        }
        let mut values = vec![0.0; grid.len()];
        values[index] = height;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete Lᵖ norm; `exponent = f64::INFINITY` gives the sup norm.
    pub fn norm(&self, exponent: f64) -> Result<f64> {
        norm(self, exponent)
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Weighted sum `Σ uⱼ · Πhᵢ`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Discrete Lᵖ norm with quadrature weight `Π hᵢ`; sup norm for `p = ∞`.
pub fn norm(field: &Field, exponent: f64) -> Result<f64> {
    if !(exponent >= 1.0) {
        return Err(Error::InvalidArgument(format!("norm exponent {exponent} < 1")));
    }
    if exponent.is_infinite() {
        return Ok(field.sup_norm());
    }
    if exponent == 1.0 {
        return Ok(field.l1());
    }
    if exponent == 2.0 {
        return Ok(field.l2());
    }
    // scale by the sup norm so large exponents do not overflow
    let m = field.sup_norm();
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = field.values.iter().map(|v| (v.abs() / m).powf(exponent)).sum();
    Ok(m * (s * field.grid.cell_volume()).powf(1.0 / exponent))
}

/// `G_k(s) = sign(s) · max(|s| − k, 0)`
pub fn gk(s: f64, k: f64) -> f64 {
    let a = s.abs() - k;
    if a > 0.0 {
        a.copysign(s)
    } else {
        0.0
    }
}

/// `T_n(s) = max(−n, min(n, s))`
pub fn tn(s: f64, n: f64) -> f64 {
    s.clamp(-n, n)
}

pub fn truncate_gk(field: &Field, k: f64) -> Result<Field> {
    if !(k >= 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level k = {k} must be >= 0")));
    }
    Ok(field.map(|s| gk(s, k)))
}

pub fn truncate_tn(field: &Field, n: f64) -> Result<Field> {
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation level n = {n} must be > 0")));
    }
    Ok(field.map(|s| tn(s, n)))
}

/// Visit every edge along `axis` with its forward difference quotient
/// (boundary ghosts are zero).
pub fn for_each_edge_gradient(field: &Field, axis: usize, mut visit: impl FnMut(f64)) {
    let grid = field.grid();
    let h = grid.spacing(axis);
    let stride = grid.stride(axis);
    let n = grid.resolution()[axis];
    let u = field.values();
    for j in 0..u.len() {
        let c = (j / stride) % n;
        let lower = if c == 0 { 0.0 } else { u[j - stride] };
        visit((u[j] - lower) / h);
        if c == n - 1 {
            visit(-u[j] / h);
        }
    }
}

/// `Σᵢ Σ_edges |∂ᵢu|^{pᵢ} · Πh` over all edges including boundary edges.
pub fn anisotropic_energy(field: &Field, exponents: &ExponentVector) -> Result<f64> {
    let grid = field.grid();
    if exponents.n_dims != grid.n_dims() {
        return Err(Error::DimensionMismatch(format!(
            "{} exponents for a {}-dimensional grid",
            exponents.n_dims,
            grid.n_dims()
        )));
    }
    let mut total = 0.0;
    for (axis, &p) in exponents.p.iter().enumerate() {
        let mut s = 0.0;
        if p == 2.0 {
            for_each_edge_gradient(field, axis, |g| s += g * g);
        } else {
            for_each_edge_gradient(field, axis, |g| s += g.abs().powf(p));
        }
        total += s;
    }
    Ok(total * grid.cell_volume())
}

/// `‖∂ᵢu‖_{Lᵖ}` over the edges of one axis.
pub fn axis_gradient_norm(field: &Field, axis: usize, p: f64) -> f64 {
    let mut s = 0.0;
    for_each_edge_gradient(field, axis, |g| s += g.abs().powf(p));
    (s * field.grid().cell_volume()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_grid_examples() {
        let g = Grid::unit_square(64).unwrap();
        assert_eq!(g.spacing(0), 1.0 / 65.0);
        assert_eq!(g.spacing(1), 1.0 / 65.0);
        assert_eq!(Grid::unit_cube(16).unwrap().len(), 4096);
        assert!(matches!(Grid::new(&[0.0, 1.0], &[4, 4]), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(&[1.0, 1.0], &[1, 4]), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(&[1.0], &[4]), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(&[1.0; 4], &[4; 4]), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn lexicographic_ordering_last_axis_fastest() {
        let g = Grid::new(&[1.0, 2.0, 3.0], &[2, 3, 4]).unwrap();
        assert_eq!(g.stride(2), 1);
        assert_eq!(g.stride(1), 4);
        assert_eq!(g.stride(0), 12);
        for i in 0..g.len() {
            assert_eq!(g.index(&g.coords(i)), i);
        }
        assert_eq!(g.coords(5), [0, 1, 1]);
    }

    #[test]
    fn norm_examples() {
        let g = Grid::unit_square(64).unwrap();
        assert_eq!(Field::zeros(g).norm(3.0).unwrap(), 0.0);
        let one = Field::constant(g, 1.0);
        let expected = (64.0f64 / 65.0).powi(2);
        assert!((one.norm(1.0).unwrap() - expected).abs() < 1e-14);
        let s = Field::spike(g, 7, 3.0).unwrap();
        assert_eq!(s.norm(f64::INFINITY).unwrap(), 3.0);
        assert!(matches!(one.norm(0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn general_exponent_norm_matches_direct_sum() {
        let g = Grid::new(&[1.0, 2.0], &[5, 7]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 3.0).sin() + x[1]).unwrap();
        let direct = (f.values().iter().map(|v| v.abs().powf(3.5)).sum::<f64>() * g.cell_volume()).powf(1.0 / 3.5);
        assert!((f.norm(3.5).unwrap() - direct).abs() < 1e-13 * direct);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(gk(3.0, 2.0), 1.0);
        assert_eq!(gk(-3.0, 2.0), -1.0);
        assert_eq!(gk(1.0, 2.0), 0.0);
        assert_eq!(tn(7.0, 5.0), 5.0);
        assert_eq!(tn(-7.0, 5.0), -5.0);
        assert_eq!(tn(3.0, 5.0), 3.0);

        let g = Grid::unit_square(4).unwrap();
        let f = Field::from_fn(g, |x| 10.0 * (x[0] - x[1])).unwrap();
        assert_eq!(truncate_gk(&f, 0.0).unwrap(), f);
        let sup = f.sup_norm();
        assert_eq!(truncate_gk(&f, sup).unwrap().sup_norm(), 0.0);
        assert_eq!(truncate_tn(&f, sup).unwrap(), f);
        assert!(truncate_gk(&f, -1.0).is_err());
        assert!(truncate_tn(&f, 0.0).is_err());
    }

    #[test]
    fn single_node_energy() {
        let g = Grid::single_node(&[1.0, 1.0]).unwrap();
        let a = 1.5;
        let f = Field::new(g, vec![a]).unwrap();
        let ev = ExponentVector::new(vec![2.0, 2.0]).unwrap();
        let h = 0.5;
        // two boundary edges per axis, each |a/h|², weight h²
        let expected = 2.0 * 2.0 * (a / h).powi(2) * h * h;
        assert!((anisotropic_energy(&f, &ev).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn energy_matches_explicit_loop_oracle() {
        let g = Grid::new(&[1.0, 1.5], &[6, 9]).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 5.0).cos() * x[1] + 0.3).unwrap();
        let ev = ExponentVector::new(vec![2.0, 2.0]).unwrap();
        // oracle: pad with zeros and sum squared differences along each axis
        let (nx, ny) = (6usize, 9usize);
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                0.0
            } else {
                f.values()[i as usize * ny + j as usize]
            }
        };
        let mut s = 0.0;
        for i in 0..=nx as isize {
            for j in 0..ny as isize {
                s += ((at(i, j) - at(i - 1, j)) / hx).powi(2);
            }
        }
        for i in 0..nx as isize {
            for j in 0..=ny as isize {
                s += ((at(i, j) - at(i, j - 1)) / hy).powi(2);
            }
        }
        let oracle = s * hx * hy;
        assert!((anisotropic_energy(&f, &ev).unwrap() - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let g = Grid::unit_square(4).unwrap();
        let ev = ExponentVector::new(vec![2.0, 2.0, 2.0]).unwrap();
        assert!(anisotropic_energy(&Field::zeros(g), &ev).is_err());
        let ev = ExponentVector::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(anisotropic_energy(&Field::zeros(g), &ev).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Grid::unit_square(2).unwrap();
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Field::new(g, vec![0.0; 3]).is_err());
    }
}
