//! Periodic box descriptor and the grid-valued field containers.
//!
//! Every field carries three components per vector slot even in the 2-D
//! debug mode: the 2-D grid has a single point along the third axis, so the
//! fields depend on `(x1, x2)` only while vectors and matrices stay 3-D.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Periodic box `[0, L)^dim` sampled with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    length: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, length: f64, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} (must be 2 or 3)")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {length}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{n} points per axis (need a power of two, at least 8)"
            )));
        }
        Ok(Grid { dim, length, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Array shape; the third axis collapses to one point in 2-D.
    pub fn shape(&self) -> [usize; 3] {
        if self.dim == 3 {
            [self.n, self.n, self.n]
        } else {
            [self.n, self.n, 1]
        }
    }

    /// Shape of the half-complex spectral array (last axis is real-to-complex).
    pub fn spectral_shape(&self) -> [usize; 3] {
        let [n0, n1, n2] = self.shape();
        [n0, n1, n2 / 2 + 1]
    }

    pub fn num_points(&self) -> usize {
        let [a, b, c] = self.shape();
        a * b * c
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Fundamental wavenumber `2π/L`.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Largest retained wavenumber index under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    /// The same box with a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Grid::new(self.dim, self.length, n)
    }

    /// The same resolution on a box of a different side length.
    pub fn with_length(&self, length: f64) -> Result<Self> {
        Grid::new(self.dim, length, self.n)
    }

    #[inline]
    pub fn flat(&self, idx: [usize; 3]) -> usize {
        let [_, n1, n2] = self.shape();
        (idx[0] * n1 + idx[1]) * n2 + idx[2]
    }

    #[inline]
    pub fn unflat(&self, flat: usize) -> [usize; 3] {
        let [_, n1, n2] = self.shape();
        [flat / (n1 * n2), (flat / n2) % n1, flat % n2]
    }

    /// Centered coordinate along one axis, in `(-L/2, L/2]`.
    #[inline]
    pub fn centered_coord(&self, i: usize) -> f64 {
        let x = i as f64 * self.spacing() - 0.5 * self.length;
        if x <= -0.5 * self.length {
            x + self.length
        } else {
            x
        }
    }

    /// Centered position `x - center` of a grid point; third entry is 0 in 2-D.
    #[inline]
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflat(flat);
        let mut x = [0.0; 3];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.centered_coord(idx[a]);
        }
        x
    }

    /// Distance of a grid point from the box center.
    #[inline]
    pub fn radius(&self, flat: usize) -> f64 {
        let x = self.position(flat);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }
}

/// Real scalar samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.num_points()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        ScalarField {
            grid,
            data: vec![value; grid.num_points()],
        }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.num_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.num_points(),
                found: data.len(),
            });
        }
        Ok(ScalarField { grid, data })
    }

    /// Samples `f(x)` at the centered grid positions.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.num_points()).map(|p| f(grid.position(p))).collect();
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        ScalarField {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Grid quadrature `h^dim Σ f`.
    pub fn integrate(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }

    /// L² inner product by grid quadrature.
    pub fn inner(&self, other: &Self) -> f64 {
        self.grid.cell_volume() * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// First non-finite sample, if any.
    pub fn find_non_finite(&self) -> Option<[usize; 3]> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| self.grid.unflat(p))
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Three-component vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub [ScalarField; 3]);

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField(std::array::from_fn(|_| ScalarField::zeros(grid)))
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut v = VectorField::zeros(grid);
        for p in 0..grid.num_points() {
            let val = f(grid.position(p));
            for (c, x) in val.into_iter().enumerate() {
                v.0[c][p] = x;
            }
        }
        v
    }

    pub fn grid(&self) -> &Grid {
        self.0[0].grid()
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            s.axpy(a, v);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|c| c.scale(a));
    }

    pub fn sub(&self, other: &Self) -> Self {
        VectorField(std::array::from_fn(|i| self.0[i].sub(&other.0[i])))
    }

    /// Largest component magnitude.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        let mut out = ScalarField::zeros(*self.grid());
        for p in 0..out.data().len() {
            out[p] = (self.0[0][p].powi(2) + self.0[1][p].powi(2) + self.0[2][p].powi(2)).sqrt();
        }
        out
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut out = self.0[0].mul(&other.0[0]);
        for c in 1..3 {
            for (o, (a, b)) in out
                .data_mut()
                .iter_mut()
                .zip(self.0[c].data().iter().zip(other.0[c].data()))
            {
                *o += a * b;
            }
        }
        out
    }

    /// `∫ |v|²` by grid quadrature.
    pub fn norm_l2_sq(&self) -> f64 {
        self.0.iter().map(|c| c.inner(c)).sum()
    }

    pub fn find_non_finite(&self) -> Option<[usize; 3]> {
        self.0.iter().find_map(|c| c.find_non_finite())
    }
}

/// 3×3 matrix field; `m.0[i][j]` is row `i`, column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField(pub [[ScalarField; 3]; 3]);

impl MatrixField {
    pub fn zeros(grid: Grid) -> Self {
        MatrixField(std::array::from_fn(|_| {
            std::array::from_fn(|_| ScalarField::zeros(grid))
        }))
    }

    pub fn identity(grid: Grid) -> Self {
        MatrixField(std::array::from_fn(|i| {
            std::array::from_fn(|j| ScalarField::constant(grid, if i == j { 1.0 } else { 0.0 }))
        }))
    }

    pub fn grid(&self) -> &Grid {
        self.0[0][0].grid()
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j].axpy(a, &x.0[i][j]);
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().flatten().for_each(|c| c.scale(a));
    }

    pub fn sub(&self, other: &Self) -> Self {
        MatrixField(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j].sub(&other.0[i][j]))
        }))
    }

    pub fn transpose(&self) -> Self {
        MatrixField(std::array::from_fn(|i| std::array::from_fn(|j| self.0[j][i].clone())))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    /// `∫ |M|²` (Frobenius) by grid quadrature.
    pub fn norm_l2_sq(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.inner(c)).sum()
    }

    /// Pointwise determinant.
    pub fn det(&self) -> ScalarField {
        let g = *self.grid();
        let m = &self.0;
        let mut out = ScalarField::zeros(g);
        for p in 0..g.num_points() {
            let a = |i: usize, j: usize| m[i][j][p];
            out[p] = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
        }
        out
    }

    pub fn find_non_finite(&self) -> Option<[usize; 3]> {
        self.0.iter().flatten().find_map(|c| c.find_non_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, 1.0, 16).is_err());
        assert!(Grid::new(3, -1.0, 16).is_err());
        assert!(Grid::new(3, 1.0, 4).is_err());
        assert!(Grid::new(3, 1.0, 24).is_err());
        assert!(Grid::new(2, 1.0, 8).is_ok());
    }

    #[test]
    fn centered_coordinates_cover_half_open_box() {
        let g = Grid::new(3, 2.0 * PI, 16).unwrap();
        let xs: Vec<f64> = (0..16).map(|i| g.centered_coord(i)).collect();
        assert!(xs.iter().all(|&x| x > -PI && x <= PI + 1e-15));
        assert_eq!(g.centered_coord(8), 0.0);
        assert!((g.centered_coord(0) - PI).abs() < 1e-15);
    }

    #[test]
    fn flat_index_round_trip() {
        let g = Grid::new(3, 1.0, 8).unwrap();
        for p in [0, 7, 63, 511, 300] {
            assert_eq!(g.flat(g.unflat(p)), p);
        }
        let g2 = Grid::new(2, 1.0, 8).unwrap();
        assert_eq!(g2.num_points(), 64);
        assert_eq!(g2.position(9)[2], 0.0);
    }

    #[test]
    fn identity_determinant() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let det = MatrixField::identity(g).det();
        assert!(det.data().iter().all(|&d| d == 1.0));
    }
}
