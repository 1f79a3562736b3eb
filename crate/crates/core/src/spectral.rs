//! Fourier transforms and exact spectral calculus on the periodic grid.
//!
//! Coefficients are normalized so that `f(x) = Σ_k c_k e^{ik·x}`: the forward
//! transform divides by the number of points, a constant field maps to its
//! value at `k = 0`, and Parseval reads `h^d Σ|f|² = L^d Σ_k |c_k|²`.
//! The last array axis is stored half-complex.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

/// Half-complex spectral coefficients of a real field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid) -> Self {
        let [a, b, c] = grid.spectral_shape();
        Spectrum {
            grid,
            data: vec![Complex64::new(0.0, 0.0); a * b * c],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn axpy(&mut self, a: Complex64, x: &Spectrum) {
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn add_assign(&mut self, x: &Spectrum) {
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    /// Number of coefficients with magnitude above `tol`.
    pub fn count_nonzero(&self, tol: f64) -> usize {
        self.data.iter().filter(|c| c.norm() > tol).count()
    }
}

/// Transform plans and wavenumber tables for one grid.
pub struct Spectral {
    grid: Grid,
    r2c: Option<Arc<dyn RealToComplex<f64>>>,
    c2r: Option<Arc<dyn ComplexToReal<f64>>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Wavenumbers per axis, full (Nyquist kept) and first-derivative (Nyquist zeroed).
    k_full: [Vec<f64>; 3],
    k_deriv: [Vec<f64>; 3],
    /// Signed integer mode index per axis.
    k_index: [Vec<i64>; 3],
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Arc<Self> {
        let [n0, _, n2] = grid.shape();
        let [_, _, m2] = grid.spectral_shape();
        let (r2c, c2r) = if n2 > 1 {
            let mut planner = RealFftPlanner::<f64>::new();
            (Some(planner.plan_fft_forward(n2)), Some(planner.plan_fft_inverse(n2)))
        } else {
            (None, None)
        };
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n0);
        let inv = planner.plan_fft_inverse(n0);
        let k0 = grid.k0();
        let index_full = |n: usize| -> Vec<i64> {
            (0..n)
                .map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 })
                .collect()
        };
        let k_index = [index_full(n0), index_full(n0), (0..m2 as i64).collect::<Vec<_>>()];
        let nyq = [n0 as i64 / 2, n0 as i64 / 2, n2 as i64 / 2];
        let k_full: [Vec<f64>; 3] = std::array::from_fn(|a| k_index[a].iter().map(|&j| k0 * j as f64).collect());
        let k_deriv: [Vec<f64>; 3] = std::array::from_fn(|a| {
            k_index[a]
                .iter()
                .map(|&j| if j == nyq[a] { 0.0 } else { k0 * j as f64 })
                .collect()
        });
        Arc::new(Spectral {
            grid,
            r2c,
            c2r,
            fwd,
            inv,
            k_full,
            k_deriv,
            k_index,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, f: &ScalarField) -> Result<()> {
        if f.grid() != &self.grid || f.data().len() != self.grid.num_points() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.num_points(),
                found: f.data().len(),
            });
        }
        Ok(())
    }

    /// Forward transform; errors on a field from another grid.
    pub fn forward(&self, f: &ScalarField) -> Result<Spectrum> {
        self.check(f)?;
        Ok(self.fwd_unchecked(f.data()))
    }

    pub(crate) fn fwd(&self, f: &ScalarField) -> Spectrum {
        debug_assert_eq!(f.data().len(), self.grid.num_points());
        self.fwd_unchecked(f.data())
    }

    fn fwd_unchecked(&self, values: &[f64]) -> Spectrum {
        let [n0, n1, n2] = self.grid.shape();
        let [_, _, m2] = self.grid.spectral_shape();
        let mut out = Spectrum::zeros(self.grid);
        match &self.r2c {
            Some(r2c) => {
                let mut row = vec![0.0; n2];
                let mut scratch = r2c.make_scratch_vec();
                for (src, dst) in values.chunks_exact(n2).zip(out.data.chunks_exact_mut(m2)) {
                    row.copy_from_slice(src);
                    r2c.process_with_scratch(&mut row, dst, &mut scratch)
                        .expect("r2c length");
                }
            }
            None => {
                for (o, &v) in out.data.iter_mut().zip(values) {
                    *o = Complex64::new(v, 0.0);
                }
            }
        }
        self.complex_axes(&mut out.data, n0, n1, m2, &self.fwd);
        let norm = 1.0 / self.grid.num_points() as f64;
        out.scale(norm);
        out
    }

    /// Backward transform to real samples.
    pub fn backward(&self, s: &Spectrum) -> ScalarField {
        let mut data = s.data.clone();
        let [n0, n1, n2] = self.grid.shape();
        let [_, _, m2] = self.grid.spectral_shape();
        self.complex_axes(&mut data, n0, n1, m2, &self.inv);
        let mut out = ScalarField::zeros(self.grid);
        match &self.c2r {
            Some(c2r) => {
                let mut scratch = c2r.make_scratch_vec();
                for (src, dst) in data.chunks_exact_mut(m2).zip(out.data_mut().chunks_exact_mut(n2)) {
                    // DC and Nyquist bins of a real signal are real.
                    src[0].im = 0.0;
                    src[m2 - 1].im = 0.0;
                    c2r.process_with_scratch(src, dst, &mut scratch).expect("c2r length");
                }
            }
            None => {
                for (o, v) in out.data_mut().iter_mut().zip(&data) {
                    *o = v.re;
                }
            }
        }
        out
    }

    /// Complex transforms along axes 1 and 0 of a `[n0][n1][m2]` array.
    fn complex_axes(&self, data: &mut [Complex64], n0: usize, n1: usize, m2: usize, plan: &Arc<dyn Fft<f64>>) {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // axis 1: transpose each [n1][m2] plane to [m2][n1]
        let plane = n1 * m2;
        let mut buf = vec![Complex64::new(0.0, 0.0); plane.max(n0 * plane)];
        for p in data.chunks_exact_mut(plane) {
            for i1 in 0..n1 {
                for i2 in 0..m2 {
                    buf[i2 * n1 + i1] = p[i1 * m2 + i2];
                }
            }
            plan.process_with_scratch(&mut buf[..plane], &mut scratch);
            for i1 in 0..n1 {
                for i2 in 0..m2 {
                    p[i1 * m2 + i2] = buf[i2 * n1 + i1];
                }
            }
        }
        // axis 0: transpose [n0][plane] to [plane][n0]
        let total = n0 * plane;
        for i0 in 0..n0 {
            let src = &data[i0 * plane..(i0 + 1) * plane];
            for (q, v) in src.iter().enumerate() {
                buf[q * n0 + i0] = *v;
            }
        }
        plan.process_with_scratch(&mut buf[..total], &mut scratch);
        for i0 in 0..n0 {
            let dst = &mut data[i0 * plane..(i0 + 1) * plane];
            for (q, v) in dst.iter_mut().enumerate() {
                *v = buf[q * n0 + i0];
            }
        }
    }

    /// Applies a real multiplier `m(kx, ky, kz, index)` to every coefficient.
    pub(crate) fn apply<F>(&self, s: &mut Spectrum, mut f: F)
    where
        F: FnMut(usize, [usize; 3], &mut Complex64),
    {
        let [n0, n1, m2] = self.grid.spectral_shape();
        let mut q = 0;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..m2 {
                    f(q, [i0, i1, i2], &mut s.data[q]);
                    q += 1;
                }
            }
        }
    }

    #[inline]
    pub(crate) fn kd(&self, idx: [usize; 3]) -> [f64; 3] {
        [
            self.k_deriv[0][idx[0]],
            self.k_deriv[1][idx[1]],
            self.k_deriv[2][idx[2]],
        ]
    }

    #[inline]
    pub(crate) fn k2(&self, idx: [usize; 3]) -> f64 {
        let k = [self.k_full[0][idx[0]], self.k_full[1][idx[1]], self.k_full[2][idx[2]]];
        k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
    }

    /// Integer mode index `(k1, k2, k3)` of a spectral slot.
    #[inline]
    pub fn mode(&self, idx: [usize; 3]) -> [i64; 3] {
        [
            self.k_index[0][idx[0]],
            self.k_index[1][idx[1]],
            self.k_index[2][idx[2]],
        ]
    }

    /// Multiplies by `i k_axis` (first derivative in spectral space).
    pub fn diff_hat(&self, s: &Spectrum, axis: usize) -> Spectrum {
        let mut out = s.clone();
        if axis >= self.grid.dim() {
            out.data.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            return out;
        }
        let k = &self.k_deriv[axis];
        self.apply(&mut out, |_, idx, c| {
            let kk = k[idx[axis]];
            *c = Complex64::new(-kk * c.im, kk * c.re);
        });
        out
    }

    pub fn laplacian_hat(&self, s: &Spectrum) -> Spectrum {
        let mut out = s.clone();
        self.apply(&mut out, |_, idx, c| *c *= -self.k2(idx));
        out
    }

    /// Zeroes every mode with some `|k_i|` above `n/3`.
    pub fn dealias(&self, s: &mut Spectrum) {
        let cut = self.grid.dealias_cutoff() as i64;
        self.apply(s, |_, idx, c| {
            let m = self.mode(idx);
            if m[0].abs() > cut || m[1].abs() > cut || m[2].abs() > cut {
                *c = Complex64::new(0.0, 0.0);
            }
        });
    }

    pub fn dealias_field(&self, f: &ScalarField) -> ScalarField {
        let mut s = self.fwd(f);
        self.dealias(&mut s);
        self.backward(&s)
    }

    pub fn dealias_vector(&self, v: &VectorField) -> VectorField {
        VectorField(std::array::from_fn(|c| self.dealias_field(&v.0[c])))
    }

    /// Leray projection of a spectral vector: `v - κ(κ·v)/|κ|²`.
    pub fn project_hat(&self, v: &mut [Spectrum; 3]) {
        let [a, b, c] = v;
        let [n0, n1, m2] = self.grid.spectral_shape();
        let mut q = 0;
        for i0 in 0..n0 {
            for i1 in 0..n1 {
                for i2 in 0..m2 {
                    let k = self.kd([i0, i1, i2]);
                    let kk = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                    if kk > 0.0 {
                        let dot = a.data[q] * k[0] + b.data[q] * k[1] + c.data[q] * k[2];
                        a.data[q] -= dot * (k[0] / kk);
                        b.data[q] -= dot * (k[1] / kk);
                        c.data[q] -= dot * (k[2] / kk);
                    }
                    q += 1;
                }
            }
        }
    }

    /// Spectral divergence `i κ · v`.
    pub fn divergence_hat(&self, v: &[Spectrum; 3]) -> Spectrum {
        let mut out = self.diff_hat(&v[0], 0);
        for (c, vc) in v.iter().enumerate().skip(1) {
            out.add_assign(&self.diff_hat(vc, c));
        }
        out
    }

    pub fn derivative(&self, f: &ScalarField, axis: usize) -> ScalarField {
        self.backward(&self.diff_hat(&self.fwd(f), axis))
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        let s = self.fwd(f);
        VectorField(std::array::from_fn(|a| self.backward(&self.diff_hat(&s, a))))
    }

    /// Gradient from an already transformed field.
    pub fn gradient_hat(&self, s: &Spectrum) -> VectorField {
        VectorField(std::array::from_fn(|a| self.backward(&self.diff_hat(s, a))))
    }

    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        let hats: [Spectrum; 3] = std::array::from_fn(|c| self.fwd(&v.0[c]));
        self.backward(&self.divergence_hat(&hats))
    }

    pub fn curl(&self, v: &VectorField) -> VectorField {
        let hats: [Spectrum; 3] = std::array::from_fn(|c| self.fwd(&v.0[c]));
        VectorField(std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let mut s = self.diff_hat(&hats[k], j);
            s.axpy(Complex64::new(-1.0, 0.0), &self.diff_hat(&hats[j], k));
            self.backward(&s)
        }))
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        self.backward(&self.laplacian_hat(&self.fwd(f)))
    }

    /// Zero-mean solution of `Δg = f`; `f` must have (near) zero mean.
    pub fn inverse_laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        let mean = f.mean();
        let tolerance = 1e-10 * f.max_abs().max(1.0);
        if mean.abs() > tolerance {
            return Err(Error::NonZeroMean { mean, tolerance });
        }
        let mut s = self.fwd(f);
        self.apply(&mut s, |_, idx, c| {
            let kk = self.k2(idx);
            *c = if kk > 0.0 { *c / -kk } else { Complex64::new(0.0, 0.0) };
        });
        Ok(self.backward(&s))
    }

    pub fn leray_project(&self, v: &VectorField) -> VectorField {
        let mut hats: [Spectrum; 3] = std::array::from_fn(|c| self.fwd(&v.0[c]));
        self.project_hat(&mut hats);
        VectorField(std::array::from_fn(|c| self.backward(&hats[c])))
    }

    /// Exact solution of `∂_t² f = Δf` at time `t` from `(f, ∂_t f)`; returns `(f(t), ∂_t f(t))`.
    pub fn wave_evolve(&self, f: &ScalarField, g: &ScalarField, t: f64) -> (ScalarField, ScalarField) {
        let fh = self.fwd(f);
        let gh = self.fwd(g);
        let mut a = Spectrum::zeros(self.grid);
        let mut b = Spectrum::zeros(self.grid);
        self.apply(&mut a, |q, idx, c| {
            let w = self.k2(idx).sqrt();
            let (cs, sn) = ((w * t).cos(), (w * t).sin());
            let sinc = if w == 0.0 { t } else { sn / w };
            *c = fh.data[q] * cs + gh.data[q] * sinc;
            b.data[q] = -fh.data[q] * (w * sn) + gh.data[q] * cs;
        });
        (self.backward(&a), self.backward(&b))
    }

    /// `L^d Σ_k |c_k|²` over the full (Hermitian-completed) spectrum.
    pub fn spectral_energy(&self, s: &Spectrum) -> f64 {
        let [_, _, n2] = self.grid.shape();
        let [_, _, m2] = self.grid.spectral_shape();
        let mut sum = 0.0;
        self.apply(&mut s.clone(), |_, idx, c| {
            let w = if n2 == 1 || idx[2] == 0 || (n2 % 2 == 0 && idx[2] == m2 - 1) {
                1.0
            } else {
                2.0
            };
            sum += w * c.norm_sqr();
        });
        sum * self.grid.volume()
    }

    /// Spectral interpolation onto another resolution of the same box
    /// (zero padding when refining, truncation when coarsening).
    pub fn resample(&self, f: &ScalarField, target: &Spectral) -> ScalarField {
        let src = self.fwd(f);
        let mut dst = Spectrum::zeros(target.grid);
        let src_nyq = self.grid.n() as i64 / 2;
        let dst_nyq = target.grid.n() as i64 / 2;
        let lim = src_nyq.min(dst_nyq);
        let [s0, s1, sm2] = self.grid.spectral_shape();
        let [_, t1, tm2] = target.grid.spectral_shape();
        let tn = target.grid.n() as i64;
        for i0 in 0..s0 {
            for i1 in 0..s1 {
                for i2 in 0..sm2 {
                    let m = self.mode([i0, i1, i2]);
                    // Nyquist modes are ambiguous between resolutions; drop them.
                    if m.iter().any(|&x| x.abs() >= lim) {
                        continue;
                    }
                    let wrap = |x: i64| -> usize {
                        if x >= 0 {
                            x as usize
                        } else {
                            (x + tn) as usize
                        }
                    };
                    let (j0, j1, j2) = (wrap(m[0]), wrap(m[1]), m[2] as usize);
                    let q = (i0 * s1 + i1) * sm2 + i2;
                    let t = (j0 * t1 + j1) * tm2 + j2;
                    dst.data[t] = src.data[q];
                }
            }
        }
        target.backward(&dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid3(n: usize) -> Grid {
        Grid::new(3, 2.0 * PI, n).unwrap()
    }

    #[test]
    fn constant_field_maps_to_zero_mode() {
        let g = grid3(16);
        let sp = Spectral::new(g);
        let s = sp.forward(&ScalarField::constant(g, 2.5)).unwrap();
        assert!((s.data()[0].re - 2.5).abs() < 1e-14);
        assert_eq!(s.count_nonzero(1e-13), 1);
    }

    #[test]
    fn single_harmonic_has_two_modes() {
        let g = grid3(16);
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let s = sp.forward(&f).unwrap();
        // Half-complex storage keeps both k1 = ±1 (axis 0 is a full axis).
        assert_eq!(s.count_nonzero(1e-13), 2);
        let mut found = vec![];
        sp.apply(&mut s.clone(), |_, idx, c| {
            if c.norm() > 1e-13 {
                found.push(sp.mode(idx));
            }
        });
        found.sort();
        assert_eq!(found, vec![[-1, 0, 0], [1, 0, 0]]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let sp = Spectral::new(grid3(16));
        let other = ScalarField::zeros(grid3(8));
        assert!(matches!(sp.forward(&other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn nyquist_mode_is_dealiased() {
        let g = grid3(16);
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x| (8.0 * x[1]).cos());
        let out = sp.dealias_field(&f);
        assert!(out.max_abs() < 1e-14);
        let low = ScalarField::from_fn(g, |x| (5.0 * x[1]).cos() + (3.0 * x[2]).sin());
        let kept = sp.dealias_field(&low);
        assert!(kept.sub(&low).max_abs() < 1e-14);
    }

    #[test]
    fn inverse_laplacian_rejects_mean() {
        let g = grid3(8);
        let sp = Spectral::new(g);
        let f = ScalarField::constant(g, 1.0);
        assert!(matches!(sp.inverse_laplacian(&f), Err(Error::NonZeroMean { .. })));
        let z = sp.inverse_laplacian(&ScalarField::zeros(g)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn two_dimensional_transform_round_trip() {
        let g = Grid::new(2, 2.0 * PI, 32).unwrap();
        let sp = Spectral::new(g);
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin() * (x[1]).cos() + 0.3);
        let back = sp.backward(&sp.forward(&f).unwrap());
        assert!(back.sub(&f).max_abs() < 1e-14);
        let dz = sp.derivative(&f, 2);
        assert_eq!(dz.max_abs(), 0.0);
        let dx = sp.derivative(&f, 0);
        let exact = ScalarField::from_fn(g, |x| 2.0 * (2.0 * x[0]).cos() * (x[1]).cos());
        assert!(dx.sub(&exact).max_abs() < 1e-12);
    }
}
