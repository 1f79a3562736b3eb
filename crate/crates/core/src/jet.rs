//! Truncated Taylor series in time of grid fields.
//!
//! A jet `[f_0, f_1, ..., f_K]` stands for `f(t0 + τ) = Σ f_k τ^k`. Pointwise
//! arithmetic uses Cauchy products, so evaluating the right-hand side on a jet
//! yields the exact time derivatives of the semi-discrete flow.

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet(pub Vec<ScalarField>);

impl Jet {
    pub fn constant(f: ScalarField) -> Self {
        Jet(vec![f])
    }

    pub fn zeros(grid: Grid, order: usize) -> Self {
        Jet(vec![ScalarField::zeros(grid); order + 1])
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn grid(&self) -> &Grid {
        self.0[0].grid()
    }

    pub fn value(&self) -> &ScalarField {
        &self.0[0]
    }

    pub fn coeff(&self, k: usize) -> &ScalarField {
        &self.0[k]
    }

    pub fn truncated(&self, order: usize) -> Jet {
        Jet(self.0[..=order.min(self.order())].to_vec())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.data().iter().all(|&v| v == 0.0))
    }

    /// Applies a linear, time-independent operator to every coefficient.
    pub fn map_linear(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Jet {
        Jet(self.0.iter().map(f).collect())
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let k = self.order().min(o.order());
        Jet((0..=k).map(|i| self.0[i].add(&o.0[i])).collect())
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        let k = self.order().min(o.order());
        Jet((0..=k).map(|i| self.0[i].sub(&o.0[i])).collect())
    }

    pub fn scaled(&self, a: f64) -> Jet {
        Jet(self.0.iter().map(|c| c.scaled(a)).collect())
    }

    /// `self += a * x` over the common order.
    pub fn axpy(&mut self, a: f64, x: &Jet) {
        let k = self.order().min(x.order());
        self.0.truncate(k + 1);
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            s.axpy(a, v);
        }
    }

    /// Cauchy product.
    pub fn mul(&self, o: &Jet) -> Jet {
        let k = self.order().min(o.order());
        let grid = *self.grid();
        let n = grid.num_points();
        let mut out = Vec::with_capacity(k + 1);
        for m in 0..=k {
            let mut c = vec![0.0; n];
            for i in 0..=m {
                let a = self.0[i].data();
                let b = o.0[m - i].data();
                for p in 0..n {
                    c[p] += a[p] * b[p];
                }
            }
            out.push(ScalarField::from_vec(grid, c).expect("jet grid"));
        }
        Jet(out)
    }

    /// `(sin a, cos a)` by the coupled Taylor recurrences.
    pub fn sin_cos(&self) -> (Jet, Jet) {
        let k = self.order();
        let mut s = vec![self.0[0].map(f64::sin)];
        let mut c = vec![self.0[0].map(f64::cos)];
        let grid = *self.grid();
        for m in 1..=k {
            let mut sm = ScalarField::zeros(grid);
            let mut cm = ScalarField::zeros(grid);
            for j in 1..=m {
                let w = j as f64 / m as f64;
                let aj = &self.0[j];
                for p in 0..grid.num_points() {
                    sm[p] += w * aj[p] * c[m - j][p];
                    cm[p] -= w * aj[p] * s[m - j][p];
                }
            }
            s.push(sm);
            c.push(cm);
        }
        (Jet(s), Jet(c))
    }

    /// Quotient `self / den`.
    pub fn div(&self, den: &Jet) -> Jet {
        let k = self.order().min(den.order());
        let grid = *self.grid();
        let mut q: Vec<ScalarField> = Vec::with_capacity(k + 1);
        for m in 0..=k {
            let mut qm = self.0[m].clone();
            for j in 1..=m {
                for p in 0..grid.num_points() {
                    qm[p] -= den.0[j][p] * q[m - j][p];
                }
            }
            for p in 0..grid.num_points() {
                qm[p] /= den.0[0][p];
            }
            q.push(qm);
        }
        Jet(q)
    }

    /// Time derivative; the order drops by one.
    pub fn dt(&self) -> Jet {
        let k = self.order();
        assert!(k >= 1, "time derivative of an order-0 jet");
        Jet((0..k).map(|m| self.0[m + 1].scaled((m + 1) as f64)).collect())
    }

    /// `t ∂_t` expanded about `t0`: coefficient `m` is `t0 (m+1) f_{m+1} + m f_m`.
    pub fn t_dt(&self, t0: f64) -> Jet {
        let k = self.order();
        assert!(k >= 1, "time derivative of an order-0 jet");
        Jet((0..k)
            .map(|m| {
                let mut c = self.0[m + 1].scaled(t0 * (m + 1) as f64);
                c.axpy(m as f64, &self.0[m]);
                c
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(2, 1.0, 8).unwrap()
    }

    fn poly(cs: &[f64]) -> Jet {
        Jet(cs.iter().map(|&c| ScalarField::constant(grid(), c)).collect())
    }

    fn at0(j: &Jet) -> Vec<f64> {
        j.0.iter().map(|c| c[0]).collect()
    }

    #[test]
    fn cauchy_product_matches_polynomial_product() {
        // (1 + 2τ)(3 - τ + τ²) = 3 + 5τ - τ² + 2τ³
        let p = poly(&[1.0, 2.0, 0.0, 0.0]).mul(&poly(&[3.0, -1.0, 1.0, 0.0]));
        assert_eq!(at0(&p), vec![3.0, 5.0, -1.0, 2.0]);
    }

    #[test]
    fn sine_of_linear_jet_matches_taylor_coefficients() {
        // sin(a + bτ) about τ = 0
        let (a, b) = (0.3_f64, 0.7_f64);
        let (s, c) = poly(&[a, b, 0.0, 0.0, 0.0]).sin_cos();
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        let ds = [a.sin(), a.cos(), -a.sin(), -a.cos(), a.sin()];
        let dc = [a.cos(), -a.sin(), -a.cos(), a.sin(), a.cos()];
        for k in 0..5 {
            let ek = b.powi(k as i32) / fact[k];
            assert!((s.0[k][0] - ds[k] * ek).abs() < 1e-15);
            assert!((c.0[k][0] - dc[k] * ek).abs() < 1e-15);
        }
    }

    #[test]
    fn tangent_by_division() {
        let x = poly(&[0.2, 0.5, 0.1, 0.0]);
        let (s, c) = x.sin_cos();
        let t = s.div(&c);
        // finite-difference oracle on the composed function
        let f = |tau: f64| (0.2 + 0.5 * tau + 0.1 * tau * tau).tan();
        let h = 1e-3;
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h) / 2.0;
        assert!((t.0[0][0] - f(0.0)).abs() < 1e-15);
        assert!((t.0[1][0] - d1).abs() < 1e-6);
        assert!((t.0[2][0] - d2).abs() < 1e-5);
    }

    #[test]
    fn scaling_time_derivative() {
        // f = τ² about t0 = 2 means f(t) = (t-2)²; t f'(t) at τ: (2+τ)·2τ = 4τ + 2τ²
        let f = poly(&[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(at0(&f.t_dt(2.0)), vec![0.0, 4.0, 2.0]);
        assert_eq!(at0(&f.dt()), vec![0.0, 2.0, 0.0]);
    }
}
