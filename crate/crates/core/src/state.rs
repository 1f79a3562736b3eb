//! State containers for the director and angle formulations.

use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField, VectorField};
use crate::spectral::Spectral;

pub type AngleField = [ScalarField; 2];

/// Common access to the grid fields of a state, in a fixed component order.
pub trait FieldState: Clone {
    fn time(&self) -> f64;
    fn set_time(&mut self, t: f64);
    fn components(&self) -> Vec<&ScalarField>;
    fn components_mut(&mut self) -> Vec<&mut ScalarField>;

    fn grid(&self) -> Grid {
        *self.components()[0].grid()
    }

    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.components_mut().into_iter().zip(x.components()) {
            s.axpy(a, v);
        }
    }

    /// Largest pointwise difference over all components.
    fn max_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn find_non_finite(&self) -> Option<(usize, [usize; 3])> {
        self.components()
            .iter()
            .enumerate()
            .find_map(|(c, f)| f.find_non_finite().map(|i| (c, i)))
    }
}

/// `(u, F, d, w)` with `w = D_t d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFD {
    pub t: f64,
    pub u: VectorField,
    pub f: MatrixField,
    pub d: VectorField,
    pub w: VectorField,
}

/// `(u, H, φ, ψ)` with `H = F - I` and `ψ = D_t φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateHPhi {
    pub t: f64,
    pub u: VectorField,
    pub h: MatrixField,
    pub phi: AngleField,
    pub psi: AngleField,
}

impl StateFD {
    pub fn equilibrium(grid: Grid) -> Self {
        let mut d = VectorField::zeros(grid);
        d.0[0] = ScalarField::constant(grid, 1.0);
        StateFD {
            t: 0.0,
            u: VectorField::zeros(grid),
            f: MatrixField::identity(grid),
            d,
            w: VectorField::zeros(grid),
        }
    }
}

impl StateHPhi {
    pub fn equilibrium(grid: Grid) -> Self {
        StateHPhi {
            t: 0.0,
            u: VectorField::zeros(grid),
            h: MatrixField::zeros(grid),
            phi: [ScalarField::zeros(grid), ScalarField::zeros(grid)],
            psi: [ScalarField::zeros(grid), ScalarField::zeros(grid)],
        }
    }
}

impl FieldState for StateFD {
    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    fn components(&self) -> Vec<&ScalarField> {
        let mut v: Vec<&ScalarField> = self.u.0.iter().collect();
        v.extend(self.f.0.iter().flatten());
        v.extend(self.d.0.iter());
        v.extend(self.w.0.iter());
        v
    }

    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v: Vec<&mut ScalarField> = self.u.0.iter_mut().collect();
        v.extend(self.f.0.iter_mut().flatten());
        v.extend(self.d.0.iter_mut());
        v.extend(self.w.0.iter_mut());
        v
    }
}

impl FieldState for StateHPhi {
    fn time(&self) -> f64 {
        self.t
    }

    fn set_time(&mut self, t: f64) {
        self.t = t;
    }

    fn components(&self) -> Vec<&ScalarField> {
        let mut v: Vec<&ScalarField> = self.u.0.iter().collect();
        v.extend(self.h.0.iter().flatten());
        v.extend(self.phi.iter());
        v.extend(self.psi.iter());
        v
    }

    fn components_mut(&mut self) -> Vec<&mut ScalarField> {
        let mut v: Vec<&mut ScalarField> = self.u.0.iter_mut().collect();
        v.extend(self.h.0.iter_mut().flatten());
        v.extend(self.phi.iter_mut());
        v.extend(self.psi.iter_mut());
        v
    }
}

/// Max-norm constraint residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintReport {
    pub div_u: f64,
    pub div_ht: f64,
    pub curl_compat: f64,
    pub director_norm: f64,
    pub tangency: f64,
}

impl ConstraintReport {
    pub fn max(&self) -> f64 {
        [
            self.div_u,
            self.div_ht,
            self.curl_compat,
            self.director_norm,
            self.tangency,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("div_u", self.div_u),
            ("div_HT", self.div_ht),
            ("curl_compat", self.curl_compat),
            ("director_norm", self.director_norm),
            ("tangency", self.tangency),
        ]
    }
}

pub fn director_from_angles(phi1: f64, phi2: f64) -> [f64; 3] {
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    [c1 * c2, s1 * c2, s2]
}

pub fn d_from_angles(phi: &AngleField) -> VectorField {
    let grid = *phi[0].grid();
    let mut d = VectorField::zeros(grid);
    for p in 0..grid.num_points() {
        let v = director_from_angles(phi[0][p], phi[1][p]);
        for c in 0..3 {
            d.0[c][p] = v[c];
        }
    }
    d
}

/// Inverse of the angle chart on the branch `d_1 > 0`, `|d_3| < 1`.
pub fn angles_from_d(d: &VectorField) -> Result<AngleField> {
    let grid = *d.grid();
    let mut phi = [ScalarField::zeros(grid), ScalarField::zeros(grid)];
    for p in 0..grid.num_points() {
        let v = [d.0[0][p], d.0[1][p], d.0[2][p]];
        if !(v[0] > 0.0) || !(v[2].abs() < 1.0) {
            return Err(Error::BranchViolation {
                index: grid.unflat(p),
                d: v,
            });
        }
        phi[0][p] = v[1].atan2(v[0]);
        phi[1][p] = v[2].atan2(v[0].hypot(v[1]));
    }
    Ok(phi)
}

/// `w = Σ_a ∂d/∂φ_a ψ_a`.
pub fn w_from_angles(phi: &AngleField, psi: &AngleField) -> VectorField {
    let grid = *phi[0].grid();
    let mut w = VectorField::zeros(grid);
    for p in 0..grid.num_points() {
        let (s1, c1) = phi[0][p].sin_cos();
        let (s2, c2) = phi[1][p].sin_cos();
        let (a, b) = (psi[0][p], psi[1][p]);
        w.0[0][p] = -s1 * c2 * a - c1 * s2 * b;
        w.0[1][p] = c1 * c2 * a - s1 * s2 * b;
        w.0[2][p] = c2 * b;
    }
    w
}

/// Tangential part of `w` expressed in the angle frame.
pub fn psi_from_w(phi: &AngleField, w: &VectorField) -> AngleField {
    let grid = *phi[0].grid();
    let mut psi = [ScalarField::zeros(grid), ScalarField::zeros(grid)];
    for p in 0..grid.num_points() {
        let (s1, c1) = phi[0][p].sin_cos();
        let (s2, c2) = phi[1][p].sin_cos();
        let v = [w.0[0][p], w.0[1][p], w.0[2][p]];
        // ∂₁d = c2 (-s1, c1, 0), ∂₂d = (-c1 s2, -s1 s2, c2)
        psi[0][p] = (-s1 * v[0] + c1 * v[1]) / c2;
        psi[1][p] = -c1 * s2 * v[0] - s1 * s2 * v[1] + c2 * v[2];
    }
    psi
}

pub fn convert_fd_to_hphi(s: &StateFD) -> Result<StateHPhi> {
    let grid = *s.u.grid();
    let phi = angles_from_d(&s.d)?;
    let psi = psi_from_w(&phi, &s.w);
    let mut h = s.f.clone();
    h.axpy(-1.0, &MatrixField::identity(grid));
    Ok(StateHPhi {
        t: s.t,
        u: s.u.clone(),
        h,
        phi,
        psi,
    })
}

pub fn convert_hphi_to_fd(s: &StateHPhi) -> StateFD {
    let grid = *s.u.grid();
    let mut f = s.h.clone();
    f.axpy(1.0, &MatrixField::identity(grid));
    StateFD {
        t: s.t,
        u: s.u.clone(),
        f,
        d: d_from_angles(&s.phi),
        w: w_from_angles(&s.phi, &s.psi),
    }
}

/// Errors if `|φ₂|` comes within `margin` of `π/2`.
pub fn check_chart(phi: &AngleField, margin: f64) -> Result<()> {
    let limit = std::f64::consts::FRAC_PI_2 - margin;
    let grid = *phi[1].grid();
    for (p, &v) in phi[1].data().iter().enumerate() {
        if !(v.abs() < limit) {
            return Err(Error::ChartMargin {
                index: grid.unflat(p),
                phi2: v,
                margin,
            });
        }
    }
    Ok(())
}

fn matrix_gradient(sp: &Spectral, m: &MatrixField) -> Vec<Vec<VectorField>> {
    m.0.iter()
        .map(|row| row.iter().map(|f| sp.gradient(f)).collect())
        .collect()
}

/// `max_j |∂_i M_ij|`.
fn max_div_transpose(grad: &[Vec<VectorField>]) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..3 {
        let n = grad[0][j].0[0].data().len();
        for p in 0..n {
            let s: f64 = (0..3).map(|i| grad[i][j].0[i][p]).sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// `max |F_mj ∂_m F_ik − F_mk ∂_m F_ij|` given `∂F`; with `shift` the identity
/// is added to `m` first so that `H` may be passed for `F - I`.
fn max_curl(m: &MatrixField, grad: &[Vec<VectorField>], shift: f64) -> f64 {
    let n = m.0[0][0].data().len();
    let mut worst = 0.0_f64;
    let fm = |a: usize, b: usize, p: usize| m.0[a][b][p] + if a == b { shift } else { 0.0 };
    for i in 0..3 {
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            for p in 0..n {
                let mut r = 0.0;
                for mm in 0..3 {
                    r += fm(mm, j, p) * grad[i][k].0[mm][p] - fm(mm, k, p) * grad[i][j].0[mm][p];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

pub fn constraint_residuals_fd(sp: &Spectral, s: &StateFD) -> ConstraintReport {
    let grad = matrix_gradient(sp, &s.f);
    let norm = s.d.magnitude();
    ConstraintReport {
        div_u: sp.divergence(&s.u).max_abs(),
        div_ht: max_div_transpose(&grad),
        curl_compat: max_curl(&s.f, &grad, 0.0),
        director_norm: norm.map(|v| v - 1.0).max_abs(),
        tangency: s.d.dot(&s.w).max_abs(),
    }
}

/// The curl constraint is evaluated in its `H` form,
/// `∂_j H_ik − ∂_k H_ij − Σ_m (H_mk ∂_m H_ij − H_mj ∂_m H_ik)`.
pub fn constraint_residuals_hphi(sp: &Spectral, s: &StateHPhi) -> ConstraintReport {
    let grad = matrix_gradient(sp, &s.h);
    let d = d_from_angles(&s.phi);
    let w = w_from_angles(&s.phi, &s.psi);
    ConstraintReport {
        div_u: sp.divergence(&s.u).max_abs(),
        div_ht: max_div_transpose(&grad),
        curl_compat: max_curl(&s.h, &grad, 1.0),
        director_norm: d.magnitude().map(|v| v - 1.0).max_abs(),
        tangency: d.dot(&w).max_abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid2() -> Grid {
        Grid::new(2, 2.0 * PI, 16).unwrap()
    }

    fn angles(grid: Grid, a: f64, b: f64) -> AngleField {
        [ScalarField::constant(grid, a), ScalarField::constant(grid, b)]
    }

    #[test]
    fn chart_examples() {
        let g = grid2();
        let d = d_from_angles(&angles(g, 0.0, 0.0));
        assert_eq!([d.0[0][3], d.0[1][3], d.0[2][3]], [1.0, 0.0, 0.0]);
        let d = d_from_angles(&angles(g, PI / 2.0, 0.0));
        assert!((d.0[0][0]).abs() < 1e-16 && (d.0[1][0] - 1.0).abs() < 1e-16);
        let d = d_from_angles(&angles(g, PI / 4.0, PI / 6.0));
        let s6 = 6f64.sqrt() / 4.0;
        assert!((d.0[0][5] - s6).abs() < 1e-15);
        assert!((d.0[1][5] - s6).abs() < 1e-15);
        assert!((d.0[2][5] - 0.5).abs() < 1e-15);
        let phi = angles_from_d(&d).unwrap();
        assert!((phi[0][2] - PI / 4.0).abs() < 1e-15);
        assert!((phi[1][2] - PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_branch_names_point() {
        let g = grid2();
        let mut d = d_from_angles(&angles(g, 0.0, 0.0));
        let p = g.flat([3, 5, 0]);
        d.0[0][p] = -1.0;
        match angles_from_d(&d) {
            Err(Error::BranchViolation { index, .. }) => assert_eq!(index, [3, 5, 0]),
            other => panic!("expected branch error, got {other:?}"),
        }
    }

    #[test]
    fn tangent_w_at_equilibrium_maps_to_psi() {
        let g = grid2();
        let mut s = StateFD::equilibrium(g);
        s.w.0[1] = ScalarField::constant(g, 0.3);
        s.w.0[2] = ScalarField::constant(g, -0.2);
        let h = convert_fd_to_hphi(&s).unwrap();
        assert!((h.psi[0][7] - 0.3).abs() < 1e-16);
        assert!((h.psi[1][7] + 0.2).abs() < 1e-16);
    }

    #[test]
    fn equilibrium_converts_to_zero() {
        let g = grid2();
        let h = convert_fd_to_hphi(&StateFD::equilibrium(g)).unwrap();
        assert_eq!(h, StateHPhi::equilibrium(g));
        let sp = Spectral::new(g);
        let r = constraint_residuals_hphi(&sp, &h);
        assert_eq!(r.max(), 0.0);
        assert_eq!(constraint_residuals_fd(&sp, &StateFD::equilibrium(g)).max(), 0.0);
    }

    #[test]
    fn gradient_velocity_has_laplacian_divergence() {
        let g = Grid::new(3, 2.0 * PI, 16).unwrap();
        let sp = Spectral::new(g);
        let q = ScalarField::from_fn(g, |x| 0.1 * (x[0].sin() * (2.0 * x[1]).cos() + x[2].cos()));
        let mut s = StateFD::equilibrium(g);
        s.u = sp.gradient(&q);
        let r = constraint_residuals_fd(&sp, &s);
        // Δq = -0.1 (5 sin x cos 2y + cos z)
        let lap = ScalarField::from_fn(g, |x| -0.1 * (5.0 * x[0].sin() * (2.0 * x[1]).cos() + x[2].cos()));
        assert!((r.div_u - lap.max_abs()).abs() < 1e-12);
    }
}
