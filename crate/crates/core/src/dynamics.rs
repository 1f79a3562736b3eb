//! Right-hand sides of the director and angle formulations and their reductions.
//!
//! Nonlinear terms are formed pointwise, transformed, and truncated with the
//! 2/3 rule; the momentum equation is closed by Leray projection. The angle
//! system is evaluated on Taylor jets, so the same code yields both the plain
//! right-hand side and exact higher time derivatives of the semi-discrete flow.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField, VectorField};
use crate::jet::Jet;
use crate::spectral::{Spectral, Spectrum};
use crate::state::{check_chart, FieldState, StateFD, StateHPhi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Fd,
    Hphi,
    EricksenLeslie,
    Elastodynamics,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Fd => "fd",
            Formulation::Hphi => "hphi",
            Formulation::EricksenLeslie => "ericksen_leslie",
            Formulation::Elastodynamics => "elastodynamics",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Formulation::Fd => 0,
            Formulation::Hphi => 1,
            Formulation::EricksenLeslie => 2,
            Formulation::Elastodynamics => 3,
        }
    }

    pub fn from_code(c: u32) -> Option<Self> {
        [
            Formulation::Fd,
            Formulation::Hphi,
            Formulation::EricksenLeslie,
            Formulation::Elastodynamics,
        ]
        .into_iter()
        .find(|f| f.code() == c)
    }
}

/// Time-dependent source terms, one slot per evolved field. Zero by default.
pub struct Forcing<S> {
    source: Option<Arc<dyn Fn(f64) -> S + Send + Sync>>,
}

impl<S> Clone for Forcing<S> {
    fn clone(&self) -> Self {
        Forcing {
            source: self.source.clone(),
        }
    }
}

impl<S> Default for Forcing<S> {
    fn default() -> Self {
        Forcing { source: None }
    }
}

impl<S> std::fmt::Debug for Forcing<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.source.is_some() {
            "Forcing(source)"
        } else {
            "Forcing(none)"
        })
    }
}

impl<S> Forcing<S> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(f: impl Fn(f64) -> S + Send + Sync + 'static) -> Self {
        Forcing {
            source: Some(Arc::new(f)),
        }
    }

    pub fn is_none(&self) -> bool {
        self.source.is_none()
    }

    pub fn at(&self, t: f64) -> Option<S> {
        self.source.as_ref().map(|f| f(t))
    }
}

/// Angle-formulation fields as Taylor jets about `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPhiJet {
    pub t: f64,
    pub u: [Jet; 3],
    pub h: [[Jet; 3]; 3],
    pub phi: [Jet; 2],
    pub psi: [Jet; 2],
}

impl HPhiJet {
    pub fn from_state(s: &StateHPhi) -> Self {
        let c = |f: &ScalarField| Jet::constant(f.clone());
        HPhiJet {
            t: s.t,
            u: std::array::from_fn(|i| c(&s.u.0[i])),
            h: std::array::from_fn(|i| std::array::from_fn(|j| c(&s.h.0[i][j]))),
            phi: std::array::from_fn(|a| c(&s.phi[a])),
            psi: std::array::from_fn(|a| c(&s.psi[a])),
        }
    }

    pub fn order(&self) -> usize {
        self.u[0].order()
    }

    /// Coefficient `k` as a state (the `k`-th Taylor coefficient, not the derivative).
    pub fn coefficient(&self, k: usize) -> StateHPhi {
        StateHPhi {
            t: self.t,
            u: VectorField(std::array::from_fn(|i| self.u[i].0[k].clone())),
            h: MatrixField(std::array::from_fn(|i| {
                std::array::from_fn(|j| self.h[i][j].0[k].clone())
            })),
            phi: std::array::from_fn(|a| self.phi[a].0[k].clone()),
            psi: std::array::from_fn(|a| self.psi[a].0[k].clone()),
        }
    }

    fn jets_mut(&mut self) -> Vec<&mut Jet> {
        let mut v: Vec<&mut Jet> = self.u.iter_mut().collect();
        v.extend(self.h.iter_mut().flatten());
        v.extend(self.phi.iter_mut());
        v.extend(self.psi.iter_mut());
        v
    }

    fn jets(&self) -> Vec<&Jet> {
        let mut v: Vec<&Jet> = self.u.iter().collect();
        v.extend(self.h.iter().flatten());
        v.extend(self.phi.iter());
        v.extend(self.psi.iter());
        v
    }

    pub fn truncated(&self, order: usize) -> Self {
        let mut out = self.clone();
        for j in out.jets_mut() {
            *j = j.truncated(order);
        }
        out
    }

    /// Time derivative of every slot.
    pub fn dt(&self) -> Self {
        let mut out = self.clone();
        for j in out.jets_mut() {
            *j = j.dt();
        }
        out
    }
}

/// Which groups of terms an angle-formulation evaluation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Terms {
    elastic: bool,
    director: bool,
}

impl Terms {
    fn of(f: Formulation) -> Self {
        match f {
            Formulation::Fd | Formulation::Hphi => Terms {
                elastic: true,
                director: true,
            },
            Formulation::EricksenLeslie => Terms {
                elastic: false,
                director: true,
            },
            Formulation::Elastodynamics => Terms {
                elastic: true,
                director: false,
            },
        }
    }
}

/// Right-hand-side evaluator bound to one grid.
#[derive(Debug, Clone)]
pub struct Dynamics {
    sp: Arc<Spectral>,
    /// Drop every nonlinear term.
    pub linear: bool,
    /// Hold the velocity at its current value (`∂_t u = 0`).
    pub freeze_velocity: bool,
    /// Minimal distance of `|φ₂|` from `π/2`.
    pub chart_margin: f64,
}

type SpecJet = Vec<Spectrum>;

impl Dynamics {
    pub fn new(sp: Arc<Spectral>) -> Self {
        Dynamics {
            sp,
            linear: false,
            freeze_velocity: false,
            chart_margin: 0.1,
        }
    }

    pub fn spectral(&self) -> &Arc<Spectral> {
        &self.sp
    }

    pub fn grid(&self) -> &Grid {
        self.sp.grid()
    }

    fn fwd_jet(&self, j: &Jet) -> SpecJet {
        j.0.iter().map(|c| self.sp.fwd(c)).collect()
    }

    fn bwd_jet(&self, s: &[Spectrum]) -> Jet {
        Jet(s.iter().map(|c| self.sp.backward(c)).collect())
    }

    fn diff_field(&self, s: &Spectrum, axis: usize) -> ScalarField {
        if axis >= self.grid().dim() {
            ScalarField::zeros(*self.grid())
        } else {
            self.sp.backward(&self.sp.diff_hat(s, axis))
        }
    }

    fn grad_jet(&self, s: &[Spectrum]) -> [Jet; 3] {
        std::array::from_fn(|a| Jet(s.iter().map(|c| self.diff_field(c, a)).collect()))
    }

    fn dealiased_jet(&self, j: &Jet) -> SpecJet {
        j.0.iter()
            .map(|c| {
                let mut s = self.sp.fwd(c);
                self.sp.dealias(&mut s);
                s
            })
            .collect()
    }

    fn zero_spec(&self, order: usize) -> SpecJet {
        vec![Spectrum::zeros(*self.grid()); order + 1]
    }

    fn add_diff(&self, acc: &mut [Spectrum], s: &[Spectrum], axis: usize, sign: f64) {
        if axis >= self.grid().dim() {
            return;
        }
        for (a, c) in acc.iter_mut().zip(s) {
            a.axpy(Complex64::new(sign, 0.0), &self.sp.diff_hat(c, axis));
        }
    }

    fn check_finite(&self, what: &str, s: &impl FieldState) -> Result<()> {
        match s.find_non_finite() {
            Some((c, index)) => Err(Error::NonFinite {
                what: format!("{what} (component {c})"),
                index,
            }),
            None => Ok(()),
        }
    }

    /// Angle-formulation right-hand side on jets. With `project == false` the
    /// momentum slot holds the right-hand side before Leray projection.
    fn hphi_jet_rhs(&self, s: &HPhiJet, terms: Terms, forcing: Option<&StateHPhi>, project: bool) -> Result<HPhiJet> {
        let k = s.order();
        let grid = *self.grid();
        let nonlinear = !self.linear;
        if terms.director {
            check_chart(&[s.phi[0].0[0].clone(), s.phi[1].0[0].clone()], self.chart_margin)?;
        }
        let zero = Jet::zeros(grid, k);

        let u_hat: [SpecJet; 3] = std::array::from_fn(|i| self.fwd_jet(&s.u[i]));
        let grad_u: [[Jet; 3]; 3] = std::array::from_fn(|i| self.grad_jet(&u_hat[i]));

        let mut mom: [SpecJet; 3] = std::array::from_fn(|_| self.zero_spec(k));
        let mut out = HPhiJet {
            t: s.t,
            u: std::array::from_fn(|_| zero.clone()),
            h: std::array::from_fn(|_| std::array::from_fn(|_| zero.clone())),
            phi: std::array::from_fn(|_| zero.clone()),
            psi: std::array::from_fn(|_| zero.clone()),
        };

        // symmetric stress T with ∂_t u ∋ ∇·T
        let mut stress: [[Option<Jet>; 3]; 3] = Default::default();
        let mut add_stress = |i: usize, j: usize, v: Jet| {
            stress[i][j] = Some(match stress[i][j].take() {
                Some(t) => t.add(&v),
                None => v,
            });
        };

        if terms.elastic {
            let h_hat: [[SpecJet; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| self.fwd_jet(&s.h[i][j])));
            for i in 0..3 {
                for j in 0..3 {
                    self.add_diff(&mut mom[i], &h_hat[i][j], j, 1.0);
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let mut dh = grad_u[i][j].clone();
                    if nonlinear {
                        let grad_h = self.grad_jet(&h_hat[i][j]);
                        let mut nl = zero.clone();
                        for m in 0..3 {
                            nl.axpy(-1.0, &s.u[m].mul(&grad_h[m]));
                            nl.axpy(1.0, &grad_u[i][m].mul(&s.h[m][j]));
                        }
                        dh.axpy(1.0, &self.bwd_jet(&self.dealiased_jet(&nl)));
                    }
                    out.h[i][j] = dh;
                }
            }
            if nonlinear {
                for i in 0..3 {
                    for j in i..3 {
                        let mut hh = zero.clone();
                        for m in 0..3 {
                            hh.axpy(1.0, &s.h[i][m].mul(&s.h[j][m]));
                        }
                        add_stress(i, j, hh);
                    }
                }
            }
        }

        if terms.director {
            let phi_hat: [SpecJet; 2] = std::array::from_fn(|a| self.fwd_jet(&s.phi[a]));
            let psi_hat: [SpecJet; 2] = std::array::from_fn(|a| self.fwd_jet(&s.psi[a]));
            let grad_phi: [[Jet; 3]; 2] = std::array::from_fn(|a| self.grad_jet(&phi_hat[a]));
            for a in 0..2 {
                let mut dphi = s.psi[a].clone();
                let mut dpsi_hat: SpecJet = phi_hat[a].iter().map(|c| self.sp.laplacian_hat(c)).collect();
                if nonlinear {
                    let grad_psi = self.grad_jet(&psi_hat[a]);
                    let mut adv_phi = zero.clone();
                    let mut nl = zero.clone();
                    for m in 0..3 {
                        adv_phi.axpy(1.0, &s.u[m].mul(&grad_phi[a][m]));
                        nl.axpy(-1.0, &s.u[m].mul(&grad_psi[m]));
                    }
                    dphi.axpy(-1.0, &self.bwd_jet(&self.dealiased_jet(&adv_phi)));
                    nl.axpy(1.0, &self.r2(s, &grad_phi, a));
                    for (d, n) in dpsi_hat.iter_mut().zip(self.dealiased_jet(&nl)) {
                        d.add_assign(&n);
                    }
                }
                out.phi[a] = dphi;
                out.psi[a] = self.bwd_jet(&dpsi_hat);
            }
            if nonlinear {
                let (s2, _) = s.phi[1].sin_cos();
                let s2sq = s2.mul(&s2);
                for i in 0..3 {
                    for j in i..3 {
                        let mut t = zero.clone();
                        for a in 0..2 {
                            t.axpy(-1.0, &grad_phi[a][i].mul(&grad_phi[a][j]));
                        }
                        t.axpy(1.0, &s2sq.mul(&grad_phi[0][i].mul(&grad_phi[0][j])));
                        add_stress(i, j, t);
                    }
                }
            }
        }

        if nonlinear {
            let mut nl_mom: [SpecJet; 3] = std::array::from_fn(|_| self.zero_spec(k));
            for i in 0..3 {
                for j in i..3 {
                    if let Some(t) = &stress[i][j] {
                        let th = self.fwd_jet(t);
                        self.add_diff(&mut nl_mom[i], &th, j, 1.0);
                        if i != j {
                            self.add_diff(&mut nl_mom[j], &th, i, 1.0);
                        }
                    }
                }
            }
            for i in 0..3 {
                let mut adv = zero.clone();
                for m in 0..3 {
                    adv.axpy(1.0, &s.u[m].mul(&grad_u[i][m]));
                }
                for (acc, a) in nl_mom[i].iter_mut().zip(self.fwd_jet(&adv)) {
                    acc.axpy(Complex64::new(-1.0, 0.0), &a);
                }
                for c in nl_mom[i].iter_mut() {
                    self.sp.dealias(c);
                }
                for (acc, n) in mom[i].iter_mut().zip(&nl_mom[i]) {
                    acc.add_assign(n);
                }
            }
        }

        if let Some(f) = forcing {
            for i in 0..3 {
                mom[i][0].add_assign(&self.sp.fwd(&f.u.0[i]));
            }
        }
        if project {
            for c in 0..=k {
                let mut v: [Spectrum; 3] =
                    std::array::from_fn(|i| std::mem::replace(&mut mom[i][c], Spectrum::zeros(grid)));
                self.sp.project_hat(&mut v);
                for (i, vi) in v.into_iter().enumerate() {
                    mom[i][c] = vi;
                }
            }
        }
        if !self.freeze_velocity {
            for i in 0..3 {
                out.u[i] = self.bwd_jet(&mom[i]);
            }
        }

        if let Some(f) = forcing {
            if terms.elastic {
                for i in 0..3 {
                    for j in 0..3 {
                        out.h[i][j].0[0].axpy(1.0, &f.h.0[i][j]);
                    }
                }
            }
            if terms.director {
                for a in 0..2 {
                    out.phi[a].0[0].axpy(1.0, &f.phi[a]);
                    out.psi[a].0[0].axpy(1.0, &f.psi[a]);
                }
            }
        }
        Ok(out)
    }

    /// Pointwise `ℛ₂` component `a`.
    fn r2(&self, s: &HPhiJet, grad_phi: &[[Jet; 3]; 2], a: usize) -> Jet {
        let (sn, cs) = s.phi[1].sin_cos();
        if a == 0 {
            let mut inner = s.psi[0].mul(&s.psi[1]);
            for m in 0..3 {
                inner.axpy(-1.0, &grad_phi[0][m].mul(&grad_phi[1][m]));
            }
            sn.div(&cs).mul(&inner).scaled(2.0)
        } else {
            let mut inner = s.psi[0].mul(&s.psi[0]).scaled(-1.0);
            for m in 0..3 {
                inner.axpy(1.0, &grad_phi[0][m].mul(&grad_phi[0][m]));
            }
            sn.mul(&cs).mul(&inner)
        }
    }

    fn hphi_plain(
        &self,
        s: &StateHPhi,
        terms: Terms,
        forcing: &Forcing<StateHPhi>,
        project: bool,
    ) -> Result<StateHPhi> {
        let f = forcing.at(s.t);
        let out = self
            .hphi_jet_rhs(&HPhiJet::from_state(s), terms, f.as_ref(), project)?
            .coefficient(0);
        self.check_finite("angle-formulation right-hand side", &out)?;
        Ok(out)
    }

    /// `(∂_t u, ∂_t H, ∂_t φ, ∂_t ψ)` of the full angle formulation.
    pub fn rhs_hphi(&self, s: &StateHPhi, forcing: &Forcing<StateHPhi>) -> Result<StateHPhi> {
        self.hphi_plain(s, Terms::of(Formulation::Hphi), forcing, true)
    }

    /// `F ≡ I` reduction: every `H` term is dropped and `∂_t H = 0`.
    pub fn rhs_ericksen_leslie(&self, s: &StateHPhi, forcing: &Forcing<StateHPhi>) -> Result<StateHPhi> {
        self.hphi_plain(s, Terms::of(Formulation::EricksenLeslie), forcing, true)
    }

    /// `d ≡ const` reduction: every `φ` term is dropped and `∂_t φ = ∂_t ψ = 0`.
    pub fn rhs_elastodynamics(&self, s: &StateHPhi, forcing: &Forcing<StateHPhi>) -> Result<StateHPhi> {
        self.hphi_plain(s, Terms::of(Formulation::Elastodynamics), forcing, true)
    }

    /// Dispatches on an angle-type formulation.
    pub fn rhs_angle(&self, f: Formulation, s: &StateHPhi, forcing: &Forcing<StateHPhi>) -> Result<StateHPhi> {
        if f == Formulation::Fd {
            return Err(Error::Formulation(
                "fd state passed to the angle right-hand side".into(),
            ));
        }
        self.hphi_plain(s, Terms::of(f), forcing, true)
    }

    /// Right-hand side applied to a Taylor jet (unforced).
    pub fn rhs_hphi_jet(&self, f: Formulation, s: &HPhiJet) -> Result<HPhiJet> {
        self.hphi_jet_rhs(s, Terms::of(f), None, true)
    }

    /// Taylor jet of the unforced solution through `s` up to `order`:
    /// coefficient `k` is `∂_t^k U / k!`.
    pub fn taylor_hphi(&self, f: Formulation, s: &StateHPhi, order: usize) -> Result<HPhiJet> {
        let mut jet = HPhiJet::from_state(s);
        for m in 0..order {
            let r = self.rhs_hphi_jet(f, &jet)?;
            let scale = 1.0 / (m + 1) as f64;
            for (dst, src) in jet.jets_mut().into_iter().zip(r.jets()) {
                dst.0.push(src.0[m].scaled(scale));
            }
        }
        Ok(jet)
    }

    /// Director-formulation right-hand side `(∂_t u, ∂_t F, ∂_t d, ∂_t w)`.
    ///
    /// The director force is written `(−|w|² + |∇d|²) d / |d|²`, which agrees
    /// with the unit-sphere form whenever `|d| = 1`.
    pub fn rhs_fd(&self, s: &StateFD, forcing: &Forcing<StateFD>) -> Result<StateFD> {
        let out = self.fd_terms(s, forcing.at(s.t).as_ref(), true)?;
        self.check_finite("director-formulation right-hand side", &out)?;
        Ok(out)
    }

    fn fd_terms(&self, s: &StateFD, forcing: Option<&StateFD>, project: bool) -> Result<StateFD> {
        let sp = &*self.sp;
        let grid = *self.grid();
        let n = grid.num_points();
        let nonlinear = !self.linear;
        let fwd3 = |v: &VectorField| -> [Spectrum; 3] { std::array::from_fn(|i| sp.fwd(&v.0[i])) };
        let grad = |s: &Spectrum| -> [ScalarField; 3] { std::array::from_fn(|a| self.diff_field(s, a)) };
        let dealiased = |f: &ScalarField| {
            let mut h = sp.fwd(f);
            sp.dealias(&mut h);
            h
        };

        let u_hat = fwd3(&s.u);
        let f_hat: [[Spectrum; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| sp.fwd(&s.f.0[i][j])));
        let d_hat = fwd3(&s.d);
        let w_hat = fwd3(&s.w);
        let grad_u: [[ScalarField; 3]; 3] = std::array::from_fn(|i| grad(&u_hat[i]));

        let mut mom: [Spectrum; 3] = std::array::from_fn(|_| Spectrum::zeros(grid));
        let mut out = StateFD {
            t: s.t,
            u: VectorField::zeros(grid),
            f: MatrixField::zeros(grid),
            d: s.w.clone(),
            w: VectorField::zeros(grid),
        };
        let lap_d: [Spectrum; 3] = std::array::from_fn(|a| sp.laplacian_hat(&d_hat[a]));

        if !nonlinear {
            for i in 0..3 {
                for j in 0..3 {
                    if j < grid.dim() {
                        mom[i].add_assign(&sp.diff_hat(&f_hat[i][j], j));
                        mom[i].add_assign(&sp.diff_hat(&f_hat[j][i], j));
                    }
                    out.f.0[i][j] = grad_u[i][j].clone();
                }
                out.w.0[i] = sp.backward(&lap_d[i]);
            }
        } else {
            let grad_d: [[ScalarField; 3]; 3] = std::array::from_fn(|a| grad(&d_hat[a]));
            // momentum stress FFᵀ − ∇d⊙∇d and advection
            for i in 0..3 {
                for j in i..3 {
                    let mut t = vec![0.0; n];
                    for p in 0..n {
                        let mut v = 0.0;
                        for m in 0..3 {
                            v += s.f.0[i][m][p] * s.f.0[j][m][p] - grad_d[m][i][p] * grad_d[m][j][p];
                        }
                        t[p] = v;
                    }
                    let th = sp.fwd(&ScalarField::from_vec(grid, t)?);
                    if j < grid.dim() {
                        mom[i].add_assign(&sp.diff_hat(&th, j));
                    }
                    if i != j && i < grid.dim() {
                        mom[j].add_assign(&sp.diff_hat(&th, i));
                    }
                }
            }
            for i in 0..3 {
                let mut adv = ScalarField::zeros(grid);
                for m in 0..3 {
                    adv.axpy(1.0, &s.u.0[m].mul(&grad_u[i][m]));
                }
                mom[i].axpy(Complex64::new(-1.0, 0.0), &sp.fwd(&adv));
                sp.dealias(&mut mom[i]);
            }
            // deformation gradient
            for i in 0..3 {
                for j in 0..3 {
                    let gf = grad(&f_hat[i][j]);
                    let mut nl = vec![0.0; n];
                    for p in 0..n {
                        let mut v = 0.0;
                        for m in 0..3 {
                            v += grad_u[i][m][p] * s.f.0[m][j][p] - s.u.0[m][p] * gf[m][p];
                        }
                        nl[p] = v;
                    }
                    out.f.0[i][j] = sp.backward(&dealiased(&ScalarField::from_vec(grid, nl)?));
                }
            }
            // director
            let grad_w: [[ScalarField; 3]; 3] = std::array::from_fn(|a| grad(&w_hat[a]));
            let mut lambda = vec![0.0; n];
            for (p, l) in lambda.iter_mut().enumerate() {
                let mut gd2 = 0.0;
                let mut w2 = 0.0;
                let mut d2 = 0.0;
                for a in 0..3 {
                    w2 += s.w.0[a][p] * s.w.0[a][p];
                    d2 += s.d.0[a][p] * s.d.0[a][p];
                    for m in 0..3 {
                        gd2 += grad_d[a][m][p] * grad_d[a][m][p];
                    }
                }
                *l = (gd2 - w2) / d2;
            }
            for a in 0..3 {
                let mut adv_d = vec![0.0; n];
                let mut nl_w = vec![0.0; n];
                for p in 0..n {
                    let mut ad = 0.0;
                    let mut aw = 0.0;
                    for m in 0..3 {
                        ad += s.u.0[m][p] * grad_d[a][m][p];
                        aw += s.u.0[m][p] * grad_w[a][m][p];
                    }
                    adv_d[p] = ad;
                    nl_w[p] = lambda[p] * s.d.0[a][p] - aw;
                }
                out.d.0[a].axpy(-1.0, &sp.backward(&dealiased(&ScalarField::from_vec(grid, adv_d)?)));
                let mut wh = dealiased(&ScalarField::from_vec(grid, nl_w)?);
                wh.add_assign(&lap_d[a]);
                out.w.0[a] = sp.backward(&wh);
            }
        }

        if let Some(f) = forcing {
            for i in 0..3 {
                mom[i].add_assign(&sp.fwd(&f.u.0[i]));
            }
        }
        if project {
            sp.project_hat(&mut mom);
        }
        if !self.freeze_velocity {
            out.u = VectorField(std::array::from_fn(|i| sp.backward(&mom[i])));
        }
        if let Some(f) = forcing {
            out.f.axpy(1.0, &f.f);
            out.d.axpy(1.0, &f.d);
            out.w.axpy(1.0, &f.w);
        }
        Ok(out)
    }

    fn pressure_from(&self, mom: &VectorField) -> Result<ScalarField> {
        self.sp.inverse_laplacian(&self.sp.divergence(mom))
    }

    /// Momentum right-hand side before projection (director formulation).
    pub fn unprojected_momentum_fd(&self, s: &StateFD) -> Result<VectorField> {
        Ok(self.fd_terms(s, None, false)?.u)
    }

    /// Momentum right-hand side before projection (angle formulations).
    pub fn unprojected_momentum_hphi(&self, f: Formulation, s: &StateHPhi) -> Result<VectorField> {
        Ok(self
            .hphi_jet_rhs(&HPhiJet::from_state(s), Terms::of(f), None, false)?
            .coefficient(0)
            .u)
    }

    /// Zero-mean pressure with `Δp = ∇·N`, `N` the unprojected momentum right-hand side.
    pub fn recover_pressure_fd(&self, s: &StateFD) -> Result<ScalarField> {
        self.pressure_from(&self.unprojected_momentum_fd(s)?)
    }

    pub fn recover_pressure_hphi(&self, s: &StateHPhi) -> Result<ScalarField> {
        self.pressure_from(&self.unprojected_momentum_hphi(Formulation::Hphi, s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{convert_fd_to_hphi, convert_hphi_to_fd};
    use std::f64::consts::PI;

    fn setup(dim: usize, n: usize) -> (Grid, Dynamics) {
        let g = Grid::new(dim, 2.0 * PI, n).unwrap();
        (g, Dynamics::new(Spectral::new(g)))
    }

    #[test]
    fn equilibria_are_fixed_points() {
        let (g, dy) = setup(3, 16);
        let r = dy.rhs_fd(&StateFD::equilibrium(g), &Forcing::none()).unwrap();
        assert_eq!(
            r.max_diff(&StateFD {
                f: MatrixField::zeros(g),
                d: VectorField::zeros(g),
                ..StateFD::equilibrium(g)
            }),
            0.0
        );
        let z = StateHPhi::equilibrium(g);
        for f in [
            Formulation::Hphi,
            Formulation::EricksenLeslie,
            Formulation::Elastodynamics,
        ] {
            assert_eq!(dy.rhs_angle(f, &z, &Forcing::none()).unwrap().max_diff(&z), 0.0);
        }
    }

    #[test]
    fn tangent_bump_in_w_only() {
        let (g, dy) = setup(2, 32);
        let mut s = StateFD::equilibrium(g);
        let bump = |x: [f64; 3]| 0.01 * (-(x[0] * x[0] + x[1] * x[1])).exp();
        s.w.0[1] = ScalarField::from_fn(g, bump);
        let r = dy.rhs_fd(&s, &Forcing::none()).unwrap();
        assert!(r.d.max_diff_vec(&s.w) < 1e-15);
        // ∂_t w = -|g|² (1, 0, 0), dealiased
        let expect = dy.spectral().dealias_field(&s.w.0[1].mul(&s.w.0[1]).scaled(-1.0));
        assert!(r.w.0[0].sub(&expect).max_abs() < 1e-15);
        assert!(r.w.0[1].max_abs() < 1e-15 && r.w.0[2].max_abs() < 1e-15);
    }

    trait MaxDiffVec {
        fn max_diff_vec(&self, o: &VectorField) -> f64;
    }
    impl MaxDiffVec for VectorField {
        fn max_diff_vec(&self, o: &VectorField) -> f64 {
            self.sub(o).max_abs()
        }
    }

    #[test]
    fn r2_constant_patch() {
        let (g, dy) = setup(2, 16);
        let mut s = StateHPhi::equilibrium(g);
        s.phi[1] = ScalarField::constant(g, PI / 6.0);
        s.psi[0] = ScalarField::constant(g, 1.0);
        let r = dy.rhs_hphi(&s, &Forcing::none()).unwrap();
        // ℛ₂ = (0, ½ sin(π/3)(−1)) = (0, −√3/4)
        assert!(r.psi[0].max_abs() < 1e-15);
        assert!(r.psi[1].map(|v| v + 3f64.sqrt() / 4.0).max_abs() < 1e-15);
    }

    #[test]
    fn chart_guard_aborts() {
        let (g, dy) = setup(2, 16);
        let mut s = StateHPhi::equilibrium(g);
        s.phi[1] = ScalarField::constant(g, 1.5);
        assert!(matches!(
            dy.rhs_hphi(&s, &Forcing::none()),
            Err(Error::ChartMargin { .. })
        ));
    }

    fn smooth_state(g: Grid, amp: f64) -> StateHPhi {
        let mut s = StateHPhi::equilibrium(g);
        let f = |a: f64, b: f64, c: f64| {
            move |x: [f64; 3]| amp * ((a * x[0]).sin() * (b * x[1] + c).cos() + 0.3 * (x[2] + a).sin())
        };
        let sp = Spectral::new(g);
        let v = VectorField([
            ScalarField::from_fn(g, f(1.0, 2.0, 0.1)),
            ScalarField::from_fn(g, f(2.0, 1.0, 0.7)),
            ScalarField::from_fn(g, f(1.0, 1.0, 0.3)),
        ]);
        s.u = sp.leray_project(&v);
        for i in 0..3 {
            for j in 0..3 {
                s.h.0[i][j] = ScalarField::from_fn(g, f(1.0 + i as f64, 1.0 + j as f64, 0.2 * (i + j) as f64));
            }
        }
        s.phi = [
            ScalarField::from_fn(g, f(2.0, 1.0, 0.5)),
            ScalarField::from_fn(g, f(1.0, 3.0, 0.2)),
        ];
        s.psi = [
            ScalarField::from_fn(g, f(1.0, 1.0, 0.9)),
            ScalarField::from_fn(g, f(3.0, 1.0, 0.4)),
        ];
        s
    }

    #[test]
    fn zero_angles_are_invariant_and_match_elastodynamics() {
        let (g, dy) = setup(3, 16);
        let mut s = smooth_state(g, 0.05);
        s.phi = [ScalarField::zeros(g), ScalarField::zeros(g)];
        s.psi = [ScalarField::zeros(g), ScalarField::zeros(g)];
        let full = dy.rhs_hphi(&s, &Forcing::none()).unwrap();
        let el = dy.rhs_elastodynamics(&s, &Forcing::none()).unwrap();
        assert_eq!(full.phi[0].max_abs() + full.phi[1].max_abs(), 0.0);
        assert_eq!(full.psi[0].max_abs() + full.psi[1].max_abs(), 0.0);
        assert!(full.u.sub(&el.u).max_abs() < 1e-15);
        assert!(full.h.sub(&el.h).max_abs() < 1e-15);
    }

    #[test]
    fn ericksen_leslie_matches_full_with_zero_h() {
        let (g, dy) = setup(3, 16);
        let mut s = smooth_state(g, 0.05);
        s.h = MatrixField::zeros(g);
        let full = dy.rhs_hphi(&s, &Forcing::none()).unwrap();
        let el = dy.rhs_ericksen_leslie(&s, &Forcing::none()).unwrap();
        for a in 0..2 {
            assert!(full.phi[a].sub(&el.phi[a]).max_abs() < 1e-15);
            assert!(full.psi[a].sub(&el.psi[a]).max_abs() < 1e-15);
        }
        assert_eq!(el.h.max_abs(), 0.0);
    }

    #[test]
    fn pressure_gradient_is_the_removed_component() {
        let (g, dy) = setup(3, 16);
        let s = smooth_state(g, 0.1);
        let n = dy.unprojected_momentum_hphi(Formulation::Hphi, &s).unwrap();
        let p = dy.recover_pressure_hphi(&s).unwrap();
        let removed = n.sub(&dy.spectral().leray_project(&n));
        let gp = dy.spectral().gradient(&p);
        assert!(removed.sub(&gp).max_abs() < 1e-10);
        assert!(p.mean().abs() < 1e-14);
    }

    #[test]
    fn formulations_agree_on_converted_states() {
        let (g, dy) = setup(3, 16);
        let sp = dy.spectral().clone();
        let mut s = smooth_state(g, 0.02);
        // band-limit so both formulations see the same Galerkin data
        for f in s.components_mut() {
            *f = sp.dealias_field(f);
        }
        let rh = dy.rhs_hphi(&s, &Forcing::none()).unwrap();
        let fd = convert_hphi_to_fd(&s);
        let rf = dy.rhs_fd(&fd, &Forcing::none()).unwrap();
        assert!(rf.f.sub(&rh.h).max_abs() < 1e-12);
        let back = convert_fd_to_hphi(&fd).unwrap();
        assert!(back.max_diff(&s) < 1e-14);
    }

    #[test]
    fn taylor_jet_first_coefficient_is_rhs() {
        let (g, dy) = setup(2, 16);
        let s = smooth_state(g, 0.05);
        let jet = dy.taylor_hphi(Formulation::Hphi, &s, 2).unwrap();
        let r = dy.rhs_hphi(&s, &Forcing::none()).unwrap();
        assert!(jet.coefficient(1).max_diff(&r) < 1e-15);
        // second coefficient against a centered difference of the rhs
        let h = 1e-4;
        let mut sp_ = s.clone();
        sp_.axpy(h, &r);
        let mut sm = s.clone();
        sm.axpy(-h, &r);
        let rp = dy.rhs_hphi(&sp_, &Forcing::none()).unwrap();
        let rm = dy.rhs_hphi(&sm, &Forcing::none()).unwrap();
        let c2 = jet.coefficient(2);
        let mut fdiff = rp.clone();
        fdiff.axpy(-1.0, &rm);
        for (a, b) in c2.components().iter().zip(fdiff.components()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((2.0 * x - y / (2.0 * h)).abs() < 1e-7);
            }
        }
    }
}
