//! Energy functionals, weighted norms, decay ratios and the differential-inequality monitors.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, Formulation, HPhiJet};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::jet::Jet;
use crate::spectral::Spectral;
use crate::state::{ConstraintReport, StateFD, StateHPhi};
use crate::vectorfields::{MultiIndex, VectorFields, ZFamily, ZFields, MAX_ORDER};

/// Which energies and monitors a run records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSpec {
    /// Evaluate the vector-field energies; off leaves only the basic energy and constraints.
    pub generalized: bool,
    /// Highest `|a|` for `E_a`, `ℰ_a`, `𝐄_a`.
    pub max_order: usize,
    /// Highest `|a|` for `𝒳_a`.
    pub x_order: usize,
    pub delta: f64,
    pub decay: bool,
    /// Relative level below which a field counts as outside the reported support.
    pub support_tol: f64,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        MonitorSpec {
            generalized: true,
            max_order: 1,
            x_order: 1,
            delta: 0.1,
            decay: true,
            support_tol: 1e-3,
        }
    }
}

impl MonitorSpec {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.max_order > MAX_ORDER {
            return Err(format!("max_order must be at most {MAX_ORDER}"));
        }
        if self.x_order > self.max_order.min(2) {
            return Err("x_order must not exceed max_order or 2".into());
        }
        if !(self.delta > 0.0 && self.delta < 0.125) {
            return Err("delta must lie in (0, 1/8)".into());
        }
        if !(self.support_tol > 0.0 && self.support_tol < 1.0) {
            return Err("support_tol must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Time coefficients the base jet needs.
    pub fn jet_order(&self) -> usize {
        (self.max_order + 1).max(self.x_order + 2)
    }
}

/// `⟨s⟩ = (1 + s²)^{1/2}`.
pub fn japanese(s: f64) -> f64 {
    (1.0 + s * s).sqrt()
}

/// `½∫(|u|² + |F − I|² + |w|² + |∇d|²)`.
pub fn basic_energy_fd(sp: &Spectral, s: &StateFD) -> f64 {
    let grid = *sp.grid();
    let h = s.f.sub(&crate::grid::MatrixField::identity(grid));
    let mut e = s.u.norm_l2_sq() + h.norm_l2_sq() + s.w.norm_l2_sq();
    for c in &s.d.0 {
        e += sp.gradient(c).norm_l2_sq();
    }
    0.5 * e
}

/// `½∫(|u|² + |H|² + cos²φ₂(ψ₁² + |∇φ₁|²) + ψ₂² + |∇φ₂|²)`, the director energy in the chart.
pub fn basic_energy_hphi(sp: &Spectral, s: &StateHPhi) -> f64 {
    let g1 = sp.gradient(&s.phi[0]);
    let g2 = sp.gradient(&s.phi[1]);
    let c2 = s.phi[1].map(|p| p.cos().powi(2));
    let mut dens = s.psi[0].mul(&s.psi[0]);
    dens.axpy(1.0, &g1.dot(&g1));
    let mut e = s.u.norm_l2_sq() + s.h.norm_l2_sq() + c2.inner(&dens);
    e += s.psi[1].inner(&s.psi[1]) + g2.norm_l2_sq();
    0.5 * e
}

/// `dE/dt` from the right-hand side of the director formulation.
pub fn basic_energy_rate_fd(dynamics: &Dynamics, s: &StateFD) -> Result<f64> {
    let sp = dynamics.spectral();
    let r = dynamics.rhs_fd(s, &Default::default())?;
    let grid = *sp.grid();
    let h = s.f.sub(&crate::grid::MatrixField::identity(grid));
    let mut rate = 0.0;
    for i in 0..3 {
        rate += s.u.0[i].inner(&r.u.0[i]) + s.w.0[i].inner(&r.w.0[i]);
        for j in 0..3 {
            rate += h.0[i][j].inner(&r.f.0[i][j]);
        }
        rate += sp
            .gradient(&s.d.0[i])
            .0
            .iter()
            .zip(sp.gradient(&r.d.0[i]).0.iter())
            .map(|(a, b)| a.inner(b))
            .sum::<f64>();
    }
    Ok(rate)
}

/// `dE/dt` of the chart energy, from the first Taylor coefficient of its density.
pub fn basic_energy_rate_hphi(dynamics: &Dynamics, f: Formulation, s: &StateHPhi) -> Result<f64> {
    let sp = dynamics.spectral();
    let j = dynamics.taylor_hphi(f, s, 1)?;
    Ok(energy_density_jet(sp, &j).coeff(1).integrate())
}

fn energy_density_jet(sp: &Spectral, j: &HPhiJet) -> Jet {
    let grid = *sp.grid();
    let grad = |f: &Jet| -> [Jet; 3] {
        let per: Vec<_> = f.0.iter().map(|c| sp.gradient(c)).collect();
        std::array::from_fn(|k| Jet(per.iter().map(|g| g.0[k].clone()).collect()))
    };
    let mut d = Jet::zeros(grid, j.order());
    for i in 0..3 {
        d.axpy(0.5, &j.u[i].mul(&j.u[i]));
        for k in 0..3 {
            d.axpy(0.5, &j.h[i][k].mul(&j.h[i][k]));
        }
    }
    let (_, c2) = j.phi[1].sin_cos();
    let mut a = j.psi[0].mul(&j.psi[0]);
    for g in grad(&j.phi[0]) {
        a.axpy(1.0, &g.mul(&g));
    }
    d.axpy(0.5, &c2.mul(&c2).mul(&a));
    d.axpy(0.5, &j.psi[1].mul(&j.psi[1]));
    for g in grad(&j.phi[1]) {
        d.axpy(0.5, &g.mul(&g));
    }
    d
}

/// Energies of one multi-index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEnergies {
    pub index: MultiIndex,
    pub e: f64,
    pub x: Option<f64>,
    pub cal: f64,
    pub bold: f64,
}

/// Slot-wise ingredients shared by `E_a`, `ℰ_a` and `𝐄_a`.
struct Pieces {
    dt_phi: [ScalarField; 2],
    grad_phi: [VectorField; 2],
    u_grad_phi: [ScalarField; 2],
}

fn pieces(sp: &Spectral, z: &ZFields, base: &ZFields) -> Pieces {
    let u: VectorField = VectorField(std::array::from_fn(|i| base.u[i].value().clone()));
    let zu: VectorField = VectorField(std::array::from_fn(|i| z.u[i].value().clone()));
    let grad_phi: [VectorField; 2] = std::array::from_fn(|a| sp.gradient(z.phi[a].value()));
    let base_grad: [VectorField; 2] = std::array::from_fn(|a| sp.gradient(base.phi[a].value()));
    let dt_phi = std::array::from_fn(|a| {
        let mut d = z.phi[a].coeff(1).clone();
        d.axpy(1.0, &u.dot(&grad_phi[a]));
        d
    });
    let u_grad_phi = std::array::from_fn(|a| zu.dot(&base_grad[a]));
    Pieces {
        dt_phi,
        grad_phi,
        u_grad_phi,
    }
}

/// `E_a = ½∫|Z^a u|² + |Z^a H|² + |D_t Z^a φ|² + |∇Z^a φ|²`.
pub fn generalized_energy(sp: &Spectral, z: &ZFields, base: &ZFields) -> f64 {
    let p = pieces(sp, z, base);
    energy_from(z, &p)
}

fn energy_from(z: &ZFields, p: &Pieces) -> f64 {
    let mut e = 0.0;
    for i in 0..3 {
        e += z.u[i].value().inner(z.u[i].value());
        for j in 0..3 {
            e += z.h[i][j].value().inner(z.h[i][j].value());
        }
    }
    for a in 0..2 {
        e += p.dt_phi[a].inner(&p.dt_phi[a]) + p.grad_phi[a].norm_l2_sq();
    }
    0.5 * e
}

/// `ℰ_a` and `𝐄_a`.
pub fn modified_energies(sp: &Spectral, z: &ZFields, base: &ZFields) -> (f64, f64) {
    let p = pieces(sp, z, base);
    modified_from(z, base, &p)
}

fn modified_from(z: &ZFields, base: &ZFields, p: &Pieces) -> (f64, f64) {
    let e = energy_from(z, p);
    let mut cal = e;
    for a in 0..2 {
        let v = &p.u_grad_phi[a];
        cal += 0.5 * v.inner(v) + p.dt_phi[a].inner(v);
    }
    let s2 = base.phi[1].value().map(|x| x.sin().powi(2));
    let mut dens = p.dt_phi[0].mul(&p.dt_phi[0]);
    dens.axpy(1.0, &p.grad_phi[0].dot(&p.grad_phi[0]));
    let v = &p.u_grad_phi[0];
    dens.axpy(1.0, &v.mul(v));
    dens.axpy(2.0, &p.dt_phi[0].mul(v));
    let bold = cal - 0.5 * s2.inner(&dens);
    (cal, bold)
}

/// `𝒳_a = ‖⟨t−r⟩∇Z^a u‖² + ‖⟨t−r⟩∇Z^a H‖² + ‖⟨t−r⟩ D²Z^a φ‖²`, with `D²` the space-time Hessian.
pub fn weighted_norm(sp: &Spectral, z: &ZFields) -> f64 {
    let grid = *sp.grid();
    let weight = ScalarField::from_fn(grid, |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        1.0 + (z.t - r).powi(2)
    });
    let mut dens = ScalarField::zeros(grid);
    let mut add_grad = |f: &ScalarField| {
        let g = sp.gradient(f);
        dens.axpy(1.0, &g.dot(&g));
    };
    for i in 0..3 {
        add_grad(z.u[i].value());
        for j in 0..3 {
            add_grad(z.h[i][j].value());
        }
    }
    for a in 0..2 {
        let f = &z.phi[a];
        let tt = f.coeff(2).scaled(2.0);
        dens.axpy(1.0, &tt.mul(&tt));
        let gt = sp.gradient(f.coeff(1));
        dens.axpy(2.0, &gt.dot(&gt));
        let g = sp.gradient(f.value());
        for c in &g.0 {
            let gg = sp.gradient(c);
            dens.axpy(1.0, &gg.dot(&gg));
        }
    }
    weight.inner(&dens)
}

/// Smallest centred radius outside which every slot is below `tol` times its maximum.
pub fn support_radius(grid: &Grid, fields: &[&ScalarField], tol: f64) -> f64 {
    let mut rho = 0.0_f64;
    for f in fields {
        let level = tol * f.max_abs();
        if level == 0.0 {
            continue;
        }
        for (p, v) in f.data().iter().enumerate() {
            if v.abs() > level {
                rho = rho.max(grid.radius(p));
            }
        }
    }
    rho
}

/// Pointwise decay ratios at one time, LHS over the energy combination.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecayRatios {
    pub away_cone: f64,
    pub om_uh: f64,
    pub phi2: f64,
    pub zaphi: f64,
    pub decay1: f64,
    pub omf: f64,
}

impl DecayRatios {
    pub const NAMES: [&'static str; 6] = [
        "decay_awaycone",
        "decay_omuH",
        "decay_phi2",
        "decay_zaphi",
        "decay_1",
        "decay_omf",
    ];

    pub fn values(&self) -> [f64; 6] {
        [self.away_cone, self.om_uh, self.phi2, self.zaphi, self.decay1, self.omf]
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Decay ratios for `a = 0`; `e` and `x` are `E_j` and `𝒳_j` at the order standing in for `|a| + 2`.
pub fn decay_monitors(vf: &VectorFields, base: &ZFields, e: f64, x: f64, delta: f64) -> DecayRatios {
    let sp = vf.spectral();
    let grid = *sp.grid();
    let t = base.t;
    let n = grid.num_points();
    let u: [&ScalarField; 3] = std::array::from_fn(|i| base.u[i].value());
    let grad_phi: [VectorField; 2] = std::array::from_fn(|a| sp.gradient(base.phi[a].value()));
    let mut away = 0.0_f64;
    let mut om = 0.0_f64;
    let mut sup_uhg = 0.0_f64;
    let mut sup_phi = 0.0_f64;
    for p in 0..n {
        let x = grid.position(p);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let w = if r > 0.0 {
            [x[0] / r, x[1] / r, x[2] / r]
        } else {
            [0.0; 3]
        };
        let uu = (0..3).map(|i| u[i][p].powi(2)).sum::<f64>().sqrt();
        let hh = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| base.h[i][j].value()[p].powi(2))
            .sum::<f64>()
            .sqrt();
        let mut gtx = 0.0;
        let mut gx = 0.0;
        for a in 0..2 {
            gtx += base.phi[a].coeff(1)[p].powi(2);
            for k in 0..3 {
                gx += grad_phi[a].0[k][p].powi(2);
            }
        }
        let gtx = (gtx + gx).sqrt();
        away = away.max(japanese(r) * (uu + hh + gtx));
        let wu: f64 = (0..3).map(|i| w[i] * u[i][p]).sum();
        let wh = (0..3)
            .map(|i| (0..3).map(|j| w[j] * base.h[j][i].value()[p]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        om = om.max(japanese(r).powf(1.5) * (wu.abs() + wh));
        sup_uhg = sup_uhg.max(uu + hh + gx.sqrt());
        let ph = (base.phi[0].value()[p].powi(2) + base.phi[1].value()[p].powi(2)).sqrt();
        sup_phi = sup_phi.max(ph);
    }
    let es = e.max(0.0).sqrt();
    let exs = es + x.max(0.0).sqrt();
    let jt = japanese(t);

    // ⟨t⟩‖f‖_{L∞(r<2⟨t⟩/3)} against ‖f‖ + ‖⟨t−r⟩∇f‖ + ‖⟨t−r⟩∇²f‖, worst velocity component
    let weight = ScalarField::from_fn(grid, |x| japanese(t - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()));
    let mut d1 = 0.0_f64;
    for f in u {
        let mut inner_sup = 0.0_f64;
        for p in 0..n {
            if grid.radius(p) < 2.0 * jt / 3.0 {
                inner_sup = inner_sup.max(f[p].abs());
            }
        }
        let g = sp.gradient(f);
        let mut wg = 0.0;
        let mut wgg = 0.0;
        for c in &g.0 {
            wg += c.mul(&weight).norm_l2().powi(2);
            for cc in sp.gradient(c).0.iter() {
                wgg += cc.mul(&weight).norm_l2().powi(2);
            }
        }
        d1 = d1.max(ratio(jt * inner_sup, f.norm_l2() + wg.sqrt() + wgg.sqrt()));
    }

    // ‖r^{3/2} ω·u‖∞ against Σ_{|α|≤2} ‖Ω^α u‖
    let mut lhs = 0.0_f64;
    for p in 0..n {
        let x = grid.position(p);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r > 0.0 {
            let wu: f64 = (0..3).map(|i| x[i] * u[i][p]).sum::<f64>() / r;
            lhs = lhs.max(r.powf(1.5) * wu.abs());
        }
    }
    let mut rhs = 0.0;
    for i in 0..3 {
        let f = Jet::constant(u[i].clone());
        rhs += f.value().norm_l2();
        for k in 0..3 {
            let of = vf.omega(&f, k);
            rhs += of.value().norm_l2();
            for l in k..3 {
                rhs += vf.omega(&of, l).value().norm_l2();
            }
        }
    }

    DecayRatios {
        away_cone: ratio(away, es),
        om_uh: ratio(om, es),
        phi2: ratio(jt * sup_uhg, exs),
        zaphi: ratio(sup_phi * jt.powf(1.0 / 3.0 - delta), exs),
        decay1: d1,
        omf: ratio(lhs, rhs),
    }
}

/// Monitor values at one sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyReport {
    pub t: f64,
    pub step: u64,
    pub contaminated: bool,
    pub e_basic: f64,
    /// `dE/dt` from the right-hand side.
    pub de_dt_rhs: f64,
    pub per_index: Vec<IndexEnergies>,
    /// `E_k = Σ_{|a|≤k} E_a` for `k = 0..=max_order` (empty outside the window).
    pub e: Vec<f64>,
    pub x: Vec<f64>,
    pub cal: Vec<f64>,
    pub bold: Vec<f64>,
    pub constraints: ConstraintReport,
    pub renorm_change: f64,
    pub support: f64,
    pub decay: Option<DecayRatios>,
}

impl EnergyReport {
    /// `𝒳_k / E_{k+1}` for every available pair.
    pub fn x_ratios(&self) -> Vec<f64> {
        (0..self.x.len())
            .filter(|&k| k + 1 < self.e.len())
            .map(|k| ratio(self.x[k], self.e[k + 1]))
            .collect()
    }

    /// Largest `|𝐄_a − E_a| / E_a` over the multi-indices.
    pub fn bold_deviation(&self) -> f64 {
        self.per_index
            .iter()
            .filter(|p| p.e > 0.0)
            .map(|p| (p.bold - p.e).abs() / p.e)
            .fold(0.0, f64::max)
    }
}

/// Evaluates generalized energies and decay ratios on snapshots.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub vf: VectorFields,
    pub spec: MonitorSpec,
    indices: Vec<MultiIndex>,
}

impl Monitor {
    pub fn new(vf: VectorFields, spec: MonitorSpec) -> Result<Self> {
        spec.validate().map_err(|message| Error::Config {
            key: "monitors".into(),
            line: 0,
            message,
        })?;
        let indices = MultiIndex::all_up_to(spec.max_order, vf.grid().dim())?;
        Ok(Monitor { vf, spec, indices })
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// `Z^a` for every monitored index.
    pub fn family(&self, s: &StateHPhi) -> Result<(ZFields, ZFamily)> {
        let base = self.vf.base(s, self.spec.jet_order())?;
        let fam = self.vf.family(&base, &self.indices)?;
        Ok((base, fam))
    }

    /// Fills the energy and decay parts of `report` from `s`; leaves them empty outside the window.
    pub fn fill(&self, s: &StateHPhi, report: &mut EnergyReport) -> Result<()> {
        if self.vf.check_window(s.t).is_err() {
            report.contaminated = true;
            return Ok(());
        }
        let sp = self.vf.spectral();
        let (base, fam) = self.family(s)?;
        let k = self.spec.max_order;
        let mut e = vec![0.0; k + 1];
        let mut x = vec![0.0; self.spec.x_order + 1];
        let mut cal = vec![0.0; k + 1];
        let mut bold = vec![0.0; k + 1];
        for a in &self.indices {
            let z = &fam[a];
            let p = pieces(sp, z, &base);
            let ea = energy_from(z, &p);
            let (ca, ba) = modified_from(z, &base, &p);
            let xa = (a.order() <= self.spec.x_order).then(|| weighted_norm(sp, z));
            for j in a.order()..=k {
                e[j] += ea;
                cal[j] += ca;
                bold[j] += ba;
            }
            if let Some(v) = xa {
                for j in a.order()..=self.spec.x_order {
                    x[j] += v;
                }
            }
            report.per_index.push(IndexEnergies {
                index: *a,
                e: ea,
                x: xa,
                cal: ca,
                bold: ba,
            });
        }
        if self.spec.decay {
            // E_{|a|+2} and 𝒳_{|a|+2} at a = 0, capped by the monitored orders;
            // 𝒳_j sums |a| ≤ j − 1
            let ej = e[k.min(2)];
            let xj = x[self.spec.x_order.min(1)];
            report.decay = Some(decay_monitors(&self.vf, &base, ej, xj, self.spec.delta));
        }
        report.e = e;
        report.x = x;
        report.cal = cal;
        report.bold = bold;
        Ok(())
    }
}

/// 4th-order derivative of uniformly spaced samples; one-sided five-point stencils at the ends.
pub fn time_derivative(values: &[f64], spacing: f64) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 5 {
        return Err(Error::SeriesTooShort(n));
    }
    let f = values;
    let h12 = 12.0 * spacing;
    Ok((0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / h12
            } else if i == 0 {
                (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / h12
            } else if i == 1 {
                (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / h12
            } else if i == n - 2 {
                (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / h12
            } else {
                (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / h12
            }
        })
        .collect())
}

/// Series-level ratios; `ev[k]`, `le[k]` hold order pair `(k, k − 2)` for `k ≥ 2`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InequalityReport {
    pub de_dt_fd: Vec<f64>,
    pub ev: Vec<(usize, Vec<f64>)>,
    pub le: Vec<(usize, Vec<f64>)>,
    /// Running `sup_{s≤t} E_k^{1/2}(s)/⟨s⟩^δ` for every `k`.
    pub energy_bound: Vec<Vec<f64>>,
}

/// Differential-inequality ratios over a uniformly sampled series.
pub fn inequality_monitors(rows: &[EnergyReport], delta: f64) -> Result<InequalityReport> {
    let n = rows.len();
    if n < 5 {
        return Err(Error::SeriesTooShort(n));
    }
    let spacing = rows[1].t - rows[0].t;
    let basic: Vec<f64> = rows.iter().map(|r| r.e_basic).collect();
    let mut out = InequalityReport {
        de_dt_fd: time_derivative(&basic, spacing)?,
        ..Default::default()
    };
    let orders = rows.iter().map(|r| r.e.len()).min().unwrap_or(0);
    for k in 0..orders {
        let mut sup = 0.0_f64;
        out.energy_bound.push(
            rows.iter()
                .map(|r| {
                    sup = sup.max(r.e[k].max(0.0).sqrt() / japanese(r.t).powf(delta));
                    sup
                })
                .collect(),
        );
    }
    for k in 2..orders {
        let bold: Vec<f64> = rows.iter().map(|r| r.bold[k]).collect();
        let cal: Vec<f64> = rows.iter().map(|r| r.cal[k - 2]).collect();
        let db = time_derivative(&bold, spacing)?;
        let dc = time_derivative(&cal, spacing)?;
        let ev = rows
            .iter()
            .zip(&db)
            .map(|(r, d)| {
                let low = r.e[k - 2];
                ratio(*d, r.bold[k] * low.max(0.0).sqrt() * (1.0 + low) / japanese(r.t))
            })
            .collect();
        let le = rows
            .iter()
            .zip(&dc)
            .map(|(r, d)| {
                let low = r.e[k - 2];
                let w = japanese(r.t).powf(-4.0 / 3.0 + delta);
                ratio(*d, w * low * r.e[k].max(0.0).sqrt() * (1.0 + low))
            })
            .collect();
        out.ev.push((k, ev));
        out.le.push((k, le));
    }
    Ok(out)
}

/// `|∫u·(∇·H) + ∫H:∇u|` relative to the size of either term.
pub fn ibp_defect(sp: &Spectral, u: &VectorField, h: &crate::grid::MatrixField) -> f64 {
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            a += u.0[i].inner(&sp.derivative(&h.0[i][j], j));
            b += h.0[i][j].inner(&sp.derivative(&u.0[i], j));
        }
    }
    relative(a + b, a.abs().max(b.abs()))
}

/// `∫∂_j(Z^a u_i Z^a H_ik H_jk − ½ u_j(|Z^a u|² + |Z^a H|²))`, relative to the `L¹` size of the integrand.
pub fn i13_defect(
    sp: &Spectral,
    u: &VectorField,
    h: &crate::grid::MatrixField,
    zu: &VectorField,
    zh: &crate::grid::MatrixField,
) -> f64 {
    let grid = *sp.grid();
    let sq = zu.dot(zu).add(&{
        let mut s = ScalarField::zeros(grid);
        for r in &zh.0 {
            for c in r {
                s.axpy(1.0, &c.mul(c));
            }
        }
        s
    });
    let mut total = ScalarField::zeros(grid);
    for j in 0..3 {
        let mut flux = u.0[j].mul(&sq).scaled(-0.5);
        for i in 0..3 {
            for k in 0..3 {
                flux.axpy(1.0, &zu.0[i].mul(&zh.0[i][k]).mul(&h.0[j][k]));
            }
        }
        total.axpy(1.0, &sp.derivative(&flux, j));
    }
    let mag = total.map(f64::abs).integrate();
    relative(total.integrate(), mag)
}

/// `∫ v·∇(∇f·∇g)` for divergence-free `v`, relative to `‖v‖ ‖∇(∇f·∇g)‖`.
pub fn i21_defect(sp: &Spectral, v: &VectorField, f: &ScalarField, g: &ScalarField) -> f64 {
    let q = sp.gradient(f).dot(&sp.gradient(g));
    let gq = sp.gradient(&q);
    let val: f64 = (0..3).map(|i| v.0[i].inner(&gq.0[i])).sum();
    relative(val, v.norm_l2_sq().sqrt() * gq.norm_l2_sq().sqrt())
}

fn relative(v: f64, scale: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MatrixField;
    use crate::spectral::Spectral;
    use std::f64::consts::PI;

    fn grid(dim: usize, n: usize) -> Grid {
        Grid::new(dim, 2.0 * PI, n).unwrap()
    }

    fn vf(g: Grid) -> VectorFields {
        VectorFields::new(&Dynamics::new(Spectral::new(g)), Formulation::Hphi, 0.5)
    }

    #[test]
    fn equilibrium_energies_vanish() {
        let g = grid(3, 8);
        let sp = Spectral::new(g);
        assert_eq!(basic_energy_fd(&sp, &StateFD::equilibrium(g)), 0.0);
        assert_eq!(basic_energy_hphi(&sp, &StateHPhi::equilibrium(g)), 0.0);
        let m = Monitor::new(vf(g), MonitorSpec::default()).unwrap();
        let mut r = EnergyReport::default();
        m.fill(&StateHPhi::equilibrium(g), &mut r).unwrap();
        assert!(r.e.iter().chain(&r.x).chain(&r.cal).chain(&r.bold).all(|&v| v == 0.0));
        assert!(r.decay.unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_slot_energy() {
        let g = grid(3, 16);
        let sp = Spectral::new(g);
        let mut s = StateFD::equilibrium(g);
        let bump = crate::initdata::window(g, 1.5);
        s.w.0[1] = bump.clone();
        let e = basic_energy_fd(&sp, &s);
        assert!((e - 0.5 * bump.inner(&bump)).abs() < 1e-15);
    }

    #[test]
    fn translation_energy_by_hand() {
        // single harmonic in every slot, a = ∂₁
        let g = grid(2, 16);
        let v = vf(g);
        let sp = v.spectral();
        let eps = 1e-2;
        let mut s = StateHPhi::equilibrium(g);
        s.u.0[1] = ScalarField::from_fn(g, |x| eps * x[0].cos());
        s.h.0[0][1] = ScalarField::from_fn(g, |x| eps * (x[0] + x[1]).sin());
        s.phi[0] = ScalarField::from_fn(g, |x| eps * (2.0 * x[1]).sin());
        s.psi[0] = ScalarField::from_fn(g, |x| eps * x[0].sin());
        let a = MultiIndex::unit(crate::vectorfields::VfTag::D1);
        let base = v.base(&s, 2).unwrap();
        let z = v.apply(&a, &base);
        let got = generalized_energy(sp, &z, &base);
        // hand assembly: ½‖∂₁(u, H, ∂_tφ + u·∇φ, ∇φ)‖² with ∂_tφ = ψ − P(u·∇φ)
        let d = |f: &ScalarField| sp.derivative(f, 0);
        let adv = s.u.dot(&sp.gradient(&s.phi[0]));
        let dt_phi = s.psi[0].sub(&sp.dealias_field(&adv));
        let dphi = d(&s.phi[0]);
        let mut mat = d(&dt_phi);
        mat.axpy(1.0, &s.u.dot(&sp.gradient(&dphi)));
        let want = 0.5
            * (d(&s.u.0[1]).norm_l2().powi(2)
                + d(&s.h.0[0][1]).norm_l2().powi(2)
                + mat.norm_l2().powi(2)
                + sp.gradient(&dphi).norm_l2_sq());
        assert!((got - want).abs() < 1e-11 * want.max(1.0), "{got} {want}");
    }

    #[test]
    fn corrections_vanish_without_angles() {
        let g = grid(2, 16);
        let v = vf(g);
        let mut s = StateHPhi::equilibrium(g);
        s.u.0[1] = ScalarField::from_fn(g, |x| 1e-2 * x[0].cos());
        let base = v.base(&s, 2).unwrap();
        let e = generalized_energy(v.spectral(), &base, &base);
        let (c, b) = modified_energies(v.spectral(), &base, &base);
        assert_eq!(e, c);
        assert_eq!(e, b);
    }

    #[test]
    fn modified_energy_by_hand() {
        // constant u and a single φ₁ harmonic: corrections by hand quadrature
        let g = grid(2, 16);
        let v = vf(g);
        let sp = v.spectral();
        let (u0, eps) = (0.3, 1e-2);
        let mut s = StateHPhi::equilibrium(g);
        s.u.0[0] = ScalarField::constant(g, u0);
        s.phi[0] = ScalarField::from_fn(g, |x| eps * x[0].sin());
        s.phi[1] = ScalarField::constant(g, 0.2);
        s.psi[0] = ScalarField::from_fn(g, |x| -u0 * eps * x[0].cos());
        let base = v.base(&s, 2).unwrap();
        let (cal, bold) = modified_energies(sp, &base, &base);
        let e = generalized_energy(sp, &base, &base);
        // u·∇φ₁ = u0 ε cos x; D_tφ₁ = ψ₁ = −u0 ε cos x, so ∫½|v|² + D_tφ v = −½∫v²
        let area = (2.0 * PI).powi(2);
        let v2 = (u0 * eps).powi(2) * area / 2.0;
        assert!((cal - (e - 0.5 * v2)).abs() < 1e-11 * e, "{cal} {e}");
        let s2 = 0.2f64.sin().powi(2);
        // |D_tφ₁|² + |∇φ₁|² + |v|² + 2 D_tφ₁ v = ε²cos²x (u0² + 1 + u0² − 2u0²)
        let corr = 0.5 * s2 * eps * eps * area / 2.0;
        assert!((bold - (cal - corr)).abs() < 1e-11 * e, "{bold} {cal} {corr}");
    }

    #[test]
    fn weighted_norm_at_time_zero_matches_quadrature() {
        let g = grid(3, 32);
        let v = vf(g);
        let sp = v.spectral();
        let mut s = StateHPhi::equilibrium(g);
        let w = crate::initdata::window(g, 1.5);
        s.u.0[2] = w.scaled(1e-3);
        let base = v.base(&s, 2).unwrap();
        let got = weighted_norm(sp, &base);
        let gu = sp.gradient(&s.u.0[2]);
        let mut want = 0.0;
        for p in 0..g.num_points() {
            let r = g.radius(p);
            want += (1.0 + r * r) * (0..3).map(|k| gu.0[k][p].powi(2)).sum::<f64>();
        }
        want *= g.cell_volume();
        assert!((got - want).abs() <= 1e-10 * want, "{got} {want}");
    }

    #[test]
    fn fourth_order_derivative_is_exact_on_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..7).map(|i| (i as f64 * h).powi(4)).collect();
        let d = time_derivative(&f, h).unwrap();
        for (i, v) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - 4.0 * x.powi(3)).abs() < 1e-12, "{i} {v}");
        }
        assert!(matches!(time_derivative(&f[..4], h), Err(Error::SeriesTooShort(4))));
    }

    #[test]
    fn equilibrium_series_has_zero_ratios() {
        let rows: Vec<EnergyReport> = (0..6)
            .map(|i| EnergyReport {
                t: i as f64 * 0.1,
                e: vec![0.0; 3],
                x: vec![0.0; 2],
                cal: vec![0.0; 3],
                bold: vec![0.0; 3],
                ..Default::default()
            })
            .collect();
        let r = inequality_monitors(&rows, 0.1).unwrap();
        assert!(r.de_dt_fd.iter().all(|&v| v == 0.0));
        assert!(r.ev[0].1.iter().chain(&r.le[0].1).all(|&v| v == 0.0));
        assert!(r.energy_bound.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn integration_by_parts_identities() {
        let g = grid(3, 16);
        let sp = Spectral::new(g);
        let w = crate::initdata::window(g, 2.5);
        let u = sp.leray_project(&VectorField::from_fn(g, |x| {
            [x[1].sin(), x[2].cos(), (x[0] + x[1]).sin()]
        }));
        let mut h = MatrixField::zeros(g);
        for i in 0..3 {
            for j in 0..3 {
                h.0[i][j] = w.scaled((i + 2 * j) as f64 * 0.1);
            }
        }
        assert!(ibp_defect(&sp, &u, &h) < 1e-10);
        let zu = VectorField(std::array::from_fn(|i| sp.derivative(&u.0[i], 0)));
        let zh = MatrixField(std::array::from_fn(|i| {
            std::array::from_fn(|j| sp.derivative(&h.0[i][j], 1))
        }));
        assert!(i13_defect(&sp, &u, &h, &zu, &zh) < 1e-10);
        assert!(i21_defect(&sp, &zu, &w, &h.0[0][1]) < 1e-10);
    }

    #[test]
    fn support_radius_of_a_bump() {
        let g = grid(3, 32);
        let w = crate::initdata::window(g, 1.0);
        let r = support_radius(&g, &[&w], 1e-3);
        assert!(r < 1.0 && r > 0.5, "{r}");
    }
}
