//! Compactly supported, constraint-compatible initial data and manufactured solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Forcing;
use crate::error::{Error, Result};
use crate::grid::{Grid, MatrixField, ScalarField, VectorField};
use crate::spectral::Spectral;
use crate::state::{AngleField, StateHPhi};

/// Written `random_bump`, `plane_wave` or `manufactured:<name>` in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitKind {
    RandomBump,
    /// Exact plane wave of the linearized `(u, H)` system.
    PlaneWave,
    Manufactured(String),
}

impl TryFrom<String> for InitKind {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        match s.as_str() {
            "random_bump" => Ok(InitKind::RandomBump),
            "plane_wave" => Ok(InitKind::PlaneWave),
            _ => match s.strip_prefix("manufactured:") {
                Some(name) if MANUFACTURED.contains(&name) => Ok(InitKind::Manufactured(name.into())),
                Some(name) => Err(format!("unknown manufactured solution `{name}`")),
                None => Err(format!(
                    "unknown kind `{s}` (random_bump, plane_wave, manufactured:<name>)"
                )),
            },
        }
    }
}

impl From<InitKind> for String {
    fn from(k: InitKind) -> String {
        match k {
            InitKind::RandomBump => "random_bump".into(),
            InitKind::PlaneWave => "plane_wave".into(),
            InitKind::Manufactured(n) => format!("manufactured:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSpec {
    pub seed: u64,
    pub amplitude: f64,
    /// Support radius; `None` means `L/8`.
    pub support_radius: Option<f64>,
    /// Largest mode index of the random fields before windowing; `None` means `n/8`.
    pub band_limit: Option<usize>,
    pub kind: InitKind,
    pub velocity: bool,
    pub deformation: bool,
    pub angles: bool,
    /// Integration steps for the flow-map deformation.
    pub flowmap_steps: usize,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            seed: 1,
            amplitude: 1e-2,
            support_radius: None,
            band_limit: None,
            kind: InitKind::RandomBump,
            velocity: true,
            deformation: true,
            angles: true,
            flowmap_steps: 8,
        }
    }
}

impl InitSpec {
    pub fn radius(&self, grid: &Grid) -> f64 {
        self.support_radius.unwrap_or(grid.length() / 8.0)
    }

    pub fn band(&self, grid: &Grid) -> usize {
        self.band_limit.unwrap_or(grid.n() / 8)
    }

    pub fn validate(&self, grid: &Grid) -> std::result::Result<(), String> {
        let r0 = self.radius(grid);
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(format!("amplitude must be nonnegative, got {}", self.amplitude));
        }
        if !(r0 > 0.0) || r0 > grid.length() / 8.0 + 1e-12 {
            return Err(format!("support radius {r0} must lie in (0, L/8]"));
        }
        let b = self.band(grid);
        if b == 0 || b > grid.dealias_cutoff() {
            return Err(format!("band limit {b} must lie in 1..={}", grid.dealias_cutoff()));
        }
        if self.flowmap_steps == 0 {
            return Err("flowmap_steps must be positive".into());
        }
        Ok(())
    }
}

/// `exp(1 − 1/(1 − s²))` for `s = r/R₀ < 1`, zero outside.
pub fn window(grid: Grid, r0: f64) -> ScalarField {
    let mut w = ScalarField::zeros(grid);
    for p in 0..grid.num_points() {
        let s = grid.radius(p) / r0;
        if s < 1.0 {
            w[p] = (1.0 - 1.0 / (1.0 - s * s)).exp();
        }
    }
    w
}

/// Seed streams kept apart so toggling one slot leaves the others unchanged.
const STREAM_VELOCITY: u64 = 1;
const STREAM_DEFORMATION: u64 = 2;
const STREAM_ANGLES: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform noise restricted to modes with every `|k_i| ≤ band`.
fn band_limited_noise(sp: &Spectral, band: usize, rng: &mut ChaCha8Rng) -> ScalarField {
    let grid = *sp.grid();
    let noise: Vec<f64> = (0..grid.num_points()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut s = sp.fwd(&ScalarField::from_vec(grid, noise).expect("grid size"));
    let b = band as i64;
    sp.apply(&mut s, |_, idx, c| {
        if sp.mode(idx).iter().any(|m| m.abs() > b) {
            *c = num_complex::Complex64::new(0.0, 0.0);
        }
    });
    sp.backward(&s)
}

fn windowed_velocity(sp: &Spectral, spec: &InitSpec, stream: u64) -> (VectorField, VectorField) {
    let grid = *sp.grid();
    let win = window(grid, spec.radius(&grid));
    let mut r = rng(spec.seed, stream);
    let raw = VectorField(std::array::from_fn(|_| {
        band_limited_noise(sp, spec.band(&grid), &mut r).mul(&win)
    }));
    let once = sp.leray_project(&raw);
    let rewindowed = VectorField(std::array::from_fn(|c| once.0[c].mul(&win)));
    let mut u = sp.dealias_vector(&sp.leray_project(&rewindowed));
    let mut pre = rewindowed;
    let m = u.max_norm();
    if m > 0.0 {
        u.scale(spec.amplitude / m);
        pre.scale(spec.amplitude / m);
    }
    (u, pre)
}

/// Divergence-free velocity: windowed noise, projected, re-windowed,
/// re-projected, dealiased, and scaled to `max|u| = ε`.
pub fn gen_divfree_velocity(sp: &Spectral, spec: &InitSpec) -> VectorField {
    if spec.amplitude == 0.0 {
        return VectorField::zeros(*sp.grid());
    }
    windowed_velocity(sp, spec, STREAM_VELOCITY).0
}

/// The re-windowed field before the final projection, scaled like the output
/// of [`gen_divfree_velocity`]; compactly supported by construction.
pub fn prewindowed_velocity(sp: &Spectral, spec: &InitSpec) -> VectorField {
    windowed_velocity(sp, spec, STREAM_VELOCITY).1
}

/// Steady pseudo-velocity whose unit-time flow map generates the deformation.
pub fn deformation_velocity(sp: &Spectral, spec: &InitSpec) -> VectorField {
    windowed_velocity(sp, spec, STREAM_DEFORMATION).0
}

fn transport_rhs(sp: &Spectral, v: &VectorField, grad_v: &[[ScalarField; 3]; 3], f: &MatrixField) -> MatrixField {
    let grid = *sp.grid();
    let n = grid.num_points();
    MatrixField(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let fh = sp.fwd(&f.0[i][j]);
            let g: [ScalarField; 3] = std::array::from_fn(|a| {
                if a < grid.dim() {
                    sp.backward(&sp.diff_hat(&fh, a))
                } else {
                    ScalarField::zeros(grid)
                }
            });
            let mut out = vec![0.0; n];
            for (p, o) in out.iter_mut().enumerate() {
                let mut s = 0.0;
                for m in 0..3 {
                    s += grad_v[i][m][p] * f.0[m][j][p] - v.0[m][p] * g[m][p];
                }
                *o = s;
            }
            sp.dealias_field(&ScalarField::from_vec(grid, out).expect("grid size"))
        })
    }))
}

/// Deformation gradient of the unit-time flow of the steady field `v`, in
/// Eulerian coordinates: `∂_τ F = −v·∇F + ∇v F`, `F(0) = I`, integrated with
/// `steps` classical Runge–Kutta steps.
pub fn gen_deformation_from_flowmap(sp: &Spectral, v: &VectorField, steps: usize) -> Result<MatrixField> {
    let grid = *sp.grid();
    let mut f = MatrixField::identity(grid);
    if v.max_abs() == 0.0 {
        return Ok(f);
    }
    let vh: [_; 3] = std::array::from_fn(|c| sp.fwd(&v.0[c]));
    let grad_v: [[ScalarField; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            if j < grid.dim() {
                sp.backward(&sp.diff_hat(&vh[i], j))
            } else {
                ScalarField::zeros(grid)
            }
        })
    });
    // displacement of order one breaks the Eulerian transport
    let strain = grad_v.iter().flatten().map(|g| g.max_abs()).fold(0.0, f64::max);
    if strain > 0.5 {
        return Err(Error::FlowMap(format!("velocity gradient {strain:.3} exceeds 0.5")));
    }
    let h = 1.0 / steps as f64;
    for _ in 0..steps {
        let k1 = transport_rhs(sp, v, &grad_v, &f);
        let mut s = f.clone();
        s.axpy(0.5 * h, &k1);
        let k2 = transport_rhs(sp, v, &grad_v, &s);
        let mut s = f.clone();
        s.axpy(0.5 * h, &k2);
        let k3 = transport_rhs(sp, v, &grad_v, &s);
        let mut s = f.clone();
        s.axpy(h, &k3);
        let k4 = transport_rhs(sp, v, &grad_v, &s);
        f.axpy(h / 6.0, &k1);
        f.axpy(h / 3.0, &k2);
        f.axpy(h / 3.0, &k3);
        f.axpy(h / 6.0, &k4);
    }
    if let Some(index) = f.find_non_finite() {
        return Err(Error::FlowMap(format!("non-finite deformation at {index:?}")));
    }
    let mut dev = f.clone();
    dev.axpy(-1.0, &MatrixField::identity(grid));
    if dev.max_abs() > 0.5 {
        return Err(Error::FlowMap(format!("max|F - I| = {:.3}", dev.max_abs())));
    }
    Ok(f)
}

/// Angle data `(φ₀, ψ₁)`: windowed band-limited noise, dealiased, each pair
/// scaled to sup-norm `ε`.
pub fn gen_angles(sp: &Spectral, spec: &InitSpec) -> (AngleField, AngleField) {
    let grid = *sp.grid();
    let zero = || [ScalarField::zeros(grid), ScalarField::zeros(grid)];
    if spec.amplitude == 0.0 {
        return (zero(), zero());
    }
    let win = window(grid, spec.radius(&grid));
    let mut r = rng(spec.seed, STREAM_ANGLES);
    let mut pair = || -> AngleField {
        let mut a: AngleField =
            std::array::from_fn(|_| sp.dealias_field(&band_limited_noise(sp, spec.band(&grid), &mut r).mul(&win)));
        let m = a[0].max_abs().max(a[1].max_abs());
        for c in a.iter_mut() {
            c.scale(spec.amplitude / m);
        }
        a
    };
    let phi = pair();
    let psi = pair();
    (phi, psi)
}

/// Random-bump angle-formulation state from the requested slots.
pub fn initial_state(sp: &Spectral, spec: &InitSpec) -> Result<StateHPhi> {
    let grid = *sp.grid();
    spec.validate(&grid).map_err(|m| Error::Config {
        key: "init".into(),
        line: 0,
        message: m,
    })?;
    match &spec.kind {
        InitKind::RandomBump => {}
        InitKind::PlaneWave => return Ok(plane_wave(grid, spec.amplitude, 0.0)),
        InitKind::Manufactured(name) => return Ok(manufactured_solution(grid, name, spec.amplitude)?.exact(0.0)),
    }
    let mut s = StateHPhi::equilibrium(grid);
    if spec.velocity {
        s.u = gen_divfree_velocity(sp, spec);
    }
    if spec.deformation && spec.amplitude > 0.0 {
        let v = deformation_velocity(sp, spec);
        let mut h = gen_deformation_from_flowmap(sp, &v, spec.flowmap_steps)?;
        h.axpy(-1.0, &MatrixField::identity(grid));
        s.h = h;
    }
    if spec.angles {
        let (phi, psi1) = gen_angles(sp, spec);
        // ψ = ∂_t φ + u·∇φ at t = 0
        let mut psi = psi1;
        for a in 0..2 {
            let g = sp.gradient(&phi[a]);
            let adv = s.u.dot(&g);
            psi[a].axpy(1.0, &sp.dealias_field(&adv));
        }
        s.phi = phi;
        s.psi = psi;
    }
    Ok(s)
}

/// Time up to which a disturbance leaving `B(c, R₀)` at unit speed plus
/// advection stays inside the box.
pub fn validity_horizon(grid: &Grid, r0: f64, max_u: f64) -> f64 {
    (grid.length() / 2.0 - r0) / (1.0 + max_u)
}

/// Exact solution of the linearized `(u, H)` system along `x₁` with mode 1,
/// polarized along `e₂`: `u = a e₂ cos(k x₁ − k t)`, `H = −a e₂⊗e₁ cos(k x₁ − k t)`.
pub fn plane_wave(grid: Grid, amplitude: f64, t: f64) -> StateHPhi {
    let k = grid.k0();
    let mut s = StateHPhi::equilibrium(grid);
    s.t = t;
    s.u.0[1] = ScalarField::from_fn(grid, |x| amplitude * (k * x[0] - k * t).cos());
    s.h.0[1][0] = ScalarField::from_fn(grid, |x| -amplitude * (k * x[0] - k * t).cos());
    s
}

/// Closed-form solution and the forcing that makes it exact.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub name: String,
    grid: Grid,
    amplitude: f64,
}

pub const MANUFACTURED: [&str; 2] = ["still", "swirl-phi"];

pub fn manufactured_solution(grid: Grid, name: &str, amplitude: f64) -> Result<Manufactured> {
    if !MANUFACTURED.contains(&name) {
        return Err(Error::UnknownManufactured(name.to_string()));
    }
    Ok(Manufactured {
        name: name.to_string(),
        grid,
        amplitude,
    })
}

impl Manufactured {
    pub fn exact(&self, t: f64) -> StateHPhi {
        let g = self.grid;
        let mut s = StateHPhi::equilibrium(g);
        s.t = t;
        if self.name == "swirl-phi" {
            let (k, e) = (g.k0(), self.amplitude);
            s.phi[0] = ScalarField::from_fn(g, |x| e * (k * x[0]).sin() * t.cos());
            s.psi[0] = ScalarField::from_fn(g, |x| -e * (k * x[0]).sin() * t.sin());
        }
        s
    }

    /// `∂_t ψ₁ − Δφ₁ = ε (k² − 1) sin(k x₁) cos t`; every other slot is unforced.
    pub fn forcing(&self) -> Forcing<StateHPhi> {
        let g = self.grid;
        if self.name == "still" {
            return Forcing::none();
        }
        let (k, e) = (g.k0(), self.amplitude);
        let profile = ScalarField::from_fn(g, move |x| e * (k * k - 1.0) * (k * x[0]).sin());
        Forcing::new(move |t: f64| {
            let mut f = StateHPhi::equilibrium(g);
            f.t = t;
            f.psi[0] = profile.scaled(t.cos());
            f
        })
    }
}
