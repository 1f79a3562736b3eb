//! Classical Runge–Kutta integration at a fixed step.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, Forcing, Formulation};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::initdata::{self, InitKind, InitSpec};
use crate::spectral::Spectral;
use crate::state::{
    constraint_residuals_fd, constraint_residuals_hphi, convert_hphi_to_fd, ConstraintReport, FieldState, StateFD,
    StateHPhi,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dim: 3,
            n: 64,
            length: 2.0 * std::f64::consts::PI,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.dim, self.length, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub formulation: Formulation,
    pub t_end: f64,
    pub cfl: f64,
    /// Overrides the CFL step; the step is always shrunk so that it divides `t_end`.
    pub dt: Option<f64>,
    /// Monitor rows every this many steps.
    pub output_every: usize,
    /// Checkpoint every this many steps (0 disables periodic checkpoints).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub renormalize_director: bool,
    /// Drop all nonlinear terms.
    pub linear: bool,
    /// Keep `u` fixed at its initial value.
    pub freeze_velocity: bool,
    /// Allow `t_end` beyond the validity horizon; rows are tagged as contaminated.
    pub allow_contaminated: bool,
    pub tol_c: f64,
    pub tol_d: f64,
    pub chart_margin: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            formulation: Formulation::Hphi,
            t_end: 1.0,
            cfl: 0.4,
            dt: None,
            output_every: 1,
            checkpoint_every: 0,
            checkpoint_dir: None,
            renormalize_director: true,
            linear: false,
            freeze_velocity: false,
            allow_contaminated: false,
            tol_c: 1e-8,
            tol_d: 1e-8,
            chart_margin: 0.1,
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub init: InitSpec,
    pub run: RunSpec,
    pub monitors: crate::energies::MonitorSpec,
}

/// `cfl · h / (1 + max|u|)`.
pub fn cfl_dt(grid: &Grid, u: &VectorField, cfl: f64) -> f64 {
    cfl * grid.spacing() / (1.0 + u.max_norm())
}

/// One classical RK4 step of `∂_t U = R(U)`; stage times are set on the
/// intermediate states so that time-dependent forcing is sampled correctly.
pub fn step_rk4<S: FieldState>(s: &S, dt: f64, rhs: impl Fn(&S) -> Result<S>) -> Result<S> {
    let t = s.time();
    let k1 = rhs(s)?;
    let mut y = s.clone();
    y.axpy(0.5 * dt, &k1);
    y.set_time(t + 0.5 * dt);
    let k2 = rhs(&y)?;
    let mut y = s.clone();
    y.axpy(0.5 * dt, &k2);
    y.set_time(t + 0.5 * dt);
    let k3 = rhs(&y)?;
    let mut y = s.clone();
    y.axpy(dt, &k3);
    y.set_time(t + dt);
    let k4 = rhs(&y)?;
    let mut out = s.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out.set_time(t + dt);
    if let Some((c, index)) = out.find_non_finite() {
        return Err(Error::NonFinite {
            what: format!("state after step at t = {t} (component {c})"),
            index,
        });
    }
    Ok(out)
}

/// `d ← d/|d|`; returns the largest pointwise change.
pub fn renormalize_director(d: &mut VectorField) -> f64 {
    let n = d.0[0].data().len();
    let mut worst = 0.0_f64;
    for p in 0..n {
        let m = (d.0[0][p].powi(2) + d.0[1][p].powi(2) + d.0[2][p].powi(2)).sqrt();
        for c in 0..3 {
            let v = d.0[c][p] / m;
            worst = worst.max((v - d.0[c][p]).abs());
            d.0[c][p] = v;
        }
    }
    worst
}

/// State of either formulation.
#[derive(Debug, Clone, PartialEq)]
pub enum SimState {
    Fd(StateFD),
    Angle(StateHPhi),
}

impl SimState {
    pub fn time(&self) -> f64 {
        match self {
            SimState::Fd(s) => s.t,
            SimState::Angle(s) => s.t,
        }
    }

    pub fn velocity(&self) -> &VectorField {
        match self {
            SimState::Fd(s) => &s.u,
            SimState::Angle(s) => &s.u,
        }
    }

    pub fn components(&self) -> Vec<&crate::grid::ScalarField> {
        match self {
            SimState::Fd(s) => s.components(),
            SimState::Angle(s) => s.components(),
        }
    }

    pub fn components_mut(&mut self) -> Vec<&mut crate::grid::ScalarField> {
        match self {
            SimState::Fd(s) => s.components_mut(),
            SimState::Angle(s) => s.components_mut(),
        }
    }

    pub fn set_time(&mut self, t: f64) {
        match self {
            SimState::Fd(s) => s.t = t,
            SimState::Angle(s) => s.t = t,
        }
    }

    /// The angle-formulation view (converted for director states).
    pub fn to_hphi(&self) -> Result<StateHPhi> {
        match self {
            SimState::Fd(s) => crate::state::convert_fd_to_hphi(s),
            SimState::Angle(s) => Ok(s.clone()),
        }
    }

    pub fn to_fd(&self) -> StateFD {
        match self {
            SimState::Fd(s) => s.clone(),
            SimState::Angle(s) => convert_hphi_to_fd(s),
        }
    }

    pub fn max_diff(&self, other: &SimState) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Fixed-step integrator for one configured run.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub config: RunConfig,
    pub dynamics: Dynamics,
    pub forcing_angle: Forcing<StateHPhi>,
    pub forcing_fd: Forcing<StateFD>,
    pub state: SimState,
    pub step: u64,
    pub n_steps: u64,
    pub dt: f64,
    pub valid_until: f64,
    /// Residuals of the latest state; `director_norm` is taken before renormalization.
    pub constraints: ConstraintReport,
    /// Largest change made by the latest director renormalization.
    pub renorm_change: f64,
    pub last_checkpoint: Option<PathBuf>,
}

impl Stepper {
    pub fn new(config: RunConfig) -> Result<Self> {
        let grid = config.grid.build()?;
        let sp = Spectral::new(grid);
        let spec = &config.init;
        let mut angle = initdata::initial_state(&sp, spec)?;
        let mut forcing_angle = Forcing::none();
        if let InitKind::Manufactured(name) = &spec.kind {
            let m = initdata::manufactured_solution(grid, name, spec.amplitude)?;
            forcing_angle = m.forcing();
            angle = m.exact(0.0);
        }
        let state = match config.run.formulation {
            Formulation::Fd => {
                if !forcing_angle.is_none() {
                    return Err(Error::Formulation(
                        "manufactured solutions are defined for angle formulations".into(),
                    ));
                }
                SimState::Fd(convert_hphi_to_fd(&angle))
            }
            _ => SimState::Angle(angle),
        };
        Self::from_state(config, sp, state, 0, None, forcing_angle)
    }

    /// Resumes at `step` with a fixed `dt` (as stored in a checkpoint).
    pub fn from_state(
        config: RunConfig,
        sp: Arc<Spectral>,
        state: SimState,
        step: u64,
        dt: Option<f64>,
        forcing_angle: Forcing<StateHPhi>,
    ) -> Result<Self> {
        let grid = *sp.grid();
        let run = &config.run;
        if !(run.cfl > 0.0) || !(run.t_end >= 0.0) || run.output_every == 0 {
            return Err(Error::Config {
                key: "run".into(),
                line: 0,
                message: "cfl and output_every must be positive and t_end nonnegative".into(),
            });
        }
        let mut dynamics = Dynamics::new(sp);
        dynamics.linear = run.linear;
        dynamics.freeze_velocity = run.freeze_velocity;
        dynamics.chart_margin = run.chart_margin;
        let u = state.velocity().clone();
        let (dt, n_steps) = match dt {
            Some(dt) => (dt, ((run.t_end / dt) - 1e-9).ceil().max(0.0) as u64),
            None => {
                let dt0 = run.dt.unwrap_or_else(|| cfl_dt(&grid, &u, run.cfl));
                let n = (run.t_end / dt0 - 1e-9).ceil().max(1.0) as u64;
                (run.t_end / n as f64, n)
            }
        };
        let r0 = config.init.radius(&grid);
        let valid_until = initdata::validity_horizon(&grid, r0, u.max_norm());
        if run.t_end > valid_until + 1e-12
            && !run.allow_contaminated
            && matches!(config.init.kind, InitKind::RandomBump)
        {
            return Err(Error::WindowViolation {
                support: r0,
                t: run.t_end,
                limit: grid.length() / 2.0,
            });
        }
        let mut st = Stepper {
            config,
            dynamics,
            forcing_angle,
            forcing_fd: Forcing::none(),
            state,
            step,
            n_steps,
            dt,
            valid_until,
            constraints: ConstraintReport::default(),
            renorm_change: 0.0,
            last_checkpoint: None,
        };
        st.constraints = st.residuals();
        Ok(st)
    }

    pub fn grid(&self) -> Grid {
        *self.dynamics.grid()
    }

    pub fn spectral(&self) -> &Arc<Spectral> {
        self.dynamics.spectral()
    }

    pub fn formulation(&self) -> Formulation {
        self.config.run.formulation
    }

    pub fn time(&self) -> f64 {
        self.state.time()
    }

    pub fn done(&self) -> bool {
        self.step >= self.n_steps
    }

    pub fn contaminated(&self) -> bool {
        self.time() > self.valid_until
    }

    pub fn residuals(&self) -> ConstraintReport {
        let sp = self.spectral();
        match &self.state {
            SimState::Fd(s) => constraint_residuals_fd(sp, s),
            SimState::Angle(s) => constraint_residuals_hphi(sp, s),
        }
    }

    /// Right-hand side of the configured formulation.
    pub fn rhs(&self, s: &SimState) -> Result<SimState> {
        Ok(match s {
            SimState::Fd(s) => SimState::Fd(self.dynamics.rhs_fd(s, &self.forcing_fd)?),
            SimState::Angle(s) => {
                SimState::Angle(self.dynamics.rhs_angle(self.formulation(), s, &self.forcing_angle)?)
            }
        })
    }

    /// Advances one step, recomputes residuals, and enforces the abort threshold.
    pub fn advance(&mut self) -> Result<()> {
        let dt = self.dt;
        let next_t = (self.step + 1) as f64 * dt;
        let mut next = match &self.state {
            SimState::Fd(s) => SimState::Fd(step_rk4(s, dt, |y| self.dynamics.rhs_fd(y, &self.forcing_fd))?),
            SimState::Angle(s) => SimState::Angle(step_rk4(s, dt, |y| {
                self.dynamics.rhs_angle(self.formulation(), y, &self.forcing_angle)
            })?),
        };
        next.set_time(next_t);
        self.state = next;
        self.step += 1;
        self.constraints = self.residuals();
        self.renorm_change = 0.0;
        if let SimState::Fd(s) = &mut self.state {
            if self.config.run.renormalize_director {
                self.renorm_change = renormalize_director(&mut s.d);
            }
        }
        self.check_constraints()
    }

    fn check_constraints(&self) -> Result<()> {
        let run = &self.config.run;
        let c = &self.constraints;
        let limits = [
            ("div_u", c.div_u, run.tol_c),
            ("div_HT", c.div_ht, run.tol_c),
            ("curl_compat", c.curl_compat, run.tol_c),
            ("director_norm", c.director_norm, run.tol_d),
            ("tangency", c.tangency, run.tol_d),
        ];
        for (name, value, tol) in limits {
            if !(value <= 100.0 * tol) {
                return Err(Error::ConstraintViolation {
                    name,
                    value,
                    limit: 100.0 * tol,
                    t: self.time(),
                    last_checkpoint: self.last_checkpoint.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn checkpoint(&mut self, path: &std::path::Path) -> Result<()> {
        crate::checkpoint::write(path, self)?;
        self.last_checkpoint = Some(path.to_path_buf());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ScalarField;

    #[test]
    fn cfl_examples() {
        let g = Grid::new(3, 2.0 * std::f64::consts::PI, 64).unwrap();
        let mut u = VectorField::zeros(g);
        let dt0 = cfl_dt(&g, &u, 0.4);
        assert_eq!(dt0, 0.4 * g.spacing());
        u.0[2] = ScalarField::constant(g, 1.0);
        assert_eq!(cfl_dt(&g, &u, 0.4), dt0 / 2.0);
    }

    #[test]
    fn rk4_is_fourth_order_on_a_scalar_ode() {
        // y' = y on a constant field
        let g = Grid::new(2, 1.0, 8).unwrap();
        let err = |n: usize| {
            let mut s = StateHPhi::equilibrium(g);
            s.u.0[0] = ScalarField::constant(g, 1.0);
            let dt = 1.0 / n as f64;
            for _ in 0..n {
                s = step_rk4(&s, dt, |y: &StateHPhi| {
                    let mut r = StateHPhi::equilibrium(g);
                    r.u.0[0] = y.u.0[0].clone();
                    Ok(r)
                })
                .unwrap();
            }
            (s.u.0[0][0] - 1f64.exp()).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.6, "ratio {ratio}");
    }

    #[test]
    fn renormalization_reports_change() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let mut d = VectorField::zeros(g);
        d.0[0] = ScalarField::constant(g, 2.0);
        assert_eq!(renormalize_director(&mut d), 1.0);
        assert_eq!(d.0[0][3], 1.0);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let mut cfg = RunConfig {
            grid: GridSpec {
                dim: 2,
                n: 16,
                length: 2.0 * std::f64::consts::PI,
            },
            ..Default::default()
        };
        cfg.init.amplitude = 0.0;
        cfg.run.t_end = 0.2;
        for f in [Formulation::Fd, Formulation::Hphi] {
            cfg.run.formulation = f;
            let mut st = Stepper::new(cfg.clone()).unwrap();
            let s0 = st.state.clone();
            while !st.done() {
                st.advance().unwrap();
            }
            assert_eq!(st.state.max_diff(&s0), 0.0);
            assert!((st.time() - 0.2).abs() < 1e-15);
        }
    }
}
