//! Registered experiment templates, one per acceptance criterion.

use crate::dynamics::Formulation;
use crate::initdata::InitKind;
use crate::timestepper::{GridSpec, RunConfig};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    /// Acceptance criterion the preset's `verify` suite decides.
    pub criterion: u8,
    pub description: &'static str,
    pub config: RunConfig,
    pub thresholds: Vec<(&'static str, f64)>,
}

impl Preset {
    pub fn threshold(&self, name: &str) -> f64 {
        self.thresholds
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("preset {} has no threshold {name}", self.name))
    }
}

fn grid(dim: usize, n: usize) -> GridSpec {
    GridSpec {
        dim,
        n,
        length: 2.0 * std::f64::consts::PI,
    }
}

fn base(dim: usize, n: usize, t_end: f64) -> RunConfig {
    let mut c = RunConfig {
        grid: grid(dim, n),
        ..RunConfig::default()
    };
    c.run.t_end = t_end;
    c.monitors.generalized = false;
    c
}

pub fn all() -> Vec<Preset> {
    let mut out = Vec::new();

    out.push(Preset {
        name: "spectral-exactness",
        criterion: 1,
        description: "single-harmonic derivatives and Leray projection of gradients",
        config: base(3, 32, 0.0),
        thresholds: vec![("derivative", 1e-12), ("leray_gradient", 1e-11)],
    });

    // residuals are measured over the whole trajectory, so the abort level is lifted
    let mut c = base(3, 64, 1.0);
    c.run.formulation = Formulation::Fd;
    c.run.tol_c = 1e-2;
    c.run.tol_d = 1e-2;
    out.push(Preset {
        name: "constraint-propagation",
        criterion: 2,
        description: "flow-map data at 64^3, eps = 1e-2: max constraint residuals up to t = 1",
        config: c.clone(),
        thresholds: vec![
            ("div_u", 1e-6),
            ("div_HT", 1e-6),
            ("curl_compat", 1e-6),
            ("director_norm", 1e-6),
        ],
    });

    out.push(Preset {
        name: "energy-conservation",
        criterion: 3,
        description: "basic-energy drift on the constraint run and its dt-halving ratio",
        config: c,
        thresholds: vec![("drift", 1e-6), ("halving_ratio", 16.0), ("halving_tolerance", 0.2)],
    });

    let mut c = base(3, 64, 0.5);
    c.run.tol_c = 1e-2;
    c.run.tol_d = 1e-2;
    out.push(Preset {
        name: "cross-formulation",
        criterion: 4,
        description: "matched fd and hphi runs compared at t = 0.5",
        config: c,
        thresholds: vec![("sup_difference", 1e-6)],
    });

    let mut c = base(3, 32, 0.5);
    c.init.angles = false;
    c.run.tol_c = 1e-2;
    // the wave comparison needs the RK4 error on the top resolved mode below 1e-6
    c.run.cfl = 0.125;
    out.push(Preset {
        name: "reductions",
        criterion: 5,
        description: "phi = 0 invariance, elastodynamics match, and the Ericksen-Leslie wave limit",
        config: c,
        thresholds: vec![
            ("phi_invariance", 1e-12),
            ("elastodynamics", 1e-10),
            ("wave_limit", 1e-6),
            ("wave_amplitude", 1e-3),
        ],
    });

    let mut c = base(3, 64, 0.5);
    c.init.kind = InitKind::Manufactured("swirl-phi".into());
    out.push(Preset {
        name: "manufactured",
        criterion: 6,
        description: "swirl-phi manufactured solution: global error and temporal order",
        config: c,
        thresholds: vec![("global_error", 1e-7), ("order", 4.0), ("order_tolerance", 0.2)],
    });

    out.push(Preset {
        name: "identities",
        criterion: 7,
        description: "integration-by-parts cancellations, radial decomposition, Parseval, projector idempotence",
        config: base(3, 32, 0.0),
        thresholds: vec![("identity", 1e-10)],
    });

    let mut c = base(3, 64, 0.3);
    c.init.amplitude = 1e-3;
    c.run.tol_c = 1e-2;
    c.run.tol_d = 1e-2;
    out.push(Preset {
        name: "commuted-residual",
        criterion: 8,
        description: "commuted-equation residuals for d1 and rot3 under dt halving, eps = 1e-3",
        config: c,
        thresholds: vec![("order_min", 3.5), ("order_max", 4.5)],
    });

    out.push(Preset {
        name: "scaling-symmetry",
        criterion: 9,
        description: "lambda = 2 rescaled snapshot against the resampling discretization residual",
        config: base(3, 32, 0.0),
        thresholds: vec![("lambda", 2.0), ("factor", 10.0)],
    });

    let mut c = base(3, 32, 2.3);
    c.monitors.generalized = true;
    c.monitors.max_order = 2;
    c.monitors.x_order = 1;
    c.run.tol_c = 1e-2;
    c.run.tol_d = 1e-2;
    out.push(Preset {
        name: "monitored-trends",
        criterion: 10,
        description: "report-only ratios over t in [1, T_valid] at two amplitudes",
        config: c,
        thresholds: vec![("t_start", 1.0), ("second_amplitude", 1e-3)],
    });

    out
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::validate;

    #[test]
    fn presets_cover_every_criterion_once() {
        let mut seen: Vec<u8> = all().iter().map(|p| p.criterion).collect();
        seen.sort();
        assert_eq!(seen, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn preset_configs_validate() {
        for p in all() {
            validate(&p.config).unwrap_or_else(|e| panic!("{}: {e:?}", p.name));
        }
    }
}
