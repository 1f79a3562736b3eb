//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic `LCESIMCK`, version `u32`, dim `u32`, n `u32`,
//! length `f64`, formulation `u32`, t `f64`, dt `f64`, step `u64`, validity
//! horizon `f64`, component count `u32`, the component arrays as `f64` in state order, then
//! the run configuration as a length-prefixed TOML string.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dynamics::{Forcing, Formulation};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::initdata::{self, InitKind};
use crate::spectral::Spectral;
use crate::state::{StateFD, StateHPhi};
use crate::timestepper::{RunConfig, SimState, Stepper};

pub const MAGIC: &[u8; 8] = b"LCESIMCK";
pub const VERSION: u32 = 1;

pub fn write(path: &Path, st: &Stepper) -> Result<()> {
    let grid = st.grid();
    let comps = st.state.components();
    let mut buf = Vec::with_capacity(64 + comps.len() * grid.num_points() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    buf.extend_from_slice(&grid.length().to_le_bytes());
    buf.extend_from_slice(&st.formulation().code().to_le_bytes());
    buf.extend_from_slice(&st.time().to_le_bytes());
    buf.extend_from_slice(&st.dt.to_le_bytes());
    buf.extend_from_slice(&st.step.to_le_bytes());
    buf.extend_from_slice(&st.valid_until.to_le_bytes());
    buf.extend_from_slice(&(comps.len() as u32).to_le_bytes());
    for c in comps {
        for v in c.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let cfg = toml::to_string(&st.config).map_err(|e| Error::Checkpoint(format!("config encoding: {e}")))?;
    buf.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
    buf.extend_from_slice(cfg.as_bytes());
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Decoded checkpoint contents.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub grid: Grid,
    pub formulation: Formulation,
    pub dt: f64,
    pub step: u64,
    pub valid_until: f64,
    pub state: SimState,
    pub config: RunConfig,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { data: bytes, pos: 0 };
    if c.take(8).ok() != Some(&MAGIC[..]) {
        return Err(Error::Checkpoint("magic mismatch".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = c.u32()? as usize;
    let n = c.u32()? as usize;
    let length = c.f64()?;
    let grid = Grid::new(dim, length, n).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let code = c.u32()?;
    let formulation =
        Formulation::from_code(code).ok_or_else(|| Error::Checkpoint(format!("unknown formulation {code}")))?;
    let t = c.f64()?;
    let dt = c.f64()?;
    let step = c.u64()?;
    let valid_until = c.f64()?;
    let ncomp = c.u32()? as usize;
    let mut state = match formulation {
        Formulation::Fd => SimState::Fd(StateFD::equilibrium(grid)),
        _ => SimState::Angle(StateHPhi::equilibrium(grid)),
    };
    state.set_time(t);
    let slots = state.components_mut();
    if slots.len() != ncomp {
        return Err(Error::Checkpoint(format!(
            "expected {} components, found {ncomp}",
            slots.len()
        )));
    }
    for slot in slots {
        let raw = c.take(8 * grid.num_points())?;
        for (v, b) in slot.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    let len = c.u64()? as usize;
    let text = std::str::from_utf8(c.take(len)?).map_err(|_| Error::Checkpoint("config is not UTF-8".into()))?;
    let config: RunConfig = toml::from_str(text).map_err(|e| Error::Checkpoint(format!("config: {e}")))?;
    Ok(Checkpoint {
        grid,
        formulation,
        dt,
        step,
        valid_until,
        state,
        config,
    })
}

/// Rebuilds the stepper that wrote `ck`; continuing it reproduces the original run bitwise.
pub fn resume(ck: Checkpoint) -> Result<Stepper> {
    let mut forcing = Forcing::none();
    if let InitKind::Manufactured(name) = &ck.config.init.kind {
        forcing = initdata::manufactured_solution(ck.grid, name, ck.config.init.amplitude)?.forcing();
    }
    let sp = Spectral::new(ck.grid);
    let mut st = Stepper::from_state(ck.config, sp, ck.state, ck.step, Some(ck.dt), forcing)?;
    st.valid_until = ck.valid_until;
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestepper::GridSpec;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig {
            grid: GridSpec {
                dim: 2,
                n: 32,
                length: 2.0 * std::f64::consts::PI,
            },
            ..Default::default()
        };
        cfg.init.amplitude = 1e-2;
        cfg.run.t_end = 0.3;
        // 32² cannot hold the constraints below the default abort level
        cfg.run.tol_c = 1e-3;
        cfg.run.tol_d = 1e-3;
        cfg
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let err = decode(b"NOTACHECKPOINT__________").unwrap_err();
        assert!(err.to_string().starts_with("bad checkpoint header"));
    }

    #[test]
    fn restart_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for f in [Formulation::Fd, Formulation::Hphi] {
            let mut cfg = small_config();
            cfg.run.formulation = f;
            let mut full = Stepper::new(cfg.clone()).unwrap();
            let mut part = Stepper::new(cfg).unwrap();
            let path = dir.path().join(format!("{}.ck", f.name()));
            let half = full.n_steps / 2;
            while part.step < half {
                part.advance().unwrap();
            }
            part.checkpoint(&path).unwrap();
            let mut resumed = resume(read(&path).unwrap()).unwrap();
            assert_eq!(resumed.state, part.state);
            while !resumed.done() {
                resumed.advance().unwrap();
            }
            while !full.done() {
                full.advance().unwrap();
            }
            assert_eq!(resumed.state, full.state);
            assert_eq!(resumed.time().to_bits(), full.time().to_bits());
        }
    }
}
