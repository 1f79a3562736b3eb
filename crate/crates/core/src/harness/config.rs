//! TOML run configuration: `[grid]`, `[init]`, `[run]`, `[monitors]` plus an optional top-level `preset`.

use std::path::Path;

use toml::{Table, Value};

use super::presets;
use crate::error::{Error, Result};
use crate::initdata::{validity_horizon, InitKind};
use crate::timestepper::RunConfig;

const SECTIONS: [&str; 4] = ["grid", "init", "run", "monitors"];

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses and validates a configuration; omitted keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let text = quote_bare_preset(text);
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| toml_error(&text, &e))?;
    for (key, value) in &table {
        let known = key == "preset" || (SECTIONS.contains(&key.as_str()) && value.is_table());
        if !known {
            return Err(config_error(&text, key, "unknown key or not a section"));
        }
    }
    let merged = match table.remove("preset") {
        Some(Value::String(name)) => {
            let preset = presets::find(&name)
                .ok_or_else(|| config_error(&text, "preset", &format!("unknown preset `{name}`")))?;
            let mut base = Table::try_from(&preset.config).expect("preset configs serialize");
            merge(&mut base, table);
            Some(toml::to_string(&base).expect("tables serialize"))
        }
        Some(_) => return Err(config_error(&text, "preset", "preset must be a name")),
        None => None,
    };
    let source = merged.as_deref().unwrap_or(&text);
    let cfg: RunConfig = toml::from_str(source).map_err(|e| {
        let (line, key) = locate(source, &e);
        // spans into a merged preset refer to generated text; map back by key
        let line = if merged.is_some() { find_line(&text, &key) } else { line };
        Error::Config {
            key,
            line,
            message: e.message().to_string(),
        }
    })?;
    validate(&cfg).map_err(|(key, message)| Error::Config {
        line: find_line(&text, &key),
        key,
        message,
    })?;
    Ok(cfg)
}

/// Checks every invariant a run relies on; errors carry the dotted key.
pub fn validate(cfg: &RunConfig) -> std::result::Result<(), (String, String)> {
    let err = |k: &str, m: String| Err((k.to_string(), m));
    let grid = match cfg.grid.build() {
        Ok(g) => g,
        Err(e) => return err("grid.n", e.to_string()),
    };
    cfg.init.validate(&grid).map_err(|m| ("init".to_string(), m))?;
    cfg.monitors.validate().map_err(|m| ("monitors".to_string(), m))?;
    let run = &cfg.run;
    if !(run.cfl > 0.0 && run.cfl.is_finite()) {
        return err("run.cfl", format!("cfl must be positive, got {}", run.cfl));
    }
    if !(run.t_end >= 0.0 && run.t_end.is_finite()) {
        return err("run.t_end", format!("t_end must be nonnegative, got {}", run.t_end));
    }
    if let Some(dt) = run.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return err("run.dt", format!("dt must be positive, got {dt}"));
        }
    }
    if run.output_every == 0 {
        return err("run.output_every", "output_every must be positive".into());
    }
    if !(run.tol_c > 0.0) || !(run.tol_d > 0.0) {
        return err("run.tol_c", "tolerances must be positive".into());
    }
    if !(run.chart_margin > 0.0 && run.chart_margin < std::f64::consts::FRAC_PI_2) {
        return err("run.chart_margin", "chart_margin must lie in (0, π/2)".into());
    }
    if run.checkpoint_every > 0 && run.checkpoint_dir.is_none() {
        return err("run.checkpoint_dir", "checkpoint_every needs checkpoint_dir".into());
    }
    if matches!(cfg.init.kind, InitKind::RandomBump) && !run.allow_contaminated {
        // the generated velocity has max|u| = ε exactly
        let max_u = if cfg.init.velocity { cfg.init.amplitude } else { 0.0 };
        let horizon = validity_horizon(&grid, cfg.init.radius(&grid), max_u);
        if run.t_end > horizon + 1e-12 {
            return err(
                "run.t_end",
                format!(
                    "t_end {} exceeds the validity horizon {horizon:.4}; set allow_contaminated to override",
                    run.t_end
                ),
            );
        }
    }
    Ok(())
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `preset = energy-conservation` is accepted without quotes.
fn quote_bare_preset(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    for line in text.lines() {
        let quoted = line.split_once('=').and_then(|(k, v)| {
            let v = v.trim();
            let bare = !v.is_empty() && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            (k.trim() == "preset" && bare).then(|| format!("preset = \"{v}\""))
        });
        out.push_str(quoted.as_deref().unwrap_or(line));
        out.push('\n');
    }
    out
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, key) = locate(text, e);
    Error::Config {
        key,
        line,
        message: e.message().to_string(),
    }
}

/// Line of the error span and the dotted key written on that line.
fn locate(text: &str, e: &toml::de::Error) -> (usize, String) {
    let Some(span) = e.span() else {
        return (0, unknown_key(e.message()).unwrap_or_default());
    };
    let line = text[..span.start].matches('\n').count() + 1;
    let mut section = None;
    for l in text.lines().take(line) {
        if let Some(name) = l.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = Some(name.trim().to_string());
        }
    }
    let written = text.lines().nth(line - 1).unwrap_or("");
    let key = match unknown_key(e.message()) {
        Some(k) => k,
        None => match written.split_once('=') {
            Some((k, _)) => match &section {
                Some(s) => format!("{s}.{}", k.trim()),
                None => k.trim().to_string(),
            },
            None => written.trim().trim_matches(|c| c == '[' || c == ']').to_string(),
        },
    };
    (line, key)
}

fn unknown_key(message: &str) -> Option<String> {
    let rest = message.split("unknown field `").nth(1)?;
    Some(rest.split('`').next()?.to_string())
}

fn config_error(text: &str, key: &str, message: &str) -> Error {
    Error::Config {
        key: key.to_string(),
        line: find_line(text, key),
        message: message.to_string(),
    }
}

/// 1-based line of `section.key` (or a bare key or section name) in `text`; 0 when absent.
fn find_line(text: &str, dotted: &str) -> usize {
    let (section, key) = match dotted.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (None, dotted),
    };
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            if section.is_none() && name.trim() == key {
                return i + 1;
            }
            continue;
        }
        let k = l.split('=').next().unwrap_or("").trim();
        let in_section = section.is_none_or(|s| current.as_deref() == Some(s));
        if k == key && in_section {
            return i + 1;
        }
    }
    0
}
