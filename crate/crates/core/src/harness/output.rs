//! CSV series, SVG charts and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::energies::DecayRatios;
use crate::error::{Error, Result};
use crate::run::MonitorSeries;

const ORDERS: usize = 4;
const X_ORDERS: usize = 3;

/// Column names in output order.
pub fn header() -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "E_basic".into()];
    h.extend((0..ORDERS).map(|k| format!("E_{k}")));
    h.extend((0..X_ORDERS).map(|k| format!("X_{k}")));
    h.extend((0..ORDERS).map(|k| format!("cE_{k}")));
    h.extend((0..ORDERS).map(|k| format!("bE_{k}")));
    h.extend(["div_u", "div_HT", "curl_compat", "director_norm", "tangency"].map(String::from));
    h.extend(DecayRatios::NAMES.map(String::from));
    h.push("dEdt_fd".into());
    h.extend((2..ORDERS).map(|k| format!("Ev_{k}")));
    h.extend((2..ORDERS).map(|k| format!("LE_{k}")));
    h.extend((0..ORDERS).map(|k| format!("Ebound_{k}")));
    h.extend(["step", "contaminated", "dEdt_rhs", "renorm_change", "support"].map(String::from));
    h
}

/// A numeric table; `None` marks a value that was not computed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn table(series: &MonitorSeries) -> SeriesTable {
    let header = header();
    let at = |v: &[f64], k: usize| v.get(k).copied();
    let rows = series
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<Option<f64>> = vec![Some(r.t), Some(r.e_basic)];
            row.extend((0..ORDERS).map(|k| at(&r.e, k)));
            row.extend((0..X_ORDERS).map(|k| at(&r.x, k)));
            row.extend((0..ORDERS).map(|k| at(&r.cal, k)));
            row.extend((0..ORDERS).map(|k| at(&r.bold, k)));
            row.extend(r.constraints.named().map(|(_, v)| Some(v)));
            match &r.decay {
                Some(d) => row.extend(d.values().map(Some)),
                None => row.extend([None; 6]),
            }
            let ineq = series.inequality.as_ref();
            row.push(ineq.map(|q| q.de_dt_fd[i]));
            let pick = |v: Option<&Vec<(usize, Vec<f64>)>>, k: usize| {
                v.and_then(|v| v.iter().find(|(o, _)| *o == k)).map(|(_, s)| s[i])
            };
            row.extend((2..ORDERS).map(|k| pick(ineq.map(|q| &q.ev), k)));
            row.extend((2..ORDERS).map(|k| pick(ineq.map(|q| &q.le), k)));
            row.extend((0..ORDERS).map(|k| ineq.and_then(|q| q.energy_bound.get(k)).map(|b| b[i])));
            row.push(Some(r.step as f64));
            row.push(Some(if r.contaminated { 1.0 } else { 0.0 }));
            row.push(Some(r.de_dt_rhs));
            row.push(Some(r.renorm_change));
            row.push(Some(r.support));
            row
        })
        .collect();
    SeriesTable { header, rows }
}

/// Writes the monitor series as CSV; floats use the shortest round-tripping decimal form.
pub fn emit_series(series: &MonitorSeries, path: &Path) -> Result<()> {
    write_table(&table(series), path)
}

pub fn write_table(t: &SeriesTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(&t.header).map_err(io)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
            .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_file(path, &bytes)
}

pub fn read_series(path: &Path) -> Result<SeriesTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::io(path, std::io::Error::other(format!("bad number `{f}`"))))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(SeriesTable { header, rows })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    Gnuplot,
}

/// Chart groups: file stem, column names, log scale.
fn groups(t: &SeriesTable) -> Vec<(&'static str, Vec<String>, bool)> {
    let has = |c: &String| t.column(c).is_some_and(|v| v.iter().any(Option::is_some));
    let pick = |names: Vec<String>| names.into_iter().filter(|c| has(c)).collect::<Vec<_>>();
    let energies = pick(
        ["E_basic".to_string()]
            .into_iter()
            .chain((0..ORDERS).map(|k| format!("E_{k}")))
            .collect(),
    );
    let constraints = pick(
        ["div_u", "div_HT", "curl_compat", "director_norm", "tangency"]
            .map(String::from)
            .to_vec(),
    );
    let ratios = pick(DecayRatios::NAMES.map(String::from).to_vec());
    let mut out = vec![("energies", energies, true), ("constraints", constraints, true)];
    if !ratios.is_empty() {
        out.push(("decay", ratios, true));
    }
    out
}

/// Writes one chart per group next to `csv_path` (SVG files or a single gnuplot script).
pub fn emit_plots(series: &MonitorSeries, csv_path: &Path, format: PlotFormat) -> Result<Vec<std::path::PathBuf>> {
    let t = table(series);
    let dir = csv_path.parent().unwrap_or(Path::new("."));
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    let mut written = Vec::new();
    match format {
        PlotFormat::Svg => {
            let xs: Vec<f64> = t.column("t").unwrap().into_iter().map(|v| v.unwrap_or(0.0)).collect();
            for (name, cols, log) in groups(&t) {
                let lines: Vec<(String, Vec<Option<f64>>)> =
                    cols.iter().map(|c| (c.clone(), t.column(c).unwrap())).collect();
                let path = dir.join(format!("{stem}_{name}.svg"));
                write_file(&path, svg_chart(name, &xs, &lines, log).as_bytes())?;
                written.push(path);
            }
        }
        PlotFormat::Gnuplot => {
            let csv_name = csv_path.file_name().and_then(|s| s.to_str()).unwrap_or("series.csv");
            let mut gp = String::from(
                "set datafile separator ','\nset key autotitle columnhead\nset terminal svg size 800,500\n",
            );
            for (name, cols, log) in groups(&t) {
                let _ = writeln!(gp, "set output '{stem}_{name}.svg'\nset title '{name}'\nset xlabel 't'");
                gp.push_str(if log { "set logscale y\n" } else { "unset logscale y\n" });
                let plots: Vec<String> = cols
                    .iter()
                    .map(|c| {
                        let i = t.header.iter().position(|h| h == c).unwrap() + 1;
                        format!("'{csv_name}' using 1:{i} with lines")
                    })
                    .collect();
                let _ = writeln!(gp, "plot {}", plots.join(", "));
            }
            let path = dir.join(format!("{stem}.gp"));
            write_file(&path, gp.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained line chart; on a log axis nonpositive samples are skipped.
pub fn svg_chart(title: &str, xs: &[f64], lines: &[(String, Vec<Option<f64>>)], log_y: bool) -> String {
    let (w, h, pad) = (800.0, 500.0, 60.0);
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let ok = |v: &Option<f64>| v.filter(|x| x.is_finite() && (!log_y || *x > 0.0));
    let ys: Vec<f64> = lines
        .iter()
        .flat_map(|(_, v)| v.iter().filter_map(ok).map(ty))
        .collect();
    let (mut y0, mut y1) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-300 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let (x0, x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (0.0, 1.0) };
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>
<rect x="{pad}" y="{pad}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w / 2.0,
        escape(title),
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let yv = y0 + f * (y1 - y0);
        let label = if log_y {
            format!("1e{yv:.1}")
        } else {
            format!("{yv:.3e}")
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>"#,
            pad - 4.0,
            py(yv) + 4.0
        );
        let xv = x0 + f * (x1 - x0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.3}</text>"#,
            px(xv),
            h - pad + 16.0
        );
    }
    for (j, (name, v)) in lines.iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(v)
            .filter_map(|(&x, y)| ok(y).map(|y| format!("{:.2},{:.2}", px(x), py(ty(y)))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            w - pad + 4.0 - 120.0,
            pad + 16.0 + 14.0 * j as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
