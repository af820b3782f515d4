//! JSON, CSV and SVG output of verification runs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CheckReport, LatticeConfig, RatioReport};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::quad::Tolerance;

/// Version of the JSON report layout.
pub const SCHEMA: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub schema: u32,
    pub artifact_version: String,
    pub config_hash: String,
    pub anchor: String,
}

impl Header {
    pub fn new(config_hash: &str, anchor: &str) -> Header {
        Header {
            schema: SCHEMA,
            artifact_version: ARTIFACT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            anchor: anchor.to_string(),
        }
    }

    fn comment_lines(&self, prefix: &str) -> String {
        format!(
            "{prefix}schema: {}\n{prefix}artifact_version: {}\n{prefix}config_hash: {}\n{prefix}anchor: {}\n",
            self.schema, self.artifact_version, self.config_hash, self.anchor
        )
    }
}

/// SHA-256 (hex) of the JSON serialisation of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Serialize)]
struct Document<'a, T> {
    #[serde(flatten)]
    header: &'a Header,
    report: &'a T,
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn write_json<T: Serialize>(dir: &Path, id: &str, hash: &str, anchor: &str, report: &T) -> Result<PathBuf> {
    let header = Header::new(hash, anchor);
    let text = serde_json::to_string_pretty(&Document {
        header: &header,
        report,
    })
    .map_err(|e| Error::Io(e.to_string()))?;
    let path = dir.join(format!("{id}.json"));
    write_file(&path, &(text + "\n"))?;
    Ok(path)
}

/// JSON number or `null` text for CSV cells.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Summary table of ratio sweeps.
pub fn ratio_csv(reports: &[RatioReport], header: &Header) -> String {
    let mut out = header.comment_lines("# ");
    out.push_str("id,anchor,suite,expected,verdict,as_expected,sup_ratio,sup_ratio_default,drift,samples,errors,argmax\n");
    for r in reports {
        let argmax = r
            .argmax
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.id),
            csv_field(&r.anchor),
            serde_json::to_value(r.suite).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            if r.expected == super::Expectation::Pass { "pass" } else { "fail" },
            r.verdict,
            r.as_expected,
            num(r.sup_ratio),
            num(r.sup_ratio_default),
            num(r.drift),
            r.samples,
            r.errors,
            csv_field(&argmax)
        );
    }
    out
}

/// Summary table of threshold checks.
pub fn check_csv(reports: &[CheckReport], header: &Header) -> String {
    let mut out = header.comment_lines("# ");
    out.push_str("id,anchor,metric,value,threshold,expected,verdict,as_expected\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.id),
            csv_field(&r.anchor),
            csv_field(&r.metric),
            num(r.value),
            num(r.threshold),
            if r.expected == super::Expectation::Pass { "pass" } else { "fail" },
            r.verdict,
            r.as_expected
        );
    }
    out
}

/// `max |S_j^n(u,v)|` per `|u - v|` bin and region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub family: KernelFamily,
    pub n: usize,
    pub bin_width: f64,
    /// Region name and `(bin centre, max magnitude)` for nonempty bins.
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

const REGIONS: [&str; 4] = ["near", "positive", "mixed", "negative"];

fn region_index(u: f64, v: f64) -> usize {
    if (u - v).abs() <= 1.0 {
        0
    } else if u > 0.0 && v > 0.0 {
        1
    } else if u < 0.0 && v < 0.0 {
        3
    } else {
        2
    }
}

/// Decay profiles of the integrated kernels, `n <= 2`, on the plane lattice
/// of `cfg` at spacing `plane_step` (no diagonal band).
pub fn decay_profiles(cfg: &LatticeConfig) -> Result<Vec<DecayProfile>> {
    use rayon::prelude::*;
    let step = cfg.plane_step;
    let m = ((cfg.plane_hi - cfg.plane_lo) / step).round() as usize;
    let axis: Vec<f64> = (0..=m).map(|i| cfg.plane_lo + i as f64 * step).collect();
    let bin_width = 0.5;
    let bins = ((cfg.plane_hi - cfg.plane_lo) / bin_width).ceil() as usize + 1;
    let pts: Vec<(f64, f64)> = axis.iter().flat_map(|&u| axis.iter().map(move |&v| (u, v))).collect();
    let values = pts
        .par_iter()
        .map(|&(u, v)| {
            let b = kernels::integrated_bundle(u, v, 2, Tolerance::new(0.0, cfg.integral_rel_tol))?;
            Ok(b.s)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for family in KernelFamily::ALL {
        for n in 0..=2 {
            let mut acc = vec![vec![0.0f64; bins]; 4];
            for (&(u, v), s) in pts.iter().zip(&values) {
                let b = ((u - v).abs() / bin_width).floor() as usize;
                let r = region_index(u, v);
                acc[r][b] = acc[r][b].max(s[family.index()][n].abs());
            }
            let curves = REGIONS
                .iter()
                .zip(acc)
                .map(|(name, a)| {
                    let pts = a
                        .into_iter()
                        .enumerate()
                        .filter(|(_, x)| *x > 0.0)
                        .map(|(b, x)| ((b as f64 + 0.5) * bin_width, x))
                        .collect();
                    (name.to_string(), pts)
                })
                .collect();
            out.push(DecayProfile {
                family,
                n,
                bin_width,
                curves,
            });
        }
    }
    Ok(out)
}

const COLOURS: [&str; 4] = ["#1b6ca8", "#d1495b", "#2e933c", "#8d6a9f"];

/// Log-scale line plot of one decay profile.
pub fn decay_svg(profile: &DecayProfile, header: &Header) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 50.0);
    let all: Vec<(f64, f64)> = profile.curves.iter().flat_map(|c| c.1.iter().cloned()).collect();
    let x_max = all.iter().map(|p| p.0).fold(1.0, f64::max);
    let (mut y_lo, mut y_hi) = all
        .iter()
        .map(|p| p.1.log10())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, y| (a.0.min(y), a.1.max(y)));
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (-1.0, 0.0);
    }
    let (y_lo, y_hi) = (y_lo.floor(), y_hi.ceil().max(y_lo.floor() + 1.0));
    let px = |x: f64| left + (w - left - right) * x / x_max;
    let py = |y: f64| top + (h - top - bottom) * (y_hi - y) / (y_hi - y_lo);
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = write!(s, "<!--\n{}-->\n", header.comment_lines(""));
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" text-anchor="middle">max |S_{}^{}(u,v)| against |u-v|</text>"#,
        (w - right + left) / 2.0,
        profile.family.index(),
        profile.n
    );
    let (x0, x1, y0, y1) = (px(0.0), px(x_max), py(y_lo), py(y_hi));
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    let mut e = y_lo as i64;
    let step = (((y_hi - y_lo) / 8.0).ceil() as i64).max(1);
    while e as f64 <= y_hi {
        let y = py(e as f64);
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{e}</text>"#, x0 - 6.0, y + 4.0);
        e += step;
    }
    let mut t = 0.0;
    let x_step = (x_max / 8.0).ceil().max(1.0);
    while t <= x_max + 1e-9 {
        let x = px(t);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{t}</text>"#, y0 + 18.0);
        t += x_step;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">|u-v|</text>"#, (x0 + x1) / 2.0, h - 10.0);
    for (k, (name, pts)) in profile.curves.iter().enumerate() {
        let colour = COLOURS[k % COLOURS.len()];
        if !pts.is_empty() {
            let path = pts
                .iter()
                .enumerate()
                .map(|(i, p)| format!("{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(p.0), py(p.1.log10())))
                .collect::<String>();
            let _ = writeln!(s, r#"<path d="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#);
        }
        let ly = top + 20.0 * k as f64 + 10.0;
        let lx = w - right + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Everything a verification run writes.
#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    pub ratios: Vec<RatioReport>,
    pub checks: Vec<CheckReport>,
    pub profiles: Vec<DecayProfile>,
}

/// Writes one JSON file per report, the CSV summaries and the SVG plots into
/// `dir` (created if missing). Returns the written paths in write order.
pub fn write_outputs(dir: &Path, config_hash: &str, outputs: &RunOutputs) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for r in &outputs.ratios {
        written.push(write_json(dir, &r.id, config_hash, &r.anchor, r)?);
    }
    for r in &outputs.checks {
        written.push(write_json(dir, &r.id, config_hash, &r.anchor, r)?);
    }
    if !outputs.ratios.is_empty() {
        let path = dir.join("estimates.csv");
        write_file(&path, &ratio_csv(&outputs.ratios, &Header::new(config_hash, "registry")))?;
        written.push(path);
    }
    if !outputs.checks.is_empty() {
        let path = dir.join("checks.csv");
        write_file(&path, &check_csv(&outputs.checks, &Header::new(config_hash, "checks")))?;
        written.push(path);
    }
    for p in &outputs.profiles {
        let anchor = if p.family == KernelFamily::M0 && p.n == 0 {
            "cor:1 S_0^0"
        } else {
            "cor:1 eq:12"
        };
        let path = dir.join(format!("decay-{}-n{}.svg", p.family, p.n));
        write_file(&path, &decay_svg(p, &Header::new(config_hash, anchor)))?;
        written.push(path);
    }
    Ok(written)
}
