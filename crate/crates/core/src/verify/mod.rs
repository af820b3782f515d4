//! Ratio-supremum sweeps of pointwise estimates.
//!
//! An [`EstimateSpec`] pairs a quantity (`lhs`) with a claimed majorant
//! (`rhs`) over a sample lattice. The sweep records `sup lhs/rhs` on the
//! default lattice and on a refined one (half the spacing, extended domain);
//! a spec passes when the supremum is finite and moves by at most
//! [`DRIFT_LIMIT`] between the two. Constants are fitted, never assumed.
//!
//! Points are evaluated in fixed-size chunks that are reduced in lattice
//! order, so reports do not depend on the number of worker threads.

mod checks;
mod registry;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{self, BesselOrder};
use crate::error::{Error, Result};
use crate::kernels;
use crate::quad::Tolerance;

pub use checks::*;
pub use registry::registry;
pub use report::*;

/// Largest relative change of the supremum under refinement for a pass.
pub const DRIFT_LIMIT: f64 = 0.2;
/// Largest fraction of failed evaluations for a pass.
pub const ERROR_FRACTION_LIMIT: f64 = 1e-3;

/// Registry subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bessel,
    Kernels,
}

/// Whether a spec is a claimed estimate or a deliberately false control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Verdict {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn matches(self, expected: Expectation) -> bool {
        matches!(
            (self, expected),
            (Verdict::Pass, Expectation::Pass) | (Verdict::Fail, Expectation::Fail)
        )
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

/// What is evaluated at each lattice point, and on which coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// `(nu, x)`: `J_nu(x)`.
    BesselJ,
    /// `(nu, x)` with `x < 1`: `I_nu(x)`, `K_nu(x)`.
    BesselIk,
    /// `(t, ln x, ln y)` with `x <= y`: homogeneous derivatives of `I_t(x) K_t(y)`.
    Product,
    /// `(t, u, v)`: t-kernels and the shifted Bessel products.
    TKernel,
    /// `(u, v)`: t-integrated kernels and the `K_1`/`K_2` split.
    Integrated,
    /// `(u, v)` without any evaluation.
    Plane,
    /// `(n, z0, z)` with `z >= z0`.
    Elementary,
}

impl Source {
    pub fn axes(self) -> &'static [&'static str] {
        match self {
            Source::BesselJ | Source::BesselIk => &["nu", "x"],
            Source::Product => &["t", "ln_x", "ln_y"],
            Source::TKernel => &["t", "u", "v"],
            Source::Integrated | Source::Plane => &["u", "v"],
            Source::Elementary => &["n", "z0", "z"],
        }
    }
}

/// Record layouts, see [`evaluate`].
pub mod layout {
    /// `TKernel`: `S_j^n(t,u,v)` at `3 j + n`.
    pub const fn t_kernel(j: usize, n: usize) -> usize {
        3 * j + n
    }
    /// `TKernel`: `e^{ku + lv} I_{t+k}(e^u) K_{t+l}(e^v)` (NaN unless `u, v <= 0`).
    pub const fn shifted(k: usize, l: usize) -> usize {
        6 + 2 * k + l
    }
    pub const T_KERNEL_LEN: usize = 10;

    /// `Integrated`: `S_j^n(u,v)` at `3 j + n`.
    pub const fn integrated(j: usize, n: usize) -> usize {
        3 * j + n
    }
    pub const S01: usize = 6;
    pub const S02: usize = 7;
    pub const S01_DU: usize = 8;
    pub const S01_DV: usize = 9;
    pub const K1: usize = 10;
    pub const K2: usize = 11;
    pub const K1_DU: usize = 12;
    pub const K1_DV: usize = 13;
    pub const INTEGRATED_LEN: usize = 14;

    /// `Product`: `(x d_x + y d_y)^N I_t K_t` at `N`, the same applied to
    /// `(x d_x - y d_y) I_t K_t` at `3 + N`.
    pub const fn product_p(n: usize) -> usize {
        n
    }
    pub const fn product_q(n: usize) -> usize {
        3 + n
    }

    pub const IK_I: usize = 0;
    pub const IK_K: usize = 1;
}

/// Sample lattices. Level 0 is the default; level 1 halves every spacing and
/// extends the domains by the `*_extend` amounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub plane_lo: f64,
    /// Lower edge for the t-integrated kernels, whose ratios saturate only
    /// far into the negative quadrant.
    pub integrated_lo: f64,
    pub plane_hi: f64,
    pub plane_step: f64,
    pub band_step: f64,
    pub band_width: f64,
    /// Extension of `plane_lo` at level 1.
    pub plane_extend: f64,
    pub t_count: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Extra log-steps below `t_min` at level 1.
    pub t_extend: usize,
    pub product_lo: f64,
    pub product_hi: f64,
    pub product_step: f64,
    pub product_extend_lo: f64,
    pub product_extend_hi: f64,
    pub product_t: Vec<f64>,
    pub order_step: f64,
    pub j_log10_lo: f64,
    pub j_log10_hi: f64,
    pub ik_log10_lo: f64,
    pub per_decade: usize,
    pub log10_extend: f64,
    pub z_max: f64,
    pub z_step: f64,
    pub z_extend: f64,
    /// Relative tolerance of the t-integrals.
    pub integral_rel_tol: f64,
    /// When set, every lattice is translated by a seeded fraction of its
    /// finest spacing along the continuous axes.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            plane_lo: -10.0,
            integrated_lo: -24.0,
            plane_hi: 6.0,
            plane_step: 0.25,
            band_step: 0.05,
            band_width: 2.0,
            plane_extend: 4.0,
            t_count: 16,
            t_min: 1.0 / 80.0,
            t_max: 0.49,
            t_extend: 3,
            product_lo: -6.0,
            product_hi: 4.0,
            product_step: 0.25,
            product_extend_lo: 2.0,
            product_extend_hi: 1.0,
            product_t: vec![0.01, 0.1, 0.3, 0.49, 0.7],
            order_step: 1.0 / 16.0,
            j_log10_lo: -3.0,
            j_log10_hi: 3.0,
            ik_log10_lo: -6.0,
            per_decade: 20,
            log10_extend: 1.0,
            z_max: 40.0,
            z_step: 0.25,
            z_extend: 20.0,
            integral_rel_tol: 1e-9,
            seed: None,
        }
    }
}

impl LatticeConfig {
    /// Twice the spacings of the default on the kernel and product lattices;
    /// the one-variable Bessel lattices are cheap and kept.
    pub fn coarse() -> LatticeConfig {
        let d = LatticeConfig::default();
        LatticeConfig {
            plane_step: 0.5,
            band_step: 0.1,
            t_count: 9,
            product_step: 0.5,
            z_step: 0.5,
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.plane_step / self.band_step;
        let ok = self.plane_lo < self.plane_hi
            && self.integrated_lo < self.plane_hi
            && self.band_step > 0.0
            && (ratio - ratio.round()).abs() < 1e-9
            && ratio >= 1.0
            && self.band_width >= 0.0
            && self.plane_extend >= 0.0
            && self.t_count >= 2
            && self.t_min > 0.0
            && self.t_min < self.t_max
            && self.t_max <= kernels::T_MAX
            && self.product_lo < self.product_hi
            && self.product_step > 0.0
            && self.product_t.iter().all(|&t| t > 0.0 && t < 1.0)
            && self.order_step > 0.0
            && self.j_log10_lo < self.j_log10_hi
            && self.ik_log10_lo < 0.0
            && self.per_decade > 0
            && self.z_max > 0.0
            && self.z_step > 0.0
            && self.integral_rel_tol > 0.0
            && self.integral_rel_tol < 1e-2;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent lattice configuration: {self:?}")))
        }
    }

    fn t_values(&self, level: u32) -> Vec<f64> {
        let delta = (self.t_max / self.t_min).ln() / (self.t_count - 1) as f64;
        let sub = 1usize << level;
        let steps = (self.t_count - 1 + self.t_extend * level as usize) * sub;
        (0..=steps)
            .map(|k| self.t_max * (-(k as f64) * delta / sub as f64).exp())
            .collect()
    }

    fn plane_points(&self, lo: f64, level: u32) -> Vec<[f64; 3]> {
        let sub = (1u32 << level) as f64;
        let fine = self.band_step / sub;
        let ratio = (self.plane_step / self.band_step).round() as i64;
        let lo = lo - if level > 0 { self.plane_extend } else { 0.0 };
        let i_lo = (lo / fine).round() as i64;
        let i_hi = (self.plane_hi / fine).round() as i64;
        let band = (self.band_width / fine + 1e-9).floor() as i64;
        let coarse = ratio << level;
        let mut pts = Vec::new();
        for i in i_lo..=i_hi {
            for k in i_lo..=i_hi {
                let on_coarse = i.rem_euclid(coarse) == 0 && k.rem_euclid(coarse) == 0;
                if on_coarse || (i - k).abs() <= band {
                    pts.push([i as f64 * fine, k as f64 * fine, 0.0]);
                }
            }
        }
        pts
    }

    fn log_lattice(&self, lo: f64, hi: f64, level: u32, include_hi: bool) -> Vec<f64> {
        let per = self.per_decade << level;
        let m = ((hi - lo) * per as f64).round() as i64;
        let end = if include_hi { m } else { m - 1 };
        (0..=end).map(|k| 10f64.powf(lo + k as f64 / per as f64)).collect()
    }

    fn orders(&self, level: u32) -> Vec<f64> {
        let step = self.order_step / (1u32 << level) as f64;
        let m = (bessel::MAX_ORDER / step).round() as usize;
        (0..=m).map(|k| k as f64 * step).collect()
    }

    /// Seeded translation in `[0, 1)` units of the finest spacing.
    fn jitter(&self, source: Source, level: u32) -> f64 {
        use rand::{Rng, SeedableRng};
        match self.seed {
            None => 0.0,
            Some(seed) => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((source as u64) << 8) | level as u64);
                rng.gen::<f64>()
            }
        }
    }

    /// The lattice of `source` at refinement `level` (0 or 1).
    pub fn points(&self, source: Source, level: u32) -> Vec<[f64; 3]> {
        let mut pts = self.unshifted_points(source, level);
        let j = self.jitter(source, level);
        if j == 0.0 {
            return pts;
        }
        let sub = (1u32 << level) as f64;
        match source {
            Source::BesselJ | Source::BesselIk => {
                let f = 10f64.powf(j / (self.per_decade as f64 * sub));
                for p in &mut pts {
                    p[1] *= f;
                }
            }
            _ => {
                let step = match source {
                    Source::Product => self.product_step,
                    Source::Elementary => self.z_step,
                    _ => self.band_step,
                };
                let d = j * step / sub;
                let first = match source {
                    Source::Integrated | Source::Plane => 0,
                    _ => 1,
                };
                for p in &mut pts {
                    p[first] += d;
                    p[first + 1] += d;
                }
            }
        }
        pts
    }

    fn unshifted_points(&self, source: Source, level: u32) -> Vec<[f64; 3]> {
        let ext = |x: f64| if level > 0 { x } else { 0.0 };
        match source {
            Source::BesselJ => {
                let xs = self.log_lattice(
                    self.j_log10_lo - ext(self.log10_extend),
                    self.j_log10_hi + ext(self.log10_extend),
                    level,
                    true,
                );
                cartesian(&self.orders(level), &xs)
            }
            Source::BesselIk => {
                let xs = self.log_lattice(self.ik_log10_lo - ext(2.0 * self.log10_extend), 0.0, level, false);
                cartesian(&self.orders(level), &xs)
            }
            Source::Product => {
                let step = self.product_step / (1u32 << level) as f64;
                let lo = self.product_lo - ext(self.product_extend_lo);
                let hi = self.product_hi + ext(self.product_extend_hi);
                let m = ((hi - lo) / step).round() as i64;
                let mut pts = Vec::new();
                for &t in &self.product_t {
                    for i in 0..=m {
                        let ln_x = lo + i as f64 * step;
                        for k in i..=m {
                            pts.push([t, ln_x, lo + k as f64 * step]);
                        }
                        // The curve y - x = 1 bounds the separated region.
                        let ln_y = ln_x.exp().ln_1p();
                        if ln_y <= hi {
                            pts.push([t, ln_x, ln_y]);
                        }
                    }
                }
                pts
            }
            Source::TKernel => {
                let plane = self.plane_points(self.plane_lo, level);
                let mut pts = Vec::with_capacity(plane.len() * self.t_values(level).len());
                for t in self.t_values(level) {
                    pts.extend(plane.iter().map(|p| [t, p[0], p[1]]));
                }
                pts
            }
            Source::Integrated => self.plane_points(self.integrated_lo, level),
            Source::Plane => self.plane_points(self.plane_lo, level),
            Source::Elementary => {
                let step = self.z_step / (1u32 << level) as f64;
                let m = ((self.z_max + ext(self.z_extend)) / step).round() as i64;
                let mut pts = Vec::new();
                for n in 0..=4 {
                    for i in 0..=m {
                        for k in i..=m {
                            pts.push([n as f64, i as f64 * step, k as f64 * step]);
                        }
                    }
                }
                pts
            }
        }
    }
}

fn cartesian(a: &[f64], b: &[f64]) -> Vec<[f64; 3]> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| [x, y, 0.0])).collect()
}

/// Evaluates the record of `source` at `p`.
pub fn evaluate(source: Source, p: &[f64; 3], cfg: &LatticeConfig) -> Result<Vec<f64>> {
    match source {
        Source::BesselJ => {
            let j = bessel::bessel_j(BesselOrder::new(p[0])?, p[1])?;
            Ok(vec![j.to_f64()?])
        }
        Source::BesselIk => {
            let nu = BesselOrder::new(p[0])?;
            let i = bessel::bessel_i_scaled(nu, p[1])?.to_f64()?;
            let k = bessel::bessel_k_scaled(nu, p[1])?.to_f64()?;
            Ok(vec![i, k])
        }
        Source::Product => {
            let (pp, q) = kernels::product_derivatives(2, p[0], p[1].exp(), p[2].exp())?;
            Ok(vec![pp[0], pp[1], pp[2], q[0], q[1], q[2]])
        }
        Source::TKernel => {
            let (t, u, v) = (p[0], p[1], p[2]);
            let k = kernels::kernels_t_all(2, t, u, v)?;
            let mut out = vec![f64::NAN; layout::T_KERNEL_LEN];
            for j in 0..2 {
                for n in 0..3 {
                    out[layout::t_kernel(j, n)] = k[j][n];
                }
            }
            if u <= 0.0 && v <= 0.0 {
                let is = bessel::i_family(t, u.exp(), 2)?;
                let ks = bessel::k_family(t, v.exp(), 2)?;
                for kk in 0..2 {
                    for l in 0..2 {
                        let shift = kk as f64 * u + l as f64 * v;
                        out[layout::shifted(kk, l)] = (is[kk] * ks[l]).shift_exp(shift).to_f64()?;
                    }
                }
            }
            Ok(out)
        }
        Source::Integrated => {
            let (u, v) = (p[0], p[1]);
            let b = kernels::integrated_bundle(u, v, 2, Tolerance::new(0.0, cfg.integral_rel_tol))?;
            let mut out = vec![f64::NAN; layout::INTEGRATED_LEN];
            for j in 0..2 {
                for n in 0..3 {
                    out[layout::integrated(j, n)] = b.s[j][n];
                }
            }
            out[layout::S01] = b.s01;
            out[layout::S02] = b.s02;
            out[layout::S01_DU] = b.s01_du;
            out[layout::S01_DV] = b.s01_dv;
            if u == v {
                out[layout::K1] = 0.0;
                out[layout::K2] = b.s[0][0];
            } else {
                let (split, (du, dv)) = kernels::split_of_bundle(&b);
                out[layout::K1] = split.k1;
                out[layout::K2] = split.k2;
                out[layout::K1_DU] = du;
                out[layout::K1_DV] = dv;
            }
            Ok(out)
        }
        Source::Plane | Source::Elementary => Ok(Vec::new()),
    }
}

/// A point with its evaluated record.
pub struct Sample<'a> {
    pub point: [f64; 3],
    pub record: &'a [f64],
}

pub type Region = Arc<dyn Fn(&[f64; 3]) -> bool + Send + Sync>;
pub type Lhs = Arc<dyn Fn(&Sample) -> f64 + Send + Sync>;
pub type Rhs = Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>;

/// One pointwise estimate `|lhs| <= C rhs` over a region of a lattice.
#[derive(Clone)]
pub struct EstimateSpec {
    pub id: String,
    /// Label of the estimate this spec encodes.
    pub anchor: String,
    pub suite: Suite,
    pub source: Source,
    pub region: Region,
    pub lhs: Lhs,
    pub rhs: Rhs,
    pub expected: Expectation,
    pub notes: Vec<String>,
}

impl fmt::Debug for EstimateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimateSpec")
            .field("id", &self.id)
            .field("anchor", &self.anchor)
            .field("suite", &self.suite)
            .field("source", &self.source)
            .field("expected", &self.expected)
            .finish()
    }
}

/// Outcome of one spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub id: String,
    pub anchor: String,
    pub suite: Suite,
    pub expected: Expectation,
    /// Supremum on the refined lattice.
    pub sup_ratio: f64,
    /// Supremum on the default lattice.
    pub sup_ratio_default: f64,
    /// `|sup_ratio - sup_ratio_default| / sup_ratio_default`.
    pub drift: f64,
    pub argmax: BTreeMap<String, f64>,
    pub samples: usize,
    pub errors: usize,
    pub first_error: Option<String>,
    /// The fitted constant; present only for passing specs.
    pub fitted_constant: Option<f64>,
    pub verdict: Verdict,
    pub as_expected: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct Acc {
    sup: f64,
    arg: Option<[f64; 3]>,
    samples: usize,
    errors: usize,
    first_error: Option<String>,
}

impl Acc {
    fn push(&mut self, ratio: std::result::Result<f64, String>, p: &[f64; 3]) {
        self.samples += 1;
        match ratio {
            Ok(r) if !r.is_nan() && r >= 0.0 => {
                if self.arg.is_none() || r > self.sup {
                    self.sup = r;
                    self.arg = Some(*p);
                }
            }
            Ok(r) => self.error(format!("ratio {r} at {p:?}")),
            Err(e) => self.error(e),
        }
    }

    fn error(&mut self, msg: String) {
        self.errors += 1;
        if self.first_error.is_none() {
            self.first_error = Some(msg);
        }
    }

    /// Folds a later chunk into this one; ties keep the earlier point.
    fn merge(&mut self, other: Acc) {
        if let Some(a) = other.arg {
            if self.arg.is_none() || other.sup > self.sup {
                self.sup = other.sup;
                self.arg = Some(a);
            }
        }
        self.samples += other.samples;
        self.errors += other.errors;
        if self.first_error.is_none() {
            self.first_error = other.first_error;
        }
    }
}

const CHUNK: usize = 256;

fn ratio_at(spec: &EstimateSpec, p: &[f64; 3], record: &std::result::Result<Vec<f64>, String>) -> std::result::Result<f64, String> {
    let rec = record.as_ref().map_err(|e| e.clone())?;
    let lhs = (spec.lhs)(&Sample { point: *p, record: rec });
    let rhs = (spec.rhs)(p);
    if !(rhs > 0.0 && rhs.is_finite()) {
        return Err(format!("majorant {rhs} at {p:?}"));
    }
    if !lhs.is_finite() {
        return Err(format!("value {lhs} at {p:?}"));
    }
    Ok(lhs.abs() / rhs)
}

/// Sweeps `specs` (all on the same source) at one level.
fn sweep_level(specs: &[&EstimateSpec], source: Source, cfg: &LatticeConfig, level: u32) -> Vec<Acc> {
    let pts: Vec<[f64; 3]> = cfg
        .points(source, level)
        .into_iter()
        .filter(|p| specs.iter().any(|s| (s.region)(p)))
        .collect();
    let chunks: Vec<Vec<Acc>> = pts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut accs = vec![Acc::default(); specs.len()];
            for p in chunk {
                let record = evaluate(source, p, cfg).map_err(|e| e.to_string());
                for (acc, spec) in accs.iter_mut().zip(specs) {
                    if (spec.region)(p) {
                        acc.push(ratio_at(spec, p, &record), p);
                    }
                }
            }
            accs
        })
        .collect();
    let mut total = vec![Acc::default(); specs.len()];
    for accs in chunks {
        for (t, a) in total.iter_mut().zip(accs) {
            t.merge(a);
        }
    }
    total
}

fn finish(spec: &EstimateSpec, coarse: Acc, fine: Acc) -> RatioReport {
    let axes = spec.source.axes();
    let argmax = fine
        .arg
        .or(coarse.arg)
        .map(|p| axes.iter().zip(p).map(|(a, x)| (a.to_string(), x)).collect())
        .unwrap_or_default();
    let samples = coarse.samples + fine.samples;
    let errors = coarse.errors + fine.errors;
    let drift = if coarse.sup > 0.0 {
        (fine.sup - coarse.sup).abs() / coarse.sup
    } else if fine.sup == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let error_ok = |a: &Acc| a.samples > 0 && (a.errors as f64) <= ERROR_FRACTION_LIMIT * a.samples as f64;
    let pass = error_ok(&coarse)
        && error_ok(&fine)
        && coarse.arg.is_some()
        && fine.arg.is_some()
        && coarse.sup.is_finite()
        && fine.sup.is_finite()
        && drift <= DRIFT_LIMIT;
    let verdict = Verdict::from_bool(pass);
    let mut notes = spec.notes.clone();
    if coarse.samples == 0 || fine.samples == 0 {
        notes.push("region contains no lattice points".into());
    }
    RatioReport {
        id: spec.id.clone(),
        anchor: spec.anchor.clone(),
        suite: spec.suite,
        expected: spec.expected,
        sup_ratio: fine.sup,
        sup_ratio_default: coarse.sup,
        drift,
        argmax,
        samples,
        errors,
        first_error: coarse.first_error.or(fine.first_error),
        fitted_constant: pass.then_some(fine.sup),
        verdict,
        as_expected: verdict.matches(spec.expected),
        notes,
    }
}

/// Runs one spec on the default and refined lattices.
pub fn run_spec(spec: &EstimateSpec, cfg: &LatticeConfig) -> Result<RatioReport> {
    cfg.validate()?;
    let coarse = sweep_level(&[spec], spec.source, cfg, 0).remove(0);
    let fine = sweep_level(&[spec], spec.source, cfg, 1).remove(0);
    Ok(finish(spec, coarse, fine))
}

/// Runs `specs`, sharing one evaluation per lattice point among all specs of
/// the same source. Reports come back in the order of `specs`.
pub fn run_specs(specs: &[EstimateSpec], cfg: &LatticeConfig) -> Result<Vec<RatioReport>> {
    cfg.validate()?;
    let mut seen = std::collections::HashSet::new();
    let mut ids = Vec::new();
    for s in specs {
        if !seen.insert(s.id.as_str()) {
            return Err(Error::Config(format!("duplicate spec id {}", s.id)));
        }
        ids.push(s.id.as_str());
    }
    let mut by_source: BTreeMap<Source, Vec<usize>> = BTreeMap::new();
    for (i, s) in specs.iter().enumerate() {
        by_source.entry(s.source).or_default().push(i);
    }
    let mut out: Vec<Option<RatioReport>> = vec![None; specs.len()];
    for (source, idx) in by_source {
        let group: Vec<&EstimateSpec> = idx.iter().map(|&i| &specs[i]).collect();
        let coarse = sweep_level(&group, source, cfg, 0);
        let fine = sweep_level(&group, source, cfg, 1);
        for ((i, c), f) in idx.into_iter().zip(coarse).zip(fine) {
            out[i] = Some(finish(&specs[i], c, f));
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every spec belongs to a source group")).collect())
}

/// Runs `f` on a pool of `parallelism` threads.
pub fn with_parallelism<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if parallelism == 0 {
        return Err(Error::Config("parallelism must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(f))
}

/// Runs the whole registry on the default lattices.
pub fn run_all(parallelism: usize) -> Result<Vec<RatioReport>> {
    let specs = registry();
    with_parallelism(parallelism, || run_specs(&specs, &LatticeConfig::default()))?
}

/// Aggregate verdict over a set of reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub passed: bool,
    pub total: usize,
    /// Ids whose verdict differs from the expectation.
    pub failing: Vec<String>,
}

pub fn aggregate<'a>(items: impl IntoIterator<Item = (&'a str, bool)>) -> Aggregate {
    let mut total = 0;
    let mut failing = Vec::new();
    for (id, ok) in items {
        total += 1;
        if !ok {
            failing.push(id.to_string());
        }
    }
    Aggregate {
        passed: failing.is_empty(),
        total,
        failing,
    }
}

/// Selector for the command-line suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteSelection {
    Bessel,
    Kernels,
    Estimates,
    Operators,
    All,
}

impl SuiteSelection {
    pub fn includes_spec(self, suite: Suite) -> bool {
        match self {
            SuiteSelection::Bessel => suite == Suite::Bessel,
            SuiteSelection::Kernels => suite == Suite::Kernels,
            SuiteSelection::Estimates | SuiteSelection::All => true,
            SuiteSelection::Operators => false,
        }
    }

    pub fn includes_bessel_checks(self) -> bool {
        matches!(self, SuiteSelection::Bessel | SuiteSelection::All)
    }

    pub fn includes_operator_checks(self) -> bool {
        matches!(self, SuiteSelection::Operators | SuiteSelection::All)
    }
}

impl FromStr for SuiteSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bessel" => SuiteSelection::Bessel,
            "kernels" => SuiteSelection::Kernels,
            "estimates" => SuiteSelection::Estimates,
            "operators" => SuiteSelection::Operators,
            "all" => SuiteSelection::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite {other:?}; expected bessel, kernels, estimates, operators or all"
                )))
            }
        })
    }
}

impl fmt::Display for SuiteSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteSelection::Bessel => "bessel",
            SuiteSelection::Kernels => "kernels",
            SuiteSelection::Estimates => "estimates",
            SuiteSelection::Operators => "operators",
            SuiteSelection::All => "all",
        })
    }
}

#[cfg(test)]
mod tests;
