//! Threshold checks: Bessel accuracy and the operator-level identities.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Expectation, Verdict};
use crate::bessel::{self, closed_form, BesselOrder};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::schrodinger::{
    func_calc, local_part_from, m_op_from, resolvent_fd_with, riesz_full_from, subordination_fd,
    weighted_norm, DiscreteOperator, GnewuchKernel, Grid, KernelTable, LeftBoundary, SpectralDecomp,
};
use crate::weights::{registered_families, Weight, WeightFamily};

/// Outcome of a single threshold check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub anchor: String,
    /// What `value` measures.
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub expected: Expectation,
    pub as_expected: bool,
    pub details: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    /// A report that passes when `value <= threshold`.
    pub fn at_most(id: &str, anchor: &str, metric: &str, value: f64, threshold: f64) -> CheckReport {
        let verdict = Verdict::from_bool(value <= threshold);
        CheckReport {
            id: id.to_string(),
            anchor: anchor.to_string(),
            metric: metric.to_string(),
            value,
            threshold,
            verdict,
            expected: Expectation::Pass,
            as_expected: verdict.matches(Expectation::Pass),
            details: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Marks the check as a known failure of a criterion that cannot hold
    /// for the discretisation it prescribes.
    pub fn known_failure(mut self, why: &str) -> CheckReport {
        self.expected = Expectation::Fail;
        self.as_expected = self.verdict.matches(Expectation::Fail);
        self.notes.push(why.to_string());
        self
    }

    fn detail(mut self, key: impl Into<String>, value: f64) -> CheckReport {
        self.details.insert(key.into(), value);
        self
    }

    fn note(mut self, note: impl Into<String>) -> CheckReport {
        self.notes.push(note.into());
        self
    }
}

fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// ---------------------------------------------------------------- Bessel

/// Half-integer closed forms and the Wronskian on 200 log-spaced points of
/// `[1e-3, 30]`.
pub fn bessel_accuracy_checks() -> Result<Vec<CheckReport>> {
    let xs = log_points(1e-3, 30.0, 200);
    let half = BesselOrder::new(0.5)?;
    let three_halves = BesselOrder::new(1.5)?;
    let mut worst = [0.0f64; 4];
    for &x in &xs {
        let got = [
            bessel::bessel_i_scaled(half, x)?.to_f64()?,
            bessel::bessel_k_scaled(half, x)?.to_f64()?,
            bessel::bessel_i_scaled(three_halves, x)?.to_f64()?,
            bessel::bessel_k_scaled(three_halves, x)?.to_f64()?,
        ];
        let want = [
            closed_form::i_half(x),
            closed_form::k_half(x),
            closed_form::i_three_halves(x),
            closed_form::k_three_halves(x),
        ];
        for k in 0..4 {
            worst[k] = worst[k].max(rel(got[k], want[k]));
        }
    }
    let closed = CheckReport::at_most(
        "bessel-closed-forms",
        "Bessel half-integer orders",
        "max relative error",
        worst.iter().cloned().fold(0.0, f64::max),
        1e-10,
    )
    .detail("i_half", worst[0])
    .detail("k_half", worst[1])
    .detail("i_three_halves", worst[2])
    .detail("k_three_halves", worst[3]);

    let mut wr = CheckReport::at_most("bessel-wronskian", "Bessel_rec", "max Wronskian defect", 0.0, 1e-9);
    let mut total: f64 = 0.0;
    for nu in [0.0, 0.25, 0.49, 1.3, 3.5] {
        let order = BesselOrder::new(nu)?;
        let mut m: f64 = 0.0;
        for &x in &xs {
            m = m.max(bessel::wronskian_defect(order, x)?);
        }
        total = total.max(m);
        wr = wr.detail(format!("nu={nu}"), m);
    }
    wr.value = total;
    wr.verdict = Verdict::from_bool(total <= 1e-9);
    wr.as_expected = wr.verdict.matches(wr.expected);
    Ok(vec![closed, wr])
}

// ---------------------------------------------------------------- operators

/// Parameters of the operator checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    /// Resolvent grid `[lo, hi]` with spacing `h`.
    pub resolvent_lo: f64,
    pub resolvent_hi: f64,
    pub resolvent_h: f64,
    pub resolvent_t: Vec<f64>,
    /// Window of the resolvent comparison as prescribed.
    pub resolvent_window: f64,
    /// Window where the discretisation error is controlled.
    pub resolvent_inner_window: f64,
    pub resolvent_tol: f64,
    pub subordination_lo: f64,
    pub subordination_hi: f64,
    pub subordination_count: usize,
    pub subordination_t_max: f64,
    pub subordination_tol: f64,
    pub split_lo: f64,
    pub split_hi: f64,
    pub split_count: usize,
    pub split_xi: Vec<f64>,
    pub split_tol: f64,
    pub heat_lo: f64,
    pub heat_hi: f64,
    pub heat_count: usize,
    pub heat_xi: Vec<f64>,
    pub heat_t: Vec<f64>,
    pub heat_window: f64,
    pub heat_step: f64,
    pub heat_tol: f64,
    /// Coarse spacing of the multiplier sweep; the check repeats at half of it.
    pub mihlin_h: f64,
    pub mihlin_lo: f64,
    pub mihlin_hi: f64,
    /// Number of `log xi = -4 + k/2` values.
    pub mihlin_xi_count: usize,
    pub mihlin_nmax: usize,
    pub mihlin_variation_tol: f64,
    pub mihlin_stability_tol: f64,
    pub weights: Vec<WeightFamily>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            resolvent_lo: -12.0,
            resolvent_hi: 6.0,
            resolvent_h: 0.01,
            resolvent_t: vec![0.1, 0.3, 0.49],
            resolvent_window: 4.0,
            resolvent_inner_window: 2.0,
            resolvent_tol: 1e-3,
            subordination_lo: -12.0,
            subordination_hi: 5.0,
            subordination_count: 1201,
            subordination_t_max: 1e4,
            subordination_tol: 1e-3,
            split_lo: -12.0,
            split_hi: 5.0,
            split_count: 401,
            split_xi: vec![0.5, 1.0, 2.0],
            split_tol: 1e-9,
            heat_lo: -14.0,
            heat_hi: 5.0,
            heat_count: 951,
            heat_xi: vec![0.5, 1.0, 2.0],
            heat_t: vec![0.2, 0.5, 1.0],
            heat_window: 2.0,
            heat_step: 0.25,
            heat_tol: 1e-3,
            mihlin_h: 0.1,
            mihlin_lo: -12.0,
            mihlin_hi: 8.0,
            mihlin_xi_count: 17,
            mihlin_nmax: 2,
            mihlin_variation_tol: 0.1,
            mihlin_stability_tol: 0.2,
            weights: registered_families(),
        }
    }
}

impl OperatorConfig {
    /// Small grids for tests; the identities are the same, the windows shrink.
    pub fn quick() -> OperatorConfig {
        OperatorConfig {
            subordination_count: 301,
            split_count: 201,
            heat_count: 476,
            heat_step: 1.0,
            mihlin_h: 0.2,
            mihlin_lo: -8.0,
            mihlin_hi: 6.0,
            mihlin_xi_count: 5,
            mihlin_nmax: 1,
            weights: registered_families().into_iter().take(3).collect(),
            ..OperatorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.resolvent_h > 0.0
            && self.resolvent_lo < -self.resolvent_window
            && self.resolvent_hi > self.resolvent_window
            && self.resolvent_inner_window <= self.resolvent_window
            && self.resolvent_t.iter().all(|&t| t > 0.0 && t <= kernels::T_MAX)
            && self.subordination_count >= 3
            && self.subordination_count <= 4000
            && self.subordination_t_max > 1.0
            && self.split_count >= 3
            && self.split_xi.iter().all(|&x| x > 0.0)
            && self.heat_count >= 3
            && self.heat_xi.iter().all(|&x| x > 0.0)
            && self.heat_step > 0.0
            && self.mihlin_h > 0.0
            && self.mihlin_lo < self.mihlin_hi
            && self.mihlin_xi_count >= 2
            && self.mihlin_nmax <= 4
            && !self.weights.is_empty()
            && [
                self.resolvent_tol,
                self.subordination_tol,
                self.split_tol,
                self.heat_tol,
                self.mihlin_variation_tol,
                self.mihlin_stability_tol,
            ]
            .iter()
            .all(|&t| t > 0.0 && t < 1.0);
        if !ok {
            return Err(Error::Config("inconsistent operator-check configuration".into()));
        }
        self.weights.iter().try_for_each(|w| w.validate())
    }
}

/// Finite-difference resolvent against the Bessel kernel.
///
/// The first report is the comparison as prescribed (Dirichlet end at the
/// left, window `|u|,|v| <= resolvent_window`); it does not reach the
/// tolerance because of the reflection at the left end and the second-order
/// truncation where `h e^u` is not small. The other two compare on the inner
/// window: Dirichlet against the exact half-line Green function, and the
/// transparent left end against the free kernel.
pub fn resolvent_checks(cfg: &OperatorConfig) -> Result<Vec<CheckReport>> {
    let grid = Grid::aligned_range(cfg.resolvent_lo, cfg.resolvent_hi, cfg.resolvent_h)?;
    let a = grid.u_min() - grid.h();
    let outer = grid.window(cfg.resolvent_window);
    let inner = grid.window(cfg.resolvent_inner_window);
    let mut literal = 0.0f64;
    let mut literal_at = (0.0, 0.0, 0.0);
    let mut half_line = 0.0f64;
    let mut transparent = 0.0f64;
    let mut per_t = BTreeMap::new();
    for &t in &cfg.resolvent_t {
        let dir = resolvent_fd_with(1.0, t, &grid, LeftBoundary::Dirichlet)?.op;
        let tr = resolvent_fd_with(1.0, t, &grid, LeftBoundary::Transparent)?.op;
        let worst: Vec<(f64, usize, usize)> = outer
            .par_iter()
            .map(|&i| {
                let mut w = (0.0f64, i, i);
                for &k in &outer {
                    let free = kernels::resolvent_kernel(t, grid.point(i), grid.point(k))?.to_f64()?;
                    let e = rel(dir.kernel(i, k), free);
                    if e > w.0 {
                        w = (e, i, k);
                    }
                }
                Ok(w)
            })
            .collect::<Result<_>>()?;
        let (e, i, k) = worst.into_iter().fold((0.0, 0, 0), |a, b| if b.0 > a.0 { b } else { a });
        per_t.insert(format!("literal_t={t}"), e);
        if e > literal {
            literal = e;
            literal_at = (t, grid.point(i), grid.point(k));
        }
        let (hl, tp) = inner
            .par_iter()
            .map(|&i| {
                let mut m = (0.0f64, 0.0f64);
                for &k in &inner {
                    let (u, v) = (grid.point(i), grid.point(k));
                    let exact = kernels::dirichlet_resolvent_kernel(t, a, u, v)?;
                    let free = kernels::resolvent_kernel(t, u, v)?.to_f64()?;
                    m.0 = m.0.max(rel(dir.kernel(i, k), exact));
                    m.1 = m.1.max(rel(tr.kernel(i, k), free));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold((0.0f64, 0.0f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        per_t.insert(format!("half_line_t={t}"), hl);
        per_t.insert(format!("transparent_t={t}"), tp);
        half_line = half_line.max(hl);
        transparent = transparent.max(tp);
    }
    let mut lit = CheckReport::at_most(
        "resolvent-bessel",
        "Rsl",
        "max relative error, Dirichlet FD vs free kernel",
        literal,
        cfg.resolvent_tol,
    )
    .detail("worst_t", literal_at.0)
    .detail("worst_u", literal_at.1)
    .detail("worst_v", literal_at.2);
    for (k, v) in &per_t {
        if k.starts_with("literal") {
            lit = lit.detail(k.clone(), *v);
        }
    }
    let lit = lit.known_failure(
        "the Dirichlet end reflects with relative size (e^a/e^u)^{2t} and the three-point scheme \
         loses accuracy like h^2 e^{3u}; neither is below the tolerance on this window",
    );
    let mut hl = CheckReport::at_most(
        "resolvent-half-line",
        "Rsl",
        "max relative error, Dirichlet FD vs half-line Green function",
        half_line,
        cfg.resolvent_tol,
    )
    .detail("window", cfg.resolvent_inner_window);
    let mut tp = CheckReport::at_most(
        "resolvent-transparent",
        "Rsl",
        "max relative error, transparent-end FD vs free kernel",
        transparent,
        cfg.resolvent_tol,
    )
    .detail("window", cfg.resolvent_inner_window);
    for (k, v) in per_t {
        if k.starts_with("half_line") {
            hl = hl.detail(k, v);
        } else if k.starts_with("transparent") {
            tp = tp.detail(k, v);
        }
    }
    Ok(vec![lit, hl, tp])
}

/// `H^{-1/2}` by eigendecomposition against `(2/pi) int_0^T (t^2+H)^{-1} dt`.
pub fn subordination_check(cfg: &OperatorConfig) -> Result<CheckReport> {
    let grid = Grid::new(cfg.subordination_lo, cfg.subordination_hi, cfg.subordination_count)?;
    let decomp = SpectralDecomp::of_h(1.0, &grid)?;
    let root = func_calc(&decomp, |l| 1.0 / l.sqrt())?;
    let quad = subordination_fd(1.0, &grid, cfg.subordination_t_max)?;
    let diff = root.sub(&quad).spectral_norm()?;
    let tail = 2.0 / (std::f64::consts::PI * cfg.subordination_t_max);
    Ok(CheckReport::at_most(
        "subordination",
        "subHxi",
        "spectral norm of the difference",
        diff,
        cfg.subordination_tol,
    )
    .detail("tail_bound", tail)
    .detail("grid_count", grid.count() as f64)
    .detail("root_norm", root.spectral_norm()?)
    .note("the omitted tail beyond T is bounded by 2/(pi T) in norm and is not added back"))
}

/// `(pi/2) F_j(xi) = M_j(xi) + L_j(xi)` in spectral norm.
pub fn split_identity_check(cfg: &OperatorConfig) -> Result<CheckReport> {
    let grid = Grid::new(cfg.split_lo, cfg.split_hi, cfg.split_count)?;
    let mut worst = 0.0f64;
    let mut report = CheckReport::at_most(
        "split-identity",
        "Riesz_loc_inf",
        "max spectral norm of (pi/2) F - M - L",
        0.0,
        cfg.split_tol,
    );
    for &xi in &cfg.split_xi {
        let decomp = SpectralDecomp::of_h(xi, &grid)?;
        for family in KernelFamily::ALL {
            let f = riesz_full_from(&decomp, family, xi)?.scale(FRAC_PI_2);
            let m = m_op_from(&decomp, family, xi)?;
            let l = local_part_from(&decomp, family, xi)?;
            let d = f.sub(&m).sub(&l).spectral_norm()?;
            report = report.detail(format!("{family}_xi={xi}"), d);
            worst = worst.max(d);
        }
    }
    report.value = worst;
    report.verdict = Verdict::from_bool(worst <= cfg.split_tol);
    report.as_expected = report.verdict.matches(report.expected);
    Ok(report)
}

/// Gnewuch heat kernel against the spectral `e^{-tH(xi)}`.
pub fn heat_check(cfg: &OperatorConfig) -> Result<CheckReport> {
    let grid = Grid::new(cfg.heat_lo, cfg.heat_hi, cfg.heat_count)?;
    let m = (cfg.heat_window / cfg.heat_step).round() as i64;
    let pts: Vec<f64> = (-m..=m).map(|k| k as f64 * cfg.heat_step).collect();
    let kernels_t: Vec<GnewuchKernel> = cfg.heat_t.iter().map(|&t| GnewuchKernel::new(t)).collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    let mut report = CheckReport::at_most(
        "heat-gnewuch",
        "lm:6",
        "max absolute kernel difference",
        0.0,
        cfg.heat_tol,
    );
    for &xi in &cfg.heat_xi {
        let decomp = SpectralDecomp::of_h(xi, &grid)?;
        for g in &kernels_t {
            let heat = func_calc(&decomp, |l| (-g.t() * l).exp())?;
            let mut w = 0.0f64;
            for &u in &pts {
                for &v in &pts {
                    let (i, k) = (grid.nearest(u), grid.nearest(v));
                    let exact = g.kernel(xi, grid.point(i), grid.point(k))?;
                    w = w.max((heat.kernel(i, k) - exact).abs());
                }
            }
            report = report.detail(format!("xi={xi}_t={}", g.t()), w);
            worst = worst.max(w);
        }
    }
    report.value = worst;
    report.verdict = Verdict::from_bool(worst <= cfg.heat_tol);
    report.as_expected = report.verdict.matches(report.expected);
    Ok(report)
}

/// Norms of the multiplier sweep at one spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MihlinSweep {
    pub h: f64,
    pub log_xi: Vec<f64>,
    pub a2: Vec<f64>,
    /// `norms[(j * (nmax + 1) + n) * weights + w][xi]`
    pub norms: Vec<Vec<f64>>,
    pub nmax: usize,
}

impl MihlinSweep {
    pub fn series(&self, family: KernelFamily, n: usize, w: usize) -> &[f64] {
        &self.norms[(family.index() * (self.nmax + 1) + n) * self.a2.len() + w]
    }

    /// `(max - min) / max` of a norm series over `xi`.
    pub fn variation(&self, family: KernelFamily, n: usize, w: usize) -> f64 {
        let s = self.series(family, n, w);
        let hi = s.iter().cloned().fold(0.0, f64::max);
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi
    }

    /// Smallest `C` with `norm <= C [w]_{A_2}` over every weight and `xi`.
    pub fn envelope(&self, family: KernelFamily, n: usize) -> f64 {
        (0..self.a2.len())
            .map(|w| self.series(family, n, w).iter().cloned().fold(0.0, f64::max) / self.a2[w])
            .fold(0.0, f64::max)
    }

    /// Nondecreasing envelope of `max_xi norm` as a function of `[w]_{A_2}`:
    /// pairs `(a2, psi(a2))` sorted by `a2`.
    pub fn monotone_envelope(&self, family: KernelFamily, n: usize) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = (0..self.a2.len())
            .map(|w| (self.a2[w], self.series(family, n, w).iter().cloned().fold(0.0, f64::max)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut run = 0.0f64;
        for p in &mut pts {
            run = run.max(p.1);
            p.1 = run;
        }
        pts
    }
}

/// Weighted norms of `(xi d/dxi)^n M_j(xi)` on the window `[lo, hi]` for
/// `log xi` evenly spaced on `[-4, 4]`.
///
/// One kernel table is built at `xi = 1` on the window widened by the largest
/// shift; the operator at `xi` is the block of that table moved by
/// `log xi / h` rows, which is exact on aligned grids.
pub fn mihlin_sweep(cfg: &OperatorConfig, h: f64) -> Result<MihlinSweep> {
    let base = Grid::aligned_range(cfg.mihlin_lo, cfg.mihlin_hi, h)?;
    let step = 8.0 / (cfg.mihlin_xi_count - 1) as f64;
    let log_xi: Vec<f64> = (0..cfg.mihlin_xi_count).map(|k| -4.0 + step * k as f64).collect();
    let lo_shift = log_xi.iter().cloned().fold(0.0, f64::min);
    let hi_shift = log_xi.iter().cloned().fold(0.0, f64::max);
    let steps = |s: f64| -> Result<i64> {
        let k = (s / h).round();
        if (s / h - k).abs() > 1e-9 {
            return Err(Error::Config(format!("log xi = {s} is not a multiple of h = {h}")));
        }
        Ok(k as i64)
    };
    let (k_lo, k_hi) = (steps(lo_shift)?, steps(hi_shift)?);
    let table_grid = Grid::aligned(h, base.first_index() + k_lo, base.count() + (k_hi - k_lo) as usize)?;
    let table = KernelTable::build(&table_grid, 1.0, cfg.mihlin_nmax)?;
    let weights: Vec<Weight> = cfg.weights.iter().map(|f| Weight::new(f.clone(), &base)).collect::<Result<_>>()?;
    let offsets: Vec<usize> = log_xi
        .iter()
        .map(|&s| steps(s).map(|k| (k - k_lo) as usize))
        .collect::<Result<_>>()?;
    let nw = weights.len();
    let combos: Vec<(KernelFamily, usize, usize)> = KernelFamily::ALL
        .iter()
        .flat_map(|&f| (0..=cfg.mihlin_nmax).flat_map(move |n| (0..nw).map(move |w| (f, n, w))))
        .collect();
    let norms = combos
        .par_iter()
        .map(|&(family, n, w)| {
            offsets
                .iter()
                .map(|&off| {
                    let op = table.sub_operator(family, n, off, base.count())?;
                    let op = DiscreteOperator::new(base, op.into_entries())?;
                    weighted_norm(&op, &weights[w])
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MihlinSweep {
        h,
        log_xi,
        a2: weights.iter().map(|w| w.a2_estimate()).collect(),
        norms,
        nmax: cfg.mihlin_nmax,
    })
}

/// Kernel tables built directly at `xi` agree bit for bit with the block of
/// the `xi = 1` table moved by `log xi / h` rows.
pub fn translation_identity_check(h: f64) -> Result<CheckReport> {
    let base = Grid::aligned(h, (-3.0 / h).round() as i64, 80)?;
    let shifts: [i64; 3] = [-5, 3, 10];
    let (k_lo, k_hi) = (-5i64, 10i64);
    let table_grid = Grid::aligned(h, base.first_index() + k_lo, base.count() + (k_hi - k_lo) as usize)?;
    let table = KernelTable::build(&table_grid, 1.0, 1)?;
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for k in shifts {
        let xi = (k as f64 * h).exp();
        if base.shift_steps(xi) != Some(k) {
            return Err(Error::Config(format!("log xi = {} is not aligned with h = {h}", k as f64 * h)));
        }
        let direct = KernelTable::build(&base, xi, 1)?;
        let off = (k - k_lo) as usize;
        for family in KernelFamily::ALL {
            for n in 0..=1 {
                let a = direct.operator(family, n);
                let b = table.sub_operator(family, n, off, base.count())?;
                for i in 0..base.count() {
                    for j in 0..base.count() {
                        compared += 1;
                        if a.get(i, j).to_bits() != b.get(i, j).to_bits() {
                            mismatches += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(CheckReport::at_most(
        "mihlin-translation-identity",
        "Mjn_transl",
        "entries differing bitwise",
        mismatches as f64,
        0.0,
    )
    .detail("entries_compared", compared as f64))
}

/// The multiplier sweep at `mihlin_h` and `mihlin_h / 2`.
///
/// Reports: the variation of the norms across `xi` (as prescribed; the block
/// of a fixed operator seen through a moving window is not translation
/// invariant, so this is recorded as a known failure), the stability of the
/// fitted `A_2` envelope under refinement, and the bitwise translation
/// identity.
pub fn mihlin_checks(cfg: &OperatorConfig) -> Result<Vec<CheckReport>> {
    let coarse = mihlin_sweep(cfg, cfg.mihlin_h)?;
    let fine = mihlin_sweep(cfg, 0.5 * cfg.mihlin_h)?;
    let mut var = CheckReport::at_most(
        "mihlin-xi-variation",
        "eq:23",
        "max (max-min)/max of weighted norms across xi",
        0.0,
        cfg.mihlin_variation_tol,
    );
    let mut env = CheckReport::at_most(
        "mihlin-envelope",
        "eq:23",
        "max relative change of the A2 envelope constant under h -> h/2",
        0.0,
        cfg.mihlin_stability_tol,
    );
    let mut worst_var = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut crossings = 0usize;
    for family in KernelFamily::ALL {
        for n in 0..=cfg.mihlin_nmax {
            let tag = format!("{family}_n{n}");
            let v = (0..coarse.a2.len())
                .map(|w| coarse.variation(family, n, w).max(fine.variation(family, n, w)))
                .fold(0.0, f64::max);
            let v_const = coarse.variation(family, n, 0).max(fine.variation(family, n, 0));
            var = var.detail(format!("{tag}_all_weights"), v).detail(format!("{tag}_first_weight"), v_const);
            worst_var = worst_var.max(v);
            let (c0, c1) = (coarse.envelope(family, n), fine.envelope(family, n));
            let drift = (c1 - c0).abs() / c0;
            env = env
                .detail(format!("{tag}_C_h"), c0)
                .detail(format!("{tag}_C_h/2"), c1)
                .detail(format!("{tag}_drift"), drift);
            if !(c0.is_finite() && c1.is_finite()) {
                worst_drift = f64::INFINITY;
            }
            worst_drift = worst_drift.max(drift);
            // the refined norms against the coarse monotone envelope, with the
            // refinement tolerance as slack
            let envelope = coarse.monotone_envelope(family, n);
            for w in 0..fine.a2.len() {
                let top = fine.series(family, n, w).iter().cloned().fold(0.0, f64::max);
                let bound = envelope
                    .iter()
                    .filter(|p| p.0 <= fine.a2[w] * (1.0 + cfg.mihlin_stability_tol))
                    .map(|p| p.1)
                    .fold(0.0, f64::max);
                if top > bound * (1.0 + cfg.mihlin_stability_tol) {
                    crossings += 1;
                }
            }
        }
    }
    var.value = worst_var;
    var.verdict = Verdict::from_bool(worst_var <= cfg.mihlin_variation_tol);
    var.as_expected = var.verdict.matches(var.expected);
    let var = var.known_failure(
        "the weighted norm of a truncated block changes with the window position: the kernels decay \
         slowly on the negative half-line, and a fixed weight sits at a different place relative to \
         the operator for every xi",
    );
    env.value = worst_drift;
    env.verdict = Verdict::from_bool(worst_drift <= cfg.mihlin_stability_tol && crossings == 0);
    env.as_expected = env.verdict.matches(env.expected);
    let env = env
        .detail("envelope_crossings", crossings as f64)
        .detail("weights", coarse.a2.len() as f64)
        .detail("xi_count", coarse.log_xi.len() as f64);
    let id = translation_identity_check(cfg.mihlin_h)?;
    Ok(vec![var, env, id])
}

/// All operator checks in a fixed order.
pub fn operator_checks(cfg: &OperatorConfig) -> Result<Vec<CheckReport>> {
    cfg.validate()?;
    let mut out = resolvent_checks(cfg)?;
    out.push(subordination_check(cfg)?);
    out.push(split_identity_check(cfg)?);
    out.push(heat_check(cfg)?);
    out.extend(mihlin_checks(cfg)?);
    Ok(out)
}
