//! Quadrature: Gauss-Legendre rules, adaptive Gauss-Kronrod (G7/K15),
//! tanh-sinh for endpoint singularities, and composite panel rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Tolerance pair: a result is accepted once `err <= max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    /// Absolute-or-relative with the same threshold.
    pub fn either(tol: f64) -> Self {
        Tolerance { abs: tol, rel: tol }
    }

    pub fn relative(rel: f64) -> Self {
        Tolerance { abs: 0.0, rel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub abs_err: [f64; N],
    pub evaluations: usize,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term recurrence, from the Chebyshev-like
    /// initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let mut p0 = 1.0;
                let mut p1 = 0.0;
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
                }
                dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                let dz = p0 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 10-point rule used for composite panels.
    pub fn ten() -> &'static GaussLegendre {
        static GL10: OnceLock<GaussLegendre> = OnceLock::new();
        GL10.get_or_init(|| GaussLegendre::new(10))
    }

    pub fn twenty() -> &'static GaussLegendre {
        static GL20: OnceLock<GaussLegendre> = OnceLock::new();
        GL20.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn nodes_weights(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + r * x, w * r))
    }
}

/// Composite Gauss-Legendre over the given panel boundaries.
pub fn composite<F: FnMut(f64) -> f64>(rule: &GaussLegendre, mut f: F, edges: &[f64]) -> f64 {
    edges
        .windows(2)
        .map(|w| rule.integrate(&mut f, w[0], w[1]))
        .sum()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel for a vector integrand, with the QUADPACK error heuristic.
/// Returns the value, the error estimate and the integral of
/// `max(|f|, noise)`, where `noise` is the integrand's own rounding scale.
fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> ([f64; N], [f64; N], [f64; N])
where
    F: FnMut(f64) -> ([f64; N], [f64; N]),
{
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let (fc, nc) = f(c);
    let mut scale = [0.0; N];
    let mut resk = [0.0; N];
    let mut resg = [0.0; N];
    let mut resabs = [0.0; N];
    for k in 0..N {
        resk[k] = WGK[7] * fc[k];
        resg[k] = WG[3] * fc[k];
        resabs[k] = (WGK[7] * fc[k]).abs();
        scale[k] = WGK[7] * fc[k].abs().max(nc[k]);
    }
    let mut fv1 = [[0.0; N]; 7];
    let mut fv2 = [[0.0; N]; 7];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let (f1, n1) = f(c - dx);
        let (f2, n2) = f(c + dx);
        for k in 0..N {
            resk[k] += WGK[j] * (f1[k] + f2[k]);
            resabs[k] += WGK[j] * (f1[k].abs() + f2[k].abs());
            scale[k] += WGK[j] * (f1[k].abs().max(n1[k]) + f2[k].abs().max(n2[k]));
            if j % 2 == 1 {
                resg[k] += WG[j / 2] * (f1[k] + f2[k]);
            }
        }
        fv1[j] = f1;
        fv2[j] = f2;
    }
    let mut value = [0.0; N];
    let mut err = [0.0; N];
    let mut absval = [0.0; N];
    for k in 0..N {
        let reskh = resk[k] * 0.5;
        let mut resasc = WGK[7] * (fc[k] - reskh).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j][k] - reskh).abs() + (fv2[j][k] - reskh).abs());
        }
        value[k] = resk[k] * hl;
        let resasc = resasc * hl.abs();
        let resabs = resabs[k] * hl.abs();
        absval[k] = scale[k] * hl.abs();
        let mut e = ((resk[k] - resg[k]) * hl).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (1.0f64).min((200.0 * e / resasc).powf(1.5));
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        err[k] = e;
    }
    (value, err, absval)
}

/// Errors below this multiple of `int |f|` are treated as roundoff.
const ROUNDOFF_FLOOR: f64 = 1e3 * f64::EPSILON;

struct Panel<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: [f64; N],
    absval: [f64; N],
}

/// Adaptive G7/K15 for a vector-valued integrand on `[a, b]`.
///
/// All components share the same nodes; subdivision continues until every
/// component meets `tol` or `max_panels` is reached, in which case a
/// convergence error carrying the best estimate is returned. A component
/// whose error is already at the roundoff level of `int |f|` counts as
/// converged, since no subdivision can improve it. The panel split next is
/// the one with the largest error relative to the thresholds of the
/// components that have not converged yet.
pub fn adaptive_vec<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> [f64; N],
{
    adaptive_vec_noisy(|x| (f(x), [0.0; N]), a, b, tol, max_panels)
}

/// [`adaptive_vec`] for integrands that also report a pointwise rounding
/// scale (e.g. the sum of magnitudes of terms that cancel). The roundoff
/// floor is taken relative to the integral of that scale.
pub fn adaptive_vec_noisy<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Result<QuadResult<N>>
where
    F: FnMut(f64) -> ([f64; N], [f64; N]),
{
    let mut evals = 0usize;
    let make = |f: &mut F, a: f64, b: f64, evals: &mut usize| {
        let (value, err, absval) = gk15(f, a, b);
        *evals += 15;
        Panel { a, b, value, err, absval }
    };
    let mut panels = vec![make(&mut f, a, b, &mut evals)];
    loop {
        let mut total = [0.0; N];
        let mut total_err = [0.0; N];
        let mut total_abs = [0.0; N];
        for p in &panels {
            for k in 0..N {
                total[k] += p.value[k];
                total_err[k] += p.err[k];
                total_abs[k] += p.absval[k];
            }
        }
        let mut thresh = [f64::INFINITY; N];
        let mut done = true;
        for k in 0..N {
            let floor = ROUNDOFF_FLOOR * total_abs[k];
            let th = tol.abs.max(tol.rel * total[k].abs()).max(floor);
            if total_err[k] > th {
                done = false;
                thresh[k] = th.max(f64::MIN_POSITIVE);
            }
        }
        if done {
            return Ok(QuadResult {
                value: total,
                abs_err: total_err,
                evaluations: evals,
            });
        }
        if panels.len() >= max_panels {
            return Err(Error::Convergence(format!(
                "adaptive quadrature on [{a}, {b}] hit {max_panels} panels; estimate {total:?} +- {total_err:?}"
            )));
        }
        let score = |p: &Panel<N>| -> f64 { (0..N).map(|k| p.err[k] / thresh[k]).sum() };
        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let worst = panels.swap_remove(worst_idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Convergence(format!(
                "panel [{}, {}] cannot be split further",
                worst.a, worst.b
            )));
        }
        panels.push(make(&mut f, worst.a, mid, &mut evals));
        panels.push(make(&mut f, mid, worst.b, &mut evals));
    }
}

/// Scalar convenience wrapper around [`adaptive_vec`].
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    max_panels: usize,
) -> Result<(f64, f64)> {
    let r = adaptive_vec(|x| [f(x)], a, b, tol, max_panels)?;
    Ok((r.value[0], r.abs_err[0]))
}

/// Tanh-sinh (double exponential) quadrature on `[a, b]`.
///
/// The integrand receives `(x, da, db)` where `da = x - a` and `db = b - x`
/// are computed without cancellation, so algebraic endpoint singularities
/// can be evaluated accurately.
pub fn tanh_sinh<F>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64, f64, f64) -> f64,
{
    let half = 0.5 * (b - a);
    let s_max = 4.0;
    let mut h = 0.5;
    // level-0 sum over s = k h
    let mut eval = |s: f64| -> f64 {
        let y = 0.5 * PI * s.sinh();
        let w = 0.5 * PI * s.cosh() / (y.cosh() * y.cosh());
        // 1 + tanh(y) and 1 - tanh(y) without cancellation
        let e = (-2.0 * y.abs()).exp();
        let (one_plus, one_minus) = if y >= 0.0 {
            (2.0 / (1.0 + e), 2.0 * e / (1.0 + e))
        } else {
            (2.0 * e / (1.0 + e), 2.0 / (1.0 + e))
        };
        let da = half * one_plus;
        let db = half * one_minus;
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let v = f(a + da, da, db);
        if v.is_finite() {
            v * w
        } else {
            0.0
        }
    };
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= s_max {
        let s = k as f64 * h;
        sum += eval(s) + eval(-s);
        k += 1;
    }
    let mut prev = sum * h * half;
    for level in 0..9 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= s_max {
            let s = k as f64 * h;
            sum += eval(s) + eval(-s);
            k += 2;
        }
        let cur = sum * h * half;
        let diff = (cur - prev).abs();
        // Once in the asymptotic regime each level roughly squares the
        // relative error, so the current error is about (diff/|cur|)^2.
        let r = diff / cur.abs().max(f64::MIN_POSITIVE);
        let est = r * r * cur.abs();
        if diff == 0.0 || (level >= 2 && r < 1e-3 && est <= 0.1 * rel_tol * cur.abs()) {
            return Ok((cur, est.max(4.0 * f64::EPSILON * cur.abs())));
        }
        prev = cur;
    }
    Err(Error::Convergence(format!(
        "tanh-sinh on [{a}, {b}] did not reach relative tolerance {rel_tol:e}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(7);
        // degree 13 is integrated exactly
        let v = gl.integrate(|x| x.powi(12) + x.powi(13), -1.0, 1.0);
        assert!((v - 2.0 / 13.0).abs() < 1e-15);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_peaks() {
        let (v, e) = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, Tolerance::relative(1e-12), 500).unwrap();
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() < 1e-10 * exact, "{v} vs {exact}");
        assert!(e < 1e-9 * exact);
    }

    #[test]
    fn adaptive_reports_nonconvergence() {
        let r = adaptive(|x| (1.0 / x).sin(), 1e-8, 1.0, Tolerance::relative(1e-14), 20);
        assert!(matches!(r, Err(Error::Convergence(_))));
    }

    #[test]
    fn vector_components_share_nodes() {
        let r = adaptive_vec(|x| [x.exp(), x.cos()], 0.0, 2.0, Tolerance::relative(1e-13), 100).unwrap();
        assert!((r.value[0] - (2.0f64.exp() - 1.0)).abs() < 1e-12);
        assert!((r.value[1] - 2.0f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // int_0^1 x^{-1/2} (1-x)^{-0.3} dx = B(1/2, 0.7)
        let (v, _) = tanh_sinh(|_, da, db| da.powf(-0.5) * db.powf(-0.3), 0.0, 1.0, 1e-13).unwrap();
        let exact = crate::special::gamma(0.5) * crate::special::gamma(0.7) / crate::special::gamma(1.2);
        assert!((v - exact).abs() < 1e-11 * exact, "{v} vs {exact}");
    }
}
