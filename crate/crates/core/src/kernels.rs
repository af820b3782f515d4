//! Resolvent and Riesz-multiplier kernels on the real line.
//!
//! Everything is expressed through `x = e^{min(u,v)}`, `y = e^{max(u,v)}`
//! and the Bessel families `x^a I_{t+a}(x)`, `y^b K_{t+b}(y)`, normalised to a
//! common exponent so that all combinations are plain f64 arithmetic.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bessel::{self, MAX_FAMILY};
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::scaled::ScaledValue;

/// Highest homogeneous derivative order supported.
pub const MAX_DERIVATIVE: usize = 6;
/// Upper end of the subordination range handled by the Bessel kernels.
pub const T_MAX: f64 = 0.5;
/// Default tolerance of [`kernel_at_xi`].
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;
const MAX_T_PANELS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `d/du (t^2+H)^{-1} + (t^2+H)^{-1} d/du`
    M0,
    /// `e^u (t^2+H)^{-1}`
    M1,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 2] = [KernelFamily::M0, KernelFamily::M1];

    pub fn index(self) -> usize {
        match self {
            KernelFamily::M0 => 0,
            KernelFamily::M1 => 1,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::M0 => "m0",
            KernelFamily::M1 => "m1",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m0" | "0" => Ok(KernelFamily::M0),
            "m1" | "1" => Ok(KernelFamily::M1),
            other => Err(Error::Config(format!("unknown kernel family '{other}' (expected m0 or m1)"))),
        }
    }
}

/// A point `(t, u, v)` of a t-dependent kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// An evaluated kernel value with its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub family: KernelFamily,
    pub n: usize,
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub value: f64,
}

/// `K_1 + K_2` decomposition of the integrated `M0` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitKernel {
    pub k1: f64,
    pub k2: f64,
}

// ---------------------------------------------------------------- coefficients

/// Polynomials `C_{N,k}(t)`, `C'_{N,k}(t)` with
/// `(x d/dx)^N I_t(x) = sum_k C_{N,k}(t) x^k I_{t+k}(x)` and
/// `(y d/dy)^N K_t(y) = sum_k C'_{N,k}(t) y^k K_{t+k}(y)`.
///
/// Coefficient lists are in increasing powers of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCoefficients {
    n_max: usize,
    c: Vec<Vec<Vec<f64>>>,
    c_prime: Vec<Vec<Vec<f64>>>,
}

impl DerivedCoefficients {
    pub fn new(n_max: usize) -> Self {
        let mut c = vec![vec![vec![1.0]]];
        let mut c_prime = vec![vec![vec![1.0]]];
        for n in 0..n_max {
            c.push(Self::step(&c[n], 1.0));
            c_prime.push(Self::step(&c_prime[n], -1.0));
        }
        DerivedCoefficients { n_max, c, c_prime }
    }

    /// `C_{N+1,k} = (t + 2k) C_{N,k} + sign * C_{N,k-1}`.
    fn step(prev: &[Vec<f64>], sign: f64) -> Vec<Vec<f64>> {
        let n = prev.len() - 1;
        (0..=n + 1)
            .map(|k| {
                let mut out = vec![0.0; n + 2];
                if k <= n {
                    for (p, &a) in prev[k].iter().enumerate() {
                        out[p + 1] += a;
                        out[p] += 2.0 * k as f64 * a;
                    }
                }
                if k >= 1 {
                    for (p, &a) in prev[k - 1].iter().enumerate() {
                        out[p] += sign * a;
                    }
                }
                out
            })
            .collect()
    }

    /// Shared table up to [`MAX_DERIVATIVE`] + 1.
    pub fn shared() -> &'static DerivedCoefficients {
        static TABLE: OnceLock<DerivedCoefficients> = OnceLock::new();
        TABLE.get_or_init(|| DerivedCoefficients::new(MAX_DERIVATIVE + 1))
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn c(&self, n: usize, k: usize) -> &[f64] {
        &self.c[n][k]
    }

    pub fn c_prime(&self, n: usize, k: usize) -> &[f64] {
        &self.c_prime[n][k]
    }

    pub fn eval_c(&self, n: usize, k: usize, t: f64) -> f64 {
        horner(&self.c[n][k], t)
    }

    pub fn eval_c_prime(&self, n: usize, k: usize, t: f64) -> f64 {
        horner(&self.c_prime[n][k], t)
    }
}

fn horner(p: &[f64], t: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

// ---------------------------------------------------------------- pointwise core

/// Bessel data at one `(t, u, v)`:
/// `a[k] = x^k I_{t+k}(x) e^{-ei}`, `b[k] = y^k K_{t+k}(y) e^{-ek}`.
struct Local {
    t: f64,
    u: f64,
    v: f64,
    y: f64,
    a: [f64; MAX_FAMILY],
    b: [f64; MAX_FAMILY],
    /// `ln` of the common scale `e^{ei + ek}`.
    scale: f64,
    count: usize,
}

impl Local {
    fn new(t: f64, u: f64, v: f64, count: usize) -> Result<Local> {
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let x = lo.exp();
        let y = hi.exp();
        let is = bessel::i_family(t, x, count)?;
        let ks = bessel::k_family(t, y, count)?;
        let ei = is[0].exponent_offset();
        let ek = ks[0].exponent_offset();
        let mut a = [0.0; MAX_FAMILY];
        let mut b = [0.0; MAX_FAMILY];
        for k in 0..count {
            let kf = k as f64;
            a[k] = is[k].shift_exp(kf * lo - ei).value();
            b[k] = ks[k].shift_exp(kf * hi - ek).value();
        }
        Ok(Local {
            t,
            u,
            v,
            y,
            a,
            b,
            scale: ei + ek,
            count,
        })
    }

    /// `(x d/dx)^m I_t` and `(y d/dy)^m K_t` (scaled) for `m = 0..count`,
    /// each with the sum of magnitudes of its terms.
    #[allow(clippy::needless_range_loop)]
    fn derivative_factors(&self) -> [[f64; MAX_FAMILY]; 4] {
        let coef = DerivedCoefficients::shared();
        let mut out = [[0.0; MAX_FAMILY]; 4];
        for m in 0..self.count {
            for k in 0..=m {
                let ci = coef.eval_c(m, k, self.t) * self.a[k];
                let ck = coef.eval_c_prime(m, k, self.t) * self.b[k];
                out[0][m] += ci;
                out[1][m] += ck;
                out[2][m] += ci.abs();
                out[3][m] += ck.abs();
            }
        }
        out
    }

    /// `(d_u + d_v)^k R_t` for `k = 0..=kmax` (scaled), with magnitudes.
    fn homogeneous_r(&self, kmax: usize) -> ([f64; MAX_FAMILY], [f64; MAX_FAMILY]) {
        let [ix, ky, ixa, kya] = self.derivative_factors();
        let mut d = [0.0; MAX_FAMILY];
        let mut da = [0.0; MAX_FAMILY];
        for k in 0..=kmax {
            for m in 0..=k {
                let c = binomial(k, m);
                d[k] += c * ix[m] * ky[k - m];
                da[k] += c * ixa[m] * kya[k - m];
            }
        }
        (d, da)
    }

    fn sign(&self) -> f64 {
        if self.v > self.u {
            1.0
        } else if self.v < self.u {
            -1.0
        } else {
            0.0
        }
    }

    /// Converts a scaled quantity times `e^{extra}` to f64.
    fn out(&self, scaled: f64, extra: f64) -> f64 {
        if scaled == 0.0 {
            return 0.0;
        }
        scaled * (self.scale + extra).exp()
    }

    /// `S_j^n(t,u,v)` for every `n <= nmax` and both families.
    fn all_kernels(&self, nmax: usize) -> [[f64; MAX_DERIVATIVE + 1]; 2] {
        self.all_kernels_with_scale(nmax).0
    }

    /// Kernels as in [`Local::all_kernels`] together with the magnitude of
    /// the terms summed for each; their ratio bounds the cancellation.
    fn all_kernels_with_scale(&self, nmax: usize) -> ([[f64; MAX_DERIVATIVE + 1]; 2], [[f64; MAX_DERIVATIVE + 1]; 2]) {
        let mut res = [[0.0; MAX_DERIVATIVE + 1]; 2];
        let mut mag = [[0.0; MAX_DERIVATIVE + 1]; 2];
        let (d, da) = self.homogeneous_r(nmax);
        // M1: (d_u+d_v)^n (e^u R) = e^u sum_k C(n,k) D^k R
        for n in 0..=nmax {
            let s: f64 = (0..=n).map(|k| binomial(n, k) * d[k]).sum();
            let sa: f64 = (0..=n).map(|k| binomial(n, k) * da[k]).sum();
            res[1][n] = self.out(s, self.u);
            mag[1][n] = self.out(sa, self.u);
        }
        // M0, n = 0: sign(v-u) (x I_{t+1} K_t + y I_t K_{t+1})
        res[0][0] = self.sign() * self.out(self.a[1] * self.b[0] + self.a[0] * self.b[1], 0.0);
        mag[0][0] = res[0][0].abs();
        // M0, n >= 1: (d_u+d_v)^{n-1} [(e^{2u} - e^{2v}) R]
        //   = 2 e^{u+v} sinh(u-v) sum_k C(n-1,k) 2^{n-1-k} D^k R
        let f = 2.0 * (self.u - self.v).sinh();
        for n in 1..=nmax {
            let w = |k: usize| binomial(n - 1, k) * 2f64.powi((n - 1 - k) as i32);
            let s: f64 = (0..n).map(|k| w(k) * d[k]).sum();
            let sa: f64 = (0..n).map(|k| w(k) * da[k]).sum();
            res[0][n] = self.out(f * s, self.u + self.v);
            mag[0][n] = self.out(f.abs() * sa, self.u + self.v);
        }
        (res, mag)
    }

    /// `[S^{0,1}, S^{0,2}, d_u S^{0,1}, d_v S^{0,1}]` integrands.
    fn split_parts(&self) -> [f64; 4] {
        let sg = self.sign();
        let (a0, a1, b0, b1) = (self.a[0], self.a[1], self.b[0], self.b[1]);
        let s01 = sg * self.out(a0 * b1, 0.0);
        let s02 = sg * self.out(a1 * b0, 0.0);
        // derivative in the coordinate carrying min(u,v), resp. max(u,v)
        let d_min = sg * self.out(a1 * b1 + self.t * a0 * b1, 0.0);
        let d_max = -sg * self.out(self.y * self.y * a0 * b0 + self.t * a0 * b1, 0.0);
        let (du, dv) = if self.u < self.v { (d_min, d_max) } else { (d_max, d_min) };
        [s01, s02, du, dv]
    }
}

fn check_t(t: f64, upper: f64) -> Result<()> {
    if !(t > 0.0 && t < upper) {
        return Err(Error::domain(format!("t = {t} outside (0, {upper})")));
    }
    Ok(())
}

/// t-kernels accept the closed endpoint `t = 1/2` of the integration range.
fn check_t_kernel(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= T_MAX) {
        return Err(Error::domain(format!("t = {t} outside (0, {T_MAX}]")));
    }
    Ok(())
}

fn check_uv(u: f64, v: f64) -> Result<()> {
    if !(u.is_finite() && v.is_finite()) {
        return Err(Error::domain(format!("non-finite point ({u}, {v})")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n > MAX_DERIVATIVE {
        return Err(Error::domain(format!("derivative order {n} exceeds {MAX_DERIVATIVE}")));
    }
    Ok(())
}

/// `R_t(u,v) = I_t(e^{min(u,v)}) K_t(e^{max(u,v)})`.
pub fn resolvent_kernel(t: f64, u: f64, v: f64) -> Result<ScaledValue> {
    check_t(t, 2.0)?;
    check_uv(u, v)?;
    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
    let (i, _) = bessel::i_value(t, lo.exp())?;
    let (k, _) = bessel::k_value(t, hi.exp())?;
    Ok(i * k)
}

/// Kernel of `M_j(1, t)`.
pub fn riesz_kernel_t(family: KernelFamily, t: f64, u: f64, v: f64) -> Result<f64> {
    homog_deriv_kernel_t(family, 0, t, u, v)
}

/// `S_j^n(t,u,v) = (d_u + d_v)^n` applied to the kernel of `M_j(1, t)`.
pub fn homog_deriv_kernel_t(family: KernelFamily, n: usize, t: f64, u: f64, v: f64) -> Result<f64> {
    check_t_kernel(t)?;
    check_uv(u, v)?;
    check_n(n)?;
    let local = Local::new(t, u, v, n.max(1) + 1)?;
    Ok(local.all_kernels(n)[family.index()][n])
}

/// [`homog_deriv_kernel_t`] and a rounding bound: a small multiple of
/// machine epsilon times the sum of the magnitudes of the combined terms.
pub fn homog_deriv_kernel_t_with_error(family: KernelFamily, n: usize, t: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    check_t_kernel(t)?;
    check_uv(u, v)?;
    check_n(n)?;
    let local = Local::new(t, u, v, n.max(1) + 1)?;
    let (k, mag) = local.all_kernels_with_scale(n);
    let j = family.index();
    Ok((k[j][n], 32.0 * f64::EPSILON * mag[j][n].max(k[j][n].abs())))
}

/// All t-kernels `S_j^n(t,u,v)`, `n <= nmax`, indexed `[j][n]`.
pub fn kernels_t_all(nmax: usize, t: f64, u: f64, v: f64) -> Result<[[f64; MAX_DERIVATIVE + 1]; 2]> {
    check_t_kernel(t)?;
    check_uv(u, v)?;
    check_n(nmax)?;
    Ok(Local::new(t, u, v, nmax.max(1) + 1)?.all_kernels(nmax))
}

/// Homogeneous derivatives of the Bessel product for `0 < x <= y`, `t in (0, 1)`:
/// `p[N] = (x d_x + y d_y)^N I_t(x) K_t(y)` and
/// `q[N] = (x d_x + y d_y)^N (x d_x - y d_y) I_t(x) K_t(y)` for `N <= nmax`.
pub fn product_derivatives(
    nmax: usize,
    t: f64,
    x: f64,
    y: f64,
) -> Result<([f64; MAX_DERIVATIVE + 1], [f64; MAX_DERIVATIVE + 1])> {
    check_t(t, 1.0)?;
    check_n(nmax)?;
    if !(x > 0.0 && x <= y && y.is_finite()) {
        return Err(Error::domain(format!("need 0 < x <= y, got x = {x}, y = {y}")));
    }
    let local = Local::new(t, x.ln(), y.ln(), nmax.max(1) + 1)?;
    let (d, _) = local.homogeneous_r(nmax);
    let k = local.all_kernels(nmax);
    let mut p = [0.0; MAX_DERIVATIVE + 1];
    for (n, pn) in p.iter_mut().enumerate().take(nmax + 1) {
        *pn = local.out(d[n], 0.0);
    }
    Ok((p, k[0]))
}

// ---------------------------------------------------------------- t-integrals

/// t-integrated kernels at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratedBundle {
    pub u: f64,
    pub v: f64,
    pub nmax: usize,
    /// `S_j^n(u,v)` indexed `[j][n]`; entries above `nmax` are zero.
    pub s: [[f64; MAX_DERIVATIVE + 1]; 2],
    /// `S_0^{0,1}(u,v)`, `S_0^{0,2}(u,v)`.
    pub s01: f64,
    pub s02: f64,
    /// Partial derivatives of `S_0^{0,1}` in `u` and `v`.
    pub s01_du: f64,
    pub s01_dv: f64,
    /// Quadrature error estimates of `s`.
    pub abs_err: [[f64; MAX_DERIVATIVE + 1]; 2],
    pub evaluations: usize,
}

const BUNDLE_LEN: usize = 2 * (MAX_DERIVATIVE + 1) + 4;

/// Integrates every kernel up to order `nmax` over `t in (0, 1/2)` on shared
/// adaptive nodes. `S_0^0` is assembled as `S_0^{0,1} + S_0^{0,2}` from the
/// same nodes, so the split is consistent with the total to rounding.
pub fn integrated_bundle(u: f64, v: f64, nmax: usize, tol: Tolerance) -> Result<IntegratedBundle> {
    check_uv(u, v)?;
    check_n(nmax)?;
    let mut failure = None;
    let res = quad::adaptive_vec_noisy::<BUNDLE_LEN, _>(
        |t| {
            let mut out = [0.0; BUNDLE_LEN];
            let mut noise = [0.0; BUNDLE_LEN];
            match Local::new(t, u, v, nmax.max(1) + 1) {
                Ok(local) => {
                    let (k, mag) = local.all_kernels_with_scale(nmax);
                    out[1..=nmax].copy_from_slice(&k[0][1..=nmax]);
                    noise[1..=nmax].copy_from_slice(&mag[0][1..=nmax]);
                    for n in 0..=nmax {
                        out[MAX_DERIVATIVE + 1 + n] = k[1][n];
                        noise[MAX_DERIVATIVE + 1 + n] = mag[1][n];
                    }
                    let sp = local.split_parts();
                    out[BUNDLE_LEN - 4..].copy_from_slice(&sp);
                }
                Err(e) => failure = Some(e),
            }
            (out, noise)
        },
        0.0,
        T_MAX,
        tol,
        MAX_T_PANELS,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let r = res.map_err(|e| match e {
        Error::Convergence(msg) => Error::Convergence(format!("t-integral at (u, v) = ({u}, {v}): {msg}")),
        other => other,
    })?;
    let mut s = [[0.0; MAX_DERIVATIVE + 1]; 2];
    let [s01, s02, s01_du, s01_dv] = [
        r.value[BUNDLE_LEN - 4],
        r.value[BUNDLE_LEN - 3],
        r.value[BUNDLE_LEN - 2],
        r.value[BUNDLE_LEN - 1],
    ];
    let mut abs_err = [[0.0; MAX_DERIVATIVE + 1]; 2];
    s[0][0] = s01 + s02;
    abs_err[0][0] = r.abs_err[BUNDLE_LEN - 4] + r.abs_err[BUNDLE_LEN - 3];
    for n in 1..=nmax {
        s[0][n] = r.value[n];
        abs_err[0][n] = r.abs_err[n];
    }
    for n in 0..=nmax {
        s[1][n] = r.value[MAX_DERIVATIVE + 1 + n];
        abs_err[1][n] = r.abs_err[MAX_DERIVATIVE + 1 + n];
    }
    Ok(IntegratedBundle {
        u,
        v,
        nmax,
        s,
        s01,
        s02,
        s01_du,
        s01_dv,
        abs_err,
        evaluations: r.evaluations,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 1e-12 && tol < 1e-2) {
        return Err(Error::domain(format!("tolerance {tol:e} outside (1e-12, 1e-2)")));
    }
    Ok(())
}

/// `S_j^n(u,v) = int_0^{1/2} S_j^n(t,u,v) dt` with absolute-or-relative
/// error `tol`.
pub fn integrated_kernel(family: KernelFamily, n: usize, u: f64, v: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    check_n(n)?;
    Ok(integrated_kernel_with_error(family, n, u, v, tol)?.0)
}

/// [`integrated_kernel`] and its quadrature error estimate.
pub fn integrated_kernel_with_error(family: KernelFamily, n: usize, u: f64, v: f64, tol: f64) -> Result<(f64, f64)> {
    check_tol(tol)?;
    check_n(n)?;
    let b = integrated_bundle(u, v, n, Tolerance::either(tol))?;
    Ok((b.s[family.index()][n], b.abs_err[family.index()][n]))
}

/// Kernel of `(xi d/dxi)^n M_j(xi)` at `(u, v)`.
pub fn kernel_at_xi(family: KernelFamily, n: usize, xi: f64, u: f64, v: f64) -> Result<f64> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::domain(format!("xi = {xi} must be positive")));
    }
    let s = xi.ln();
    integrated_kernel(family, n, u + s, v + s, DEFAULT_KERNEL_TOL)
}

// ---------------------------------------------------------------- cutoff and split

fn glue(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp()
    } else {
        0.0
    }
}

fn glue_prime(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp() / (z * z)
    } else {
        0.0
    }
}

/// Smooth bump: 1 on `[-1, 1]`, 0 outside `(-2, 2)`.
pub fn bump(r: f64) -> f64 {
    let a = r.abs();
    let p = glue(2.0 - a);
    let q = glue(a - 1.0);
    if p + q == 0.0 {
        0.0
    } else {
        p / (p + q)
    }
}

pub fn bump_prime(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 || a >= 2.0 {
        return 0.0;
    }
    let p = glue(2.0 - a);
    let q = glue(a - 1.0);
    let d = (-glue_prime(2.0 - a) * q - p * glue_prime(a - 1.0)) / ((p + q) * (p + q));
    d * r.signum()
}

/// `chi(s) = bump(log2 s)`: supported in `[1/4, 4]`, equal to 1 on
/// `[1/2, 2]`, and `chi(s) = chi(1/s)`.
pub fn cutoff(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        bump(s.log2())
    }
}

pub fn cutoff_prime(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        bump_prime(s.log2()) / (s * std::f64::consts::LN_2)
    }
}

const SPLIT_TOL: f64 = 1e-11;

fn split_from_bundle(b: &IntegratedBundle) -> SplitKernel {
    let (u, v) = (b.u, b.v);
    let k1 = if u < 0.0 && v < 0.0 { b.s01 * cutoff(u / v) } else { 0.0 };
    SplitKernel { k1, k2: b.s[0][0] - k1 }
}

/// `K_1 = S_0^{0,1} chi(u/v)` on the negative quadrant, `K_2 = S_0^0 - K_1`.
pub fn split_k1_k2(u: f64, v: f64) -> Result<SplitKernel> {
    check_uv(u, v)?;
    if u == v {
        return Err(Error::domain("the split is defined off the diagonal only"));
    }
    let b = integrated_bundle(u, v, 0, Tolerance::new(0.0, SPLIT_TOL))?;
    Ok(split_from_bundle(&b))
}

/// Analytic `(d_u K_1, d_v K_1)`.
pub fn k1_gradient(u: f64, v: f64) -> Result<(f64, f64)> {
    check_uv(u, v)?;
    if u == v {
        return Err(Error::domain("the split is defined off the diagonal only"));
    }
    if !(u < 0.0 && v < 0.0) {
        return Ok((0.0, 0.0));
    }
    let r = u / v;
    let chi = cutoff(r);
    let dchi = cutoff_prime(r);
    if chi == 0.0 && dchi == 0.0 {
        return Ok((0.0, 0.0));
    }
    let b = integrated_bundle(u, v, 0, Tolerance::new(0.0, SPLIT_TOL))?;
    let du = chi * b.s01_du + dchi / v * b.s01;
    let dv = chi * b.s01_dv - dchi * u / (v * v) * b.s01;
    Ok((du, dv))
}

/// `(K_1, K_2)` and the analytic gradient of `K_1` from one t-integration.
pub fn split_with_gradient(u: f64, v: f64, tol: Tolerance) -> Result<(SplitKernel, (f64, f64), IntegratedBundle)> {
    check_uv(u, v)?;
    if u == v {
        return Err(Error::domain("the split is defined off the diagonal only"));
    }
    let b = integrated_bundle(u, v, 0, tol)?;
    let (split, grad) = split_of_bundle(&b);
    Ok((split, grad, b))
}

/// `(K_1, K_2)` and `(d_u K_1, d_v K_1)` from an already integrated bundle
/// at an off-diagonal point.
pub fn split_of_bundle(b: &IntegratedBundle) -> (SplitKernel, (f64, f64)) {
    let (u, v) = (b.u, b.v);
    let split = split_from_bundle(b);
    let grad = if u < 0.0 && v < 0.0 {
        let r = u / v;
        let chi = cutoff(r);
        let dchi = cutoff_prime(r);
        (
            chi * b.s01_du + dchi / v * b.s01,
            chi * b.s01_dv - dchi * u / (v * v) * b.s01,
        )
    } else {
        (0.0, 0.0)
    };
    (split, grad)
}

// ---------------------------------------------------------------- half-line oracle

/// Green function of `t^2 + H(1)` on `[a, inf)` with a Dirichlet condition at
/// `a`: `[I_t(e^m) - c K_t(e^m)] K_t(e^M)`, `c = I_t(e^a) / K_t(e^a)`,
/// `m = min(u,v)`, `M = max(u,v)`.
pub fn dirichlet_resolvent_kernel(t: f64, a: f64, u: f64, v: f64) -> Result<f64> {
    check_t(t, 2.0)?;
    check_uv(u, v)?;
    let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
    if lo < a {
        return Err(Error::domain(format!("point ({u}, {v}) left of the boundary {a}")));
    }
    let ea = a.exp();
    let c = bessel::i_value(t, ea)?.0 * bessel::k_value(t, ea)?.0.recip()?;
    let x = lo.exp();
    let left = bessel::i_value(t, x)?.0.sub(&(c * bessel::k_value(t, x)?.0));
    (left * bessel::k_value(t, hi.exp())?.0).to_f64()
}

/// `int_0^{1/2} e^u G_a(t; u, v) dt` with the half-line Green function above.
pub fn integrated_dirichlet_m1(a: f64, u: f64, v: f64, tol: f64) -> Result<f64> {
    let mut failure = None;
    let (val, _) = quad::adaptive(
        |t| match dirichlet_resolvent_kernel(t, a, u, v) {
            Ok(g) => u.exp() * g,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        },
        0.0,
        T_MAX,
        Tolerance::either(tol),
        MAX_T_PANELS,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::closed_form;
    use crate::special::gamma;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn coefficient_tables() {
        let c = DerivedCoefficients::new(6);
        assert_eq!(c.c(0, 0), &[1.0]);
        assert_eq!(c.c_prime(0, 0), &[1.0]);
        // (x d/dx) I_t = t I_t + x I_{t+1}
        assert_eq!(c.c(1, 0), &[0.0, 1.0]);
        assert_eq!(c.c(1, 1), &[1.0, 0.0]);
        assert_eq!(c.c_prime(1, 1), &[-1.0, 0.0]);
        // C_{2,1} = (t+2) + t = 2t + 2
        assert_eq!(c.c(2, 1), &[2.0, 2.0, 0.0]);
        for n in 0..6 {
            for k in 0..=n + 1 {
                let mut want = [0.0; 8];
                if k <= n {
                    for (p, &a) in c.c(n, k).iter().enumerate() {
                        want[p + 1] += a;
                        want[p] += 2.0 * k as f64 * a;
                    }
                }
                if k >= 1 {
                    for (p, &a) in c.c(n, k - 1).iter().enumerate() {
                        want[p] += a;
                    }
                }
                for (p, &got) in c.c(n + 1, k).iter().enumerate() {
                    assert_eq!(got, want[p]);
                }
            }
        }
    }

    /// `(x d/dx)^N I_t(x)` straight from the ascending series, where the
    /// operator acts on `x^{t+2j}` as multiplication by `(t+2j)^N`.
    fn series_homog_i(t: f64, x: f64, n: i32) -> f64 {
        let mut sum = 0.0;
        for j in 0..80 {
            let p = t + 2.0 * j as f64;
            let c = (0.5 * x).powf(p) / (gamma(j as f64 + 1.0) * gamma(t + j as f64 + 1.0));
            sum += p.powi(n) * c;
        }
        sum
    }

    /// Same for `K_t = (pi/2) (I_{-t} - I_t) / sin(pi t)`.
    fn series_homog_k(t: f64, x: f64, n: i32) -> f64 {
        let mut minus = 0.0;
        for j in 0..80 {
            let p = -t + 2.0 * j as f64;
            minus += p.powi(n) * (0.5 * x).powf(p) / (gamma(j as f64 + 1.0) * gamma(-t + j as f64 + 1.0));
        }
        0.5 * std::f64::consts::PI * (minus - series_homog_i(t, x, n)) / (std::f64::consts::PI * t).sin()
    }

    #[test]
    fn coefficients_match_series_derivatives() {
        let coef = DerivedCoefficients::shared();
        for &(t, x) in &[(0.3, 0.7), (0.45, 2.0), (0.15, 1.3)] {
            for n in 0..=6usize {
                let want_i = series_homog_i(t, x, n as i32);
                let want_k = series_homog_k(t, x, n as i32);
                let mut got_i = 0.0;
                let mut got_k = 0.0;
                for k in 0..=n {
                    let i = bessel::i_value(t + k as f64, x).unwrap().0.value();
                    let kk = bessel::k_value(t + k as f64, x).unwrap().0.value();
                    got_i += coef.eval_c(n, k, t) * x.powi(k as i32) * i;
                    got_k += coef.eval_c_prime(n, k, t) * x.powi(k as i32) * kk;
                }
                assert!(rel(got_i, want_i) < 1e-9, "I t={t} x={x} n={n}: {got_i} vs {want_i}");
                assert!(rel(got_k, want_k) < 1e-7, "K t={t} x={x} n={n}: {got_k} vs {want_k}");
            }
        }
    }

    #[test]
    fn resolvent_examples() {
        let r = resolvent_kernel(0.5, 0.0, 0.0).unwrap().to_f64().unwrap();
        assert!(rel(r, 0.432_332_358_381_693_65) < 1e-12);
        let far = resolvent_kernel(0.25, -2.0, 8.0).unwrap();
        assert!(far.signum() > 0.0);
        assert!((far.exponent_offset() + 8f64.exp()).abs() < 10.0);
        let m1 = riesz_kernel_t(KernelFamily::M1, 0.49, 0.0, 0.0).unwrap();
        assert!(m1 > 0.0);
        let x = 1.0f64;
        let y = std::f64::consts::E;
        let want = x * closed_form::i_three_halves(x) * closed_form::k_half(y)
            + y * closed_form::i_half(x) * closed_form::k_three_halves(y);
        let got = resolvent_kernel(0.5, 0.0, 1.0).unwrap().to_f64().unwrap();
        assert!(rel(got, closed_form::i_half(1.0) * closed_form::k_half(y)) < 1e-12);
        let m0 = riesz_kernel_t(KernelFamily::M0, 0.5, 0.0, 1.0).unwrap();
        assert!(rel(m0, want) < 1e-12, "{m0} vs {want}");
        let m1 = riesz_kernel_t(KernelFamily::M1, 0.5, 0.0, 0.0).unwrap();
        assert!(rel(m1, 0.432_332_358_381_693_65) < 1e-12);
        assert!(riesz_kernel_t(KernelFamily::M1, 0.51, 0.0, 0.0).is_err());
        assert!((want - 0.1896).abs() < 5e-5);
    }

    #[test]
    fn diagonal_conventions() {
        for &u in &[-5.0, 0.0, 2.0] {
            assert_eq!(riesz_kernel_t(KernelFamily::M0, 0.3, u, u).unwrap(), 0.0);
            assert_eq!(homog_deriv_kernel_t(KernelFamily::M0, 1, 0.3, u, u).unwrap(), 0.0);
        }
        assert!(split_k1_k2(1.0, 1.0).is_err());
    }

    #[test]
    fn first_homogeneous_derivative_matches_finite_difference() {
        let h = 1e-5;
        for family in KernelFamily::ALL {
            let f = |s: f64| riesz_kernel_t(family, 0.3, 0.2 + s, 0.7 + s).unwrap();
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let got = homog_deriv_kernel_t(family, 1, 0.3, 0.2, 0.7).unwrap();
            assert!(rel(got, fd) < 1e-5, "{family}: {got} vs {fd}");
        }
    }

    #[test]
    fn higher_derivatives_match_finite_differences() {
        // each order is the diagonal derivative of the previous one
        let h = 1e-4;
        for family in KernelFamily::ALL {
            for n in 1..=5 {
                for &(t, u, v) in &[(0.2, -1.0, 0.5), (0.4, 1.0, -2.0), (0.05, -6.0, -3.0)] {
                    let f = |s: f64| homog_deriv_kernel_t(family, n - 1, t, u + s, v + s).unwrap();
                    let fd = (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
                    let got = homog_deriv_kernel_t(family, n, t, u, v).unwrap();
                    let scale = got.abs().max(f(0.0).abs());
                    assert!((got - fd).abs() < 1e-6 * scale, "{family} n={n} ({t},{u},{v}): {got} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn product_derivative_identities() {
        // (x d_x - y d_y) I_t(x) K_t(y) and (x d_x + y d_y)(x d_x - y d_y) I_t K_t
        let h = 1e-4;
        for &(t, u, v) in &[(0.3, -1.0, 0.4), (0.1, 0.5, 2.0), (0.45, -3.0, -2.5)] {
            let r = |a: f64, b: f64| resolvent_kernel(t, a, b).unwrap().value();
            let anti = (r(u + h, v - h) - r(u - h, v + h)) / (2.0 * h);
            let x = f64::exp(u);
            let y = f64::exp(v);
            let i = |n: f64| bessel::i_value(n, x).unwrap().0.value();
            let k = |n: f64| bessel::k_value(n, y).unwrap().0.value();
            let want = x * i(t + 1.0) * k(t) + y * i(t) * k(t + 1.0);
            assert!(rel(anti, want) < 1e-5);
            let m0 = |s: f64| riesz_kernel_t(KernelFamily::M0, t, u + s, v + s).unwrap();
            let second = (m0(h) - m0(-h)) / (2.0 * h);
            let want2 = (x * x - y * y) * r(u, v);
            assert!(rel(second, want2) < 1e-4);
        }
    }

    #[test]
    fn integrated_examples() {
        assert_eq!(integrated_kernel(KernelFamily::M0, 0, 1.5, 1.5, 1e-8).unwrap(), 0.0);
        let got = integrated_kernel(KernelFamily::M1, 0, 0.0, 0.0, 1e-9).unwrap();
        // independent composite Gauss-Legendre over t
        let gl = quad::GaussLegendre::new(30);
        let edges: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64 / 20.0).collect();
        let want = quad::composite(&gl, |t| resolvent_kernel(t, 0.0, 0.0).unwrap().value(), &edges);
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        let far = integrated_kernel(KernelFamily::M0, 0, -8.0, -2.0, 1e-8).unwrap();
        assert!(far.abs() * (1.0 + 6.0) < 3.0);
    }

    #[test]
    fn xi_translation_and_derivative() {
        let a = kernel_at_xi(KernelFamily::M1, 0, 1.0, 0.3, -0.4).unwrap();
        assert_eq!(a, integrated_kernel(KernelFamily::M1, 0, 0.3, -0.4, DEFAULT_KERNEL_TOL).unwrap());
        let e = std::f64::consts::E;
        let b = kernel_at_xi(KernelFamily::M1, 0, e, 0.0, 0.0).unwrap();
        let c = integrated_kernel(KernelFamily::M1, 0, 1.0, 1.0, DEFAULT_KERNEL_TOL).unwrap();
        assert!(rel(b, c) < 1e-14);
        // (xi d/dxi)^2 by five-point differences in log xi
        let h = 0.01;
        let f = |s: f64| kernel_at_xi(KernelFamily::M0, 0, 0.1 * f64::exp(s), 3.0, 5.0).unwrap();
        let fd = (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
        let got = kernel_at_xi(KernelFamily::M0, 2, 0.1, 3.0, 5.0).unwrap();
        assert!(rel(got, fd) < 1e-4, "{got} vs {fd}");
    }

    #[test]
    fn cutoff_properties() {
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(0.5), 1.0);
        assert_eq!(cutoff(2.0), 1.0);
        assert_eq!(cutoff(0.25), 0.0);
        assert_eq!(cutoff(4.0), 0.0);
        assert_eq!(cutoff(5.0), 0.0);
        assert_eq!(cutoff(-1.0), 0.0);
        for i in 1..200 {
            let s = 0.2 + 0.02 * i as f64;
            assert!((cutoff(s) - cutoff(1.0 / s)).abs() < 1e-14);
            assert!((0.0..=1.0).contains(&cutoff(s)));
            let h = 1e-6;
            let fd = (cutoff(s + h) - cutoff(s - h)) / (2.0 * h);
            assert!((fd - cutoff_prime(s)).abs() < 1e-5 * (1.0 + fd.abs()), "s={s}");
        }
    }

    #[test]
    fn split_examples() {
        let s = split_k1_k2(1.0, 2.0).unwrap();
        assert_eq!(s.k1, 0.0);
        let full = integrated_kernel(KernelFamily::M0, 0, 1.0, 2.0, 1e-11).unwrap();
        assert!(rel(s.k2, full) < 1e-9);
        let s = split_k1_k2(-3.0, -3.1).unwrap();
        let b = integrated_bundle(-3.0, -3.1, 0, Tolerance::new(0.0, SPLIT_TOL)).unwrap();
        assert_eq!(s.k1, b.s01);
        assert!(rel(s.k2, b.s02) < 1e-12);
        let s = split_k1_k2(-1.0, -20.0).unwrap();
        assert_eq!(s.k1, 0.0);
        assert!(rel(s.k1 + s.k2, b_total(-1.0, -20.0)) < 1e-10);
    }

    fn b_total(u: f64, v: f64) -> f64 {
        integrated_bundle(u, v, 0, Tolerance::new(0.0, SPLIT_TOL)).unwrap().s[0][0]
    }

    #[test]
    fn k1_gradient_matches_finite_difference() {
        let h = 1e-4;
        for &(u, v) in &[(-3.0, -4.5), (-2.0, -7.0), (-5.0, -3.0), (-1.0, -2.5)] {
            let k1 = |a: f64, b: f64| split_k1_k2(a, b).unwrap().k1;
            let fu = (k1(u + h, v) - k1(u - h, v)) / (2.0 * h);
            let fv = (k1(u, v + h) - k1(u, v - h)) / (2.0 * h);
            let (du, dv) = k1_gradient(u, v).unwrap();
            let scale = du.abs() + dv.abs() + 1e-12;
            assert!((du - fu).abs() < 1e-5 * scale, "({u},{v}) du {du} vs {fu}");
            assert!((dv - fv).abs() < 1e-5 * scale, "({u},{v}) dv {dv} vs {fv}");
        }
    }

    #[test]
    fn dirichlet_oracle_vanishes_at_boundary() {
        let g = dirichlet_resolvent_kernel(0.3, -12.0, -12.0, -1.0).unwrap();
        assert!(g.abs() < 1e-14);
        let free = resolvent_kernel(0.3, -1.0, 0.5).unwrap().value();
        let half = dirichlet_resolvent_kernel(0.3, -12.0, -1.0, 0.5).unwrap();
        assert!(half < free && half > 0.0);
        assert!(dirichlet_resolvent_kernel(0.3, -12.0, -13.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetry_and_antisymmetry(t in 0.01f64..0.49, u in -10.0f64..6.0, v in -10.0f64..6.0) {
            let a = resolvent_kernel(t, u, v).unwrap();
            let b = resolvent_kernel(t, v, u).unwrap();
            prop_assert_eq!(a, b);
            let m0 = riesz_kernel_t(KernelFamily::M0, t, u, v).unwrap();
            let m0r = riesz_kernel_t(KernelFamily::M0, t, v, u).unwrap();
            prop_assert_eq!(m0, -m0r);
        }

        #[test]
        fn translation_covariance_is_exact(u in -6.0f64..4.0, v in -6.0f64..4.0, lx in -2.0f64..2.0) {
            let xi = f64::exp(lx);
            let a = kernel_at_xi(KernelFamily::M1, 1, xi, u, v).unwrap();
            let b = kernel_at_xi(KernelFamily::M1, 1, 1.0, u + xi.ln(), v + xi.ln()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn split_sums_to_total(u in -9.0f64..3.0, v in -9.0f64..3.0) {
            prop_assume!((u - v).abs() > 1e-3);
            let s = split_k1_k2(u, v).unwrap();
            let total = b_total(u, v);
            prop_assert!((s.k1 + s.k2 - total).abs() <= 1e-10 * total.abs());
            if !(u < 0.0 && v < 0.0 && (0.25..=4.0).contains(&(u / v))) {
                prop_assert_eq!(s.k1, 0.0);
            }
        }
    }
}
