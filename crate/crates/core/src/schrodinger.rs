//! Finite-difference realisation of `H(xi) = -d^2/du^2 + xi^2 e^{2u}` on a
//! truncated uniform grid, its resolvents, the spectral calculus, and the
//! multiplier operators built from them.
//!
//! Operators act on grid vectors in the plain `l^2` inner product, so the
//! matrix of an integral operator with kernel `k` has entries `h * k(u_i, u_j)`.

use std::f64::consts::PI;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::quad::GaussLegendre;
use crate::weights::Weight;

/// Largest exponent allowed in the potential `xi^2 e^{2 u_max}`.
const MAX_POTENTIAL_LN: f64 = 600.0;
const MIN_COUNT: usize = 64;

/// Uniform grid `u_i = base + (first + i) h`, `i = 0..count`.
///
/// Points are always recomputed from the integer index, so a translation by a
/// whole number of steps reproduces the shifted grid bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    base: f64,
    h: f64,
    first: i64,
    count: usize,
}

impl Grid {
    /// `count` points from `u_min` to `u_max` inclusive.
    pub fn new(u_min: f64, u_max: f64, count: usize) -> Result<Grid> {
        if count < MIN_COUNT {
            return Err(Error::Config(format!("grid needs at least {MIN_COUNT} points, got {count}")));
        }
        if !(u_min.is_finite() && u_max.is_finite() && u_max > u_min) {
            return Err(Error::Config(format!("invalid grid range [{u_min}, {u_max}]")));
        }
        Ok(Grid {
            base: u_min,
            h: (u_max - u_min) / (count - 1) as f64,
            first: 0,
            count,
        })
    }

    /// Grid whose points are integer multiples of `h`, starting at
    /// `first * h`. Translation by `log xi = k h` is then an index shift.
    pub fn aligned(h: f64, first: i64, count: usize) -> Result<Grid> {
        if count < MIN_COUNT {
            return Err(Error::Config(format!("grid needs at least {MIN_COUNT} points, got {count}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("invalid spacing {h}")));
        }
        Ok(Grid {
            base: 0.0,
            h,
            first,
            count,
        })
    }

    /// Aligned grid covering `[u_min, u_max]` with spacing `h`
    /// (end points rounded outward to multiples of `h`).
    pub fn aligned_range(u_min: f64, u_max: f64, h: f64) -> Result<Grid> {
        let first = (u_min / h).floor() as i64;
        let last = (u_max / h).ceil() as i64;
        Grid::aligned(h, first, (last - first + 1).max(0) as usize)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn first_index(&self) -> i64 {
        self.first
    }

    pub fn u_min(&self) -> f64 {
        self.point(0)
    }

    pub fn u_max(&self) -> f64 {
        self.point(self.count - 1)
    }

    pub fn point(&self, i: usize) -> f64 {
        self.index_point(self.first + i as i64)
    }

    fn index_point(&self, k: i64) -> f64 {
        self.base + k as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// The same grid moved by `k` steps.
    pub fn translated(&self, k: i64) -> Grid {
        Grid {
            first: self.first + k,
            ..*self
        }
    }

    /// `log xi / h` if it is an integer (to rounding), else `None`.
    pub fn shift_steps(&self, xi: f64) -> Option<i64> {
        let s = xi.ln() / self.h;
        let k = s.round();
        ((s - k).abs() <= 1e-9 * s.abs().max(1.0)).then_some(k as i64)
    }

    /// `u_i + log xi`, taken from the integer lattice whenever `log xi` is a
    /// whole number of steps.
    pub fn point_at_xi(&self, i: usize, xi: f64) -> f64 {
        match self.shift_steps(xi) {
            Some(k) => self.index_point(self.first + i as i64 + k),
            None => self.point(i) + xi.ln(),
        }
    }

    /// Index of the grid point closest to `u`.
    pub fn nearest(&self, u: f64) -> usize {
        let k = ((u - self.base) / self.h).round() as i64 - self.first;
        k.clamp(0, self.count as i64 - 1) as usize
    }

    /// Indices with `|u_i| <= radius`.
    pub fn window(&self, radius: f64) -> Vec<usize> {
        (0..self.count).filter(|&i| self.point(i).abs() <= radius + 1e-12).collect()
    }
}

/// Dense operator on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    entries: Mat<f64>,
}

impl DiscreteOperator {
    pub fn new(grid: Grid, entries: Mat<f64>) -> Result<Self> {
        if entries.nrows() != grid.count() || entries.ncols() != grid.count() {
            return Err(Error::LinAlg(format!(
                "matrix is {}x{}, grid has {} points",
                entries.nrows(),
                entries.ncols(),
                grid.count()
            )));
        }
        Ok(DiscreteOperator { grid, entries })
    }

    pub fn identity(grid: Grid) -> Self {
        let n = grid.count();
        DiscreteOperator {
            grid,
            entries: Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 }),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.count()
    }

    pub fn entries(&self) -> MatRef<'_, f64> {
        self.entries.as_ref()
    }

    pub fn into_entries(self) -> Mat<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Kernel value approximated by the entry: `entry / h`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)] / self.grid.h()
    }

    pub fn transpose(&self) -> DiscreteOperator {
        DiscreteOperator {
            grid: self.grid,
            entries: self.entries.transpose().to_owned(),
        }
    }

    pub fn add(&self, other: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator {
            grid: self.grid,
            entries: &self.entries + &other.entries,
        }
    }

    pub fn sub(&self, other: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator {
            grid: self.grid,
            entries: &self.entries - &other.entries,
        }
    }

    pub fn scale(&self, c: f64) -> DiscreteOperator {
        let n = self.dim();
        DiscreteOperator {
            grid: self.grid,
            entries: Mat::from_fn(n, n, |i, j| c * self.entries[(i, j)]),
        }
    }

    pub fn matmul(&self, other: &DiscreteOperator) -> DiscreteOperator {
        DiscreteOperator {
            grid: self.grid,
            entries: &self.entries * &other.entries,
        }
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                size = size.max(self.entries[(i, j)].abs());
                if j > i {
                    worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
                }
            }
        }
        if size == 0.0 {
            0.0
        } else {
            worst / size
        }
    }

    /// Spectral norm (largest singular value).
    pub fn spectral_norm(&self) -> Result<f64> {
        spectral_norm(self.entries.as_ref())
    }

    /// Square sub-block on the given indices.
    pub fn block(&self, idx: &[usize]) -> Mat<f64> {
        Mat::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])])
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(m: MatRef<'_, f64>) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0.0);
    }
    let s = m
        .singular_values()
        .map_err(|e| Error::LinAlg(format!("singular value decomposition failed: {e:?}")))?;
    Ok(s.iter().cloned().fold(0.0, f64::max))
}

fn potential(grid: &Grid, xi: f64) -> Result<Vec<f64>> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::domain(format!("xi = {xi} must be positive")));
    }
    let top = 2.0 * grid.point_at_xi(grid.count() - 1, xi);
    if top > MAX_POTENTIAL_LN {
        return Err(Error::Overflow { ln_abs: top });
    }
    Ok((0..grid.count()).map(|i| (2.0 * grid.point_at_xi(i, xi)).exp()).collect())
}

/// `H(xi)` with second-order central differences and zero Dirichlet data just
/// outside both ends.
pub fn build_h(xi: f64, grid: &Grid) -> Result<DiscreteOperator> {
    let v = potential(grid, xi)?;
    let n = grid.count();
    let ih2 = 1.0 / (grid.h() * grid.h());
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * ih2 + v[i]
        } else if i.abs_diff(j) == 1 {
            -ih2
        } else {
            0.0
        }
    });
    Ok(DiscreteOperator { grid: *grid, entries })
}

/// Treatment of the left end in [`resolvent_fd_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LeftBoundary {
    /// Zero data at `u_min - h`.
    Dirichlet,
    /// Exact discrete exterior for a constant potential equal to its value at
    /// `u_min`: the ghost value is `psi_0 / r` with `r + 1/r = 2 + h^2 (t^2 + V_0)`.
    Transparent,
}

/// Resolvent together with the bound used to judge the solve.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub op: DiscreteOperator,
    /// Upper bound for the 2-norm condition number of `t^2 + H`.
    pub condition_estimate: f64,
}

/// `(t^2 + H(xi))^{-1}` with Dirichlet ends.
pub fn resolvent_fd(xi: f64, t: f64, grid: &Grid) -> Result<DiscreteOperator> {
    Ok(resolvent_fd_with(xi, t, grid, LeftBoundary::Dirichlet)?.op)
}

/// `(t^2 + H(xi))^{-1}` by an `LDL^T` factorisation of the tridiagonal matrix
/// and one solve per column.
pub fn resolvent_fd_with(xi: f64, t: f64, grid: &Grid, left: LeftBoundary) -> Result<Resolvent> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    let v = potential(grid, xi)?;
    let n = grid.count();
    let h = grid.h();
    let ih2 = 1.0 / (h * h);
    let t2 = t * t;
    let mut diag: Vec<f64> = v.iter().map(|&vi| 2.0 * ih2 + t2 + vi).collect();
    if left == LeftBoundary::Transparent {
        let s = 2.0 + h * h * (t2 + v[0]);
        // larger root of r^2 - s r + 1 = 0, its reciprocal computed stably
        let r = 0.5 * (s + (s * s - 4.0).sqrt());
        diag[0] = (2.0 - 1.0 / r) * ih2 + t2 + v[0];
    }
    let off = -ih2;
    let upper = diag.iter().cloned().fold(0.0, f64::max) + 2.0 * ih2;
    // with two Dirichlet ends and V >= 0 the spectrum of H sits above that of
    // the discrete Laplacian
    let lower = match left {
        LeftBoundary::Dirichlet => {
            let s = (std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin();
            4.0 * ih2 * s * s
        }
        LeftBoundary::Transparent => 0.0,
    };
    let condition = upper / (t2 + lower);
    // LDL^T: d_i = diag_i - off^2 / d_{i-1}, l_i = off / d_{i-1}
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n];
    d[0] = diag[0];
    for i in 1..n {
        l[i] = off / d[i - 1];
        d[i] = diag[i] - l[i] * off;
        if !(d[i] > 0.0 && d[i].is_finite()) {
            return Err(Error::IllConditioned {
                condition,
                reason: format!("non-positive pivot {} at row {i}", d[i]),
            });
        }
    }
    if condition > 1e15 {
        return Err(Error::IllConditioned {
            condition,
            reason: "t^2 + H is numerically singular".into(),
        });
    }
    let mut entries = Mat::<f64>::zeros(n, n);
    let mut y = vec![0.0; n];
    for j in 0..n {
        // forward: L y = e_j (y_i = 0 for i < j)
        y[j] = 1.0;
        for i in j + 1..n {
            y[i] = -l[i] * y[i - 1];
        }
        // D z = y, then L^T x = z; only rows >= j are needed by symmetry
        let mut x_next = 0.0;
        for i in (0..n).rev() {
            let z = if i >= j { y[i] / d[i] } else { 0.0 };
            let x = if i + 1 < n { z - l[i + 1] * x_next } else { z };
            entries[(i, j)] = x;
            x_next = x;
        }
        for yi in y.iter_mut().skip(j) {
            *yi = 0.0;
        }
    }
    Ok(Resolvent {
        op: DiscreteOperator { grid: *grid, entries },
        condition_estimate: condition,
    })
}

/// Eigenpairs of a symmetric operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    grid: Grid,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
}

impl SpectralDecomp {
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let defect = op.symmetry_defect();
        if defect > 1e-12 {
            return Err(Error::LinAlg(format!("operator is not symmetric (defect {defect:.2e})")));
        }
        let evd = op
            .entries
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::LinAlg(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let n = op.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
        let eigenvalues = order.iter().map(|&k| s[k]).collect();
        let eigenvectors = Mat::from_fn(n, n, |i, k| u[(i, order[k])]);
        Ok(SpectralDecomp {
            grid: op.grid,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Decomposition of `build_h(xi, grid)`.
    pub fn of_h(xi: f64, grid: &Grid) -> Result<Self> {
        Self::new(&build_h(xi, grid)?)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> MatRef<'_, f64> {
        self.eigenvectors.as_ref()
    }

    /// `max_k ||A v_k - lambda_k v_k||_2`.
    pub fn max_residual(&self, op: &DiscreteOperator) -> f64 {
        let av = &op.entries * &self.eigenvectors;
        let n = self.eigenvalues.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let r = av[(i, k)] - self.eigenvalues[k] * self.eigenvectors[(i, k)];
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.eigenvectors.transpose() * &self.eigenvectors;
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - want).abs());
            }
        }
        worst
    }
}

/// `sum_k f(lambda_k) v_k v_k^T`.
pub fn func_calc<F: Fn(f64) -> f64>(decomp: &SpectralDecomp, f: F) -> Result<DiscreteOperator> {
    let vals: Vec<f64> = decomp.eigenvalues.iter().map(|&l| f(l)).collect();
    if let Some(k) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "function is not finite at eigenvalue {}",
            decomp.eigenvalues[k]
        )));
    }
    let v = &decomp.eigenvectors;
    let n = vals.len();
    let scaled = Mat::from_fn(n, n, |i, k| v[(i, k)] * vals[k]);
    let mut entries = &scaled * v.transpose();
    // the result is symmetric by construction; remove rounding asymmetry
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (entries[(i, j)] + entries[(j, i)]);
            entries[(i, j)] = m;
            entries[(j, i)] = m;
        }
    }
    Ok(DiscreteOperator {
        grid: decomp.grid,
        entries,
    })
}

/// `int_0^{1/2} (t^2 + lambda)^{-1} dt = lambda^{-1/2} arctan(lambda^{-1/2} / 2)`.
pub fn subordination_g(lambda: f64) -> f64 {
    let s = lambda.sqrt();
    (0.5 / s).atan() / s
}

/// `int_{1/2}^inf (t^2 + lambda)^{-1} dt = lambda^{-1/2} arctan(2 lambda^{1/2})`.
pub fn subordination_h(lambda: f64) -> f64 {
    let s = lambda.sqrt();
    (2.0 * s).atan() / s
}

/// Central first difference, one-sided in the end rows.
pub fn derivative_matrix(grid: &Grid) -> Mat<f64> {
    let n = grid.count();
    let h = grid.h();
    Mat::from_fn(n, n, |i, j| {
        if i == 0 {
            match j {
                0 => -1.0 / h,
                1 => 1.0 / h,
                _ => 0.0,
            }
        } else if i == n - 1 {
            if j == n - 1 {
                1.0 / h
            } else if j == n - 2 {
                -1.0 / h
            } else {
                0.0
            }
        } else if j == i + 1 {
            0.5 / h
        } else if j + 1 == i {
            -0.5 / h
        } else {
            0.0
        }
    })
}

/// `D A + A D` without forming `D` densely.
fn symmetrized_derivative(a: &Mat<f64>, h: f64) -> Mat<f64> {
    let n = a.nrows();
    let row_d = |i: usize, j: usize| -> f64 {
        if i == 0 {
            (a[(1, j)] - a[(0, j)]) / h
        } else if i == n - 1 {
            (a[(n - 1, j)] - a[(n - 2, j)]) / h
        } else {
            (a[(i + 1, j)] - a[(i - 1, j)]) * 0.5 / h
        }
    };
    // (A D)_{ij} = sum_k a_ik D_kj
    let col_d = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        // interior rows k of D contribute D_{k,k+1} = 1/2h, D_{k,k-1} = -1/2h
        if j >= 2 {
            s += a[(i, j - 1)] * 0.5 / h;
        }
        if j + 2 < n {
            s -= a[(i, j + 1)] * 0.5 / h;
        }
        if j == 0 {
            s -= a[(i, 0)] / h;
        }
        if j == 1 {
            s += a[(i, 0)] / h;
        }
        if j == n - 1 {
            s += a[(i, n - 1)] / h;
        }
        if j == n - 2 {
            s -= a[(i, n - 1)] / h;
        }
        s
    };
    Mat::from_fn(n, n, |i, j| row_d(i, j) + col_d(i, j))
}

/// `diag(xi e^{u_i}) A`.
fn times_xi_exp(a: &Mat<f64>, grid: &Grid, xi: f64) -> Mat<f64> {
    let n = a.nrows();
    let w: Vec<f64> = (0..n).map(|i| grid.point_at_xi(i, xi).exp()).collect();
    Mat::from_fn(n, n, |i, j| w[i] * a[(i, j)])
}

fn family_op(family: KernelFamily, base: DiscreteOperator, xi: f64) -> DiscreteOperator {
    let grid = base.grid;
    let entries = match family {
        KernelFamily::M1 => times_xi_exp(&base.entries, &grid, xi),
        KernelFamily::M0 => symmetrized_derivative(&base.entries, grid.h()),
    };
    DiscreteOperator { grid, entries }
}

fn check_decomp_xi(decomp: &SpectralDecomp) -> Result<()> {
    match decomp.eigenvalues.first() {
        Some(&l) if l > 0.0 => Ok(()),
        _ => Err(Error::LinAlg("H must be positive definite".into())),
    }
}

/// `M_j(xi)` from a decomposition of `H(xi)`.
pub fn m_op_from(decomp: &SpectralDecomp, family: KernelFamily, xi: f64) -> Result<DiscreteOperator> {
    check_decomp_xi(decomp)?;
    Ok(family_op(family, func_calc(decomp, subordination_g)?, xi))
}

/// `F_j(xi)` from a decomposition of `H(xi)`.
pub fn riesz_full_from(decomp: &SpectralDecomp, family: KernelFamily, xi: f64) -> Result<DiscreteOperator> {
    check_decomp_xi(decomp)?;
    Ok(family_op(family, func_calc(decomp, |l| 1.0 / l.sqrt())?, xi))
}

/// Local part `int_{1/2}^inf` of the subordinated Riesz operator.
pub fn local_part_from(decomp: &SpectralDecomp, family: KernelFamily, xi: f64) -> Result<DiscreteOperator> {
    check_decomp_xi(decomp)?;
    Ok(family_op(family, func_calc(decomp, subordination_h)?, xi))
}

/// `M_1(xi) = xi e^u g(H(xi))`, `M_0(xi) = D g(H) + g(H) D`.
pub fn m_op_fd(family: KernelFamily, xi: f64, grid: &Grid) -> Result<DiscreteOperator> {
    m_op_from(&SpectralDecomp::of_h(xi, grid)?, family, xi)
}

/// `F_1(xi) = xi e^u H^{-1/2}`, `F_0(xi) = D H^{-1/2} + H^{-1/2} D`.
pub fn riesz_full_fd(family: KernelFamily, xi: f64, grid: &Grid) -> Result<DiscreteOperator> {
    riesz_full_from(&SpectralDecomp::of_h(xi, grid)?, family, xi)
}

/// `e^{-t H(xi)}` by the spectral calculus.
pub fn heat_fd(xi: f64, t: f64, grid: &Grid) -> Result<DiscreteOperator> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("t = {t} must be positive")));
    }
    func_calc(&SpectralDecomp::of_h(xi, grid)?, |l| (-t * l).exp())
}

/// `(2/pi) int_0^T (t^2 + H(xi))^{-1} dt` from tridiagonal resolvents.
///
/// Composite Gauss-Legendre in `log t` on `[t_min, T]` plus one panel on
/// `[0, t_min]`. The omitted tail has norm at most `2 / (pi T)`.
pub fn subordination_fd(xi: f64, grid: &Grid, t_max: f64) -> Result<DiscreteOperator> {
    if !(t_max > 1.0) {
        return Err(Error::domain(format!("upper limit {t_max} must exceed 1")));
    }
    let n = grid.count();
    let rule = GaussLegendre::ten();
    let t_min: f64 = 1e-4;
    let mut acc = Mat::<f64>::zeros(n, n);
    let add = |t: f64, w: f64, acc: &mut Mat<f64>| -> Result<()> {
        let r = resolvent_fd(xi, t, grid)?;
        for j in 0..n {
            for i in 0..n {
                acc[(i, j)] += w * r.entries[(i, j)];
            }
        }
        Ok(())
    };
    for (x, w) in rule.nodes_weights(0.0, t_min) {
        add(x, w, &mut acc)?;
    }
    let (la, lb) = (t_min.ln(), t_max.ln());
    let panels = ((lb - la) / 0.5).ceil() as usize;
    let width = (lb - la) / panels as f64;
    for p in 0..panels {
        let a = la + p as f64 * width;
        for (s, w) in rule.nodes_weights(a, a + width) {
            let t = s.exp();
            add(t, w * t, &mut acc)?;
        }
    }
    let c = 2.0 / PI;
    Ok(DiscreteOperator {
        grid: *grid,
        entries: Mat::from_fn(n, n, |i, j| c * acc[(i, j)]),
    })
}

/// Dense operator with entries `h * kernel_at_xi(family, n, xi, u_i, u_j)`,
/// the discretisation of `(xi d/dxi)^n M_j(xi)`.
pub fn xi_derivative_op(family: KernelFamily, n: usize, xi: f64, grid: &Grid) -> Result<DiscreteOperator> {
    if n > 4 {
        return Err(Error::domain(format!("order {n} exceeds 4")));
    }
    let table = KernelTable::build(grid, xi, n)?;
    Ok(table.operator(family, n))
}

/// All integrated kernels up to order `nmax` on the translated grid
/// `u_i + log xi`, evaluated once and shared by both families.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Grid,
    nmax: usize,
    /// `values[(j * (nmax + 1) + n)][i * count + k]`
    values: Vec<Vec<f64>>,
}

impl KernelTable {
    pub fn build(grid: &Grid, xi: f64, nmax: usize) -> Result<KernelTable> {
        use rayon::prelude::*;
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::domain(format!("xi = {xi} must be positive")));
        }
        let m = grid.count();
        let pts: Vec<f64> = (0..m).map(|i| grid.point_at_xi(i, xi)).collect();
        let rows: Vec<Result<Vec<[[f64; kernels::MAX_DERIVATIVE + 1]; 2]>>> = (0..m)
            .into_par_iter()
            .map(|i| {
                (0..m)
                    .map(|k| {
                        let b = kernels::integrated_bundle(
                            pts[i],
                            pts[k],
                            nmax,
                            crate::quad::Tolerance::either(kernels::DEFAULT_KERNEL_TOL),
                        )?;
                        Ok(b.s)
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![vec![0.0; m * m]; 2 * (nmax + 1)];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, s) in row?.into_iter().enumerate() {
                for j in 0..2 {
                    for n in 0..=nmax {
                        values[j * (nmax + 1) + n][i * m + k] = s[j][n];
                    }
                }
            }
        }
        Ok(KernelTable {
            grid: *grid,
            nmax,
            values,
        })
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn kernel(&self, family: KernelFamily, n: usize, i: usize, k: usize) -> f64 {
        self.values[family.index() * (self.nmax + 1) + n][i * self.grid.count() + k]
    }

    pub fn operator(&self, family: KernelFamily, n: usize) -> DiscreteOperator {
        let m = self.grid.count();
        let h = self.grid.h();
        let v = &self.values[family.index() * (self.nmax + 1) + n];
        DiscreteOperator {
            grid: self.grid,
            entries: Mat::from_fn(m, m, |i, k| h * v[i * m + k]),
        }
    }

    /// Operator on a window of `len` consecutive points starting at `offset`.
    pub fn sub_operator(&self, family: KernelFamily, n: usize, offset: usize, len: usize) -> Result<DiscreteOperator> {
        let m = self.grid.count();
        if offset + len > m {
            return Err(Error::domain("window exceeds the table"));
        }
        let h = self.grid.h();
        let v = &self.values[family.index() * (self.nmax + 1) + n];
        let sub_grid = Grid {
            first: self.grid.first + offset as i64,
            count: len,
            ..self.grid
        };
        Ok(DiscreteOperator {
            grid: sub_grid,
            entries: Mat::from_fn(len, len, |i, k| h * v[(offset + i) * m + offset + k]),
        })
    }
}

/// `||diag(w^{1/2}) A diag(w^{-1/2})||_2`, the norm of `A` on `L^2(w)`.
pub fn weighted_norm(op: &DiscreteOperator, w: &Weight) -> Result<f64> {
    let n = op.dim();
    let samples = w.samples();
    if samples.len() != n {
        return Err(Error::domain(format!(
            "weight has {} samples, operator has {n} points",
            samples.len()
        )));
    }
    if samples.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain("weight must be strictly positive"));
    }
    let r: Vec<f64> = samples.iter().map(|x| x.sqrt()).collect();
    let b = Mat::from_fn(n, n, |i, j| r[i] * op.entries[(i, j)] / r[j]);
    spectral_norm(b.as_ref())
}

// ---------------------------------------------------------------- Gnewuch

const PSI_ERR_LIMIT: f64 = 1e-7;
const ZETA_LN_MIN: f64 = -5.0;
const ZETA_LN_MAX: f64 = 30.0;
const ZETA_PANEL: f64 = 0.25;

fn check_heat_t(t: f64) -> Result<()> {
    if !(0.05..=5.0).contains(&t) {
        return Err(Error::domain(format!("t = {t} outside [0.05, 5]")));
    }
    Ok(())
}

/// `psi_t(zeta)` and an absolute error estimate for `zeta^2 psi_t(zeta)`.
///
/// The theta integral cancels to a quantity of relative size `e^{-pi^2/4t}`,
/// so the prefactor amplifies rounding; when that amplified rounding exceeds
/// the working tolerance a convergence error is returned.
pub fn psi_weight_with_error(t: f64, zeta: f64) -> Result<(f64, f64)> {
    check_heat_t(t)?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::domain(format!("zeta = {zeta} must be positive")));
    }
    let b = PI / (2.0 * t);
    // exp(-theta^2/4t - (cosh theta - 1)/zeta) <= e^{-60} beyond theta_max
    let cut = 60.0;
    let gauss = 2.0 * t + (4.0 * t * t + 4.0 * t * cut).sqrt();
    let cosh_cut = (1.0 + zeta * (cut + gauss)).acosh();
    let theta_max = gauss.min(cosh_cut);
    let width = (t / 2.0).min(0.5).min(zeta.sqrt().max(0.02));
    let panels = (theta_max / width).ceil().max(1.0) as usize;
    let width = theta_max / panels as f64;
    let f = |th: f64| -> f64 {
        // sinh(theta) e^{-(cosh theta - 1)/zeta}, written to avoid overflow
        let cm1 = 2.0 * (0.5 * th).sinh().powi(2);
        let e = -th * th / (4.0 * t) - cm1 / zeta;
        th.sinh() * (b * th).sin() * e.exp()
    };
    let lo = GaussLegendre::ten();
    let hi = GaussLegendre::twenty();
    let mut s10 = 0.0;
    let mut s20 = 0.0;
    let mut abs = 0.0;
    for p in 0..panels {
        let a = p as f64 * width;
        s10 += lo.integrate(f, a, a + width);
        for (x, w) in hi.nodes_weights(a, a + width) {
            let v = f(x);
            s20 += w * v;
            abs += w * v.abs();
        }
    }
    let ln_pref = PI * PI / (4.0 * t) - 1.0 / zeta - 0.5 * (4.0 * PI.powi(3) * t).ln();
    let pref = ln_pref.exp();
    let err = pref * ((s20 - s10).abs() + 64.0 * f64::EPSILON * abs);
    if err > PSI_ERR_LIMIT {
        return Err(Error::Convergence(format!(
            "psi_t({zeta}) at t = {t}: cancellation error {err:.2e} exceeds {PSI_ERR_LIMIT:.0e}"
        )));
    }
    Ok((pref * s20 / (zeta * zeta), err / (zeta * zeta)))
}

/// The subordinating weight `psi_t(zeta)` of the Gnewuch heat-kernel formula.
pub fn psi_weight(t: f64, zeta: f64) -> Result<f64> {
    Ok(psi_weight_with_error(t, zeta)?.0)
}

/// `psi_t` tabulated on fixed Gauss-Legendre nodes in `log zeta`, reused for
/// every `(xi, u, v)`.
#[derive(Debug, Clone)]
pub struct GnewuchKernel {
    t: f64,
    /// `(log zeta, weight * zeta * psi_t(zeta))`
    nodes: Vec<(f64, f64)>,
}

impl GnewuchKernel {
    pub fn new(t: f64) -> Result<GnewuchKernel> {
        check_heat_t(t)?;
        let rule = GaussLegendre::ten();
        let panels = ((ZETA_LN_MAX - ZETA_LN_MIN) / ZETA_PANEL).round() as usize;
        let mut nodes = Vec::with_capacity(panels * rule.len());
        for p in 0..panels {
            let a = ZETA_LN_MIN + p as f64 * ZETA_PANEL;
            for (s, w) in rule.nodes_weights(a, a + ZETA_PANEL) {
                let z = s.exp();
                nodes.push((s, w * z * psi_weight(t, z)?));
            }
        }
        Ok(GnewuchKernel { t, nodes })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `int_0^inf psi_t(zeta) e^{-cosh(u-v)/zeta} e^{-zeta e^{u+v} xi^2 / 2} dzeta`.
    pub fn kernel(&self, xi: f64, u: f64, v: f64) -> Result<f64> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::domain(format!("xi = {xi} must be positive")));
        }
        let c = (u - v).cosh();
        let a = 0.5 * xi * xi * (u + v).exp();
        Ok(self
            .nodes
            .iter()
            .map(|&(s, wz)| {
                let z = s.exp();
                let e = -c / z - a * z;
                if e < -745.0 {
                    0.0
                } else {
                    wz * e.exp()
                }
            })
            .sum())
    }
}

/// Heat kernel of `H(xi)` at time `t` from the Gnewuch subordination formula.
pub fn heat_kernel_gnewuch(xi: f64, t: f64, u: f64, v: f64) -> Result<f64> {
    GnewuchKernel::new(t)?.kernel(xi, u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{dirichlet_resolvent_kernel, resolvent_kernel};

    fn test_grid() -> Grid {
        Grid::new(-8.0, 4.0, 241).unwrap()
    }

    fn max_abs(m: &Mat<f64>) -> f64 {
        let mut w: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w = w.max(m[(i, j)].abs());
            }
        }
        w
    }

    #[test]
    fn grid_translation_is_exact() {
        let g = Grid::aligned(0.05, -160, 200).unwrap();
        let xi = (7.0 * 0.05f64).exp();
        assert_eq!(g.shift_steps(xi), Some(7));
        let t = g.translated(7);
        for i in 0..g.count() {
            assert_eq!(g.point_at_xi(i, xi), t.point(i));
        }
        assert!(Grid::new(0.0, 1.0, 10).is_err());
        assert_eq!(g.nearest(0.0), 160);
    }

    #[test]
    fn stencil_and_positivity() {
        let g = test_grid();
        let h = build_h(1.0, &g).unwrap();
        let i = 100;
        let ih2 = 1.0 / (g.h() * g.h());
        assert_eq!(h.get(i, i - 1), -ih2);
        assert_eq!(h.get(i, i + 1), -ih2);
        assert!((h.get(i, i) - (2.0 * ih2 + (2.0 * g.point(i)).exp())).abs() < 1e-9);
        assert_eq!(h.symmetry_defect(), 0.0);
        let d = SpectralDecomp::new(&h).unwrap();
        assert!(d.eigenvalues()[0] > 0.0);
        assert!(d.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        let norm = h.spectral_norm().unwrap();
        assert!(d.max_residual(&h) <= 1e-8 * norm);
        assert!(d.orthonormality_defect() <= 1e-10);
        assert!(matches!(build_h(1.0, &Grid::new(0.0, 400.0, 100).unwrap()), Err(Error::Overflow { .. })));
    }

    #[test]
    fn translation_of_the_spectrum() {
        let g = Grid::aligned(0.05, -200, 240).unwrap();
        let xi = (10.0 * 0.05f64).exp();
        let a = build_h(xi, &g).unwrap();
        let b = build_h(1.0, &g.translated(10)).unwrap();
        assert_eq!(a.entries(), b.entries());
        let ea = SpectralDecomp::new(&a).unwrap();
        let eb = SpectralDecomp::new(&b).unwrap();
        for (x, y) in ea.eigenvalues().iter().zip(eb.eigenvalues()) {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0));
        }
    }

    #[test]
    fn resolvent_is_the_inverse() {
        let g = test_grid();
        let t = 0.3;
        let r = resolvent_fd(1.0, t, &g).unwrap();
        assert!(r.symmetry_defect() < 1e-10);
        let h = build_h(1.0, &g).unwrap();
        let n = g.count();
        let shifted = Mat::from_fn(n, n, |i, j| h.get(i, j) + if i == j { t * t } else { 0.0 });
        let prod = &shifted * r.entries();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((prod[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        assert!(worst < 1e-10, "{worst}");
        assert!(resolvent_fd(1.0, 0.0, &g).is_err());
    }

    #[test]
    fn resolvent_matches_half_line_green_function() {
        let g = Grid::new(-12.0, 6.0, 901).unwrap();
        let a = g.u_min() - g.h();
        let t = 0.3;
        let r = resolvent_fd(1.0, t, &g).unwrap();
        // second-order truncation error grows like h^2 e^{3 max(u,v)}, so the
        // window stays at |u|, |v| <= 2 for this spacing
        for &(u, v) in &[(-4.0, 2.0), (0.0, 0.0), (-2.0, 1.0), (1.5, 2.0)] {
            let (i, j) = (g.nearest(u), g.nearest(v));
            let want = dirichlet_resolvent_kernel(t, a, g.point(i), g.point(j)).unwrap();
            assert!(((r.kernel(i, j) - want) / want).abs() < 1e-3, "({u},{v})");
        }
    }

    #[test]
    fn transparent_end_removes_the_reflection() {
        let g = Grid::new(-12.0, 6.0, 1801).unwrap();
        for &t in &[0.1, 0.3, 0.49] {
            let r = resolvent_fd_with(1.0, t, &g, LeftBoundary::Transparent).unwrap();
            assert!(r.condition_estimate > 1.0);
            for &(u, v) in &[(-4.0, 2.0), (-4.0, -4.0), (0.0, 1.0), (2.0, 1.0)] {
                let (i, j) = (g.nearest(u), g.nearest(v));
                let want = resolvent_kernel(t, g.point(i), g.point(j)).unwrap().to_f64().unwrap();
                assert!(((r.op.kernel(i, j) - want) / want).abs() < 1e-3, "t={t} ({u},{v})");
            }
        }
    }

    #[test]
    fn functional_calculus_routes_agree() {
        let g = Grid::new(-6.0, 3.0, 121).unwrap();
        let h = build_h(1.0, &g).unwrap();
        let d = SpectralDecomp::new(&h).unwrap();
        let back = func_calc(&d, |l| l).unwrap();
        let hn = h.spectral_norm().unwrap();
        assert!(back.sub(&h).spectral_norm().unwrap() <= 1e-8 * hn);
        let t = 0.4;
        let res = func_calc(&d, |l| 1.0 / (t * t + l)).unwrap();
        let direct = resolvent_fd(1.0, t, &g).unwrap();
        assert!(res.sub(&direct).spectral_norm().unwrap() <= 1e-9 * direct.spectral_norm().unwrap());
        let isq = func_calc(&d, |l| 1.0 / l.sqrt()).unwrap();
        let inv = func_calc(&d, |l| 1.0 / l).unwrap();
        let sq = isq.matmul(&isq);
        assert!(sq.sub(&inv).spectral_norm().unwrap() <= 1e-8 * inv.spectral_norm().unwrap());
        assert!(func_calc(&d, |_| f64::NAN).is_err());
    }

    #[test]
    fn subordination_functions() {
        assert!((subordination_g(1.0) - 0.5f64.atan()).abs() < 1e-15);
        assert!((subordination_g(1.0) - 0.463_647_609_000_806_1).abs() < 1e-12);
        for &l in &[1e-4, 0.3, 1.0, 7.0, 1e5] {
            let total = subordination_g(l) + subordination_h(l);
            assert!((total - 0.5 * PI / l.sqrt()).abs() < 1e-12 * total);
            let gl = GaussLegendre::new(40);
            let edges: Vec<f64> = (0..=50).map(|i| 0.01 * i as f64).collect();
            let num = crate::quad::composite(&gl, |t| 1.0 / (t * t + l), &edges);
            assert!((num - subordination_g(l)).abs() < 1e-10 * num);
        }
    }

    #[test]
    fn derivative_helpers_agree() {
        let g = Grid::new(-3.0, 3.0, 64).unwrap();
        let n = g.count();
        let a = Mat::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * i as f64);
        let d = derivative_matrix(&g);
        let want = &d * &a + &a * &d;
        let got = symmetrized_derivative(&a, g.h());
        assert!(max_abs(&(&want - &got)) < 1e-9 * max_abs(&want));
    }

    #[test]
    fn split_identity_and_bounds() {
        let g = Grid::new(-8.0, 4.0, 241).unwrap();
        let xi = 1.3;
        let d = SpectralDecomp::of_h(xi, &g).unwrap();
        for family in KernelFamily::ALL {
            let full = riesz_full_from(&d, family, xi).unwrap().scale(0.5 * PI);
            let parts = m_op_from(&d, family, xi).unwrap().add(&local_part_from(&d, family, xi).unwrap());
            let diff = full.sub(&parts).spectral_norm().unwrap();
            assert!(diff <= 1e-9 * full.spectral_norm().unwrap(), "{family}: {diff}");
        }
        let f1 = riesz_full_from(&d, KernelFamily::M1, xi).unwrap();
        assert!(f1.spectral_norm().unwrap() <= 1.0 + 1e-6);
        let m0 = m_op_from(&d, KernelFamily::M0, xi).unwrap();
        let interior: Vec<usize> = (5..g.count() - 5).collect();
        let blk = m0.block(&interior);
        let sym = &blk + blk.transpose();
        assert!(spectral_norm(sym.as_ref()).unwrap() <= 1e-6 * spectral_norm(blk.as_ref()).unwrap());
    }

    #[test]
    fn m1_matches_half_line_kernel() {
        let g = Grid::new(-12.0, 5.0, 681).unwrap();
        let a = g.u_min() - g.h();
        let m1 = m_op_fd(KernelFamily::M1, 1.0, &g).unwrap();
        for &(u, v) in &[(-3.0, 2.0), (0.0, 1.0), (-2.0, -1.5), (2.0, -1.0)] {
            let (i, j) = (g.nearest(u), g.nearest(v));
            let want = kernels::integrated_dirichlet_m1(a, g.point(i), g.point(j), 1e-10).unwrap();
            let got = m1.kernel(i, j);
            assert!(((got - want) / want).abs() < 2e-3, "({u},{v}): {got} vs {want}");
        }
    }

    #[test]
    fn psi_weight_behaviour() {
        for &t in &[0.2, 0.5, 1.0, 3.0] {
            let mut worst: f64 = 0.0;
            for k in 0..=50 {
                let z = 10f64.powf(-2.0 + 5.0 * k as f64 / 50.0);
                worst = worst.max(psi_weight(t, z).unwrap().abs() * z * z);
            }
            assert!(worst.is_finite() && worst < 1e3, "t={t}: {worst}");
        }
        assert!(psi_weight(0.05, 1.0).is_err());
        assert!(psi_weight(0.01, 1.0).is_err());
    }

    #[test]
    fn gnewuch_reduces_to_the_gaussian() {
        // xi -> 0 removes the potential; the free heat kernel remains
        for &(t, r) in &[(0.5, 0.3), (1.0, 0.0), (0.2, 0.5)] {
            let k = GnewuchKernel::new(t).unwrap().kernel(1e-12, r, 0.0).unwrap();
            let want = (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
            assert!((k - want).abs() < 1e-6, "t={t} r={r}: {k} vs {want}");
        }
        let (t, r) = (0.5, 0.3);
        assert!((GnewuchKernel::new(t).unwrap().kernel(1e-12, r, 0.0).unwrap() - 0.381_387_815_460_524_1).abs() < 1e-6);
    }

    #[test]
    fn gnewuch_matches_spectral_heat_kernel() {
        let g = Grid::new(-14.0, 5.0, 951).unwrap();
        let heat = heat_fd(1.0, 0.5, &g).unwrap();
        let i = g.nearest(0.0);
        let want = heat.kernel(i, i);
        let got = heat_kernel_gnewuch(1.0, 0.5, g.point(i), g.point(i)).unwrap();
        assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        let a = heat_kernel_gnewuch(1.0, 0.5, 0.3, -0.8).unwrap();
        let b = heat_kernel_gnewuch(1.0, 0.5, -0.8, 0.3).unwrap();
        assert_eq!(a, b);
        assert!(a >= 0.0);
    }
}
