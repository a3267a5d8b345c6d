//! Least squares on the unit sphere, `min ‖Mᵀx − d‖²  s.t. ‖x‖ = 1`.
//!
//! The complex problem `‖Pᴴx − d‖²` is first rewritten over real vectors
//! (see [`realify`]). With the Gram eigendecomposition `MMᵀ = UΛUᵀ` and
//! `Md = Uβ`, the stationary points are `x = U(Λ − νI)⁻¹β` where `ν` solves
//! the secular equation `Σ (βₙ/(ν − λₙ))² = 1`. The smallest root gives the
//! global minimum; it is bracketed explicitly and found by bisection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Default stopping tolerance on `|f1(ν)|`.
pub const DEFAULT_SECULAR_TOL: f64 = 1e-12;

/// Components with `|βₙ| ≤ BETA_ZERO·max|β|` are treated as exactly zero.
const BETA_ZERO: f64 = 1e-14;

/// `[Re z; Im z]`.
pub fn realify_vec(z: &DVector<C64>) -> DVector<f64> {
    let n = z.len();
    DVector::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

/// Inverse of [`realify_vec`].
pub fn complexify_vec(x: &DVector<f64>) -> DVector<C64> {
    let n = x.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(x[i], x[i + n]))
}

/// `[[Re P, −Im P], [Im P, Re P]]`, so that `realify_mat(P)ᵀ·realify_vec(x)`
/// equals `realify_vec(Pᴴx)`.
pub fn realify_mat(p: &DMatrix<C64>) -> DMatrix<f64> {
    let (n, l) = p.shape();
    DMatrix::from_fn(2 * n, 2 * l, |i, j| {
        let (bi, bj) = (i / n, j / l);
        let z = p[(i % n, j % l)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Real form of a weighted sum of complex least-squares terms.
#[derive(Debug, Clone)]
pub struct Realified {
    /// `2N × 2L_total`.
    pub m: DMatrix<f64>,
    pub d: DVector<f64>,
}

/// Realifies `Σ_b w_b ‖P_bᴴx − d_b‖²` into `‖Mᵀx̃ − d̃‖²`.
///
/// Each block's columns and target are scaled by `√w_b`; with the weights
/// `1/ρ1, 1/ρ2` this reproduces the x-part of the augmented Lagrangian.
pub fn realify(blocks: &[(&DMatrix<C64>, &DVector<C64>, f64)]) -> Result<Realified> {
    let n = blocks
        .first()
        .map(|b| b.0.nrows())
        .ok_or_else(|| Error::Dimension("no blocks to realify".into()))?;
    let mut cols = Vec::new();
    let mut targets = Vec::new();
    for (k, (p, d, w)) in blocks.iter().enumerate() {
        if p.nrows() != n || p.ncols() != d.len() {
            return Err(Error::Dimension(format!(
                "block {k}: operator {}x{} with target of length {} (expected {n} rows)",
                p.nrows(),
                p.ncols(),
                d.len()
            )));
        }
        if !(*w > 0.0 && w.is_finite()) {
            return Err(Error::domain(format!("block {k}: weight {w} must be positive")));
        }
        let s = w.sqrt();
        cols.push(p.scale(s));
        targets.push(d.scale(s));
    }
    let total: usize = cols.iter().map(|c| c.ncols()).sum();
    let mut p_all = DMatrix::<C64>::zeros(n, total);
    let mut d_all = DVector::<C64>::zeros(total);
    let mut at = 0;
    for (c, d) in cols.iter().zip(&targets) {
        p_all.columns_mut(at, c.ncols()).copy_from(c);
        d_all.rows_mut(at, d.len()).copy_from(d);
        at += c.ncols();
    }
    Ok(Realified {
        m: realify_mat(&p_all),
        d: realify_vec(&d_all),
    })
}

/// `‖Mᵀx − d‖²`.
pub fn sphere_cost(m: &DMatrix<f64>, d: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (m.tr_mul(x) - d).norm_squared()
}

/// Eigen-data of the secular equation.
#[derive(Debug, Clone)]
pub struct SecularSystem {
    /// Gram eigenvalues, ascending.
    pub lambdas: DVector<f64>,
    /// Matching orthonormal eigenvectors as columns.
    pub u: DMatrix<f64>,
    pub beta: DVector<f64>,
}

/// Ascending eigendecomposition of a symmetric matrix.
pub fn sorted_eigen(gram: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(gram.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let u = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (lambdas, u)
}

impl SecularSystem {
    /// Builds the system for `min ‖Mᵀx − d‖²`.
    pub fn new(m: &DMatrix<f64>, d: &DVector<f64>) -> Result<Self> {
        if m.ncols() != d.len() {
            return Err(Error::Dimension(format!(
                "M has {} columns, d has {} entries",
                m.ncols(),
                d.len()
            )));
        }
        let (lambdas, u) = sorted_eigen(&(m * m.transpose()));
        let beta = u.tr_mul(&(m * d));
        Ok(Self { lambdas, u, beta })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// `f1(ν) = Σ (βₙ/(ν − λₙ))² − 1`.
    pub fn f1(&self, nu: f64) -> f64 {
        secular_f1(self.lambdas.as_slice(), self.beta.as_slice(), nu)
    }

    /// `Σ βₙ²(2ν − λₙ)/(λₙ − ν)²`, the cost at a stationary point up to the
    /// constant `‖d‖²`.
    pub fn stationary_cost(&self, nu: f64) -> f64 {
        self.lambdas
            .iter()
            .zip(self.beta.iter())
            .map(|(l, b)| b * b * (2.0 * nu - l) / ((l - nu) * (l - nu)))
            .sum()
    }

    /// Bracket of the smallest root, see [`secular_bracket`].
    pub fn bracket(&self) -> Option<(f64, f64)> {
        secular_bracket(self.lambdas.as_slice(), self.beta.as_slice())
    }
}

pub(crate) fn secular_f1(lambdas: &[f64], beta: &[f64], nu: f64) -> f64 {
    lambdas
        .iter()
        .zip(beta)
        .map(|(l, b)| {
            let r = b / (nu - l);
            r * r
        })
        .sum::<f64>()
        - 1.0
}

fn active_terms(lambdas: &[f64], beta: &[f64]) -> Vec<(f64, f64)> {
    let bmax = beta.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    lambdas
        .iter()
        .zip(beta)
        .filter(|(_, b)| b.abs() > BETA_ZERO * bmax && **b != 0.0)
        .map(|(l, b)| (*l, b.abs()))
        .collect()
}

/// Interval `[min(λₙ − √K|βₙ|), min(min(λₙ − |βₙ|), max(λₙ − √K|βₙ|))]`
/// containing the smallest secular root, over the `K` terms with nonzero
/// `βₙ`. `None` when every `βₙ` vanishes.
pub fn secular_bracket(lambdas: &[f64], beta: &[f64]) -> Option<(f64, f64)> {
    let terms = active_terms(lambdas, beta);
    if terms.is_empty() {
        return None;
    }
    let sk = (terms.len() as f64).sqrt();
    let lo = terms
        .iter()
        .map(|(l, b)| l - sk * b)
        .fold(f64::INFINITY, f64::min);
    let near = terms.iter().map(|(l, b)| l - b).fold(f64::INFINITY, f64::min);
    let far = terms
        .iter()
        .map(|(l, b)| l - sk * b)
        .fold(f64::NEG_INFINITY, f64::max);
    Some((lo, near.min(far)))
}

/// Smallest root of `Σ (βₙ/(ν − λₙ))² = 1`.
///
/// Bisection on the bracket (where `f1` is increasing) stops once
/// `|f1| ≤ tol` or the bracket is at rounding level; a short Newton polish
/// from the right then tightens `|f1|`.
pub fn secular_bisect(sys: &SecularSystem, tol: f64) -> Result<f64> {
    bisect_terms(sys.lambdas.as_slice(), sys.beta.as_slice(), tol)
}

pub(crate) fn bisect_terms(lambdas: &[f64], beta: &[f64], tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = secular_bracket(lambdas, beta)
        .ok_or_else(|| Error::domain("secular equation with beta = 0"))?;
    let terms = active_terms(lambdas, beta);
    let (tl, tb): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    let f = |nu: f64| secular_f1(&tl, &tb, nu);

    let nudge = |x: f64| 1e3 * f64::EPSILON * (1.0 + x.abs());
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    if f_lo > 0.0 {
        lo -= nudge(lo);
        f_lo = f(lo);
    }
    if !(f_hi.is_finite()) || f_hi < 0.0 {
        let moved = if f_hi.is_finite() { hi + nudge(hi) } else { hi - nudge(hi) };
        hi = moved;
        f_hi = f(hi);
    }
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }

    let mut best = if f_lo.abs() < f_hi.abs() { lo } else { hi };
    for _ in 0..256 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() < f(best).abs() {
            best = mid;
        }
        if fm.abs() <= tol {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }

    // f1 is convex and increasing left of the first pole: Newton steps from
    // the right of the root move monotonically towards it.
    let mut nu = hi;
    for _ in 0..8 {
        let fv = f(nu);
        if fv.abs() < f(best).abs() {
            best = nu;
        }
        if fv.abs() <= tol {
            break;
        }
        let df: f64 = tl
            .iter()
            .zip(&tb)
            .map(|(l, b)| -2.0 * b * b / (nu - l).powi(3))
            .sum();
        if !(df > 0.0) {
            break;
        }
        let next = nu - fv / df;
        if !next.is_finite() || next == nu {
            break;
        }
        nu = next;
    }
    Ok(best)
}

/// Unit vector minimizing `‖Mᵀx − d‖²`.
pub fn solve_sphere_lsq(m: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    if m.iter().all(|v| *v == 0.0) {
        return Err(Error::domain("zero operator"));
    }
    let sys = SecularSystem::new(m, d)?;
    solve_from_eigen(&sys.lambdas, &sys.u, &sys.beta, DEFAULT_SECULAR_TOL)
}

/// Sphere solution given the Gram eigendecomposition and `β = Uᵀ(Md)`.
pub(crate) fn solve_from_eigen(
    lambdas: &DVector<f64>,
    u: &DMatrix<f64>,
    beta: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let dim = lambdas.len();
    let bmax = beta.amax();
    if !bmax.is_finite() {
        return Err(Error::domain("non-finite secular coefficients"));
    }
    if bmax == 0.0 {
        // Rayleigh quotient minimizer
        return Ok(u.column(0).into_owned());
    }
    let nu = bisect_terms(lambdas.as_slice(), beta.as_slice(), tol)?;
    let lmin = lambdas[0];
    let alpha = if nu < lmin {
        DVector::from_fn(dim, |i, _| beta[i] / (lambdas[i] - nu))
    } else {
        // Hard case: the component along the smallest eigenvalue is free and
        // absorbs the norm deficit at ν = λ_min.
        let cluster = 1e-12 * (1.0 + lambdas[dim - 1].abs());
        let mut a = DVector::from_fn(dim, |i, _| {
            if lambdas[i] - lmin > cluster {
                beta[i] / (lambdas[i] - lmin)
            } else {
                0.0
            }
        });
        let deficit = (1.0 - a.norm_squared()).max(0.0);
        a[0] = deficit.sqrt();
        a
    };
    let x = u * alpha;
    let norm = x.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::domain("sphere solution has zero norm"));
    }
    Ok(x.unscale(norm))
}
