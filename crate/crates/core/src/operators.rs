//! Total-power matrix, its triangular factor and the whitened region
//! operators consumed by the ADMM engine.
//!
//! With `A = CᴴC` and `x = Cw`, the power gain at `θ` is
//! `G(θ) = 2|c(θ)ᴴx|² / ‖x‖²` where `c(θ) = C⁻ᴴ a(θ)`. The region operators
//! stack these columns for the mainlobe (`P`) and sidelobe (`Q`) samples.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector};

use crate::array::{steering_vector, AngularGrid, ArrayGeometry};
use crate::{Error, Result, C64};

/// Relative pivot threshold (times `trace/N`) below which `A` is treated as
/// singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Default Gauss–Legendre order for `N` elements.
pub fn default_quadrature_order(n: usize) -> usize {
    4 * n + 64
}

/// Smallest admissible quadrature order for `N` elements.
pub fn min_quadrature_order(n: usize) -> usize {
    2 * n + 32
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// `A = ∫ a(θ)aᴴ(θ) cos θ dθ` over the visible range.
///
/// Isotropic arrays use the closed form `A_mn = 2 sinc(2(r_m − r_n))`;
/// arrays with element patterns are integrated in `u = sin θ` with
/// Gauss–Legendre.
pub fn build_total_power_matrix(
    geometry: &ArrayGeometry,
    quadrature_order: usize,
) -> Result<DMatrix<C64>> {
    let n = geometry.len();
    if quadrature_order < min_quadrature_order(n) {
        return Err(Error::domain(format!(
            "quadrature order {quadrature_order} below 2N+32 = {}",
            min_quadrature_order(n)
        )));
    }
    let a = if geometry.is_isotropic() {
        let r = geometry.positions();
        DMatrix::from_fn(n, n, |i, j| C64::new(2.0 * sinc(2.0 * (r[i] - r[j])), 0.0))
    } else {
        total_power_by_quadrature(geometry, quadrature_order)?
    };
    check_definite(&a)?;
    Ok(a)
}

/// Quadrature route for `A`, used for patterned arrays and to cross-check the
/// closed form.
pub fn total_power_by_quadrature(geometry: &ArrayGeometry, order: usize) -> Result<DMatrix<C64>> {
    let order = NonZeroUsize::new(order).ok_or_else(|| Error::domain("zero quadrature order"))?;
    let rule = GaussLegendre::new(order);
    let n = geometry.len();
    let mut a = DMatrix::<C64>::zeros(n, n);
    for &(u, weight) in rule.as_node_weight_pairs() {
        let theta = u.clamp(-1.0, 1.0).asin().to_degrees();
        let s = steering_vector(geometry, theta)?;
        a.gerc(C64::new(weight, 0.0), &s, &s, C64::new(1.0, 0.0));
    }
    // exact Hermitian symmetry
    let ah = a.adjoint();
    Ok((a + ah).unscale(2.0))
}

fn check_definite(a: &DMatrix<C64>) -> Result<()> {
    let n = a.nrows();
    let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
    let threshold = PIVOT_TOL * trace / n as f64;
    let min_eig = a
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > threshold) {
        return Err(Error::DegenerateGeometry { min_eig, threshold });
    }
    Ok(())
}

/// Upper-triangular `C` with `CᴴC = A`, and its inverse.
pub fn factorize(a: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::Dimension(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let norm = a.norm();
    let asym = (a - a.adjoint()).norm();
    if asym > 1e-12 * norm {
        return Err(Error::domain(format!(
            "matrix is not Hermitian (relative asymmetry {:e})",
            asym / norm
        )));
    }
    let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
    let threshold = PIVOT_TOL * trace.abs() / n as f64;

    // Row-oriented Cholesky directly on the upper factor:
    // C_jj = sqrt(A_jj − Σ_k<j |C_kj|²), C_ji = (A_ji − Σ_k<j conj(C_kj) C_ki) / C_jj.
    let mut c = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)].re;
        for k in 0..j {
            pivot -= c[(k, j)].norm_sqr();
        }
        if !(pivot > threshold) {
            return Err(Error::Factorization { index: j, pivot });
        }
        let d = pivot.sqrt();
        c[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[(j, i)];
            for k in 0..j {
                s -= c[(k, j)].conj() * c[(k, i)];
            }
            c[(j, i)] = s / d;
        }
    }
    let c_inv = upper_triangular_inverse(&c);
    Ok((c, c_inv))
}

fn upper_triangular_inverse(c: &DMatrix<C64>) -> DMatrix<C64> {
    let n = c.nrows();
    let mut inv = DMatrix::<C64>::zeros(n, n);
    for col in 0..n {
        inv[(col, col)] = C64::new(1.0, 0.0) / c[(col, col)];
        for i in (0..col).rev() {
            let mut s = C64::new(0.0, 0.0);
            for k in i + 1..=col {
                s += c[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = -s / c[(i, i)];
        }
    }
    inv
}

/// Matrix whose column `l` is `C⁻ᴴ a(θ_l)` for every angle of `grid`.
pub fn build_region_operator(
    geometry: &ArrayGeometry,
    c_inv: &DMatrix<C64>,
    grid: &AngularGrid,
) -> Result<DMatrix<C64>> {
    let n = geometry.len();
    if c_inv.nrows() != n || c_inv.ncols() != n {
        return Err(Error::Dimension(format!(
            "C⁻¹ is {}x{} for {n} elements",
            c_inv.nrows(),
            c_inv.ncols()
        )));
    }
    let c_inv_h = c_inv.adjoint();
    let mut op = DMatrix::<C64>::zeros(n, grid.len());
    for (l, &theta) in grid.angles().iter().enumerate() {
        let a = steering_vector(geometry, theta)?;
        op.set_column(l, &(&c_inv_h * a));
    }
    Ok(op)
}

/// Operators of one synthesis problem.
#[derive(Debug, Clone)]
pub struct GainOperators {
    pub a: DMatrix<C64>,
    pub c: DMatrix<C64>,
    pub c_inv: DMatrix<C64>,
    /// Mainlobe operator, one column per mainlobe sample.
    pub p: DMatrix<C64>,
    /// Sidelobe operator; zero columns when there is no sidelobe constraint.
    pub q: DMatrix<C64>,
}

impl GainOperators {
    pub fn build(
        geometry: &ArrayGeometry,
        mainlobe: &AngularGrid,
        sidelobe: &AngularGrid,
        quadrature_order: usize,
    ) -> Result<Self> {
        let a = build_total_power_matrix(geometry, quadrature_order)?;
        let (c, c_inv) = factorize(&a)?;
        let p = build_region_operator(geometry, &c_inv, mainlobe)?;
        let q = build_region_operator(geometry, &c_inv, sidelobe)?;
        Ok(Self { a, c, c_inv, p, q })
    }

    /// Assembles operators from explicit matrices (used by tests and by
    /// callers that whiten differently).
    pub fn from_parts(p: DMatrix<C64>, q: DMatrix<C64>) -> Result<Self> {
        let n = p.nrows();
        if q.nrows() != n {
            return Err(Error::Dimension(format!(
                "P has {n} rows but Q has {}",
                q.nrows()
            )));
        }
        let eye = DMatrix::<C64>::identity(n, n);
        Ok(Self {
            a: eye.clone(),
            c: eye.clone(),
            c_inv: eye,
            p,
            q,
        })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    /// Array weights `w = C⁻¹x`.
    pub fn weights_from_x(&self, x: &DVector<C64>) -> DVector<C64> {
        &self.c_inv * x
    }
}

/// `10·log10(G)`.
pub fn to_dbi(gain: f64) -> f64 {
    10.0 * gain.log10()
}

/// `G(θ) = 2|a(θ)ᴴw|² / (wᴴAw)` in dBi for every angle of `grid`.
pub fn power_gain_pattern(
    geometry: &ArrayGeometry,
    total_power: &DMatrix<C64>,
    w: &DVector<C64>,
    grid: &AngularGrid,
) -> Result<Vec<f64>> {
    if w.len() != geometry.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} elements",
            w.len(),
            geometry.len()
        )));
    }
    if w.iter().all(|v| *v == C64::new(0.0, 0.0)) {
        return Err(Error::domain("zero weight vector"));
    }
    let total = w.dotc(&(total_power * w)).re;
    grid.angles()
        .iter()
        .map(|&theta| {
            let a = steering_vector(geometry, theta)?;
            let field = a.dotc(w);
            Ok(to_dbi(2.0 * field.norm_sqr() / total))
        })
        .collect()
}
