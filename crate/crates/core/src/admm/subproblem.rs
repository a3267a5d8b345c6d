//! Piecewise-analytic minimizers of the `{g0, g}` and `{g0, g, h}` blocks.
//!
//! For fixed `g0` the optimal `g` (and `h`) are modulus clamps of the input
//! vectors, so the block cost is a 1-D piecewise quadratic in `g0`. The
//! moduli `|y|` (and `|z2|/√γ`) split `(0, ∞)` into subdomains on which the
//! clamp sets are fixed; each subdomain yields one clipped stationary point
//! and the cheapest candidate is returned.

use nalgebra::DVector;

use crate::{Error, Result, C64};

/// Result of a `{g0, g, h}` update.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate {
    /// Amplitude-domain minimum mainlobe gain, `g0 = √G0`.
    pub g0: f64,
    pub g: DVector<C64>,
    /// Sidelobe auxiliaries; empty without a sidelobe constraint.
    pub h: DVector<C64>,
    /// Block objective at the returned point.
    pub cost: f64,
}

/// Unit phasor of `z`, with the phase of zero taken as 0.
pub(crate) fn unit_phase(z: C64) -> C64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        C64::new(1.0, 0.0)
    }
}

fn check_finite(v: &DVector<C64>, name: &str) -> Result<()> {
    if v.iter().any(|z| !z.is_finite()) {
        return Err(Error::domain(format!("non-finite entry in {name}")));
    }
    Ok(())
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `−g0 + ‖y − g‖² / 2ρ`.
pub fn wosc_block_cost(y: &DVector<C64>, rho: f64, g0: f64, g: &DVector<C64>) -> f64 {
    -g0 + (y - g).norm_squared() / (2.0 * rho)
}

/// `−g0 + ‖z1 − g‖² / 2ρ1 + ‖z2 − h‖² / 2ρ2`.
pub fn wsc_block_cost(
    z1: &DVector<C64>,
    z2: &DVector<C64>,
    rho1: f64,
    rho2: f64,
    g0: f64,
    g: &DVector<C64>,
    h: &DVector<C64>,
) -> f64 {
    -g0 + (z1 - g).norm_squared() / (2.0 * rho1) + (z2 - h).norm_squared() / (2.0 * rho2)
}

fn raise_to(v: &DVector<C64>, g0: f64) -> DVector<C64> {
    v.map(|z| unit_phase(z) * z.norm().max(g0))
}

fn lower_to(v: &DVector<C64>, cap: f64) -> DVector<C64> {
    v.map(|z| unit_phase(z) * z.norm().min(cap))
}

fn sorted_moduli(v: &DVector<C64>) -> Vec<f64> {
    let mut m: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    m.sort_by(f64::total_cmp);
    m
}

/// Prefix sums of values and squares, `out[k]` covering the first `k` entries.
fn prefix_sums(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity(v.len() + 1);
    let mut q = Vec::with_capacity(v.len() + 1);
    s.push(0.0);
    q.push(0.0);
    for &x in v {
        s.push(s.last().unwrap() + x);
        q.push(q.last().unwrap() + x * x);
    }
    (s, q)
}

/// Minimizes `−g0 + ‖y − g‖²/2ρ` subject to `|g_l| ≥ g0 > 0`.
pub fn update_g_wosc(y: &DVector<C64>, rho: f64) -> Result<BlockUpdate> {
    if y.is_empty() {
        return Err(Error::domain("empty mainlobe vector"));
    }
    check_finite(y, "y")?;
    check_positive(rho, "rho")?;

    let s = sorted_moduli(y);
    let l = s.len();
    let (sum, sq) = prefix_sums(&s);

    // first subdomain (0, s_1]: nothing clamped, cost −g0 decreasing
    let mut best_g0 = s[0];
    let mut best_cost = -s[0];
    // subdomain k ∈ 1..=L: g0 ∈ [s_{k-1}, s_k], the k smallest are clamped
    for k in 1..=l {
        let lo = s[k - 1];
        let hi = if k < l { s[k] } else { f64::INFINITY };
        let kf = k as f64;
        let g0 = ((rho + sum[k]) / kf).clamp(lo, hi);
        let cost = -g0 + (kf * g0 * g0 - 2.0 * g0 * sum[k] + sq[k]) / (2.0 * rho);
        if cost < best_cost {
            best_cost = cost;
            best_g0 = g0;
        }
    }

    let g = raise_to(y, best_g0);
    let cost = wosc_block_cost(y, rho, best_g0, &g);
    Ok(BlockUpdate {
        g0: best_g0,
        g,
        h: DVector::zeros(0),
        cost,
    })
}

/// Minimizes `−g0 + ‖z1 − g‖²/2ρ1 + ‖z2 − h‖²/2ρ2` subject to `|g_l| ≥ g0`
/// and `|h_s| ≤ √γ·g0`.
pub fn update_gh_wsc(
    z1: &DVector<C64>,
    z2: &DVector<C64>,
    rho1: f64,
    rho2: f64,
    gamma: f64,
) -> Result<BlockUpdate> {
    if z2.is_empty() {
        return update_g_wosc(z1, rho1);
    }
    if z1.is_empty() {
        return Err(Error::domain("empty mainlobe vector"));
    }
    check_finite(z1, "z1")?;
    check_finite(z2, "z2")?;
    check_positive(rho1, "rho1")?;
    check_positive(rho2, "rho2")?;
    check_positive(gamma, "gamma")?;

    let sg = gamma.sqrt();
    let ml = sorted_moduli(z1);
    let sl = sorted_moduli(z2);
    let (ml_sum, ml_sq) = prefix_sums(&ml);
    let (sl_sum, sl_sq) = prefix_sums(&sl);
    let (l1, l2) = (ml.len(), sl.len());
    let (sl_total, sl_sq_total) = (sl_sum[l2], sl_sq[l2]);

    // merged ascending breakpoints; `true` marks a mainlobe entry
    let mut bps: Vec<(f64, bool)> = ml
        .iter()
        .map(|&m| (m, true))
        .chain(sl.iter().map(|&m| (m / sg, false)))
        .collect();
    bps.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best_g0 = f64::NAN;
    let mut best_cost = f64::INFINITY;
    // n_ml: mainlobe entries clamped up; n_sl_free: sidelobe entries below the cap
    let (mut n_ml, mut n_sl_free) = (0usize, 0usize);
    for k in 0..=bps.len() {
        let lo = if k == 0 { 0.0 } else { bps[k - 1].0 };
        let hi = bps.get(k).map_or(f64::INFINITY, |b| b.0);

        let s1 = ml_sum[n_ml];
        let q1 = ml_sq[n_ml];
        let n2 = l2 - n_sl_free;
        let s2 = sl_total - sl_sum[n_sl_free];
        let q2 = sl_sq_total - sl_sq[n_sl_free];

        let denom = rho2 * n_ml as f64 + rho1 * gamma * n2 as f64;
        let g0 = if denom > 0.0 {
            ((rho1 * rho2 + rho2 * s1 + rho1 * sg * s2) / denom).clamp(lo, hi)
        } else {
            hi
        };
        if g0.is_finite() {
            let cost = -g0
                + (n_ml as f64 * g0 * g0 - 2.0 * g0 * s1 + q1) / (2.0 * rho1)
                + (gamma * n2 as f64 * g0 * g0 - 2.0 * sg * g0 * s2 + q2) / (2.0 * rho2);
            if cost < best_cost {
                best_cost = cost;
                best_g0 = g0;
            }
        }

        if let Some(&(_, is_ml)) = bps.get(k) {
            if is_ml {
                n_ml += 1;
            } else {
                n_sl_free += 1;
            }
        }
    }
    debug_assert!(n_ml == l1);

    let g = raise_to(z1, best_g0);
    let h = lower_to(z2, sg * best_g0);
    let cost = wsc_block_cost(z1, z2, rho1, rho2, best_g0, &g, &h);
    Ok(BlockUpdate {
        g0: best_g0,
        g,
        h,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cvec(v: &[(f64, f64)]) -> DVector<C64> {
        DVector::from_iterator(v.len(), v.iter().map(|&(r, i)| C64::new(r, i)))
    }

    fn rvec(v: &[f64]) -> DVector<C64> {
        DVector::from_iterator(v.len(), v.iter().map(|&r| C64::new(r, 0.0)))
    }

    #[test]
    fn all_zero_input_clamps_everything() {
        let r = update_g_wosc(&rvec(&[0.0, 0.0, 0.0]), 1000.0).unwrap();
        assert!((r.g0 - 1000.0 / 3.0).abs() < 1e-12);
        for z in r.g.iter() {
            assert!((z - C64::new(r.g0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_element() {
        let r = update_g_wosc(&rvec(&[2.0]), 1.0).unwrap();
        assert!((r.g0 - 3.0).abs() < 1e-15);
        assert!((r.g[0].re - 3.0).abs() < 1e-15);
        assert!((r.cost + 2.5).abs() < 1e-15);
    }

    #[test]
    fn two_elements_middle_piece() {
        // calculus on g0 ∈ [1, 4]: −g0 + (g0 − 1)²/2 → g0 = 2, cost −1.5
        let r = update_g_wosc(&rvec(&[1.0, 4.0]), 1.0).unwrap();
        assert!((r.g0 - 2.0).abs() < 1e-15);
        assert!((r.g[0].re - 2.0).abs() < 1e-15);
        assert!((r.g[1].re - 4.0).abs() < 1e-15);
        assert!((r.cost + 1.5).abs() < 1e-15);
    }

    #[test]
    fn wsc_zero_input() {
        let r = update_gh_wsc(&rvec(&[0.0; 2]), &rvec(&[0.0; 5]), 1000.0, 1000.0, 0.01).unwrap();
        assert!((r.g0 - 500.0).abs() < 1e-12);
        assert!(r.g.iter().all(|z| (z.re - 500.0).abs() < 1e-12));
        assert!(r.h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn wsc_small_cases() {
        let r = update_gh_wsc(&rvec(&[2.0]), &rvec(&[1.0]), 1.0, 1.0, 1.0).unwrap();
        assert!((r.g0 - 3.0).abs() < 1e-14);
        assert!((r.g[0].re - 3.0).abs() < 1e-14);
        assert!((r.h[0].re - 1.0).abs() < 1e-14);

        let r = update_gh_wsc(&rvec(&[2.0]), &rvec(&[1.0]), 1.0, 1.0, 0.04).unwrap();
        assert!((r.g0 - 40.0 / 13.0).abs() < 1e-14);
        assert!((r.g[0].re - 40.0 / 13.0).abs() < 1e-14);
        assert!((r.h[0].re - 8.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn empty_sidelobe_delegates() {
        let z1 = cvec(&[(0.3, -1.0), (2.0, 0.5)]);
        let a = update_gh_wsc(&z1, &DVector::zeros(0), 7.0, 3.0, 0.1).unwrap();
        let b = update_g_wosc(&z1, 7.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(update_g_wosc(&DVector::zeros(0), 1.0).is_err());
        assert!(update_g_wosc(&rvec(&[f64::NAN]), 1.0).is_err());
        assert!(update_g_wosc(&rvec(&[1.0]), 0.0).is_err());
        assert!(update_gh_wsc(&rvec(&[1.0]), &rvec(&[1.0]), 1.0, 1.0, 0.0).is_err());
        assert!(update_gh_wsc(&rvec(&[1.0]), &rvec(&[f64::INFINITY]), 1.0, 1.0, 1.0).is_err());
    }

    fn arb_cvec(max_len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..=max_len)
    }

    proptest! {
        #[test]
        fn wsc_updates_are_feasible_and_phase_preserving(
            z1 in arb_cvec(12), z2 in arb_cvec(12),
            rho1 in 0.1..100.0f64, rho2 in 0.1..100.0f64, gamma in 1e-4..2.0f64,
        ) {
            let (z1, z2) = (cvec(&z1), cvec(&z2));
            let r = update_gh_wsc(&z1, &z2, rho1, rho2, gamma).unwrap();
            prop_assert!(r.g0 > 0.0);
            let cap = gamma.sqrt() * r.g0;
            for (g, z) in r.g.iter().zip(z1.iter()) {
                prop_assert!(g.norm() >= r.g0 - 1e-12);
                if z.norm() > 0.0 {
                    prop_assert!((unit_phase(*g) - unit_phase(*z)).norm() < 1e-12);
                }
            }
            for (h, z) in r.h.iter().zip(z2.iter()) {
                prop_assert!(h.norm() <= cap + 1e-12);
                if h.norm() > 0.0 {
                    prop_assert!((unit_phase(*h) - unit_phase(*z)).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn wosc_update_is_stationary(y in arb_cvec(12), rho in 0.1..100.0f64) {
            // the 1-D cost is convex; nearby g0 values must not be cheaper
            let y = cvec(&y);
            let r = update_g_wosc(&y, rho).unwrap();
            for dg in [-1e-4, 1e-4] {
                let g0 = r.g0 + dg;
                if g0 <= 0.0 { continue; }
                let g = raise_to(&y, g0);
                prop_assert!(wosc_block_cost(&y, rho, g0, &g) >= r.cost - 1e-12);
            }
        }
    }
}
