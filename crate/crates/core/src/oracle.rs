//! Brute-force references for certifying the engine at desk scale.
//!
//! Each oracle takes a different route from the code it checks: the block
//! minimizers are checked against a dense 1-D scan over `g0`, the sphere
//! solver against projected gradient descent from random starts, and the
//! secular bisection against a sign-change scan of `f1`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::admm::{
    secular_bisect, secular_bracket, solve_sphere_lsq, sphere_cost, update_g_wosc, update_gh_wsc,
    SecularSystem,
};
use crate::admm::sphere::DEFAULT_SECULAR_TOL;
use crate::{Error, Result, C64};

/// Input of a `{g0, g, h}` block problem.
#[derive(Debug, Clone, Serialize)]
pub struct BlockProblem {
    pub z1: Vec<(f64, f64)>,
    /// Empty for the mainlobe-only block.
    pub z2: Vec<(f64, f64)>,
    pub rho1: f64,
    pub rho2: f64,
    pub gamma: f64,
}

impl BlockProblem {
    pub fn wosc(y: &DVector<C64>, rho: f64) -> Self {
        Self {
            z1: y.iter().map(|z| (z.re, z.im)).collect(),
            z2: Vec::new(),
            rho1: rho,
            rho2: 1.0,
            gamma: 1.0,
        }
    }

    pub fn wsc(z1: &DVector<C64>, z2: &DVector<C64>, rho1: f64, rho2: f64, gamma: f64) -> Self {
        Self {
            z1: z1.iter().map(|z| (z.re, z.im)).collect(),
            z2: z2.iter().map(|z| (z.re, z.im)).collect(),
            rho1,
            rho2,
            gamma,
        }
    }

    pub fn z1_vec(&self) -> DVector<C64> {
        DVector::from_iterator(self.z1.len(), self.z1.iter().map(|&(r, i)| C64::new(r, i)))
    }

    pub fn z2_vec(&self) -> DVector<C64> {
        DVector::from_iterator(self.z2.len(), self.z2.iter().map(|&(r, i)| C64::new(r, i)))
    }

    /// Block cost with `g`, `h` set to their optimal clamps for this `g0`.
    pub fn cost_at(&self, g0: f64) -> f64 {
        let cap = self.gamma.sqrt() * g0;
        let ml: f64 = self
            .z1
            .iter()
            .map(|&(r, i)| {
                let m = r.hypot(i);
                if m < g0 {
                    (g0 - m) * (g0 - m)
                } else {
                    0.0
                }
            })
            .sum();
        let sl: f64 = self
            .z2
            .iter()
            .map(|&(r, i)| {
                let m = r.hypot(i);
                if m > cap {
                    (m - cap) * (m - cap)
                } else {
                    0.0
                }
            })
            .sum();
        -g0 + ml / (2.0 * self.rho1) + sl / (2.0 * self.rho2)
    }

    fn largest_breakpoint(&self) -> f64 {
        let sg = self.gamma.sqrt();
        self.z1
            .iter()
            .map(|&(r, i)| r.hypot(i))
            .chain(self.z2.iter().map(|&(r, i)| r.hypot(i) / sg))
            .fold(0.0, f64::max)
    }

    /// Upper bound on the optimal `g0`: past every breakpoint the slope is at
    /// least `−1 + L_ML·(g0 − max)/ρ1`.
    pub fn g0_upper_bound(&self) -> f64 {
        self.largest_breakpoint() + self.rho1 / self.z1.len() as f64
    }

    /// Runs the engine's block minimizer on this input, returning its cost.
    pub fn engine_cost(&self) -> Result<(f64, f64)> {
        let r = if self.z2.is_empty() {
            update_g_wosc(&self.z1_vec(), self.rho1)?
        } else {
            update_gh_wsc(&self.z1_vec(), &self.z2_vec(), self.rho1, self.rho2, self.gamma)?
        };
        Ok((r.g0, r.cost))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOracle {
    pub g0: f64,
    pub cost: f64,
    pub step: f64,
    pub g0_max: f64,
    /// `g0_max` was below the bound on the minimizer and was raised.
    pub widened: bool,
}

/// Dense scan of the block cost over `g0 ∈ (0, g0_max]`, refined by ternary
/// search around the best sample.
pub fn oracle_g0_grid(problem: &BlockProblem, g0_max: f64, step: f64) -> Result<GridOracle> {
    if problem.z1.is_empty() {
        return Err(Error::domain("empty mainlobe vector"));
    }
    if !(step > 0.0 && step <= 1e-3 * g0_max) {
        return Err(Error::domain(format!(
            "grid step {step} must be in (0, 1e-3·g0_max = {}]",
            1e-3 * g0_max
        )));
    }
    let bound = problem.g0_upper_bound();
    let (g0_max, widened) = if g0_max < bound {
        (1.05 * bound + step, true)
    } else {
        (g0_max, false)
    };
    let n = (g0_max / step).ceil() as usize;
    let mut best = (step, problem.cost_at(step));
    for k in 2..=n {
        let g0 = k as f64 * step;
        let c = problem.cost_at(g0);
        if c < best.1 {
            best = (g0, c);
        }
    }
    // the clamped cost is convex in g0, so ternary search on the bracketing
    // cells converges to the minimizer
    let (mut lo, mut hi) = ((best.0 - step).max(0.0), best.0 + step);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if problem.cost_at(m1) <= problem.cost_at(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let refined = 0.5 * (lo + hi);
    let refined_cost = problem.cost_at(refined);
    let (g0, cost) = if refined_cost <= best.1 && refined > 0.0 {
        (refined, refined_cost)
    } else {
        best
    };
    Ok(GridOracle {
        g0,
        cost,
        step,
        g0_max,
        widened,
    })
}

/// Best of `n_restarts` projected-gradient descents of `‖Mᵀx − d‖²` on the
/// unit sphere, each from a uniformly random start.
pub fn oracle_sphere<R: Rng>(
    m: &DMatrix<f64>,
    d: &DVector<f64>,
    n_restarts: usize,
    rng: &mut R,
) -> (DVector<f64>, f64) {
    let dim = m.nrows();
    let gram = m * m.transpose();
    let b = m * d;
    // spectral norm by power iteration, padded for safety
    let mut v = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut lmax = 0.0;
    for _ in 0..200 {
        let w = &gram * &v;
        lmax = w.norm();
        if lmax == 0.0 {
            break;
        }
        v = w.unscale(lmax);
    }
    let lr = 1.0 / (2.0 * (1.05 * lmax + 1e-12));

    let mut best: Option<(DVector<f64>, f64)> = None;
    for _ in 0..n_restarts.max(1) {
        let mut x = random_unit(dim, rng);
        for _ in 0..200_000 {
            let grad = (&gram * &x - &b).scale(2.0);
            let mut next = &x - grad.scale(lr);
            let nn = next.norm();
            if nn == 0.0 {
                break;
            }
            next.unscale_mut(nn);
            let moved = (&next - &x).norm();
            x = next;
            if moved < 1e-10 {
                break;
            }
        }
        let c = sphere_cost(m, d, &x);
        if best.as_ref().map_or(true, |(_, bc)| c < *bc) {
            best = Some((x, c));
        }
    }
    best.unwrap()
}

fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        // Box–Muller normal samples give a uniform direction
        let v = DVector::from_fn(dim, |_, _| {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        });
        let n = v.norm();
        if n > 1e-12 {
            return v.unscale(n);
        }
    }
}

/// All real roots of `f1(ν) = Σ (βₙ/(ν − λₙ))² − 1` visible on a sampling
/// grid of spacing `step` (capped at `1e-5` of the scanned width), each
/// refined by bisection. Ascending.
pub fn oracle_secular_scan(lambdas: &[f64], beta: &[f64], step: f64) -> Vec<f64> {
    let m = lambdas.len() as f64;
    let bmax = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let lmin = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = lmin - m.sqrt() * bmax - 1.0;
    let hi = lmax + m.sqrt() * bmax + 1.0;
    let step = step.min(1e-5 * (hi - lo));
    let f = |nu: f64| {
        let v: f64 = lambdas
            .iter()
            .zip(beta)
            .map(|(l, b)| {
                let r = b / (nu - l);
                r * r
            })
            .sum::<f64>()
            - 1.0;
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let n = ((hi - lo) / step).ceil() as usize;
    let mut roots = Vec::new();
    let mut prev = (lo, f(lo));
    for k in 1..=n {
        let x = lo + k as f64 * step;
        let fx = f(x);
        if (prev.1 < 0.0) != (fx < 0.0) {
            let (mut a, mut b) = (prev.0, x);
            let neg_left = prev.1 < 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if (f(mid) < 0.0) == neg_left {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (x, fx);
    }
    roots
}

/// Outcome of one oracle comparison, kept for replay.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub kind: &'static str,
    pub oracle_cost: f64,
    pub engine_cost: f64,
    /// `engine_cost − oracle_cost`.
    pub gap: f64,
    pub samples_or_gridstep: String,
    pub passed: bool,
    pub inputs: serde_json::Value,
}

/// Writes reports as JSON lines.
pub fn write_jsonl<W: Write>(reports: &[OracleReport], mut out: W) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Tolerance on engine-minus-oracle cost gaps.
pub const COST_TOL: f64 = 1e-6;

/// Random block instance with `L_ML ≤ 12` and, when `with_sidelobes`,
/// `1 ≤ L_SL ≤ 12`. Moduli and penalties span several decades.
pub fn random_block_problem<R: Rng>(rng: &mut R, with_sidelobes: bool) -> BlockProblem {
    let log_uniform = |rng: &mut R, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo..hi));
    let cvec = |rng: &mut R, len: usize| -> Vec<(f64, f64)> {
        let scale = log_uniform(rng, -2.0, 2.0);
        (0..len)
            .map(|_| {
                let m = scale * rng.gen_range(0.0..1.0f64);
                let ph = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                (m * ph.cos(), m * ph.sin())
            })
            .collect()
    };
    let l1 = rng.gen_range(1..=12);
    let z1 = cvec(rng, l1);
    let z2 = if with_sidelobes {
        let l2 = rng.gen_range(1..=12);
        cvec(rng, l2)
    } else {
        Vec::new()
    };
    BlockProblem {
        z1,
        z2,
        rho1: log_uniform(rng, -1.0, 3.5),
        rho2: log_uniform(rng, -1.0, 3.5),
        gamma: log_uniform(rng, -4.0, 0.3),
    }
}

/// Random sphere instance with `dim ≤ max_dim` rows.
pub fn random_sphere_problem<R: Rng>(rng: &mut R, max_dim: usize) -> (DMatrix<f64>, DVector<f64>) {
    let dim = rng.gen_range(1..=max_dim);
    let cols = rng.gen_range(1..=max_dim + 4);
    let m = DMatrix::from_fn(dim, cols, |_, _| rng.gen_range(-1.0..1.0));
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    let d = DVector::from_fn(cols, |_, _| scale * rng.gen_range(-1.0..1.0));
    (m, d)
}

/// Random secular system: ascending nonnegative `λ`, nonzero `β`.
pub fn random_secular_system<R: Rng>(rng: &mut R, max_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let dim = rng.gen_range(1..=max_dim);
    let mut lambdas: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect();
    lambdas.sort_by(f64::total_cmp);
    let beta = (0..dim)
        .map(|_| {
            let b: f64 = rng.gen_range(0.05..3.0);
            if rng.gen() {
                b
            } else {
                -b
            }
        })
        .collect();
    (lambdas, beta)
}

/// Compares one block problem against the grid oracle.
pub fn check_block(problem: &BlockProblem) -> Result<OracleReport> {
    let g0_max = problem.g0_upper_bound() * 1.1 + 1e-9;
    let oracle = oracle_g0_grid(problem, g0_max, 1e-3 * g0_max)?;
    let (_, engine_cost) = problem.engine_cost()?;
    let gap = engine_cost - oracle.cost;
    Ok(OracleReport {
        kind: if problem.z2.is_empty() { "update_g_wosc" } else { "update_gh_wsc" },
        oracle_cost: oracle.cost,
        engine_cost,
        gap,
        samples_or_gridstep: format!("step={:e} g0_max={:e}", oracle.step, oracle.g0_max),
        passed: gap <= COST_TOL,
        inputs: serde_json::to_value(problem).unwrap_or_default(),
    })
}

/// Compares the sphere solver against the multi-restart oracle.
pub fn check_sphere<R: Rng>(
    m: &DMatrix<f64>,
    d: &DVector<f64>,
    n_restarts: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    let x = solve_sphere_lsq(m, d)?;
    let engine_cost = sphere_cost(m, d, &x);
    let (_, oracle_cost) = oracle_sphere(m, d, n_restarts, rng);
    let gap = engine_cost - oracle_cost;
    let unit = (x.norm() - 1.0).abs() <= 1e-9;
    Ok(OracleReport {
        kind: "solve_sphere_lsq",
        oracle_cost,
        engine_cost,
        gap,
        samples_or_gridstep: format!("restarts={n_restarts}"),
        passed: gap <= COST_TOL && unit,
        inputs: serde_json::json!({
            "m": m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
            "d": d.iter().copied().collect::<Vec<_>>(),
        }),
    })
}

/// Certifies the secular bisection: small residual, inside the bracket and
/// no cheaper root on a dense scan.
pub fn check_secular(lambdas: &[f64], beta: &[f64], tol: f64) -> Result<OracleReport> {
    let dim = lambdas.len();
    let sys = SecularSystem {
        lambdas: DVector::from_column_slice(lambdas),
        u: DMatrix::identity(dim, dim),
        beta: DVector::from_column_slice(beta),
    };
    let nu = secular_bisect(&sys, tol)?;
    let (lo, hi) = secular_bracket(lambdas, beta).ok_or_else(|| Error::domain("beta = 0"))?;
    let slack = 1e-12 * (1.0 + nu.abs());
    let in_bracket = nu >= lo - slack && nu <= hi + slack;
    let residual = sys.f1(nu).abs();
    let roots = oracle_secular_scan(lambdas, beta, f64::INFINITY);
    let engine_cost = sys.stationary_cost(nu);
    let oracle_cost = roots
        .iter()
        .map(|&r| sys.stationary_cost(r))
        .fold(f64::INFINITY, f64::min);
    let below_all = roots.iter().all(|&r| nu <= r + 1e-8 * (1.0 + r.abs()));
    let gap = engine_cost - oracle_cost;
    Ok(OracleReport {
        kind: "secular_bisect",
        oracle_cost,
        engine_cost,
        gap,
        samples_or_gridstep: format!("roots={} residual={residual:e}", roots.len()),
        passed: residual <= 1e-10
            && in_bracket
            && below_all
            && gap <= 1e-9 * (1.0 + oracle_cost.abs()),
        inputs: serde_json::json!({ "lambdas": lambdas, "beta": beta, "nu": nu }),
    })
}

/// Instance counts for [`validation_suite`].
#[derive(Debug, Clone, Copy)]
pub struct SuiteSizes {
    pub blocks: usize,
    pub spheres: usize,
    pub seculars: usize,
    pub sphere_restarts: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            blocks: 10_000,
            spheres: 1_000,
            seculars: 1_000,
            sphere_restarts: 24,
        }
    }
}

/// Seeded random instances of every subproblem, each checked against its
/// oracle. Block instances alternate between the two block kinds.
pub fn validation_suite(seed: u64, sizes: SuiteSizes) -> Result<Vec<OracleReport>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(sizes.blocks + sizes.spheres + sizes.seculars);
    for k in 0..sizes.blocks {
        let p = random_block_problem(&mut rng, k % 2 == 1);
        reports.push(check_block(&p)?);
    }
    for _ in 0..sizes.spheres {
        let (m, d) = random_sphere_problem(&mut rng, 12);
        reports.push(check_sphere(&m, &d, sizes.sphere_restarts, &mut rng)?);
    }
    for _ in 0..sizes.seculars {
        let (l, b) = random_secular_system(&mut rng, 12);
        reports.push(check_secular(&l, &b, DEFAULT_SECULAR_TOL)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rvec(v: &[f64]) -> DVector<C64> {
        DVector::from_iterator(v.len(), v.iter().map(|&r| C64::new(r, 0.0)))
    }

    #[test]
    fn grid_oracle_examples() {
        let p = BlockProblem::wosc(&rvec(&[2.0]), 1.0);
        let o = oracle_g0_grid(&p, 8.0, 1e-4).unwrap();
        assert!((o.g0 - 3.0).abs() <= 1e-4);

        // calculus on the middle piece: d/dg0 [−g0 + (g0 − 1)²/2] = 0 at 2
        let p = BlockProblem::wosc(&rvec(&[1.0, 4.0]), 1.0);
        let o = oracle_g0_grid(&p, 8.0, 1e-4).unwrap();
        assert!((o.g0 - 2.0).abs() <= 1e-4);
        assert!((o.cost + 1.5).abs() <= 1e-8);

        // −g0 + (g0 − 2)²/2 + (1 − 0.2 g0)²/2 is stationary at 40/13
        let p = BlockProblem::wsc(&rvec(&[2.0]), &rvec(&[1.0]), 1.0, 1.0, 0.04);
        let o = oracle_g0_grid(&p, 8.0, 1e-4).unwrap();
        assert!((o.g0 - 40.0 / 13.0).abs() <= 1e-4);
    }

    #[test]
    fn grid_oracle_widens_and_validates_step() {
        let p = BlockProblem::wosc(&rvec(&[0.0, 0.0, 0.0]), 1000.0);
        let o = oracle_g0_grid(&p, 1.0, 1e-3).unwrap();
        assert!(o.widened);
        assert!((o.g0 - 1000.0 / 3.0).abs() < 1e-3);
        assert!(oracle_g0_grid(&p, 1.0, 0.1).is_err());
    }

    #[test]
    fn grid_oracle_is_self_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let sl: bool = rng.gen();
            let p = random_block_problem(&mut rng, sl);
            let g0_max = p.g0_upper_bound() * 1.1;
            let coarse = oracle_g0_grid(&p, g0_max, 1e-3 * g0_max).unwrap();
            let fine = oracle_g0_grid(&p, g0_max, 1e-4 * g0_max).unwrap();
            assert!((coarse.cost - fine.cost).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_oracle_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, c) = oracle_sphere(
            &DMatrix::identity(2, 2),
            &DVector::from_vec(vec![3.0, 4.0]),
            8,
            &mut rng,
        );
        assert!((x[0] - 0.6).abs() < 1e-8 && (x[1] - 0.8).abs() < 1e-8);
        assert!((c - 16.0).abs() < 1e-8);

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let d = DVector::from_vec(vec![1.0, 1.0]);
        let (_, c) = oracle_sphere(&m, &d, 16, &mut rng);
        let x = solve_sphere_lsq(&m, &d).unwrap();
        assert!((sphere_cost(&m, &d, &x) - c).abs() < 1e-6);

        let (_, c) = oracle_sphere(&m, &DVector::zeros(2), 16, &mut rng);
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn secular_scan_examples() {
        let r = oracle_secular_scan(&[0.0], &[2.0], 1e-3);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-9 && (r[1] - 2.0).abs() < 1e-9);

        let r = oracle_secular_scan(&[1.0, 1.0], &[1.0, 1.0], 1e-3);
        assert_eq!(r.len(), 2);
        assert!((r[0] - (1.0 - 2f64.sqrt())).abs() < 1e-9);
        assert!((r[1] - (1.0 + 2f64.sqrt())).abs() < 1e-9);

        let r = oracle_secular_scan(&[1.0, 4.0], &[1.0, 2.0], 1e-6);
        assert!((r[0] + 0.142).abs() < 1e-3);
        let report = check_secular(&[1.0, 4.0], &[1.0, 2.0], 1e-12).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn reports_serialize_as_json_lines() {
        let p = BlockProblem::wosc(&rvec(&[1.0, 4.0]), 1.0);
        let r = check_block(&p).unwrap();
        assert!(r.passed);
        let mut buf = Vec::new();
        write_jsonl(&[r.clone(), r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["kind"], "update_g_wosc");
    }
}
