use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sphere::{realify_mat, realify_vec, solve_from_eigen, sorted_eigen, DEFAULT_SECULAR_TOL};
use super::subproblem::{update_g_wosc, update_gh_wsc};
use crate::operators::GainOperators;
use crate::{Error, Result, C64};

/// Penalty schedule and stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Initial mainlobe penalty ρ (ρ₁).
    pub rho_init: f64,
    /// Initial sidelobe penalty ρ₂.
    pub rho2_init: f64,
    /// Multiplicative decay applied to the penalties after every iteration.
    pub rho_decay: f64,
    /// Penalties never decay below this value.
    pub rho_floor: f64,
    pub iter_max: usize,
    /// Stop once the ∞-norm residuals are at or below this value.
    pub residual_tol: f64,
    pub secular_tol: f64,
    /// Sidelobe power ratio γ (linear); only used with a sidelobe region.
    pub gamma: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho_init: 1000.0,
            rho2_init: 1000.0,
            rho_decay: 0.99,
            rho_floor: 1.0,
            iter_max: 2000,
            residual_tol: 1e-4,
            secular_tol: DEFAULT_SECULAR_TOL,
            gamma: 0.01,
        }
    }
}

/// `γ = 10^(dSLL/10)`.
pub fn gamma_from_db(dsll_db: f64) -> f64 {
    10f64.powf(dsll_db / 10.0)
}

impl AdmmConfig {
    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho_init = rho;
        self.rho2_init = rho;
        self
    }

    pub fn with_dsll_db(mut self, dsll_db: f64) -> Self {
        self.gamma = gamma_from_db(dsll_db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, rho) in [("rho_init", self.rho_init), ("rho2_init", self.rho2_init)] {
            if !(rho > 1.0 && rho < 10000.0) {
                return bad(format!("{name} = {rho} outside (1, 10000)"));
            }
        }
        if !(self.rho_decay > 0.0 && self.rho_decay <= 1.0) {
            return bad(format!("rho_decay = {} outside (0, 1]", self.rho_decay));
        }
        if !(self.rho_floor > 0.0) {
            return bad(format!("rho_floor = {} must be positive", self.rho_floor));
        }
        if self.iter_max < 1 {
            return bad("iter_max must be at least 1".into());
        }
        if !(self.residual_tol > 0.0) {
            return bad(format!("residual_tol = {} must be positive", self.residual_tol));
        }
        if !(self.secular_tol > 0.0) {
            return bad(format!("secular_tol = {} must be positive", self.secular_tol));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub g0_amp: f64,
    pub g0_dbi: f64,
    pub residual_ml: f64,
    pub residual_sl: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// `‖u₁^(k+1) − u₁^(k)‖∞`.
    pub dual_inc_1: f64,
    pub dual_inc_2: f64,
}

/// Iterates, duals and penalties of one run.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: DVector<C64>,
    pub g0: f64,
    pub g: DVector<C64>,
    pub h: DVector<C64>,
    pub u1: DVector<C64>,
    pub u2: DVector<C64>,
    pub rho1: f64,
    pub rho2: f64,
    pub iteration: usize,
    pub residual_ml: f64,
    pub residual_sl: f64,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

impl AdmmState {
    /// Cold start: `x = 0`, `u = 0`.
    pub fn new(n: usize, l_ml: usize, l_sl: usize, rho1: f64, rho2: f64) -> Self {
        Self {
            x: DVector::zeros(n),
            g0: 0.0,
            g: DVector::zeros(l_ml),
            h: DVector::zeros(l_sl),
            u1: DVector::zeros(l_ml),
            u2: DVector::zeros(l_sl),
            rho1,
            rho2,
            iteration: 0,
            residual_ml: f64::INFINITY,
            residual_sl: if l_sl == 0 { 0.0 } else { f64::INFINITY },
            converged: false,
            history: Vec::new(),
        }
    }

    /// `G0 = 2·g0²` in dBi.
    pub fn g0_dbi(&self) -> f64 {
        10.0 * (2.0 * self.g0 * self.g0).log10()
    }

    /// Dual ascent `u₁ += (Pᴴx − g)/ρ₁`, `u₂ += (Qᴴx − h)/ρ₂`; refreshes the
    /// residuals and returns the ∞-norm dual increments.
    pub fn update_duals(&mut self, p: &DMatrix<C64>, q: &DMatrix<C64>) -> (f64, f64) {
        let r1 = p.ad_mul(&self.x) - &self.g;
        self.residual_ml = inf_norm(&r1);
        self.u1 += r1.unscale(self.rho1);
        let inc1 = self.residual_ml / self.rho1;

        let (mut inc2, mut res2) = (0.0, 0.0);
        if q.ncols() > 0 {
            let r2 = q.ad_mul(&self.x) - &self.h;
            res2 = inf_norm(&r2);
            self.u2 += r2.unscale(self.rho2);
            inc2 = res2 / self.rho2;
        }
        self.residual_sl = res2;
        (inc1, inc2)
    }
}

fn inf_norm(v: &DVector<C64>) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Sphere solver for `min ‖Pᴴx − d1‖² + r‖Qᴴx − d2‖²` with the Gram
/// eigendecomposition cached per weight ratio `r = ρ₁/ρ₂`.
struct XUpdate {
    gram_p: DMatrix<f64>,
    gram_q: Option<DMatrix<f64>>,
    ratio: f64,
    lambdas: DVector<f64>,
    u: DMatrix<f64>,
}

impl XUpdate {
    fn new(p: &DMatrix<C64>, q: &DMatrix<C64>) -> Self {
        let gram_p = realify_mat(&(p * p.adjoint()));
        let gram_q = (q.ncols() > 0).then(|| realify_mat(&(q * q.adjoint())));
        let (lambdas, u) = sorted_eigen(&gram_p);
        Self {
            gram_p,
            gram_q,
            ratio: 0.0,
            lambdas,
            u,
        }
    }

    fn refresh(&mut self, ratio: f64) {
        let Some(gq) = &self.gram_q else { return };
        if (ratio - self.ratio).abs() <= 1e-14 * ratio {
            return;
        }
        let (lambdas, u) = sorted_eigen(&(&self.gram_p + gq.scale(ratio)));
        self.lambdas = lambdas;
        self.u = u;
        self.ratio = ratio;
    }

    fn solve(
        &mut self,
        p: &DMatrix<C64>,
        d1: &DVector<C64>,
        q: &DMatrix<C64>,
        d2: &DVector<C64>,
        ratio: f64,
        tol: f64,
    ) -> Result<DVector<C64>> {
        self.refresh(ratio);
        let mut b = p * d1;
        if q.ncols() > 0 {
            b += (q * d2).scale(ratio);
        }
        let beta = self.u.tr_mul(&realify_vec(&b));
        let xt = solve_from_eigen(&self.lambdas, &self.u, &beta, tol)?;
        let n = xt.len() / 2;
        Ok(DVector::from_fn(n, |i, _| C64::new(xt[i], xt[i + n])))
    }
}

/// Mainlobe-only loop: maximize the minimum mainlobe gain.
pub fn run_wosc(ops: &GainOperators, cfg: &AdmmConfig) -> Result<AdmmState> {
    run(ops, cfg, false)
}

/// Mainlobe loop with the peak sidelobe constraint `|Qᴴx| ≤ √γ·g0`.
///
/// With an empty sidelobe operator this is exactly [`run_wosc`].
pub fn run_wsc(ops: &GainOperators, cfg: &AdmmConfig) -> Result<AdmmState> {
    run(ops, cfg, true)
}

fn run(ops: &GainOperators, cfg: &AdmmConfig, with_sidelobes: bool) -> Result<AdmmState> {
    cfg.validate()?;
    let p = &ops.p;
    let empty = DMatrix::<C64>::zeros(p.nrows(), 0);
    let q = if with_sidelobes { &ops.q } else { &empty };
    if p.ncols() == 0 {
        return Err(Error::domain("mainlobe operator has no columns"));
    }
    if q.nrows() != p.nrows() {
        return Err(Error::Dimension(format!(
            "P has {} rows but Q has {}",
            p.nrows(),
            q.nrows()
        )));
    }
    let wsc = q.ncols() > 0;
    let rho2_init = if wsc { cfg.rho2_init } else { 0.0 };
    let mut st = AdmmState::new(p.nrows(), p.ncols(), q.ncols(), cfg.rho_init, rho2_init);
    if p.nrows() == 1 {
        return Ok(single_element(p, q, cfg, st));
    }
    let mut xu = XUpdate::new(p, q);
    let at = |k: usize| move |e: Error| Error::AtIteration {
        iteration: k,
        source: Box::new(e),
    };

    while st.iteration < cfg.iter_max {
        let k = st.iteration;
        let z1 = p.ad_mul(&st.x) + st.u1.scale(st.rho1);
        let block = if wsc {
            let z2 = q.ad_mul(&st.x) + st.u2.scale(st.rho2);
            update_gh_wsc(&z1, &z2, st.rho1, st.rho2, cfg.gamma).map_err(at(k))?
        } else {
            update_g_wosc(&z1, st.rho1).map_err(at(k))?
        };
        st.g0 = block.g0;
        st.g = block.g;
        st.h = block.h;

        let d1 = &st.g - st.u1.scale(st.rho1);
        let d2 = &st.h - st.u2.scale(st.rho2);
        let ratio = if wsc { st.rho1 / st.rho2 } else { 0.0 };
        st.x = xu
            .solve(p, &d1, q, &d2, ratio, cfg.secular_tol)
            .map_err(at(k))?;

        let (inc1, inc2) = st.update_duals(p, q);
        st.iteration += 1;
        st.history.push(IterationRecord {
            iter: st.iteration,
            g0_amp: st.g0,
            g0_dbi: st.g0_dbi(),
            residual_ml: st.residual_ml,
            residual_sl: st.residual_sl,
            rho1: st.rho1,
            rho2: st.rho2,
            dual_inc_1: inc1,
            dual_inc_2: inc2,
        });

        if st.residual_ml <= cfg.residual_tol && st.residual_sl <= cfg.residual_tol {
            st.converged = true;
            break;
        }
        st.rho1 = (st.rho1 * cfg.rho_decay).max(cfg.rho_floor.min(cfg.rho_init));
        if wsc {
            st.rho2 = (st.rho2 * cfg.rho_decay).max(cfg.rho_floor.min(cfg.rho2_init));
        }
    }
    Ok(st)
}

/// With one element every unit `x` gives the same `|Pᴴx|`, so the optimum is
/// read off directly in a single sweep. The penalty iteration would not get
/// there: its fixed point needs `ρ < |Pᴴx|` on a lone mainlobe sample.
fn single_element(
    p: &DMatrix<C64>,
    q: &DMatrix<C64>,
    cfg: &AdmmConfig,
    mut st: AdmmState,
) -> AdmmState {
    st.x = DVector::from_element(1, C64::new(1.0, 0.0));
    st.g = p.ad_mul(&st.x);
    st.g0 = st.g.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let cap = cfg.gamma.sqrt() * st.g0;
    let qx = q.ad_mul(&st.x);
    st.h = qx.map(|z| if z.norm() > cap { z.unscale(z.norm()).scale(cap) } else { z });
    st.residual_ml = 0.0;
    st.residual_sl = inf_norm(&(qx - &st.h));
    st.iteration = 1;
    st.converged = st.residual_sl <= cfg.residual_tol;
    st.history.push(IterationRecord {
        iter: 1,
        g0_amp: st.g0,
        g0_dbi: st.g0_dbi(),
        residual_ml: st.residual_ml,
        residual_sl: st.residual_sl,
        rho1: st.rho1,
        rho2: st.rho2,
        dual_inc_1: 0.0,
        dual_inc_2: 0.0,
    });
    st
}
