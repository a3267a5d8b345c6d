//! Problem assembly, algorithm dispatch, metrics and scan sweeps.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{run_wosc, run_wsc, AdmmConfig, IterationRecord};
use crate::array::{AngularGrid, ArrayGeometry};
use crate::operators::{default_quadrature_order, power_gain_pattern, to_dbi, GainOperators};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Mainlobe only.
    Wosc,
    /// Mainlobe with a peak sidelobe constraint.
    Wsc,
}

/// Mainlobe and sidelobe sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Regions {
    pub mainlobe: AngularGrid,
    pub sidelobe: AngularGrid,
}

/// Mainlobe `[θc − Θbw/2, θc + Θbw/2]` and the sidelobe region outside it,
/// separated by `guard_deg` on each side, all sampled at `resolution_deg`.
///
/// Sidelobe samples start exactly at the guard edges and run outwards to
/// ±90°.
pub fn assemble_regions(
    theta_c_deg: f64,
    beamwidth_deg: f64,
    guard_deg: f64,
    resolution_deg: f64,
) -> Result<Regions> {
    if !(beamwidth_deg >= 0.0 && beamwidth_deg.is_finite()) {
        return Err(Error::domain(format!("beamwidth {beamwidth_deg} deg must be >= 0")));
    }
    if !(guard_deg >= 0.0 && guard_deg.is_finite()) {
        return Err(Error::domain(format!("guard {guard_deg} deg must be >= 0")));
    }
    if !(resolution_deg > 0.0 && resolution_deg.is_finite()) {
        return Err(Error::domain(format!(
            "resolution {resolution_deg} deg must be positive"
        )));
    }
    let lo = theta_c_deg - beamwidth_deg / 2.0;
    let hi = theta_c_deg + beamwidth_deg / 2.0;
    if !(lo >= -90.0 - 1e-9 && hi <= 90.0 + 1e-9) {
        return Err(Error::domain(format!(
            "mainlobe [{lo}, {hi}] deg is clipped by the visible range"
        )));
    }
    let mainlobe = AngularGrid::uniform(lo, hi, resolution_deg)?;
    let left_end = lo - guard_deg;
    let right_start = hi + guard_deg;
    let left = if left_end >= -90.0 {
        AngularGrid::uniform_from_end(-90.0, left_end, resolution_deg)?
    } else {
        AngularGrid::empty(resolution_deg)
    };
    let right = if right_start <= 90.0 {
        AngularGrid::uniform(right_start, 90.0, resolution_deg)?
    } else {
        AngularGrid::empty(resolution_deg)
    };
    let sidelobe = AngularGrid::from_segments(&[left, right])?;
    Ok(Regions { mainlobe, sidelobe })
}

/// One synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub geometry: ArrayGeometry,
    pub beam_center_deg: f64,
    pub beamwidth_deg: f64,
    pub resolution_deg: f64,
    pub guard_deg: f64,
    /// Desired peak sidelobe level relative to the mainlobe minimum; `None`
    /// runs without the sidelobe constraint.
    pub dsll_db: Option<f64>,
    pub admm: AdmmConfig,
    /// Gauss–Legendre order for patterned arrays; defaults to `4N + 64`.
    pub quadrature_order: Option<usize>,
}

impl SynthesisProblem {
    /// Problem with the default grid (0.5°), guard band (3°) and schedule.
    pub fn new(geometry: ArrayGeometry, beam_center_deg: f64, beamwidth_deg: f64) -> Self {
        Self {
            geometry,
            beam_center_deg,
            beamwidth_deg,
            resolution_deg: 0.5,
            guard_deg: 3.0,
            dsll_db: None,
            admm: AdmmConfig::default(),
            quadrature_order: None,
        }
    }

    /// Enables the sidelobe constraint and sets `γ` accordingly.
    pub fn with_dsll_db(mut self, dsll_db: f64) -> Self {
        self.dsll_db = Some(dsll_db);
        self.admm = self.admm.with_dsll_db(dsll_db);
        self
    }

    pub fn algorithm(&self) -> Algorithm {
        if self.dsll_db.is_some() {
            Algorithm::Wsc
        } else {
            Algorithm::Wosc
        }
    }

    pub fn regions(&self) -> Result<Regions> {
        assemble_regions(
            self.beam_center_deg,
            self.beamwidth_deg,
            self.guard_deg,
            self.resolution_deg,
        )
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
            .unwrap_or_else(|| default_quadrature_order(self.geometry.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Minimum mainlobe gain, dBi.
    pub g0_dbi: f64,
    /// Peak sidelobe gain minus minimum mainlobe gain, dB.
    pub osll_db: f64,
    /// Mainlobe max minus min, dB.
    pub ripple_db: f64,
}

/// Metrics from gains (dBi) sampled on the mainlobe and sidelobe regions.
pub fn compute_metrics(mainlobe_dbi: &[f64], sidelobe_dbi: &[f64]) -> Result<Metrics> {
    if mainlobe_dbi.is_empty() {
        return Err(Error::domain("empty mainlobe region"));
    }
    if sidelobe_dbi.is_empty() {
        return Err(Error::domain("empty sidelobe region"));
    }
    let ml_min = mainlobe_dbi.iter().copied().fold(f64::INFINITY, f64::min);
    let ml_max = mainlobe_dbi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sl_max = sidelobe_dbi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Metrics {
        g0_dbi: ml_min,
        osll_db: sl_max - ml_min,
        ripple_db: ml_max - ml_min,
    })
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub algorithm: Algorithm,
    /// Weights acting on the efficiency-scaled elements, `w = C⁻¹x`.
    pub weights_effective: DVector<C64>,
    /// Excitations `w_eff ⊘ √η`.
    pub weights_physical: DVector<C64>,
    pub metrics: Metrics,
    /// `10·log10(2·g0²)` from the final ADMM state.
    pub g0_state_dbi: f64,
    /// `(θ, dBi)` over `[-90, 90]` at the problem resolution.
    pub gain_pattern: Vec<(f64, f64)>,
    pub iterations: usize,
    pub converged: bool,
    pub residual_ml: f64,
    pub residual_sl: f64,
    pub history: Vec<IterationRecord>,
}

impl SynthesisResult {
    pub fn g0_dbi(&self) -> f64 {
        self.metrics.g0_dbi
    }

    pub fn osll_db(&self) -> f64 {
        self.metrics.osll_db
    }
}

/// Runs the problem. Hitting `iter_max` is reported through `converged`,
/// not as an error.
pub fn synthesize(problem: &SynthesisProblem) -> Result<SynthesisResult> {
    let regions = problem.regions()?;
    let algorithm = problem.algorithm();
    let geometry = &problem.geometry;
    let constrained = match algorithm {
        Algorithm::Wsc => regions.sidelobe.clone(),
        Algorithm::Wosc => AngularGrid::empty(problem.resolution_deg),
    };
    let ops = GainOperators::build(
        geometry,
        &regions.mainlobe,
        &constrained,
        problem.quadrature_order(),
    )?;
    let state = match algorithm {
        Algorithm::Wosc => run_wosc(&ops, &problem.admm)?,
        Algorithm::Wsc => run_wsc(&ops, &problem.admm)?,
    };

    let w = ops.weights_from_x(&state.x);
    let ml = power_gain_pattern(geometry, &ops.a, &w, &regions.mainlobe)?;
    let sl = power_gain_pattern(geometry, &ops.a, &w, &regions.sidelobe)?;
    let metrics = compute_metrics(&ml, &sl)?;
    let full = AngularGrid::visible(problem.resolution_deg)?;
    let gains = power_gain_pattern(geometry, &ops.a, &w, &full)?;

    Ok(SynthesisResult {
        algorithm,
        weights_physical: geometry.physical_weights(&w),
        weights_effective: w,
        metrics,
        g0_state_dbi: to_dbi(2.0 * state.g0 * state.g0),
        gain_pattern: full.angles().iter().copied().zip(gains).collect(),
        iterations: state.iteration,
        converged: state.converged,
        residual_ml: state.residual_ml,
        residual_sl: state.residual_sl,
        history: state.history,
    })
}

/// One row of a scan sweep.
#[derive(Debug)]
pub struct SweepRow {
    pub theta_c_deg: f64,
    pub outcome: Result<SynthesisResult>,
    pub wall_ms: f64,
}

/// Cold-started runs of `template` steered to each of `centers`.
///
/// Rows run in parallel on at most `threads` workers (all cores when
/// `None`) and are returned in the order of `centers`.
pub fn scan_sweep(
    template: &SynthesisProblem,
    centers: &[f64],
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    let run_row = |&theta_c: &f64| {
        let mut problem = template.clone();
        problem.beam_center_deg = theta_c;
        let t0 = Instant::now();
        let outcome = synthesize(&problem);
        SweepRow {
            theta_c_deg: theta_c,
            outcome,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| centers.par_iter().map(run_row).collect()))
}

/// Parses `a:b:step` into the inclusive list `a, a+step, …, ≤ b`.
pub fn parse_centers(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in centers {text:?}")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![parse(single)?]),
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if !(step > 0.0) || b < a {
                return Err(Error::Config(format!(
                    "centers {text:?} need a <= b and step > 0"
                )));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|k| a + k as f64 * step).collect())
        }
        _ => Err(Error::Config(format!(
            "centers {text:?} must be a:b:step or a single angle"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::fixtures;

    #[test]
    fn region_counts() {
        let r = assemble_regions(0.0, 20.0, 3.0, 0.5).unwrap();
        assert_eq!(r.mainlobe.len(), 41);
        assert_eq!(r.sidelobe.len(), 310);
        let left = r.sidelobe.angles().iter().filter(|a| **a < 0.0).count();
        assert_eq!(left, 155);
    }

    #[test]
    fn region_clipping() {
        assert!(matches!(assemble_regions(0.0, 180.5, 3.0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(assemble_regions(85.0, 20.0, 3.0, 0.5), Err(Error::Domain(_))));
        assert!(assemble_regions(0.0, 180.0, 3.0, 0.5).unwrap().sidelobe.is_empty());
    }

    #[test]
    fn steered_regions() {
        let r = assemble_regions(40.0, 10.0, 3.0, 0.5).unwrap();
        assert_eq!(r.mainlobe.angles()[0], 35.0);
        assert_eq!(*r.mainlobe.angles().last().unwrap(), 45.0);
        let sl = r.sidelobe.angles();
        let split = sl.iter().position(|a| *a > 40.0).unwrap();
        assert_eq!(sl[split - 1], 32.0);
        assert_eq!(sl[split], 48.0);
        assert_eq!(sl[0], -90.0);
        assert_eq!(*sl.last().unwrap(), 90.0);
    }

    #[test]
    fn regions_are_disjoint_with_guard() {
        for (c, bw, guard, res) in [
            (0.0, 20.0, 3.0, 0.5),
            (12.3, 17.0, 2.2, 0.7),
            (-37.0, 8.0, 0.0, 0.25),
            (40.0, 40.0, 5.0, 1.0),
        ] {
            let r = assemble_regions(c, bw, guard, res).unwrap();
            assert!(r.mainlobe.is_well_formed() && r.sidelobe.is_well_formed());
            let (lo, hi) = (c - bw / 2.0, c + bw / 2.0);
            for s in r.sidelobe.angles() {
                assert!(*s <= lo - guard + 1e-9 || *s >= hi + guard - 1e-9);
            }
        }
    }

    #[test]
    fn metric_examples() {
        let m = compute_metrics(&[0.0; 5], &[0.0; 3]).unwrap();
        assert_eq!((m.g0_dbi, m.osll_db, m.ripple_db), (0.0, 0.0, 0.0));
        let m = compute_metrics(&[7.0, 7.5, 8.0], &[-13.0, -20.0]).unwrap();
        assert_eq!(m.osll_db, -20.0);
        assert_eq!(m.ripple_db, 1.0);
        assert!(compute_metrics(&[], &[1.0]).is_err());
        assert!(compute_metrics(&[1.0], &[]).is_err());
    }

    #[test]
    fn centers_parsing() {
        assert_eq!(parse_centers("0:40:5").unwrap().len(), 9);
        assert_eq!(parse_centers("10").unwrap(), vec![10.0]);
        assert!(parse_centers("5:0:1").is_err());
        assert!(parse_centers("a:b").is_err());
    }

    #[test]
    fn single_element_pattern_is_flat() {
        let g = ArrayGeometry::lossless(vec![0.0]).unwrap();
        let r = synthesize(&SynthesisProblem::new(g, 0.0, 20.0)).unwrap();
        for (_, v) in &r.gain_pattern {
            assert!(v.abs() < 1e-9);
        }
        assert!(r.converged);
        assert!(r.g0_dbi().abs() < 1e-9);
    }

    #[test]
    fn sweep_single_center_matches_synthesize() {
        let mut p = SynthesisProblem::new(fixtures::uniform_half_wavelength(6), 0.0, 30.0);
        p.admm.iter_max = 200;
        let direct = synthesize(&p).unwrap();
        let rows = scan_sweep(&p, &[0.0], Some(1)).unwrap();
        let swept = rows[0].outcome.as_ref().unwrap();
        assert_eq!(swept.weights_effective, direct.weights_effective);
        assert_eq!(swept.metrics, direct.metrics);
    }
}
