//! Physical array description: element positions, efficiencies, element
//! patterns, angular grids and steering vectors.

use std::f64::consts::PI;
use std::io::Read;

use nalgebra::DVector;
use serde::Deserialize;

use crate::{Error, Result, C64};

/// Slack allowed when comparing angles against the visible range and grid
/// spacings.
const ANGLE_EPS: f64 = 1e-9;

/// One tabulated complex element pattern, linearly interpolated in angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementPattern {
    angles_deg: Vec<f64>,
    values: Vec<C64>,
}

impl ElementPattern {
    pub fn new(angles_deg: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if angles_deg.len() != values.len() {
            return Err(Error::Ingestion(format!(
                "{} angles but {} values",
                angles_deg.len(),
                values.len()
            )));
        }
        if angles_deg.is_empty() {
            return Err(Error::Ingestion("empty pattern table".into()));
        }
        if angles_deg.iter().any(|a| !a.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingestion("non-finite table entry".into()));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Ingestion(
                "pattern angles must be strictly increasing".into(),
            ));
        }
        Ok(Self { angles_deg, values })
    }

    /// Constant pattern over the whole visible range.
    pub fn constant(value: C64) -> Self {
        Self {
            angles_deg: vec![-90.0, 90.0],
            values: vec![value, value],
        }
    }

    pub fn range_deg(&self) -> (f64, f64) {
        (self.angles_deg[0], *self.angles_deg.last().unwrap())
    }

    pub fn covers_visible_range(&self) -> bool {
        let (lo, hi) = self.range_deg();
        lo <= -90.0 + ANGLE_EPS && hi >= 90.0 - ANGLE_EPS
    }

    /// Pattern value at `theta_deg`.
    pub fn at(&self, theta_deg: f64) -> Result<C64> {
        let (lo, hi) = self.range_deg();
        if theta_deg < lo - ANGLE_EPS || theta_deg > hi + ANGLE_EPS {
            return Err(Error::Ingestion(format!(
                "angle {theta_deg} deg outside pattern table [{lo}, {hi}]"
            )));
        }
        let a = &self.angles_deg;
        if a.len() == 1 {
            return Ok(self.values[0]);
        }
        let t = theta_deg.clamp(lo, hi);
        // index of the first table angle strictly greater than t
        let upper = a.partition_point(|&x| x <= t).clamp(1, a.len() - 1);
        let (a0, a1) = (a[upper - 1], a[upper]);
        let s = (t - a0) / (a1 - a0);
        Ok(self.values[upper - 1] * (1.0 - s) + self.values[upper] * s)
    }
}

/// A linear array. Positions are in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    efficiencies: Vec<f64>,
    element_patterns: Option<Vec<ElementPattern>>,
    /// Positions are already divided by the wavelength.
    pub wavelength_normalized: bool,
}

impl ArrayGeometry {
    /// Isotropic array with positions in wavelengths.
    pub fn new(positions: Vec<f64>, efficiencies: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("array has no elements"));
        }
        if positions.len() != efficiencies.len() {
            return Err(Error::Dimension(format!(
                "{} positions but {} efficiencies",
                positions.len(),
                efficiencies.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("non-finite element position"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("element positions must be strictly increasing"));
        }
        if let Some(e) = efficiencies.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
            return Err(Error::domain(format!("efficiency {e} outside (0, 1]")));
        }
        Ok(Self {
            positions,
            efficiencies,
            element_patterns: None,
            wavelength_normalized: true,
        })
    }

    /// Isotropic array with unit efficiency.
    pub fn lossless(positions: Vec<f64>) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, vec![1.0; n])
    }

    /// Positions given in metres at wavelength `wavelength_m`.
    pub fn from_physical(
        positions_m: &[f64],
        wavelength_m: f64,
        efficiencies: Vec<f64>,
    ) -> Result<Self> {
        if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
            return Err(Error::domain(format!("invalid wavelength {wavelength_m}")));
        }
        Self::new(
            positions_m.iter().map(|p| p / wavelength_m).collect(),
            efficiencies,
        )
    }

    /// Attaches one tabulated pattern per element.
    pub fn with_element_patterns(mut self, patterns: Vec<ElementPattern>) -> Result<Self> {
        if patterns.len() != self.positions.len() {
            return Err(Error::Ingestion(format!(
                "{} element patterns for {} elements",
                patterns.len(),
                self.positions.len()
            )));
        }
        if let Some(i) = patterns.iter().position(|p| !p.covers_visible_range()) {
            let (lo, hi) = patterns[i].range_deg();
            return Err(Error::Ingestion(format!(
                "pattern of element {i} covers only [{lo}, {hi}] deg"
            )));
        }
        self.element_patterns = Some(patterns);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn efficiencies(&self) -> &[f64] {
        &self.efficiencies
    }

    pub fn element_patterns(&self) -> Option<&[ElementPattern]> {
        self.element_patterns.as_deref()
    }

    pub fn is_isotropic(&self) -> bool {
        self.element_patterns.is_none()
    }

    /// Effective weights `w ⊙ √η` from physical excitations.
    pub fn effective_weights(&self, physical: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(
            physical.len(),
            physical
                .iter()
                .zip(&self.efficiencies)
                .map(|(w, e)| w * e.sqrt()),
        )
    }

    /// Physical excitations `w ⊘ √η` from effective weights.
    pub fn physical_weights(&self, effective: &DVector<C64>) -> DVector<C64> {
        DVector::from_iterator(
            effective.len(),
            effective
                .iter()
                .zip(&self.efficiencies)
                .map(|(w, e)| w / e.sqrt()),
        )
    }
}

fn check_visible(theta_deg: f64) -> Result<()> {
    if !theta_deg.is_finite() || theta_deg.abs() > 90.0 + ANGLE_EPS {
        return Err(Error::domain(format!(
            "angle {theta_deg} deg outside [-90, 90]"
        )));
    }
    Ok(())
}

/// Steering vector `a(θ)` with `aₙ = eₙ(θ)·exp(j2π rₙ sin θ)`.
pub fn steering_vector(geometry: &ArrayGeometry, theta_deg: f64) -> Result<DVector<C64>> {
    check_visible(theta_deg)?;
    let u = theta_deg.to_radians().sin();
    let mut a = DVector::from_iterator(
        geometry.len(),
        geometry
            .positions
            .iter()
            .map(|r| C64::from_polar(1.0, 2.0 * PI * r * u)),
    );
    if let Some(patterns) = &geometry.element_patterns {
        for (an, p) in a.iter_mut().zip(patterns) {
            *an *= p.at(theta_deg)?;
        }
    }
    Ok(a)
}

/// Sorted set of angles, in degrees, on a fixed resolution.
///
/// A grid may consist of several contiguous segments (the two sides of a
/// sidelobe region); within a segment the spacing equals `resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    angles: Vec<f64>,
    resolution: f64,
}

impl AngularGrid {
    pub fn empty(resolution: f64) -> Self {
        Self {
            angles: Vec::new(),
            resolution,
        }
    }

    /// `start, start + step, …` up to and including `end` (within tolerance).
    pub fn uniform(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::domain(format!("invalid angular resolution {step}")));
        }
        check_visible(start)?;
        check_visible(end)?;
        if end < start - ANGLE_EPS {
            return Ok(Self::empty(step));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        let angles = (0..count).map(|k| start + k as f64 * step).collect();
        Ok(Self {
            angles,
            resolution: step,
        })
    }

    /// Grid ending exactly at `end`, descending from it towards `start`.
    pub fn uniform_from_end(start: f64, end: f64, step: f64) -> Result<Self> {
        let mut g = Self::uniform(-end, -start, step)?;
        g.angles = g.angles.iter().rev().map(|a| -a).collect();
        Ok(g)
    }

    /// The full visible range `[-90, 90]`.
    pub fn visible(step: f64) -> Result<Self> {
        Self::uniform(-90.0, 90.0, step)
    }

    /// Concatenates disjoint, ordered segments with a shared resolution.
    pub fn from_segments(segments: &[AngularGrid]) -> Result<Self> {
        let resolution = segments.first().map_or(1.0, |s| s.resolution);
        if segments
            .iter()
            .any(|s| (s.resolution - resolution).abs() > 1e-12)
        {
            return Err(Error::domain("segments with different resolutions"));
        }
        let angles: Vec<f64> = segments.iter().flat_map(|s| s.angles.clone()).collect();
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid segments overlap or are out of order"));
        }
        Ok(Self { angles, resolution })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Grid spacing check: every gap is either the resolution or a jump
    /// between segments (strictly larger than the resolution).
    pub fn is_well_formed(&self) -> bool {
        self.angles.iter().all(|a| a.abs() <= 90.0 + ANGLE_EPS)
            && self.angles.windows(2).all(|w| {
                let gap = w[1] - w[0];
                (gap - self.resolution).abs() <= 1e-12 * (1.0 + w[1].abs())
                    || gap > self.resolution
            })
    }
}

#[derive(Debug, Deserialize)]
struct AepRow {
    element: usize,
    angle_deg: f64,
    re: f64,
    im: f64,
}

/// Reads element patterns from CSV with header `element,angle_deg,re,im`.
///
/// Elements are indexed from 0 and must all be present; rows of one element
/// must have increasing angles covering `[-90, 90]`.
pub fn load_aep<R: Read>(reader: R, n_elements: usize) -> Result<Vec<ElementPattern>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["element", "angle_deg", "re", "im"] {
        return Err(Error::Ingestion(format!(
            "expected header element,angle_deg,re,im, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut tables: Vec<(Vec<f64>, Vec<C64>)> = vec![(Vec::new(), Vec::new()); n_elements];
    for (line, row) in rdr.deserialize::<AepRow>().enumerate() {
        let row = row.map_err(|e| Error::Ingestion(format!("row {}: {e}", line + 2)))?;
        let Some(t) = tables.get_mut(row.element) else {
            return Err(Error::Ingestion(format!(
                "row {}: element {} but the array has {n_elements} elements",
                line + 2,
                row.element
            )));
        };
        t.0.push(row.angle_deg);
        t.1.push(C64::new(row.re, row.im));
    }
    let patterns = tables
        .into_iter()
        .enumerate()
        .map(|(i, (a, v))| {
            if a.is_empty() {
                return Err(Error::Ingestion(format!("no rows for element {i}")));
            }
            let p = ElementPattern::new(a, v)
                .map_err(|e| Error::Ingestion(format!("element {i}: {e}")))?;
            if !p.covers_visible_range() {
                let (lo, hi) = p.range_deg();
                return Err(Error::Ingestion(format!(
                    "element {i} covers only [{lo}, {hi}] deg"
                )));
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(patterns)
}

/// Real cosine-taper pattern `cos(θ)^q` whose power is 3 dB down at
/// `±half_width_deg`, tabulated every `step_deg`.
pub fn synth_aep(half_width_deg: f64, step_deg: f64) -> Result<ElementPattern> {
    if !(half_width_deg > 0.0 && half_width_deg < 90.0) {
        return Err(Error::domain(format!(
            "3-dB half width {half_width_deg} deg outside (0, 90)"
        )));
    }
    let q = 0.5f64.ln() / (2.0 * half_width_deg.to_radians().cos().ln());
    let grid = AngularGrid::visible(step_deg)?;
    let mut angles = grid.angles().to_vec();
    if (angles.last().unwrap() - 90.0).abs() > ANGLE_EPS {
        angles.push(90.0);
    }
    let values = angles
        .iter()
        .map(|a| C64::new(a.to_radians().cos().max(0.0).powf(q), 0.0))
        .collect();
    ElementPattern::new(angles, values)
}

/// Same synthetic pattern for every element of `geometry`.
pub fn with_synthetic_aep(
    geometry: ArrayGeometry,
    half_width_deg: f64,
    step_deg: f64,
) -> Result<ArrayGeometry> {
    let p = synth_aep(half_width_deg, step_deg)?;
    let n = geometry.len();
    geometry.with_element_patterns(vec![p; n])
}

/// Bundled array fixtures.
pub mod fixtures {
    use super::ArrayGeometry;

    /// Positive element positions of the 41-element origin-symmetric
    /// non-uniform array, in wavelengths.
    pub const NONUNIFORM41_POSITIVE: [f64; 20] = [
        0.6215, 1.0414, 1.4743, 1.9572, 2.5043, 2.9870, 3.4492, 4.0155, 4.4617, 4.9544, 5.3895,
        5.8762, 6.3107, 6.8955, 7.4536, 7.9957, 8.4196, 8.9315, 9.4274, 10.0000,
    ];

    /// `n`-element uniform array with half-wavelength spacing centred on 0.
    pub fn uniform_half_wavelength(n: usize) -> ArrayGeometry {
        let centre = (n as f64 - 1.0) / 2.0;
        let pos = (0..n).map(|k| (k as f64 - centre) * 0.5).collect();
        ArrayGeometry::lossless(pos).expect("valid uniform geometry")
    }

    pub fn ula41() -> ArrayGeometry {
        uniform_half_wavelength(41)
    }

    pub fn nonuniform41() -> ArrayGeometry {
        let mut pos: Vec<f64> = NONUNIFORM41_POSITIVE.iter().rev().map(|p| -p).collect();
        pos.push(0.0);
        pos.extend_from_slice(&NONUNIFORM41_POSITIVE);
        ArrayGeometry::lossless(pos).expect("valid non-uniform geometry")
    }

    /// Looks up a fixture by name (`ula41`, `nonuniform41`).
    pub fn by_name(name: &str) -> Option<ArrayGeometry> {
        match name {
            "ula41" => Some(ula41()),
            "nonuniform41" => Some(nonuniform41()),
            _ => None,
        }
    }

    pub const NAMES: [&str; 2] = ["ula41", "nonuniform41"];
}
