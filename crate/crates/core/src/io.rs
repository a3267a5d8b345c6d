//! Run configuration and file exports.
//!
//! Configs are TOML; unknown keys are rejected. Relative paths inside a
//! config resolve against the config file's directory. Every export is
//! written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::admm::AdmmConfig;
use crate::array::{fixtures, load_aep, with_synthetic_aep, ArrayGeometry};
use crate::synthesis::{Algorithm, SweepRow, SynthesisProblem, SynthesisResult};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub admm: AdmmSection,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `fixture` and `file` names the array.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub fixture: Option<String>,
    /// CSV with header `position_lambda,efficiency`.
    pub file: Option<PathBuf>,
    /// CSV with header `element,angle_deg,re,im`.
    pub aep_file: Option<PathBuf>,
    /// Gives every element a `cos^q` pattern 3 dB down at this angle.
    pub synthetic_aep_half_width_deg: Option<f64>,
    #[serde(default = "default_aep_step")]
    pub synthetic_aep_step_deg: f64,
    pub quadrature_order: Option<usize>,
}

fn default_aep_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub beam_center_deg: f64,
    pub beamwidth_deg: f64,
    #[serde(default = "default_resolution")]
    pub resolution_deg: f64,
    #[serde(default = "default_guard")]
    pub guard_deg: f64,
    /// Present for the sidelobe-constrained problem.
    pub dsll_db: Option<f64>,
}

fn default_resolution() -> f64 {
    0.5
}

fn default_guard() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmSection {
    pub rho_init: f64,
    /// Defaults to `rho_init`.
    pub rho2_init: Option<f64>,
    pub rho_decay: f64,
    pub rho_floor: f64,
    pub iter_max: usize,
    pub residual_tol: f64,
    pub secular_tol: f64,
}

impl Default for AdmmSection {
    fn default() -> Self {
        let d = AdmmConfig::default();
        Self {
            rho_init: d.rho_init,
            rho2_init: None,
            rho_decay: d.rho_decay,
            rho_floor: d.rho_floor,
            iter_max: d.iter_max,
            residual_tol: d.residual_tol,
            secular_tol: d.secular_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub pattern: bool,
    #[serde(default = "yes")]
    pub weights: bool,
    #[serde(default = "yes")]
    pub history: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            pattern: true,
            weights: true,
            history: true,
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads, parses and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.geometry.file.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.geometry.aep_file.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        match (&g.fixture, &g.file) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "geometry: give either fixture or file, not both".into(),
                ))
            }
            (None, None) => return Err(Error::Config("geometry: fixture or file required".into())),
            (Some(name), None) if fixtures::by_name(name).is_none() => {
                return Err(Error::Config(format!(
                    "geometry: unknown fixture {name:?} (known: {})",
                    fixtures::NAMES.join(", ")
                )))
            }
            _ => {}
        }
        if g.aep_file.is_some() && g.synthetic_aep_half_width_deg.is_some() {
            return Err(Error::Config(
                "geometry: aep_file and synthetic_aep_half_width_deg are exclusive".into(),
            ));
        }
        let p = &self.problem;
        if !(p.beamwidth_deg > 0.0) || !(p.resolution_deg > 0.0) || p.guard_deg < 0.0 {
            return Err(Error::Config(
                "problem: beamwidth and resolution must be positive, guard nonnegative".into(),
            ));
        }
        self.admm_config().validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.admm.rho2_init = Some(self.admm.rho2_init.unwrap_or(self.admm.rho_init));
        out
    }

    pub fn admm_config(&self) -> AdmmConfig {
        let a = &self.admm;
        let mut cfg = AdmmConfig {
            rho_init: a.rho_init,
            rho2_init: a.rho2_init.unwrap_or(a.rho_init),
            rho_decay: a.rho_decay,
            rho_floor: a.rho_floor,
            iter_max: a.iter_max,
            residual_tol: a.residual_tol,
            secular_tol: a.secular_tol,
            ..AdmmConfig::default()
        };
        if let Some(d) = self.problem.dsll_db {
            cfg = cfg.with_dsll_db(d);
        }
        cfg
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let g = &self.geometry;
        let base = match (&g.fixture, &g.file) {
            (Some(name), _) => fixtures::by_name(name)
                .ok_or_else(|| Error::Config(format!("unknown fixture {name:?}")))?,
            (None, Some(path)) => read_geometry(path)?,
            (None, None) => return Err(Error::Config("geometry: fixture or file required".into())),
        };
        if let Some(path) = &g.aep_file {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            let patterns = load_aep(file, base.len())?;
            return base.with_element_patterns(patterns);
        }
        if let Some(hw) = g.synthetic_aep_half_width_deg {
            return with_synthetic_aep(base, hw, g.synthetic_aep_step_deg);
        }
        Ok(base)
    }

    /// Builds the problem; `algorithm` overrides the choice implied by
    /// `problem.dsll_db`.
    pub fn problem(&self, algorithm: Option<Algorithm>) -> Result<SynthesisProblem> {
        let p = &self.problem;
        let mut problem = SynthesisProblem::new(self.geometry()?, p.beam_center_deg, p.beamwidth_deg);
        problem.resolution_deg = p.resolution_deg;
        problem.guard_deg = p.guard_deg;
        problem.quadrature_order = self.geometry.quadrature_order;
        problem.admm = self.admm_config();
        let dsll = match (algorithm, p.dsll_db) {
            (Some(Algorithm::Wosc), _) => None,
            (Some(Algorithm::Wsc), None) => {
                return Err(Error::Config("wsc needs problem.dsll_db".into()))
            }
            (_, d) => d,
        };
        if let Some(d) = dsll {
            problem = problem.with_dsll_db(d);
        }
        Ok(problem)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryRow {
    position_lambda: f64,
    efficiency: f64,
}

pub fn parse_geometry_csv(text: &str, origin: &Path) -> Result<ArrayGeometry> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(origin, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["position_lambda", "efficiency"] {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            message: format!("expected header position_lambda,efficiency, got {headers:?}"),
        });
    }
    let mut positions = Vec::new();
    let mut efficiencies = Vec::new();
    for row in reader.deserialize::<GeometryRow>() {
        let row = row.map_err(|e| parse_err(origin, e))?;
        positions.push(row.position_lambda);
        efficiencies.push(row.efficiency);
    }
    ArrayGeometry::new(positions, efficiencies).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_geometry(path: &Path) -> Result<ArrayGeometry> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geometry_csv(&text, path)
}

fn parse_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn geometry_csv(geometry: &ArrayGeometry) -> String {
    let mut s = String::from("position_lambda,efficiency\n");
    for (p, e) in geometry.positions().iter().zip(geometry.efficiencies()) {
        let _ = writeln!(s, "{},{}", p, e);
    }
    s
}

/// Writes `contents` to a temporary sibling of `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// 12 significant digits.
fn amp(x: f64) -> String {
    format!("{x:.11e}")
}

/// Rounds to 12 significant digits so serialized numbers are stable.
fn round12(x: f64) -> f64 {
    amp(x).parse().unwrap_or(x)
}

fn round6(x: f64) -> f64 {
    if x.is_finite() {
        (x * 1e6).round() / 1e6
    } else {
        x
    }
}

pub fn pattern_csv(result: &SynthesisResult) -> String {
    let mut s = String::from("theta_deg,gain_dbi\n");
    for &(theta, gain) in &result.gain_pattern {
        let _ = writeln!(s, "{theta:.6},{gain:.6}");
    }
    s
}

pub fn weights_csv(geometry: &ArrayGeometry, result: &SynthesisResult) -> String {
    let mut s = String::from("element,position_lambda,re,im,magnitude,phase_deg\n");
    for (k, (w, p)) in result
        .weights_physical
        .iter()
        .zip(geometry.positions())
        .enumerate()
    {
        let _ = writeln!(
            s,
            "{k},{p},{},{},{},{}",
            amp(w.re),
            amp(w.im),
            amp(w.norm()),
            amp(w.arg().to_degrees())
        );
    }
    s
}

pub fn history_csv(result: &SynthesisResult) -> String {
    let mut s = String::from(
        "iter,g0_amp,g0_dbi,residual_ml,residual_sl,rho1,rho2,dual_inc_1,dual_inc_2\n",
    );
    for r in &result.history {
        let _ = writeln!(
            s,
            "{},{},{:.6},{},{},{},{},{},{}",
            r.iter,
            amp(r.g0_amp),
            r.g0_dbi,
            amp(r.residual_ml),
            amp(r.residual_sl),
            amp(r.rho1),
            amp(r.rho2),
            amp(r.dual_inc_1),
            amp(r.dual_inc_2)
        );
    }
    s
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub g0_dbi: f64,
    pub osll_db: f64,
    pub ripple_db: f64,
    pub g0_state_dbi: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_ml: f64,
    pub residual_sl: f64,
}

impl Summary {
    pub fn new(config: &RunConfig, seed: u64, result: &SynthesisResult) -> Self {
        Self {
            config: config.resolved(),
            seed,
            algorithm: result.algorithm,
            g0_dbi: round6(result.metrics.g0_dbi),
            osll_db: round6(result.metrics.osll_db),
            ripple_db: round6(result.metrics.ripple_db),
            g0_state_dbi: round6(result.g0_state_dbi),
            iterations: result.iterations,
            converged: result.converged,
            residual_ml: round12(result.residual_ml),
            residual_sl: round12(result.residual_sl),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Writes the enabled exports of one run into `config.output.dir`.
pub fn export_run(
    config: &RunConfig,
    seed: u64,
    geometry: &ArrayGeometry,
    result: &SynthesisResult,
) -> Result<Vec<PathBuf>> {
    let dir = &config.output.dir;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };
    if config.output.pattern {
        put("pattern.csv", pattern_csv(result))?;
    }
    if config.output.weights {
        put("weights.csv", weights_csv(geometry, result))?;
    }
    if config.output.history {
        put("history.csv", history_csv(result))?;
    }
    put("summary.json", Summary::new(config, seed, result).to_json())?;
    Ok(written)
}

/// Failed rows keep their angle and report `NaN` metrics.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("theta_c_deg,g0_dbi,osll_db,ripple_db,iterations,converged,wall_ms\n");
    for row in rows {
        match &row.outcome {
            Ok(r) => {
                let _ = writeln!(
                    s,
                    "{},{:.6},{:.6},{:.6},{},{},{:.3}",
                    row.theta_c_deg,
                    r.metrics.g0_dbi,
                    r.metrics.osll_db,
                    r.metrics.ripple_db,
                    r.iterations,
                    r.converged,
                    row.wall_ms
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{},NaN,NaN,NaN,0,false,{:.3}", row.theta_c_deg, row.wall_ms);
            }
        }
    }
    s
}
