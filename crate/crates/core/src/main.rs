use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use beamgain::array::fixtures;
use beamgain::io::{export_run, geometry_csv, sweep_csv, write_atomic, RunConfig};
use beamgain::oracle::{validation_suite, write_jsonl, SuiteSizes};
use beamgain::synthesis::{parse_centers, scan_sweep, synthesize, Algorithm};
use beamgain::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

/// Wide-beam max-min power gain synthesis for linear arrays.
#[derive(Parser)]
#[command(name = "beamgain", version)]
struct Cli {
    /// Recorded in outputs; only affects oracle sampling in `validate`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one synthesis and write pattern, weights, history and summary.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan the beam center and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `start:end:step` in degrees.
        #[arg(long)]
        centers: String,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the subproblem solvers against brute-force oracles.
    Validate {
        #[arg(long, default_value_t = 10_000)]
        blocks: usize,
        #[arg(long, default_value_t = 1_000)]
        spheres: usize,
        #[arg(long, default_value_t = 1_000)]
        seculars: usize,
        /// Write every report to this JSON-lines file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the bundled array geometries as CSV.
    Fixtures {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Wosc,
    Wsc,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Wosc => Algorithm::Wosc,
            AlgorithmArg::Wsc => Algorithm::Wsc,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("beamgain: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_NUMERICAL
            })
        }
    }
}

fn load_config(path: &Path, out: Option<PathBuf>) -> beamgain::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    Ok(cfg)
}

fn threads_from_env() -> beamgain::Result<Option<usize>> {
    match std::env::var("BEAMGAIN_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("BEAMGAIN_THREADS={v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> beamgain::Result<u8> {
    match cli.command {
        Command::Synth {
            config,
            algorithm,
            out,
        } => {
            let cfg = load_config(&config, out)?;
            let problem = cfg
                .problem(algorithm.map(Into::into))
                .map_err(config_if_domain)?;
            let result = synthesize(&problem)?;
            export_run(&cfg, cli.seed, &problem.geometry, &result)?;
            eprintln!(
                "{:?}: g0 {:.3} dBi, oSLL {:.2} dB, {} iterations",
                result.algorithm,
                result.metrics.g0_dbi,
                result.metrics.osll_db,
                result.iterations
            );
            if result.converged {
                Ok(0)
            } else {
                eprintln!("beamgain: did not converge within iter_max");
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Command::Sweep {
            config,
            centers,
            algorithm,
            out,
        } => {
            let cfg = load_config(&config, out)?;
            let centers = parse_centers(&centers)?;
            let template = cfg
                .problem(algorithm.map(Into::into))
                .map_err(config_if_domain)?;
            let rows = scan_sweep(&template, &centers, threads_from_env()?)?;
            write_atomic(&cfg.output.dir.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
            let mut code = 0;
            for row in &rows {
                match &row.outcome {
                    Err(e) => {
                        eprintln!("beamgain: theta_c = {}: {e}", row.theta_c_deg);
                        code = EXIT_NUMERICAL;
                    }
                    Ok(r) if !r.converged && code == 0 => code = EXIT_NOT_CONVERGED,
                    Ok(_) => {}
                }
            }
            Ok(code)
        }
        Command::Validate {
            blocks,
            spheres,
            seculars,
            report,
        } => {
            let sizes = SuiteSizes {
                blocks,
                spheres,
                seculars,
                ..SuiteSizes::default()
            };
            let reports = validation_suite(cli.seed, sizes)?;
            if let Some(path) = report {
                let mut buf = Vec::new();
                write_jsonl(&reports, &mut buf).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                write_atomic(&path, &buf)?;
            }
            let mut failed = 0;
            for kind in ["update_g_wosc", "update_gh_wsc", "solve_sphere_lsq", "secular_bisect"] {
                let of_kind: Vec<_> = reports.iter().filter(|r| r.kind == kind).collect();
                let bad = of_kind.iter().filter(|r| !r.passed).count();
                let worst = of_kind.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);
                eprintln!("{kind}: {} cases, {bad} failed, worst gap {worst:e}", of_kind.len());
                failed += bad;
            }
            Ok(if failed == 0 { 0 } else { EXIT_NUMERICAL })
        }
        Command::Fixtures { out } => {
            write_atomic(&out.join("ula41.csv"), geometry_csv(&fixtures::ula41()).as_bytes())?;
            write_atomic(
                &out.join("nonuniform41.csv"),
                geometry_csv(&fixtures::nonuniform41()).as_bytes(),
            )?;
            Ok(0)
        }
    }
}

/// Problem construction only fails on user input.
fn config_if_domain(e: Error) -> Error {
    if e.is_config_error() {
        e
    } else {
        Error::Config(e.to_string())
    }
}
