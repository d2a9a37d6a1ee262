//! Command-line driver: run configurations, subcommands and report files.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::RunConfig;
use crate::output::{write_json, Metadata};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Hypothesis(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ballwalk", version, about = "Spectral and Monte-Carlo study of the ball random walk")]
pub struct Cli {
    /// Directory for all outputs; overrides `output.directory`.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides `threads`.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points, well pairs and hypothesis checks.
    Landscape { config: PathBuf },
    /// Lowest eigenvalues of the walk operator at each h.
    Spectrum { config: PathBuf },
    /// Walk and Witten spectra across h, compared with the gap law.
    Sweep { config: PathBuf },
    /// Closed-form gap predictions.
    Predict { config: PathBuf },
    /// Monte-Carlo chains of the walk.
    Simulate {
        config: PathBuf,
        /// Overrides `walk.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Symbol closed forms against quadrature and detailed-balance checks.
    Selfcheck {
        #[arg(long, default_value_t = 11)]
        seed: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Landscape { .. } => "landscape",
            Command::Spectrum { .. } => "spectrum",
            Command::Sweep { .. } => "sweep",
            Command::Predict { .. } => "predict",
            Command::Simulate { .. } => "simulate",
            Command::Selfcheck { .. } => "selfcheck",
        }
    }

    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::Landscape { config }
            | Command::Spectrum { config }
            | Command::Sweep { config }
            | Command::Predict { config }
            | Command::Simulate { config, .. } => Some(config),
            Command::Selfcheck { .. } => None,
        }
    }
}

fn init_threads(n: usize) {
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::warn!("thread pool already initialised: {e}");
    }
}

fn dispatch(cli: &Cli, cfg: Option<&RunConfig>, out: &Path) -> Result<Vec<String>, CliError> {
    let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match (&cli.command, cfg) {
        (Command::Landscape { .. }, Some(c)) => commands::cmd_landscape(c, out).map(|_| names(&["landscape.json"])),
        (Command::Spectrum { .. }, Some(c)) => commands::cmd_spectrum(c, out).map(|_| names(&["spectrum.json"])),
        (Command::Sweep { .. }, Some(c)) => commands::cmd_sweep(c, out).map(|_| names(&["sweep.json", "sweep.csv"])),
        (Command::Predict { .. }, Some(c)) => commands::cmd_predict(c, out).map(|_| names(&["predict.json"])),
        (Command::Simulate { .. }, Some(c)) => {
            commands::cmd_simulate(c, out).map(|_| names(&["simulate.json", "simulate.csv"]))
        }
        (Command::Selfcheck { seed }, _) => {
            let dir = cli.output_dir.as_deref();
            let rep = commands::cmd_selfcheck(*seed, dir)?;
            println!("{:<44} {:>12} {:>12}  result", "check", "max_error", "tolerance");
            for r in &rep.rows {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                println!("{:<44} {:>12.3e} {:>12.3e}  {verdict}", r.name, r.max_error, r.tolerance);
            }
            if rep.passed {
                Ok(names(&["selfcheck.json"]))
            } else {
                Err(CliError::Numerical("self-check failed".into()))
            }
        }
        _ => unreachable!("config loaded for every config subcommand"),
    }
}

/// Parses `args`, runs the subcommand and maps failures to exit codes
/// (2 config, 3 numerical, 4 hypothesis).
pub fn run(cli: Cli) -> ExitCode {
    let started = Instant::now();
    let cfg = match cli.command.config_path().map(|p| RunConfig::load(p)).transpose() {
        Ok(mut c) => {
            if let (Some(c), Command::Simulate { seed: Some(s), .. }) = (c.as_mut(), &cli.command) {
                if let Some(w) = c.walk.as_mut() {
                    w.seed = *s;
                }
            }
            c
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let threads = cli.threads.or(cfg.as_ref().map(|c| c.threads)).unwrap_or(0);
    init_threads(threads);
    let out = cli
        .output_dir
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.output.directory.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let result = dispatch(&cli, cfg.as_ref(), &out);
    let code = match &result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    if cfg.is_some() || cli.output_dir.is_some() {
        let meta = Metadata {
            command: cli.command.name().into(),
            version: env!("CARGO_PKG_VERSION"),
            unix_time: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            elapsed_seconds: started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            files: result.unwrap_or_default(),
            exit_code: code,
        };
        if let Err(e) = write_json(&out, &format!("{}.meta.json", cli.command.name()), &meta) {
            eprintln!("error: {e}");
        }
    }
    ExitCode::from(code)
}
