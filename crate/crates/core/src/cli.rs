//! Command-line front end: config parsing, run manifests and dispatch.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentReport};
use crate::remote_contiguity::RcCurve;
use crate::rng::Runtime;

/// Exit status of a completed run whose asserted verdicts all pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status of a run that raised an error.
pub const EXIT_ERROR: i32 = 1;
/// Exit status of a completed run with a failing asserted verdict.
pub const EXIT_VERDICT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bayes-limits",
    version,
    about = "Frequentist diagnostics for Bayesian posteriors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior mass of V_n under data from the truth.
    Consistency(RunArgs),
    /// Test power against prior-mass lower bounds.
    Rates(RunArgs),
    /// Bayes factors for B against V.
    BayesFactor(RunArgs),
    /// Coverage of credible sets and their enlargements.
    Coverage(RunArgs),
    /// Freedman's inconsistency through forbidden symbols.
    Freedman(RunArgs),
    /// Remote-contiguity criteria for local prior predictives.
    RcDiagnose(RunArgs),
    /// Integrated power of a configured test sequence.
    TestPower(RunArgs),
    /// Exact spike-and-slab posterior for sparse normal means.
    SparseMeans(RunArgs),
    /// Dirichlet-process posteriors through nested partitions.
    Tailfree(RunArgs),
    /// Posterior predictive and posterior means as point estimators.
    PointEstimator(RunArgs),
    /// Posterior-based test power against per-atom posterior errors.
    TestEquiv(RunArgs),
}

impl Command {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Command::Consistency(_) => ExperimentKind::Consistency,
            Command::Rates(_) => ExperimentKind::Rates,
            Command::BayesFactor(_) => ExperimentKind::BayesFactor,
            Command::Coverage(_) => ExperimentKind::Coverage,
            Command::Freedman(_) => ExperimentKind::Freedman,
            Command::RcDiagnose(_) => ExperimentKind::RcDiagnose,
            Command::TestPower(_) => ExperimentKind::TestPower,
            Command::SparseMeans(_) => ExperimentKind::SparseMeans,
            Command::Tailfree(_) => ExperimentKind::Tailfree,
            Command::PointEstimator(_) => ExperimentKind::PointEstimator,
            Command::TestEquiv(_) => ExperimentKind::TestEquiv,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Consistency(a)
            | Command::Rates(a)
            | Command::BayesFactor(a)
            | Command::Coverage(a)
            | Command::Freedman(a)
            | Command::RcDiagnose(a)
            | Command::TestPower(a)
            | Command::SparseMeans(a)
            | Command::Tailfree(a)
            | Command::PointEstimator(a)
            | Command::TestEquiv(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's `output`, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: OutputFormat,
}

/// Everything needed to reproduce a run; echoed into the JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
    pub version: String,
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::config("", format!("cannot read {}: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
    {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    /// Resolves seed and output directory; a missing seed is drawn from OS
    /// entropy and recorded.
    pub fn new(config_path: &Path, mut config: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let seed = seed.or(config.seed).unwrap_or_else(rand::random);
        config.seed = Some(seed);
        let out_dir = out
            .or_else(|| config.output.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Self {
            config_path: config_path.to_path_buf(),
            config,
            seed,
            out_dir,
            timestamp: timestamp(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn from_args(kind: ExperimentKind, args: &RunArgs) -> Result<Self> {
        let cfg = parse_config(&args.config)?;
        if cfg.experiment != kind {
            return Err(Error::config(
                "experiment",
                format!(
                    "config is for `{}` but the `{}` subcommand was used",
                    cfg.experiment.name(),
                    kind.name()
                ),
            ));
        }
        Ok(Self::new(&args.config, cfg, args.seed, args.out.clone()))
    }
}

/// Writes `report.csv`, `summary.json` and, when present, `rc_curves.csv`.
pub fn write_outputs(manifest: &RunManifest, report: &ExperimentReport, format: OutputFormat) -> Result<()> {
    fs::create_dir_all(&manifest.out_dir)?;
    if format != OutputFormat::Json {
        report.write_csv(BufWriter::new(fs::File::create(manifest.out_dir.join("report.csv"))?))?;
        if !report.rc_curves.is_empty() {
            let f = BufWriter::new(fs::File::create(manifest.out_dir.join("rc_curves.csv"))?);
            RcCurve::write_csv(&report.rc_curves, f)?;
        }
    }
    if format != OutputFormat::Csv {
        let json = report.summary_json(&serde_json::to_value(manifest)?);
        let mut text = serde_json::to_string_pretty(&json)?;
        text.push('\n');
        fs::write(manifest.out_dir.join("summary.json"), text)?;
    }
    Ok(())
}

/// Runs the manifest and writes its outputs; returns the report.
pub fn execute(manifest: &RunManifest, workers: usize, format: OutputFormat) -> Result<ExperimentReport> {
    let report = experiments::run(&manifest.config, Runtime::new(manifest.seed, workers))?;
    write_outputs(manifest, &report, format)?;
    Ok(report)
}

/// Runs the manifest and maps the outcome to an exit status; errors go to
/// standard error.
pub fn dispatch(manifest: &RunManifest, workers: usize, format: OutputFormat) -> i32 {
    match execute(manifest, workers, format) {
        Ok(report) => {
            for v in &report.verdicts {
                let status = match (v.passed, v.asserted) {
                    (true, _) => "pass",
                    (false, true) => "FAIL",
                    (false, false) => "fail (recorded)",
                };
                println!("{}: {status}  {}", v.name, v.detail);
            }
            println!("outputs written to {}", manifest.out_dir.display());
            if report.passed() {
                EXIT_PASS
            } else {
                EXIT_VERDICT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Default worker count.
pub fn logical_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Entry point of the binary.
pub fn main_with(cli: Cli) -> i32 {
    let kind = cli.command.kind();
    let args = cli.command.args();
    match RunManifest::from_args(kind, args) {
        Ok(m) => dispatch(&m, args.workers.unwrap_or_else(logical_cores), args.format),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["bayes-limits", "rc-diagnose", "--config", "x.json", "--workers", "3"]).unwrap();
        assert_eq!(cli.command.kind(), ExperimentKind::RcDiagnose);
        assert_eq!(cli.command.args().workers, Some(3));
        assert_eq!(cli.command.args().format, OutputFormat::Both);
    }

    #[test]
    fn missing_file_is_a_config_error() {
        let err = parse_config(Path::new("/nonexistent/config.json")).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
