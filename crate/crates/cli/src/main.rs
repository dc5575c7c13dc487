//! `epf`: batch runner for the forecasting toolkit.

mod commands;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;

use workspace::Workspace;

#[derive(Parser)]
#[command(name = "epf", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("EPF_GIT_DESCRIBE"), ")"), about = "Probabilistic day-ahead electricity price forecasting")]
struct Cli {
    /// Directory all relative paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,
    /// Experiment configuration (defaults to `config.json` in the workspace when present).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Write a synthetic zone (price, gas and CO2) into the data cache.
    Synth(SynthArgs),
    /// Download day-ahead prices into the zone cache.
    Fetch(FetchArgs),
    /// Assemble the feature frame of a zone.
    Featurize(FeaturizeArgs),
    /// Run a statistical baseline over a split and score it.
    Baseline(BaselineArgs),
    /// Train the NHITS backbone on a zone's frame.
    TrainNhits(TrainArgs),
    /// Draw backbone ensembles for every origin of a split.
    Ensemble(EnsembleArgs),
    /// Fit quantile regression averaging on validation ensembles.
    QraFit(ZoneArgs),
    /// Turn test ensembles into quantile forecasts.
    Predict(ZoneArgs),
    /// Score a forecast file against realised prices.
    Score(ScoreArgs),
    /// Import externally produced forecasts and score them.
    ImportForecasts(ImportArgs),
    /// Diebold-Mariano test between two score files.
    DmTest(DmArgs),
    /// Forward feature-group selection by DM tests on validation CRPS.
    SelectFeatures(SelectArgs),
    /// Train on donor zones and forecast the target (zero/one/few-shot).
    Xshot(XshotArgs),
    /// Fan charts and score summary tables.
    Report(ReportArgs),
    /// Energy and emissions of a run.
    Carbon(CarbonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Fetch(_) => "fetch",
            Command::Featurize(_) => "featurize",
            Command::Baseline(_) => "baseline",
            Command::TrainNhits(_) => "train-nhits",
            Command::Ensemble(_) => "ensemble",
            Command::QraFit(_) => "qra-fit",
            Command::Predict(_) => "predict",
            Command::Score(_) => "score",
            Command::ImportForecasts(_) => "import-forecasts",
            Command::DmTest(_) => "dm-test",
            Command::SelectFeatures(_) => "select-features",
            Command::Xshot(_) => "xshot",
            Command::Report(_) => "report",
            Command::Carbon(_) => "carbon",
        }
    }
}

#[derive(Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub zone: String,
    /// First hour, `YYYY-MM-DD` or RFC 3339.
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub days: usize,
    /// Flat price instead of the seasonal AR(1) process.
    #[arg(long)]
    pub constant: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct FetchArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long)]
    pub start: String,
    #[arg(long)]
    pub end: String,
}

#[derive(Args, Serialize)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub zone: String,
    /// Feature groups, e.g. `R1,R3`; defaults to the configuration.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
    #[arg(long)]
    pub proxies: bool,
}

#[derive(Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub zone: String,
    /// same-hour-28d, 7d-12m, bootstrap-price or bootstrap-synthetic.
    #[arg(long)]
    pub method: String,
    /// validation or test.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct ZoneArgs {
    #[arg(long)]
    pub zone: String,
}

#[derive(Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub zone: String,
    /// Forecast CSV, workspace-relative.
    #[arg(long)]
    pub forecasts: PathBuf,
    /// ensemble or quantile.
    #[arg(long)]
    pub kind: String,
    /// Stem of the score files; defaults to the forecast file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Serialize)]
pub struct ImportArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long)]
    pub file: PathBuf,
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub name: String,
}

#[derive(Args, Serialize)]
pub struct DmArgs {
    /// Score CSV of model A.
    #[arg(long)]
    pub a: PathBuf,
    /// Score CSV of model B.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value = "crps")]
    pub metric: String,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub zone: String,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<String>>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Args, Serialize)]
pub struct XshotArgs {
    #[arg(long)]
    pub target: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub donors: Vec<String>,
    /// full, zero-shot, one-shot or few-shot.
    #[arg(long)]
    pub strategy: String,
}

#[derive(Args, Serialize)]
pub struct ReportArgs {
    /// Draw a fan chart from `--quantiles`.
    #[arg(long, requires = "quantiles")]
    pub fan_chart: bool,
    #[arg(long)]
    pub quantiles: Option<PathBuf>,
    /// Origin to plot; defaults to the first in the file.
    #[arg(long)]
    pub origin: Option<String>,
    /// Overlay realised prices of this zone.
    #[arg(long)]
    pub zone: Option<String>,
    /// Score CSVs to tabulate into `reports/summary.md`.
    #[arg(long, value_delimiter = ',')]
    pub summary: Option<Vec<PathBuf>>,
}

#[derive(Args, Serialize)]
pub struct CarbonArgs {
    #[arg(long)]
    pub time_hours: f64,
    #[arg(long, conflicts_with_all = ["energy_kwh", "meter_log"])]
    pub power_kw: Option<f64>,
    #[arg(long, conflicts_with = "meter_log")]
    pub energy_kwh: Option<f64>,
    /// CSV of `seconds,watts` readings.
    #[arg(long)]
    pub meter_log: Option<PathBuf>,
    #[arg(long)]
    pub intensity: Option<f64>,
    #[arg(long)]
    pub pue: Option<f64>,
    #[arg(long, default_value = "carbon")]
    pub name: String,
}

fn execute(cli: &Cli) -> epf_core::Result<serde_json::Value> {
    let mut ws = Workspace::open(&cli.workspace, cli.config.as_deref(), cli.seed)?;
    let summary = commands::dispatch(&mut ws, &cli.command)?;
    let args = serde_json::to_value(&cli.command)?;
    let manifest = ws.finish(cli.command.name(), &args)?;
    log::info!("manifest written to {}", manifest.display());
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match execute(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
