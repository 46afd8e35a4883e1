use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use itsforge::commands;
use itsforge::config::{Baseline, ExperimentConfig, CONFIG_ENV};

#[derive(Parser)]
#[command(name = "itsforge", version, about = "Interval-valued time series forecasting experiments")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Trading confirmation counts.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Baseline compared against FA-MSVR; repeat for several.
    #[arg(long, global = true, value_parser = parse_baseline)]
    baseline: Vec<Baseline>,
    /// OHLC CSV overriding the config data path.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    s.parse().map_err(|e: anyhow::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Convert OHLC prices into an interval-series file.
    Ingest {
        #[arg(long)]
        output: PathBuf,
    },
    /// Forward-backward input selection on the estimation sample.
    Select {
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Select inputs, then tune MSVR hyperparameters with the firefly search.
    Tune {
        #[arg(long)]
        series: Option<PathBuf>,
    },
    /// Select, tune and train FA-MSVR, then save the model.
    Fit {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rolling-origin hold-out forecasts from a saved model.
    Forecast {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Trading backtest on a saved forecast run.
    Backtest {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full replicated experiment with every report.
    Run {
        #[arg(long, default_value = "itsforge-out")]
        out: PathBuf,
        /// Also write wall-clock timings (not reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Re-render statistics from a finished run directory.
    Report {
        #[arg(long, default_value = "itsforge-out")]
        dir: PathBuf,
    },
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(h) = &cli.horizons {
        cfg.horizons = h.clone();
    }
    if let Some(k) = &cli.k {
        cfg.k_values = k.clone();
    }
    if let Some(r) = cli.replications {
        cfg.replications = r;
    }
    if !cli.baseline.is_empty() {
        cfg.baselines = cli.baseline.clone();
    }
    if let Some(d) = &cli.data {
        cfg.data = Some(d.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    let text = match &cli.command {
        Command::Ingest { output } => commands::cmd_ingest(&cfg, output)?,
        Command::Select { series } => commands::cmd_select(&cfg, series.as_deref())?,
        Command::Tune { series } => commands::cmd_tune(&cfg, series.as_deref())?,
        Command::Fit { series, output } => commands::cmd_fit(&cfg, series.as_deref(), output)?,
        Command::Forecast {
            series,
            model,
            horizon,
            output,
        } => commands::cmd_forecast(&cfg, series.as_deref(), model, *horizon, output)?,
        Command::Backtest { forecast, out } => commands::cmd_backtest(&cfg, forecast, out.as_deref())?,
        Command::Run { out, timing } => commands::cmd_run(&cfg, cli.jobs, out, *timing)?,
        Command::Report { dir } => commands::cmd_report(&cfg, dir)?,
    };
    print!("{text}");
    Ok(())
}
