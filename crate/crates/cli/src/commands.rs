//! One function per subcommand. Each returns the text it would print.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};
use itsforge_core::forecast::{
    evaluate_holdout, fit_on_estimation, tune, Fitted, ForecastRun, Method, MsvrForecaster, PipelineConfig,
};
use itsforge_core::interval::{
    embed, estimation_len, read_interval_series, to_interval_series, write_interval_series, IntervalSeries,
};
use itsforge_core::msvr::{MsvrModel, TrainOptions};
use itsforge_core::select::{forward_backward_select, token, Move, VariableSet};
use itsforge_core::trading::{ledger_csv, summarize};

use crate::config::ExperimentConfig;
use crate::experiment::{
    arv_table, backtest_run, data_label, load_prices, provenance, read_arv_csv, run_experiment, statistics_text,
    write_atomically, write_file_atomically,
};

const MODEL_MAGIC: &str = "itsforge-forecaster 1";

/// Series from an interval-series file, or ingested from the configured
/// price data.
pub fn load_series(cfg: &ExperimentConfig, series: Option<&Path>) -> Result<IntervalSeries> {
    match series {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Ok(read_interval_series(BufReader::new(f), p)?)
        }
        None => Ok(to_interval_series(&load_prices(cfg)?, cfg.scale)?),
    }
}

fn estimation(series: &IntervalSeries) -> IntervalSeries {
    series.slice(0, estimation_len(series.len()))
}

pub fn cmd_ingest(cfg: &ExperimentConfig, output: &Path) -> Result<String> {
    let prices = load_prices(cfg)?;
    let series = to_interval_series(&prices, cfg.scale)?;
    let mut buf = Vec::new();
    write_interval_series(&mut buf, &series)?;
    write_file_atomically(output, &String::from_utf8(buf)?)?;
    let dates = series.dates();
    Ok(format!(
        "{:<32} {:>6} {:>12} {:>12}\n{:<32} {:>6} {:>12} {:>12}\n",
        "series",
        "n",
        "from",
        "to",
        data_label(cfg),
        series.len(),
        dates[0],
        dates[dates.len() - 1]
    ))
}

pub fn cmd_select(cfg: &ExperimentConfig, series: Option<&Path>) -> Result<String> {
    let series = load_series(cfg, series)?;
    let data = embed(&estimation(&series), cfg.order).context("stage embed")?;
    let report = forward_backward_select(&data).context("stage select")?;
    let mut out = String::new();
    for step in &report.steps {
        let (sign, var) = match step.applied {
            Move::Add(i) => ('+', i),
            Move::Remove(i) => ('-', i),
        };
        let _ = writeln!(out, "{sign}{:<4} E = {:.6}  {{{}}}", token(var), step.relevance, step.set);
    }
    let _ = writeln!(out, "selected: {}  E = {:.6}", report.selected, report.relevance);
    Ok(out)
}

pub fn cmd_tune(cfg: &ExperimentConfig, series: Option<&Path>) -> Result<String> {
    let series = load_series(cfg, series)?;
    let full = embed(&estimation(&series), cfg.order).context("stage embed")?;
    let selection = forward_backward_select(&full).context("stage select")?;
    let data = full.select_inputs(selection.selected.indices());
    let outcome = tune(&data, &cfg.fa_config(cfg.seed), TrainOptions::default()).context("stage tune")?;
    Ok(format!(
        "selected: {}\nC = {:.6}\nsigma = {:.6}\nepsilon = {:.6}\ncv fitness = {:.6}\n",
        selection.selected, outcome.hyper.c, outcome.hyper.kernel.sigma, outcome.hyper.epsilon, outcome.fitness
    ))
}

pub fn cmd_fit(cfg: &ExperimentConfig, series: Option<&Path>, output: &Path) -> Result<String> {
    let series = load_series(cfg, series)?;
    let pipeline = PipelineConfig {
        order: cfg.order,
        fa: cfg.fa_config(cfg.seed),
        train: TrainOptions::default(),
        method: Method::Msvr,
    };
    let fitted = fit_on_estimation(&estimation(&series), &pipeline).context("stage fit")?;
    let Fitted::Msvr(f) = &fitted.predictor else {
        bail!("stage fit: expected a joint model");
    };
    let mut buf = format!("{MODEL_MAGIC}\norder {}\nvars {}\n", f.order, f.vars).into_bytes();
    f.model.save(&mut buf)?;
    write_file_atomically(output, &String::from_utf8(buf)?)?;
    Ok(format!(
        "selected: {}\nC = {:.6}\nsigma = {:.6}\nepsilon = {:.6}\nsupport vectors: {}\nmodel written to {}\n",
        f.vars,
        f.model.hyper.c,
        f.model.hyper.kernel.sigma,
        f.model.hyper.epsilon,
        f.model.support(0).len(),
        output.display()
    ))
}

pub fn load_forecaster(path: &Path) -> Result<MsvrForecaster> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut parts = text.splitn(4, '\n');
    let bad = || anyhow::anyhow!("{}: not an itsforge model file", path.display());
    if parts.next() != Some(MODEL_MAGIC) {
        return Err(bad());
    }
    let order: usize = parts
        .next()
        .and_then(|l| l.strip_prefix("order "))
        .ok_or_else(bad)?
        .trim()
        .parse()?;
    let vars: VariableSet = parts
        .next()
        .and_then(|l| l.strip_prefix("vars "))
        .ok_or_else(bad)?
        .parse()?;
    let model = MsvrModel::load(parts.next().unwrap_or_default().as_bytes())?;
    Ok(MsvrForecaster::new(model, vars, order)?)
}

pub fn cmd_forecast(
    cfg: &ExperimentConfig,
    series: Option<&Path>,
    model: &Path,
    horizon: usize,
    output: &Path,
) -> Result<String> {
    let series = load_series(cfg, series)?;
    let forecaster = load_forecaster(model)?;
    let e = estimation_len(series.len());
    let run = evaluate_holdout(&forecaster, &series, e, horizon).context("stage forecast")?;
    let arv = run.arv()?;
    let tag = format!(" config={} seed={}\n", cfg.fingerprint(), cfg.seed);
    write_file_atomically(output, &run.to_csv().replacen('\n', &tag, 1))?;
    Ok(format!(
        "h = {horizon}\norigins: {}\nARV^I = {arv:.6}\nbound violations: {}\n",
        run.records.len(),
        run.violation_count()
    ))
}

/// Trades on a saved forecast run for every configured `k`.
pub fn cmd_backtest(cfg: &ExperimentConfig, forecast: &Path, out_dir: Option<&Path>) -> Result<String> {
    let f = std::fs::File::open(forecast).with_context(|| format!("opening {}", forecast.display()))?;
    let run = ForecastRun::from_csv(BufReader::new(f), forecast)?;
    let prices = load_prices(cfg)?;
    let ledgers = backtest_run(&run, &prices, &cfg.k_values, cfg.cost)?;
    let mut text = String::new();
    let mut summary = provenance(cfg);
    summary.push_str("horizon,k,trades,average_ar_percent,positive_percent\n");
    let mut files = Vec::new();
    for (k, ledger) in &ledgers {
        let h = run.horizon;
        match summarize(ledger) {
            Some(s) => {
                let _ = writeln!(
                    text,
                    "h={h} k={k}: {} trades, mean AR {:.2}%, {:.2}% positive",
                    s.trades, s.average_ar, s.positive_pct
                );
                let _ = writeln!(summary, "{h},{k},{},{:.6},{:.6}", s.trades, s.average_ar, s.positive_pct);
            }
            None => {
                let _ = writeln!(text, "h={h} k={k}: no trades");
                let _ = writeln!(summary, "{h},{k},0,,");
            }
        }
        for t in &ledger.trades {
            let _ = writeln!(
                text,
                "  buy {} (day {}) sell {} (day {}) R {:.4}% AR {:.4}%",
                t.buy_date, t.buy_day, t.sell_date, t.sell_day, t.r, t.ar
            );
        }
        if ledger.open_position_discarded {
            let _ = writeln!(text, "  open position at the end of the window discarded");
        }
        files.push((format!("ledger_h{h}_k{k}.csv"), provenance(cfg) + &ledger_csv(ledger)));
    }
    if let Some(dir) = out_dir {
        files.push(("trading.csv".to_string(), summary));
        write_atomically(dir, &files)?;
    }
    Ok(text)
}

pub fn cmd_run(cfg: &ExperimentConfig, jobs: usize, out_dir: &Path, timing: bool) -> Result<String> {
    let exp = run_experiment(cfg, jobs)?;
    write_atomically(out_dir, &exp.report_files(timing))?;
    let mut text = exp.report_text();
    if timing {
        text.push_str("\nElapsed seconds per replicate\n");
        for m in cfg.methods() {
            let secs: Vec<f64> = exp
                .replicates
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.elapsed.as_secs_f64())
                .collect();
            let mean = secs.iter().sum::<f64>() / secs.len() as f64;
            let _ = writeln!(text, "{:<12} {mean:>10.3}", m.label());
        }
    }
    Ok(text)
}

/// Re-renders the statistics of a finished run from its `arv.csv`.
pub fn cmd_report(cfg: &ExperimentConfig, dir: &Path) -> Result<String> {
    let groups = read_arv_csv(&dir.join("arv.csv"))?;
    Ok(format!("{}\n{}", arv_table(&groups), statistics_text(&groups, cfg.tukey_alpha)))
}
