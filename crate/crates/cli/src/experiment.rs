//! Replicated select/tune/train/evaluate/backtest runs and their reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use itsforge_core::forecast::{evaluate_holdout, fit_on_estimation, ForecastRun, Method, PipelineConfig};
use itsforge_core::interval::{estimation_len, parse_ohlc_csv, parse_ohlc_reader, to_interval_series, OhlcRecord};
use itsforge_core::msvr::{MsvrHyper, TrainOptions};
use itsforge_core::stats::{one_way_anova, tukey_hsd, ReplicateResults};
use itsforge_core::trading::{simulate, summarize_trades, Trade, TradeLedger, TradingParams};
use rayon::prelude::*;

use crate::config::ExperimentConfig;

const BUNDLED_FIXTURE: &str = include_str!("../fixtures/synthetic_ohlc.csv");
pub const BUNDLED_NAME: &str = "bundled synthetic fixture";

/// OHLC rows named by the config, or the bundled fixture when none is set.
pub fn load_prices(cfg: &ExperimentConfig) -> Result<Vec<OhlcRecord>> {
    let records = match &cfg.data {
        Some(path) => parse_ohlc_csv(path, &cfg.columns)?,
        None => parse_ohlc_reader(BUNDLED_FIXTURE.as_bytes(), BUNDLED_NAME, &cfg.columns)?,
    };
    if records.is_empty() {
        bail!("no price rows in {}", data_label(cfg));
    }
    Ok(records)
}

pub fn data_label(cfg: &ExperimentConfig) -> String {
    cfg.data
        .as_ref()
        .map_or_else(|| BUNDLED_NAME.to_string(), |p| p.display().to_string())
}

#[derive(Debug, Clone)]
pub struct HorizonResult {
    pub h: usize,
    pub run: ForecastRun,
    pub arv: f64,
    /// One ledger per configured `k`, in config order.
    pub ledgers: Vec<(usize, TradeLedger)>,
}

#[derive(Debug, Clone)]
pub struct Replicate {
    pub method: Method,
    pub index: usize,
    pub seed: u64,
    pub selected: Option<String>,
    pub relevance: Option<f64>,
    pub hypers: Vec<MsvrHyper>,
    pub horizons: Vec<HorizonResult>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub n: usize,
    pub estimation: usize,
    /// Ordered by method (config order), then replicate index.
    pub replicates: Vec<Replicate>,
}

fn run_replicate(
    cfg: &ExperimentConfig,
    prices: &[OhlcRecord],
    series: &itsforge_core::interval::IntervalSeries,
    method: Method,
    index: usize,
) -> Result<Replicate> {
    let start = Instant::now();
    let seed = cfg.seed.wrapping_add(index as u64);
    let label = method.label();
    let e = estimation_len(series.len());
    let pipeline = PipelineConfig {
        order: cfg.order,
        fa: cfg.fa_config(seed),
        train: TrainOptions::default(),
        method,
    };
    let fitted = fit_on_estimation(&series.slice(0, e), &pipeline)
        .with_context(|| format!("stage fit: {label}, replicate {index}"))?;
    let mut horizons = Vec::with_capacity(cfg.horizons.len());
    for &h in &cfg.horizons {
        let run = evaluate_holdout(&fitted.predictor, series, e, h)
            .with_context(|| format!("stage evaluate: {label}, replicate {index}, h={h}"))?;
        let arv = run
            .arv()
            .with_context(|| format!("stage score: {label}, replicate {index}, h={h}"))?;
        let ledgers = backtest_run(&run, prices, &cfg.k_values, cfg.cost)
            .with_context(|| format!("stage backtest: {label}, replicate {index}, h={h}"))?;
        horizons.push(HorizonResult { h, run, arv, ledgers });
    }
    Ok(Replicate {
        method,
        index,
        seed,
        selected: fitted.selection.as_ref().map(|s| s.selected.to_string()),
        relevance: fitted.selection.as_ref().map(|s| s.relevance),
        hypers: fitted.tuning.iter().map(|t| t.hyper).collect(),
        horizons,
        elapsed: start.elapsed(),
    })
}

/// Trades on the forecasts of `run`, matching each origin date to its price
/// row. Forecasts are mapped back to price space first.
pub fn backtest_run(run: &ForecastRun, prices: &[OhlcRecord], k_values: &[usize], cost: f64) -> Result<Vec<(usize, TradeLedger)>> {
    let by_date: BTreeMap<_, _> = prices.iter().map(|p| (p.date, *p)).collect();
    let days = run
        .records
        .iter()
        .map(|r| {
            by_date
                .get(&r.origin_date)
                .copied()
                .ok_or_else(|| anyhow!("alignment error: no price row for forecast origin {}", r.origin_date))
        })
        .collect::<Result<Vec<_>>>()?;
    let forecasts: Vec<_> = run
        .records
        .iter()
        .map(|r| r.predicted.map(|v| run.scale.to_price(v)))
        .collect();
    k_values
        .iter()
        .map(|&k| {
            let params = TradingParams {
                cost,
                ..TradingParams::new(k, run.horizon)
            };
            Ok((k, simulate(&days, &forecasts, &params)?))
        })
        .collect()
}

/// Runs every (method, replicate) pair on at most `jobs` threads. Results
/// come back in index order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Experiment> {
    cfg.validate()?;
    let prices = load_prices(cfg).context("stage ingest")?;
    let series = to_interval_series(&prices, cfg.scale).context("stage ingest")?;
    let tasks: Vec<(Method, usize)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| (0..cfg.replications).map(move |r| (m, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<Replicate>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(m, r)| run_replicate(cfg, &prices, &series, m, r))
            .collect()
    });
    Ok(Experiment {
        config: cfg.clone(),
        n: series.len(),
        estimation: estimation_len(series.len()),
        replicates: results.into_iter().collect::<Result<_>>()?,
    })
}

/// First line of every CSV report.
pub fn provenance(cfg: &ExperimentConfig) -> String {
    format!("# itsforge config={} seed={}\n", cfg.fingerprint(), cfg.seed)
}

fn slug(method: Method) -> String {
    method.label().to_ascii_lowercase()
}

impl Experiment {
    fn methods(&self) -> Vec<Method> {
        self.config.methods()
    }

    fn of(&self, method: Method) -> impl Iterator<Item = &Replicate> {
        self.replicates.iter().filter(move |r| r.method == method)
    }

    pub fn arv_csv(&self) -> String {
        let mut out = provenance(&self.config);
        out.push_str("method,horizon,replicate,seed,arv,violations\n");
        for m in self.methods() {
            for &h in &self.config.horizons {
                for rep in self.of(m) {
                    let hr = rep.horizons.iter().find(|x| x.h == h).expect("every horizon evaluated");
                    let _ = writeln!(
                        out,
                        "{},{h},{},{},{:.16e},{}",
                        m.label(),
                        rep.index,
                        rep.seed,
                        hr.arv,
                        hr.run.violation_count()
                    );
                }
            }
        }
        out
    }

    pub fn groups(&self) -> Vec<(usize, Vec<ReplicateResults>)> {
        self.config
            .horizons
            .iter()
            .map(|&h| {
                let groups = self
                    .methods()
                    .into_iter()
                    .map(|m| ReplicateResults {
                        method: m.label().to_string(),
                        horizon: h,
                        arv_values: self
                            .of(m)
                            .map(|r| r.horizons.iter().find(|x| x.h == h).map_or(f64::NAN, |x| x.arv))
                            .collect(),
                    })
                    .collect();
                (h, groups)
            })
            .collect()
    }

    fn pooled_trades(&self, m: Method, h: usize, k: usize) -> Vec<Trade> {
        self.of(m)
            .flat_map(|r| r.horizons.iter().filter(move |x| x.h == h))
            .flat_map(|x| x.ledgers.iter().filter(move |(kk, _)| *kk == k))
            .flat_map(|(_, l)| l.trades.iter().cloned())
            .collect()
    }

    pub fn trading_csv(&self) -> String {
        let mut out = provenance(&self.config);
        out.push_str("method,horizon,k,trades,average_ar_percent,positive_percent\n");
        for m in self.methods() {
            for &h in &self.config.horizons {
                for &k in &self.config.k_values {
                    let trades = self.pooled_trades(m, h, k);
                    match summarize_trades(&trades) {
                        Some(s) => {
                            let _ = writeln!(
                                out,
                                "{},{h},{k},{},{:.6},{:.6}",
                                m.label(),
                                s.trades,
                                s.average_ar,
                                s.positive_pct
                            );
                        }
                        None => {
                            let _ = writeln!(out, "{},{h},{k},0,,", m.label());
                        }
                    }
                }
            }
        }
        out
    }

    pub fn selection_csv(&self) -> String {
        let mut out = provenance(&self.config);
        out.push_str("method,replicate,seed,selected,relevance,hyper_c,hyper_sigma,hyper_epsilon\n");
        for rep in &self.replicates {
            let sel = rep.selected.as_deref().map(|s| format!("\"{s}\"")).unwrap_or_default();
            let rel = rep.relevance.map(|v| format!("{v:.16e}")).unwrap_or_default();
            if rep.hypers.is_empty() {
                let _ = writeln!(out, "{},{},{},{sel},{rel},,,", rep.method.label(), rep.index, rep.seed);
            }
            for hp in &rep.hypers {
                let _ = writeln!(
                    out,
                    "{},{},{},{sel},{rel},{:.16e},{:.16e},{:.16e}",
                    rep.method.label(),
                    rep.index,
                    rep.seed,
                    hp.c,
                    hp.kernel.sigma,
                    hp.epsilon
                );
            }
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = provenance(&self.config);
        out.push_str("method,replicate,seconds\n");
        for rep in &self.replicates {
            let _ = writeln!(out, "{},{},{:.3}", rep.method.label(), rep.index, rep.elapsed.as_secs_f64());
        }
        out
    }

    pub fn report_text(&self) -> String {
        let cfg = &self.config;
        let mut out = String::from("itsforge experiment report\n");
        let _ = writeln!(out, "config fingerprint: {}", cfg.fingerprint());
        let _ = writeln!(out, "seed: {}", cfg.seed);
        let _ = writeln!(out, "data: {}", data_label(cfg));
        let _ = writeln!(
            out,
            "observations: {} (estimation {}, hold-out {})",
            self.n,
            self.estimation,
            self.n - self.estimation
        );
        let labels: Vec<_> = self.methods().iter().map(|m| m.label()).collect();
        let _ = writeln!(out, "methods: {}", labels.join(", "));
        let _ = writeln!(out, "replications: {}\n", cfg.replications);
        let groups = self.groups();
        out.push_str(&arv_table(&groups));
        out.push('\n');
        out.push_str(&statistics_text(&groups, cfg.tukey_alpha));
        out.push('\n');
        out.push_str("Trading (trades pooled over replications)\n");
        let _ = writeln!(out, "{:<12} {:>3} {:>3} {:>7} {:>12} {:>10}", "method", "h", "k", "trades", "mean AR %", "AR>0 %");
        for m in self.methods() {
            for &h in &cfg.horizons {
                for &k in &cfg.k_values {
                    match summarize_trades(&self.pooled_trades(m, h, k)) {
                        Some(s) => {
                            let _ = writeln!(
                                out,
                                "{:<12} {h:>3} {k:>3} {:>7} {:>12.2} {:>10.2}",
                                m.label(),
                                s.trades,
                                s.average_ar,
                                s.positive_pct
                            );
                        }
                        None => {
                            let _ = writeln!(out, "{:<12} {h:>3} {k:>3} {:>7} no trades", m.label(), 0);
                        }
                    }
                }
            }
        }
        out
    }

    /// Every report as `(file name, contents)`.
    pub fn report_files(&self, timing: bool) -> Vec<(String, String)> {
        let mut files = vec![
            ("report.txt".to_string(), self.report_text()),
            ("arv.csv".to_string(), self.arv_csv()),
            ("trading.csv".to_string(), self.trading_csv()),
            ("selection.csv".to_string(), self.selection_csv()),
        ];
        for (h, groups) in self.groups() {
            if let Ok(t) = tukey_hsd(&groups, self.config.tukey_alpha) {
                files.push((format!("tukey_h{h}.csv"), provenance(&self.config) + &t.pairwise_csv()));
            }
        }
        let tag = format!(" config={} seed={}\n", self.config.fingerprint(), self.config.seed);
        for m in self.methods() {
            if let Some(rep) = self.of(m).next() {
                for hr in &rep.horizons {
                    let csv = hr.run.to_csv().replacen('\n', &tag, 1);
                    files.push((format!("forecast_{}_h{}.csv", slug(m), hr.h), csv));
                }
            }
        }
        if timing {
            files.push(("timing.csv".to_string(), self.timing_csv()));
        }
        files
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// ARV^I summary per method and horizon.
pub fn arv_table(groups: &[(usize, Vec<ReplicateResults>)]) -> String {
    let mut out = String::from("ARV^I over replications\n");
    let _ = writeln!(
        out,
        "{:<12} {:>3} {:>10} {:>10} {:>10} {:>10}",
        "method", "h", "mean", "sd", "min", "max"
    );
    for (h, gs) in groups {
        for g in gs {
            let (mean, sd) = mean_sd(&g.arv_values);
            let min = g.arv_values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = g.arv_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(out, "{:<12} {h:>3} {mean:>10.6} {sd:>10.6} {min:>10.6} {max:>10.6}", g.method);
        }
    }
    out
}

/// ANOVA and Tukey ranking per horizon, or the reason they were skipped.
pub fn statistics_text(groups: &[(usize, Vec<ReplicateResults>)], alpha: f64) -> String {
    let mut out = format!("ANOVA and Tukey HSD (alpha = {alpha})\n");
    for (h, gs) in groups {
        let reps = gs.iter().map(|g| g.arv_values.len()).min().unwrap_or(0);
        if reps < 2 {
            let _ = writeln!(out, "h={h}: insufficient replications ({reps}); ANOVA/Tukey skipped");
            continue;
        }
        if gs.len() < 2 {
            let _ = writeln!(out, "h={h}: single method; ANOVA/Tukey skipped");
            continue;
        }
        match (one_way_anova(gs), tukey_hsd(gs, alpha)) {
            (Ok(a), Ok(t)) => {
                let flag = if a.degenerate { " [zero within-group variance]" } else { "" };
                let _ = writeln!(
                    out,
                    "h={h}: F({}, {}) = {:.4}, p = {:.6}{flag}",
                    a.df_between, a.df_within, a.f_statistic, a.p_value
                );
                let _ = writeln!(out, "      ranking: {}", t.ranking_line());
                if let Some(w) = &t.warning {
                    let _ = writeln!(out, "      note: {w}");
                }
            }
            (Err(e), _) | (_, Err(e)) => {
                let _ = writeln!(out, "h={h}: statistics unavailable: {e}");
            }
        }
    }
    out
}

/// Parses the `arv.csv` written by a run back into per-horizon groups,
/// keeping the method order of the file.
pub fn read_arv_csv(path: &Path) -> Result<Vec<(usize, Vec<ReplicateResults>)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_h: BTreeMap<usize, Vec<ReplicateResults>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("method,") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            bail!("{}:{}: expected 6 fields", path.display(), i + 1);
        }
        let h: usize = f[1].parse().with_context(|| format!("{}:{}: bad horizon", path.display(), i + 1))?;
        let arv: f64 = f[4].parse().with_context(|| format!("{}:{}: bad arv", path.display(), i + 1))?;
        let groups = by_h.entry(h).or_default();
        match groups.iter_mut().find(|g| g.method == f[0]) {
            Some(g) => g.arv_values.push(arv),
            None => groups.push(ReplicateResults {
                method: f[0].to_string(),
                horizon: h,
                arv_values: vec![arv],
            }),
        }
    }
    Ok(by_h.into_iter().collect())
}

/// Writes each file through a temporary sibling and a rename, only after
/// every file has been staged.
pub fn write_atomically(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = std::fs::write(&tmp, body) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dst) in staged {
        std::fs::rename(&tmp, &dst).with_context(|| format!("moving {} into place", dst.display()))?;
    }
    Ok(())
}

/// Writes one file through a temporary sibling and a rename.
pub fn write_file_atomically(path: &Path, body: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?
        .to_string_lossy()
        .into_owned();
    write_atomically(dir, &[(name, body.to_string())])
}
