//! Selection, tuning, training and rolling-origin hold-out evaluation.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::PathBuf;

use chrono::NaiveDate;

use crate::baseline::{Persistence, UnivariateForecaster};
use crate::error::{Error, Result};
use crate::firefly::{self, FaConfig, FaOutcome};
use crate::interval::{embed, estimation_len, lag_vector, Interval, IntervalSeries, Scale, SupervisedDataset};
use crate::msvr::{self, MsvrHyper, MsvrModel, TrainOptions};
use crate::select::{forward_backward_select, SelectionReport, VariableSet};
use crate::stats::{arv_interval, relative_variance};

/// Lag order of the embedding used throughout the pipeline.
pub const EMBEDDING_ORDER: usize = 12;
pub const CV_FOLDS: usize = 5;
const MIN_CV_PAIRS: usize = 10;

/// Anything that maps a history of intervals (oldest first) to the next one.
pub trait IntervalPredictor {
    /// Number of trailing intervals the predictor reads.
    fn order(&self) -> usize;

    fn predict_next(&self, history: &[Interval]) -> Result<Interval>;
}

/// Joint two-output regressor over the selected lag coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MsvrForecaster {
    pub model: MsvrModel,
    pub vars: VariableSet,
    pub order: usize,
}

impl MsvrForecaster {
    pub fn new(model: MsvrModel, vars: VariableSet, order: usize) -> Result<Self> {
        if model.output_dim() != 2 {
            return Err(Error::Shape(format!("interval model needs 2 outputs, got {}", model.output_dim())));
        }
        check_vars(&vars, order)?;
        if model.input_dim() != vars.len() {
            return Err(Error::Shape(format!(
                "model has {} inputs but {} variables are selected",
                model.input_dim(),
                vars.len()
            )));
        }
        Ok(Self { model, vars, order })
    }
}

pub(crate) fn check_vars(vars: &VariableSet, order: usize) -> Result<()> {
    if vars.is_empty() || vars.required_order() > order {
        return Err(Error::Argument(format!("variable set {vars} does not fit embedding order {order}")));
    }
    Ok(())
}

/// Restricted lag input for the interval at the end of `history`.
pub fn restricted_input(history: &[Interval], vars: &VariableSet, order: usize) -> Result<Vec<f64>> {
    if history.len() < order {
        return Err(Error::Size {
            what: "history intervals",
            needed: order,
            got: history.len(),
        });
    }
    let full = lag_vector(history, history.len() - 1, order);
    Ok(vars.indices().iter().map(|&i| full[i]).collect())
}

impl IntervalPredictor for MsvrForecaster {
    fn order(&self) -> usize {
        self.order
    }

    fn predict_next(&self, history: &[Interval]) -> Result<Interval> {
        let y = self.model.predict(&restricted_input(history, &self.vars, self.order)?)?;
        Ok(Interval::new(y[0], y[1]))
    }
}

/// Feeds each one-step prediction back into a rolling buffer of the last
/// `order` intervals and returns the `h` predictions in order.
pub fn iterated_forecast<P: IntervalPredictor + ?Sized>(predictor: &P, history: &[Interval], h: usize) -> Result<Vec<Interval>> {
    let order = predictor.order();
    if h == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    if history.len() < order {
        return Err(Error::Size {
            what: "history intervals",
            needed: order,
            got: history.len(),
        });
    }
    let mut buffer = history[history.len() - order..].to_vec();
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = predictor.predict_next(&buffer)?;
        out.push(next);
        buffer.remove(0);
        buffer.push(next);
    }
    Ok(out)
}

/// Mean hold-out relative variance over five contiguous folds. Any fold
/// that fails to train or yields a non-finite score makes the fitness `+inf`.
pub fn cv_fitness(data: &SupervisedDataset, hyper: MsvrHyper, options: TrainOptions) -> Result<f64> {
    let n = data.len();
    if n < MIN_CV_PAIRS {
        return Err(Error::Size {
            what: "pairs for cross-validation",
            needed: MIN_CV_PAIRS,
            got: n,
        });
    }
    let mut total = 0.0;
    for (lo, hi) in fold_bounds(n, CV_FOLDS) {
        let train_rows: Vec<usize> = (0..lo).chain(hi..n).collect();
        let held_rows: Vec<usize> = (lo..hi).collect();
        let Ok((model, _)) = msvr::train(&data.subset(&train_rows), hyper, options) else {
            return Ok(f64::INFINITY);
        };
        let held = data.subset(&held_rows);
        let mut preds = Vec::with_capacity(held.len());
        for x in &held.inputs {
            match model.predict(x) {
                Ok(p) => preds.push(p),
                Err(_) => return Ok(f64::INFINITY),
            }
        }
        let score = relative_variance(&held.targets, &preds)?;
        if !score.is_finite() {
            return Ok(f64::INFINITY);
        }
        total += score;
    }
    Ok(total / CV_FOLDS as f64)
}

/// `[lo, hi)` row ranges of `k` contiguous, near-equal blocks.
pub fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|f| (f * n / k, (f + 1) * n / k)).collect()
}

/// `(2^p0, 2^p2, 2^p1)` read as `(C, epsilon, sigma)` from a
/// `(log2 C, log2 sigma, log2 eps)` position.
pub fn hyper_from_position(p: &[f64]) -> Result<MsvrHyper> {
    if p.len() != 3 {
        return Err(Error::Shape(format!("hyperparameter position of length {}", p.len())));
    }
    MsvrHyper::new(p[0].exp2(), p[2].exp2(), p[1].exp2())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub hyper: MsvrHyper,
    pub fitness: f64,
    pub search: FaOutcome,
}

/// Firefly search for the hyperparameters minimising [`cv_fitness`].
pub fn tune(data: &SupervisedDataset, fa: &FaConfig, options: TrainOptions) -> Result<TuneOutcome> {
    if fa.dim() != 3 {
        return Err(Error::Argument(format!("hyperparameter search needs 3 bounds, got {}", fa.dim())));
    }
    if data.len() < MIN_CV_PAIRS {
        return Err(Error::Size {
            what: "pairs for cross-validation",
            needed: MIN_CV_PAIRS,
            got: data.len(),
        });
    }
    let search = firefly::optimize(
        |p| match hyper_from_position(p) {
            Ok(hyper) => cv_fitness(data, hyper, options).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        },
        fa,
    )?;
    Ok(TuneOutcome {
        hyper: hyper_from_position(&search.best_position)?,
        fitness: search.best_fitness,
        search,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Msvr,
    Persistence,
    Univariate,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Msvr => "FA-MSVR",
            Method::Persistence => "Persistence",
            Method::Univariate => "FA-SVR",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub order: usize,
    pub fa: FaConfig,
    pub train: TrainOptions,
    pub method: Method,
}

impl PipelineConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            order: EMBEDDING_ORDER,
            fa: FaConfig::hyper_search(seed),
            train: TrainOptions::default(),
            method,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Msvr(MsvrForecaster),
    Persistence(Persistence),
    Univariate(UnivariateForecaster),
}

impl IntervalPredictor for Fitted {
    fn order(&self) -> usize {
        match self {
            Fitted::Msvr(p) => p.order(),
            Fitted::Persistence(p) => p.order(),
            Fitted::Univariate(p) => p.order(),
        }
    }

    fn predict_next(&self, history: &[Interval]) -> Result<Interval> {
        match self {
            Fitted::Msvr(p) => p.predict_next(history),
            Fitted::Persistence(p) => p.predict_next(history),
            Fitted::Univariate(p) => p.predict_next(history),
        }
    }
}

/// Everything learned from the estimation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub method: Method,
    pub predictor: Fitted,
    pub selection: Option<SelectionReport>,
    /// One tuning outcome per trained model (two for the univariate mode).
    pub tuning: Vec<TuneOutcome>,
}

/// Selects inputs, tunes and trains using only `estimation`.
pub fn fit_on_estimation(estimation: &IntervalSeries, config: &PipelineConfig) -> Result<FittedPipeline> {
    if config.method == Method::Persistence {
        return Ok(FittedPipeline {
            method: Method::Persistence,
            predictor: Fitted::Persistence(Persistence),
            selection: None,
            tuning: Vec::new(),
        });
    }
    let full = embed(estimation, config.order)?;
    let selection = forward_backward_select(&full)?;
    let data = full.select_inputs(selection.selected.indices());
    let vars = selection.selected.clone();
    let (predictor, tuning) = match config.method {
        Method::Msvr => {
            let tuned = tune(&data, &config.fa, config.train)?;
            let (model, _) = msvr::train(&data, tuned.hyper, config.train)?;
            (Fitted::Msvr(MsvrForecaster::new(model, vars, config.order)?), vec![tuned])
        }
        Method::Univariate => {
            let lower = tune(&data.target_column(0), &config.fa, config.train)?;
            let upper = tune(&data.target_column(1), &config.fa, config.train)?;
            let f = UnivariateForecaster::fit(&data, vars, config.order, lower.hyper, upper.hyper, config.train)?;
            (Fitted::Univariate(f), vec![lower, upper])
        }
        Method::Persistence => unreachable!(),
    };
    Ok(FittedPipeline {
        method: config.method,
        predictor,
        selection: Some(selection),
        tuning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub origin_index: usize,
    pub origin_date: NaiveDate,
    pub step: usize,
    pub actual: Interval,
    pub predicted: Interval,
}

impl ForecastRecord {
    pub fn violation(&self) -> bool {
        self.predicted.is_inverted()
    }
}

/// Hold-out forecasts at one horizon, one record per valid origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    pub horizon: usize,
    pub scale: Scale,
    pub records: Vec<ForecastRecord>,
}

impl ForecastRun {
    pub fn actuals(&self) -> Vec<Interval> {
        self.records.iter().map(|r| r.actual).collect()
    }

    pub fn predictions(&self) -> Vec<Interval> {
        self.records.iter().map(|r| r.predicted).collect()
    }

    pub fn arv(&self) -> Result<f64> {
        arv_interval(&self.actuals(), &self.predictions())
    }

    pub fn violation_count(&self) -> usize {
        self.records.iter().filter(|r| r.violation()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{RUN_MAGIC} horizon={} scale={}\n", self.horizon, self.scale);
        out.push_str("origin_date,step,actual_L,actual_U,pred_L,pred_U,violation_flag\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.origin_date,
                r.step,
                r.actual.lower,
                r.actual.upper,
                r.predicted.lower,
                r.predicted.upper,
                u8::from(r.violation())
            );
        }
        out
    }

    /// Parses [`ForecastRun::to_csv`] output. Origin indices are not stored
    /// and come back as row positions.
    pub fn from_csv<R: BufRead>(reader: R, origin: impl Into<PathBuf>) -> Result<Self> {
        let path = origin.into();
        let err = |line: usize, msg: String| Error::Parse {
            path: path.clone(),
            line,
            msg,
        };
        let mut lines = reader.lines();
        let magic = lines.next().transpose()?.unwrap_or_default();
        let rest = magic
            .strip_prefix(RUN_MAGIC)
            .ok_or_else(|| err(1, "missing forecast-run header".into()))?;
        let mut horizon = None;
        let mut scale = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("horizon", v)) => horizon = v.parse().ok(),
                Some(("scale", v)) => scale = v.parse().ok(),
                _ => {}
            }
        }
        let (Some(horizon), Some(scale)) = (horizon, scale) else {
            return Err(err(1, "header lacks horizon or scale".into()));
        };
        lines.next().transpose()?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 3;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(err(lineno, format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(lineno, format!("{s:?}: {e}")));
            records.push(ForecastRecord {
                origin_index: records.len(),
                origin_date: f[0]
                    .parse()
                    .map_err(|e| err(lineno, format!("date {:?}: {e}", f[0])))?,
                step: f[1].parse().map_err(|e| err(lineno, format!("step {:?}: {e}", f[1])))?,
                actual: Interval::new(num(f[2])?, num(f[3])?),
                predicted: Interval::new(num(f[4])?, num(f[5])?),
            });
        }
        Ok(ForecastRun {
            horizon,
            scale,
            records,
        })
    }
}

const RUN_MAGIC: &str = "# itsforge forecast-run v1";

/// Rolling-origin evaluation over the hold-out part of `series`, which
/// starts at position `holdout_start`. Each origin `t` with `t + h` still
/// inside the series is forecast from the true history up to `t`.
pub fn evaluate_holdout<P: IntervalPredictor + ?Sized>(
    predictor: &P,
    series: &IntervalSeries,
    holdout_start: usize,
    h: usize,
) -> Result<ForecastRun> {
    let n = series.len();
    if h == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    if holdout_start + h >= n {
        return Err(Error::Size {
            what: "hold-out intervals",
            needed: h + 1,
            got: n.saturating_sub(holdout_start),
        });
    }
    let ivs = series.intervals();
    let mut records = Vec::with_capacity(n - holdout_start - h);
    for t in holdout_start..n - h {
        let path = iterated_forecast(predictor, &ivs[..=t], h)?;
        records.push(ForecastRecord {
            origin_index: t,
            origin_date: series.dates()[t],
            step: h,
            actual: ivs[t + h],
            predicted: path[h - 1],
        });
    }
    Ok(ForecastRun {
        horizon: h,
        scale: series.scale(),
        records,
    })
}

/// Splits, fits on the estimation sample and scores the hold-out sample.
pub fn holdout_evaluate(series: &IntervalSeries, h: usize, config: &PipelineConfig) -> Result<(ForecastRun, f64)> {
    let e = estimation_len(series.len());
    let fitted = fit_on_estimation(&series.slice(0, e), config)?;
    let run = evaluate_holdout(&fitted.predictor, series, e, h)?;
    let arv = run.arv()?;
    Ok((run, arv))
}
