//! Reference predictors: persistence and per-bound single-output regressors.

use crate::error::{Error, Result};
use crate::forecast::{check_vars, restricted_input, IntervalPredictor};
use crate::interval::{Interval, SupervisedDataset};
use crate::msvr::{self, MsvrHyper, MsvrModel, TrainOptions};
use crate::select::VariableSet;

/// Returns the last observed interval.
pub fn persistence_predict(history: &[Interval]) -> Result<Interval> {
    history.last().copied().ok_or(Error::Size {
        what: "history intervals",
        needed: 1,
        got: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Persistence;

impl IntervalPredictor for Persistence {
    fn order(&self) -> usize {
        1
    }

    fn predict_next(&self, history: &[Interval]) -> Result<Interval> {
        persistence_predict(history)
    }
}

/// Two independent single-output models, one per bound.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateForecaster {
    pub lower: MsvrModel,
    pub upper: MsvrModel,
    pub vars: VariableSet,
    pub order: usize,
}

impl UnivariateForecaster {
    /// Trains each bound on the same `vars`-restricted inputs. `data` must
    /// already be restricted to `vars` and carry two target columns.
    pub fn fit(
        data: &SupervisedDataset,
        vars: VariableSet,
        order: usize,
        hyper_lower: MsvrHyper,
        hyper_upper: MsvrHyper,
        options: TrainOptions,
    ) -> Result<Self> {
        check_vars(&vars, order)?;
        if data.output_dim() != 2 || data.input_dim() != vars.len() {
            return Err(Error::Shape(format!(
                "expected {} inputs and 2 targets, got {} and {}",
                vars.len(),
                data.input_dim(),
                data.output_dim()
            )));
        }
        let (lower, _) = msvr::train(&data.target_column(0), hyper_lower, options)?;
        let (upper, _) = msvr::train(&data.target_column(1), hyper_upper, options)?;
        Ok(Self {
            lower,
            upper,
            vars,
            order,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Interval> {
        Ok(Interval::new(self.lower.predict(x)?[0], self.upper.predict(x)?[0]))
    }
}

impl IntervalPredictor for UnivariateForecaster {
    fn order(&self) -> usize {
        self.order
    }

    fn predict_next(&self, history: &[Interval]) -> Result<Interval> {
        self.predict(&restricted_input(history, &self.vars, self.order)?)
    }
}

/// Fits the per-bound models and forecasts one step from each of `inputs`.
pub fn univariate_fit_predict(
    data: &SupervisedDataset,
    vars: VariableSet,
    order: usize,
    hyper_lower: MsvrHyper,
    hyper_upper: MsvrHyper,
    inputs: &[Vec<f64>],
) -> Result<(UnivariateForecaster, Vec<Interval>)> {
    let f = UnivariateForecaster::fit(data, vars, order, hyper_lower, hyper_upper, TrainOptions::default())?;
    let preds = inputs.iter().map(|x| f.predict(x)).collect::<Result<Vec<_>>>()?;
    Ok((f, preds))
}
