//! Interval-valued time series forecasting with a multi-output support
//! vector regressor, firefly hyperparameter search, statistical comparison
//! and a confirmation-based trading backtest.

pub mod baseline;
pub mod error;
pub mod interval;
pub mod kernel;
pub mod firefly;
pub mod forecast;
pub mod msvr;
pub mod select;
pub mod stats;
pub mod trading;

pub use error::{Error, Result};
