//! Experiment driver for interval-valued forecasting with FA-MSVR.

pub mod commands;
pub mod config;
pub mod experiment;
