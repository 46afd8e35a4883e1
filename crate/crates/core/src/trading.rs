//! Long-only trading rule driven by interval forecasts.
//!
//! On day `t` the forecast interval for day `t + h` is compared with the
//! day's open: the market is bullish when the forecast upper bound sits
//! further above the open than the lower bound sits below it. A buy executes
//! at the close of the `k`-th consecutive bullish day; once long, a sell
//! executes at the close of the `k`-th consecutive bearish day. Any
//! non-signal day resets the count.

use std::fmt::Write as _;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::interval::{Interval, OhlcRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradingParams {
    /// Consecutive signal days required before acting.
    pub k: usize,
    pub h: usize,
    /// Round-trip transaction cost as a fraction of the position.
    pub cost: f64,
}

impl TradingParams {
    pub fn new(k: usize, h: usize) -> Self {
        Self { k, h, cost: 0.001 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.h == 0 {
            return Err(Error::Argument("k and h must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.cost) {
            return Err(Error::Argument(format!("cost {} outside [0, 1)", self.cost)));
        }
        Ok(())
    }
}

pub fn buy_signal(pred_low: f64, pred_high: f64, open: f64) -> bool {
    pred_high - open > open - pred_low
}

pub fn sell_signal(pred_low: f64, pred_high: f64, open: f64) -> bool {
    pred_high - open < open - pred_low
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub buy_day: usize,
    pub sell_day: usize,
    pub buy_date: NaiveDate,
    pub sell_date: NaiveDate,
    pub buy_close: f64,
    pub sell_close: f64,
    /// Percent return net of cost.
    pub r: f64,
    /// `r / holding_days * 365`.
    pub ar: f64,
}

impl Trade {
    pub fn holding_days(&self) -> usize {
        self.sell_day - self.buy_day
    }
}

/// Percent return of a round trip net of `cost` and its annualised value.
pub fn trade_returns(buy_close: f64, sell_close: f64, holding_days: usize, cost: f64) -> (f64, f64) {
    let r = (sell_close - buy_close) / buy_close * 100.0 - cost * 100.0;
    (r, r / holding_days as f64 * 365.0)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TradeLedger {
    pub trades: Vec<Trade>,
    /// A position was still open at the end of the window and was left out.
    pub open_position_discarded: bool,
}

#[derive(Debug, Clone, Copy)]
enum State {
    Flat { run: usize },
    Long { buy_day: usize, run: usize },
}

/// Runs the rule over `prices`. `forecasts[t]` is the price-space interval
/// forecast for day `t + h`, available after the close of day `t`.
pub fn simulate(prices: &[OhlcRecord], forecasts: &[Interval], params: &TradingParams) -> Result<TradeLedger> {
    params.validate()?;
    if prices.len() != forecasts.len() {
        return Err(Error::Alignment(format!(
            "{} price days but {} forecasts",
            prices.len(),
            forecasts.len()
        )));
    }
    let mut ledger = TradeLedger::default();
    let mut state = State::Flat { run: 0 };
    for (t, (day, f)) in prices.iter().zip(forecasts).enumerate() {
        state = match state {
            State::Flat { run } => {
                if buy_signal(f.lower, f.upper, day.open) {
                    if run + 1 == params.k {
                        State::Long { buy_day: t, run: 0 }
                    } else {
                        State::Flat { run: run + 1 }
                    }
                } else {
                    State::Flat { run: 0 }
                }
            }
            State::Long { buy_day, run } => {
                if sell_signal(f.lower, f.upper, day.open) {
                    if run + 1 == params.k {
                        let buy = &prices[buy_day];
                        let (r, ar) = trade_returns(buy.close, day.close, t - buy_day, params.cost);
                        ledger.trades.push(Trade {
                            buy_day,
                            sell_day: t,
                            buy_date: buy.date,
                            sell_date: day.date,
                            buy_close: buy.close,
                            sell_close: day.close,
                            r,
                            ar,
                        });
                        State::Flat { run: 0 }
                    } else {
                        State::Long { buy_day, run: run + 1 }
                    }
                } else {
                    State::Long { buy_day, run: 0 }
                }
            }
        };
    }
    ledger.open_position_discarded = matches!(state, State::Long { .. });
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeSummary {
    /// Mean annualised percent return.
    pub average_ar: f64,
    /// Percent of trades with positive annualised return.
    pub positive_pct: f64,
    pub trades: usize,
}

/// `None` when the ledger holds no closed trades.
pub fn summarize(ledger: &TradeLedger) -> Option<TradeSummary> {
    summarize_trades(&ledger.trades)
}

pub fn summarize_trades(trades: &[Trade]) -> Option<TradeSummary> {
    if trades.is_empty() {
        return None;
    }
    let n = trades.len() as f64;
    Some(TradeSummary {
        average_ar: trades.iter().map(|t| t.ar).sum::<f64>() / n,
        positive_pct: trades.iter().filter(|t| t.ar > 0.0).count() as f64 / n * 100.0,
        trades: trades.len(),
    })
}

pub fn ledger_csv(ledger: &TradeLedger) -> String {
    let mut out = String::from("buy_date,sell_date,holding_days,R_percent,AR_percent\n");
    for t in &ledger.trades {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6}",
            t.buy_date,
            t.sell_date,
            t.holding_days(),
            t.r,
            t.ar
        );
    }
    out
}
