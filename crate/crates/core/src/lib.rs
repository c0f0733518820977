//! Liquidity measures for crash-amplitude forecasting.
//!
//! Three views of the same question, how far would the price fall if a
//! large sell order hit the market now:
//!
//! * [`book`]: the visible order book, walked down until the sell volume is
//!   absorbed;
//! * [`impact`]: the empirical impact of reconstructed meta-orders;
//! * [`pubmetrics`]: the square-root law `Y * sigma_d * sqrt(Q / V_d)` from
//!   public volatility and volume data.
//!
//! [`compare`] aligns the three per-day series and regresses them against
//! each other; [`flow`] finds extreme sell-offs and their imbalances;
//! [`synth`] generates markets with known ground truth.

pub mod book;
pub mod compare;
pub mod error;
pub mod flow;
pub mod format;
pub mod impact;
pub mod ingest;
pub mod pipeline;
pub mod pubmetrics;
pub mod stats;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
