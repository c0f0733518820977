//! Epoch-second time helpers: durations, epoch-aligned bins and UTC days.

use chrono::{DateTime, NaiveDate};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Parses `300`, `300s`, `5m`, `4h`, `1.5h` or `1d` into seconds.
pub fn parse_duration(text: &str) -> Result<f64> {
    let text = text.trim();
    let (number, scale) = match text.char_indices().last() {
        Some((i, 's')) => (&text[..i], 1.0),
        Some((i, 'm')) => (&text[..i], 60.0),
        Some((i, 'h')) => (&text[..i], 3_600.0),
        Some((i, 'd')) => (&text[..i], SECONDS_PER_DAY),
        Some(_) => (text, 1.0),
        None => return Err(Error::arg("empty duration")),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| Error::arg(format!("bad duration {text:?}")))?;
    let seconds = value * scale;
    if !seconds.is_finite() || seconds <= 0.0 {
        return Err(Error::arg(format!("duration must be positive, got {text:?}")));
    }
    Ok(seconds)
}

/// Index of the epoch-aligned bin `[k*period, (k+1)*period)` holding `ts`.
pub fn bin_index(ts: f64, period: f64) -> i64 {
    (ts / period).floor() as i64
}

/// Calendar of UTC days, optionally shifted so that days start at
/// `offset` seconds after midnight.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DayCalendar {
    pub offset: f64,
}

impl DayCalendar {
    pub fn new(offset: f64) -> Self {
        Self { offset }
    }

    pub fn day_of(&self, ts: f64) -> i64 {
        ((ts - self.offset) / SECONDS_PER_DAY).floor() as i64
    }

    pub fn day_start(&self, day: i64) -> f64 {
        day as f64 * SECONDS_PER_DAY + self.offset
    }
}

/// `YYYY-MM-DD` label of a day index.
pub fn day_label(day: i64) -> String {
    DateTime::from_timestamp(day * 86_400, 0)
        .map(|dt| dt.date_naive().format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| format!("day{day}"))
}

/// Inverse of [`day_label`].
pub fn parse_day_label(label: &str) -> Result<i64> {
    let date = NaiveDate::parse_from_str(label.trim(), "%Y-%m-%d")
        .map_err(|_| Error::arg(format!("bad date {label:?}, expected YYYY-MM-DD")))?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch");
    Ok(date.signed_duration_since(epoch).num_days())
}
