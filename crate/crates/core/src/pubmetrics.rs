//! Liquidity measures from public data only: Garman-Klass volatility,
//! daily volume, the square-root-law drop forecast and the `sigma/V` ratio.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{build_bars, Bar, TradeRecord};
use crate::time::{day_label, DayCalendar, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GkEstimate {
    pub sigma: f64,
    /// Mean per-bar Garman-Klass variance.
    pub bar_variance: f64,
    /// The summed estimator came out negative and was floored at zero.
    pub floored: bool,
}

/// Garman-Klass volatility from one day's bars.
///
/// Each bar contributes `0.5 ln(H/L)^2 - (2 ln 2 - 1) ln(C/O)^2`. The mean
/// over the `T` observed bars estimates the variance of one sub-period; it
/// is scaled by `periods_per_day` (24 for hourly bars) to a daily variance.
/// With `periods_per_day == T` this is the plain sum over the day.
pub fn gk_volatility(bars: &[Bar], periods_per_day: f64) -> Result<GkEstimate> {
    if bars.is_empty() {
        return Err(Error::InsufficientData("no bars".into()));
    }
    if !(periods_per_day > 0.0 && periods_per_day.is_finite()) {
        return Err(Error::arg("periods per day must be positive"));
    }
    let k = 2.0 * std::f64::consts::LN_2 - 1.0;
    let mut sum = 0.0;
    for b in bars {
        if [b.open, b.high, b.low, b.close].iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::arg(format!("bar at {} has a non-positive price", b.start)));
        }
        sum += 0.5 * (b.high / b.low).ln().powi(2) - k * (b.close / b.open).ln().powi(2);
    }
    let bar_variance = sum / bars.len() as f64;
    let variance = bar_variance * periods_per_day;
    Ok(GkEstimate {
        sigma: variance.max(0.0).sqrt(),
        bar_variance,
        floored: variance < 0.0,
    })
}

fn check_inputs(sigma_d: f64, v_d: f64) -> Result<()> {
    if !(sigma_d >= 0.0 && sigma_d.is_finite()) {
        return Err(Error::arg(format!("sigma_d must be non-negative, got {sigma_d}")));
    }
    if !(v_d >= 0.0 && v_d.is_finite()) {
        return Err(Error::arg(format!("v_d must be non-negative, got {v_d}")));
    }
    if v_d == 0.0 {
        return Err(Error::UndefinedLiquidity("zero daily volume".into()));
    }
    Ok(())
}

/// Square-root-law drop forecast `y * sigma_d * sqrt(q_star / v_d)`, the
/// inverse of theoretical liquidity.
pub fn theoretical_drop(sigma_d: f64, v_d: f64, y: f64, q_star: f64) -> Result<f64> {
    check_inputs(sigma_d, v_d)?;
    if !(q_star >= 0.0 && q_star.is_finite()) {
        return Err(Error::arg(format!("q_star must be non-negative, got {q_star}")));
    }
    Ok(y * sigma_d * (q_star / v_d).sqrt())
}

/// Theoretical liquidity: the volume moving the price by `phi` under the
/// square-root law, `v_d * (phi / (y * sigma_d))^2`.
pub fn theoretical_liquidity(sigma_d: f64, v_d: f64, y: f64, phi: f64) -> Result<f64> {
    check_inputs(sigma_d, v_d)?;
    if y * sigma_d == 0.0 {
        return Err(Error::UndefinedLiquidity("zero impact coefficient or volatility".into()));
    }
    Ok(v_d * (phi / (y * sigma_d)).powi(2))
}

/// Volatility over volume, `sigma_d / v_d`.
pub fn amihud_illiq(sigma_d: f64, v_d: f64) -> Result<f64> {
    check_inputs(sigma_d, v_d)?;
    Ok(sigma_d / v_d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyMetrics {
    pub day: i64,
    pub date: String,
    pub sigma_d: f64,
    pub v_d: f64,
    pub y: f64,
    pub illiq_amihud: Option<f64>,
    /// `(q_star, drop)` pairs in the requested order.
    pub drop_th: Vec<(f64, Option<f64>)>,
    pub bars: usize,
    pub floored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryConfig {
    pub bar_period: f64,
    pub calendar: DayCalendar,
    pub y: f64,
    pub q_stars: Vec<f64>,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            bar_period: 3_600.0,
            calendar: DayCalendar::default(),
            y: 1.0,
            q_stars: vec![40_000.0],
        }
    }
}

/// Splits time-ordered trades into calendar days.
pub fn split_days(trades: &[TradeRecord], calendar: DayCalendar) -> Vec<(i64, &[TradeRecord])> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < trades.len() {
        let day = calendar.day_of(trades[start].timestamp);
        let len = trades[start..].partition_point(|t| calendar.day_of(t.timestamp) == day);
        out.push((day, &trades[start..start + len]));
        start += len;
    }
    out
}

/// Metrics for one day of trades.
pub fn day_metrics(day: i64, trades: &[TradeRecord], cfg: &TheoryConfig) -> Result<DailyMetrics> {
    let bars = build_bars(trades, cfg.bar_period)?;
    let gk = gk_volatility(&bars, SECONDS_PER_DAY / cfg.bar_period)?;
    let v_d: f64 = trades.iter().map(|t| t.volume).sum();
    let defined = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedLiquidity(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let drop_th = cfg
        .q_stars
        .iter()
        .map(|&q| Ok((q, defined(theoretical_drop(gk.sigma, v_d, cfg.y, q))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DailyMetrics {
        day,
        date: day_label(day),
        sigma_d: gk.sigma,
        v_d,
        y: cfg.y,
        illiq_amihud: defined(amihud_illiq(gk.sigma, v_d))?,
        drop_th,
        bars: bars.len(),
        floored: gk.floored,
    })
}

/// Per-day metrics for every day that has trades.
pub fn daily_metrics(trades: &[TradeRecord], cfg: &TheoryConfig) -> Result<Vec<DailyMetrics>> {
    split_days(trades, cfg.calendar)
        .into_iter()
        .map(|(day, slice)| day_metrics(day, slice, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bar(o: f64, h: f64, l: f64, c: f64) -> Bar {
        Bar { start: 0.0, open: o, high: h, low: l, close: c, volume: 1.0 }
    }

    #[test]
    fn single_bar_by_hand() {
        let g = gk_volatility(&[bar(100.0, 110.0, 90.0, 100.0)], 1.0).unwrap();
        let want = 0.5 * (110.0f64 / 90.0).ln().powi(2);
        assert_relative_eq!(g.sigma * g.sigma, want, max_relative = 1e-14);
        assert_relative_eq!(g.sigma * g.sigma, 0.020134, max_relative = 1e-4);
        assert_relative_eq!(g.sigma, 0.14189, max_relative = 1e-4);
    }

    #[test]
    fn constant_and_scaled() {
        let flat = vec![bar(5.0, 5.0, 5.0, 5.0); 24];
        assert_eq!(gk_volatility(&flat, 24.0).unwrap().sigma, 0.0);
        let bars = vec![bar(100.0, 103.0, 98.0, 101.0), bar(101.0, 104.0, 99.5, 99.7)];
        let scaled: Vec<Bar> = bars.iter().map(|b| bar(7.0 * b.open, 7.0 * b.high, 7.0 * b.low, 7.0 * b.close)).collect();
        assert_relative_eq!(
            gk_volatility(&bars, 24.0).unwrap().sigma,
            gk_volatility(&scaled, 24.0).unwrap().sigma,
            max_relative = 1e-12
        );
    }

    #[test]
    fn negative_estimate_is_floored() {
        // open-close move larger than the range: impossible in real bars,
        // but the estimator must not return NaN
        let g = gk_volatility(&[bar(100.0, 101.0, 101.0, 110.0)], 24.0).unwrap();
        assert!(g.floored && g.sigma == 0.0);
    }

    #[test]
    fn bad_bars() {
        assert!(gk_volatility(&[], 24.0).is_err());
        assert!(gk_volatility(&[bar(0.0, 1.0, 1.0, 1.0)], 24.0).is_err());
    }

    #[test]
    fn theory_examples() {
        assert_relative_eq!(theoretical_drop(0.04, 10_000.0, 1.0, 2_500.0).unwrap(), 0.02, max_relative = 1e-15);
        assert_eq!(theoretical_drop(0.04, 10_000.0, 1.3, 10_000.0).unwrap(), 1.3 * 0.04);
        assert_eq!(theoretical_drop(0.04, 10_000.0, 1.0, 0.0).unwrap(), 0.0);
        assert!(matches!(theoretical_drop(0.04, 0.0, 1.0, 1.0), Err(Error::UndefinedLiquidity(_))));
        assert_relative_eq!(theoretical_liquidity(0.04, 10_000.0, 1.0, 0.02).unwrap(), 2_500.0, max_relative = 1e-12);
        assert!(theoretical_liquidity(0.0, 10_000.0, 1.0, 0.02).is_err());
    }

    #[test]
    fn amihud_examples() {
        assert_relative_eq!(amihud_illiq(0.04, 10_000.0).unwrap(), 4e-6, max_relative = 1e-15);
        assert_eq!(amihud_illiq(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(amihud_illiq(0.04, 20_000.0).unwrap(), 0.5 * amihud_illiq(0.04, 10_000.0).unwrap());
        assert!(matches!(amihud_illiq(0.04, 0.0), Err(Error::UndefinedLiquidity(_))));
    }

    #[test]
    fn days_split_at_midnight() {
        let trades: Vec<TradeRecord> = [10.0, 86_399.0, 86_400.0, 3.0 * 86_400.0]
            .iter()
            .map(|&t| TradeRecord::new(t, 10.0, 2.0))
            .collect();
        let days = split_days(&trades, DayCalendar::default());
        let shape: Vec<(i64, usize)> = days.iter().map(|(d, s)| (*d, s.len())).collect();
        assert_eq!(shape, vec![(0, 2), (1, 1), (3, 1)]);
        let m = daily_metrics(&trades, &TheoryConfig::default()).unwrap();
        assert_eq!(m[0].v_d, 4.0);
        assert_eq!(m[0].date, "1970-01-01");
        assert_eq!(m[0].sigma_d, 0.0);
        assert_eq!(m[0].drop_th, vec![(40_000.0, Some(0.0))]);
    }
}
