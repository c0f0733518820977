//! Alignment, mean-rescaling and regression of the per-day illiquidity
//! series, plus the forecast-versus-realized crash table.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Serialize;

use crate::book::{expected_move, BookSnapshot, Side};
use crate::error::{Error, Result};
use crate::flow::CrashEvent;
use crate::stats::{correlation, mean};
use crate::time::parse_day_label;

/// Names of the aligned columns, in output order.
pub const COLUMNS: [&str; 4] = ["l_ob_inv", "l_i_inv", "l_th_inv", "illiq"];

/// Reads one column of a per-day CSV keyed by a leading `date` column.
///
/// Lines starting with `#` and blank lines are ignored; the first remaining
/// line is the header. Empty and `NaN` cells are missing days and are left
/// out of the map.
pub fn parse_daily_column<R: BufRead>(reader: R, column: &str) -> Result<BTreeMap<i64, f64>> {
    let mut out = BTreeMap::new();
    let mut index: Option<usize> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let bad = |message: String| Error::Parse { line: line_no, message };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let Some(k) = index else {
            if fields[0] != "date" {
                return Err(bad(format!("first column must be date, found {:?}", fields[0])));
            }
            let k = fields
                .iter()
                .position(|f| *f == column)
                .ok_or_else(|| bad(format!("no column named {column:?}")))?;
            index = Some(k);
            continue;
        };
        let day = parse_day_label(fields[0]).map_err(|e| bad(e.to_string()))?;
        let cell = fields.get(k).copied().unwrap_or("");
        if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
            continue;
        }
        let value: f64 = cell.parse().map_err(|_| bad(format!("not a number: {cell:?}")))?;
        if !value.is_finite() {
            return Err(bad(format!("not finite: {cell:?}")));
        }
        if out.insert(day, value).is_some() {
            return Err(bad(format!("duplicate date {}", fields[0])));
        }
    }
    if index.is_none() {
        return Err(Error::InsufficientData("no header line".into()));
    }
    Ok(out)
}

/// Per-day drop forecasts on a contiguous calendar index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedSeries {
    pub days: Vec<i64>,
    pub l_ob_inv: Vec<Option<f64>>,
    pub l_i_inv: Vec<Option<f64>>,
    pub l_th_inv: Vec<Option<f64>>,
    pub illiq: Vec<Option<f64>>,
    /// True where any source lacks the day.
    pub mask: Vec<bool>,
}

impl AlignedSeries {
    /// Aligns day-keyed values over every day from the earliest to the latest
    /// seen in any source.
    pub fn align(
        l_ob_inv: &BTreeMap<i64, f64>,
        l_i_inv: &BTreeMap<i64, f64>,
        l_th_inv: &BTreeMap<i64, f64>,
        illiq: &BTreeMap<i64, f64>,
    ) -> Self {
        let sources = [l_ob_inv, l_i_inv, l_th_inv, illiq];
        let first = sources.iter().filter_map(|s| s.keys().next()).min().copied();
        let last = sources.iter().filter_map(|s| s.keys().next_back()).max().copied();
        let days: Vec<i64> = match (first, last) {
            (Some(a), Some(b)) => (a..=b).collect(),
            _ => Vec::new(),
        };
        let column = |s: &BTreeMap<i64, f64>| -> Vec<Option<f64>> {
            days.iter().map(|d| s.get(d).copied().filter(|v| v.is_finite())).collect()
        };
        let mut out = Self {
            l_ob_inv: column(l_ob_inv),
            l_i_inv: column(l_i_inv),
            l_th_inv: column(l_th_inv),
            illiq: column(illiq),
            mask: Vec::new(),
            days,
        };
        out.mask = (0..out.days.len())
            .map(|i| out.columns().iter().any(|c| c[i].is_none()))
            .collect();
        out
    }

    pub fn columns(&self) -> [&Vec<Option<f64>>; 4] {
        [&self.l_ob_inv, &self.l_i_inv, &self.l_th_inv, &self.illiq]
    }

    fn columns_mut(&mut self) -> [&mut Vec<Option<f64>>; 4] {
        [&mut self.l_ob_inv, &mut self.l_i_inv, &mut self.l_th_inv, &mut self.illiq]
    }

    /// A column with masked days blanked out (listwise deletion).
    pub fn masked(&self, column: usize) -> Vec<Option<f64>> {
        self.columns()[column]
            .iter()
            .zip(&self.mask)
            .map(|(v, &m)| if m { None } else { *v })
            .collect()
    }

    /// Unmasked values of a column.
    fn complete(&self, column: usize) -> Vec<f64> {
        self.masked(column).into_iter().flatten().collect()
    }

    /// Rescales the impact, theoretical and Amihud columns so their means
    /// over the unmasked days equal the order-book column's. Returns the
    /// three factors in column order.
    pub fn rescaled(&self) -> Result<(Self, [f64; 3])> {
        let target = self.complete(0);
        let mut out = self.clone();
        let mut factors = [1.0; 3];
        for c in 1..4 {
            let r = rescale_to_mean(&self.complete(c), &target)?;
            factors[c - 1] = r.factor;
            for v in out.columns_mut()[c].iter_mut().flatten() {
                *v *= r.factor;
            }
        }
        Ok((out, factors))
    }

    /// Natural logs of every value; non-positive values become missing.
    pub fn logged(&self) -> Self {
        let mut out = self.clone();
        for c in out.columns_mut() {
            for v in c.iter_mut() {
                *v = v.filter(|x| *x > 0.0).map(f64::ln);
            }
        }
        out.mask = (0..out.days.len())
            .map(|i| self.mask[i] || out.columns().iter().any(|c| c[i].is_none()))
            .collect();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rescaled {
    pub values: Vec<f64>,
    pub factor: f64,
}

/// Multiplies `source` by `mean(target) / mean(source)`.
pub fn rescale_to_mean(source: &[f64], target: &[f64]) -> Result<Rescaled> {
    let (Some(ms), Some(mt)) = (mean(source), mean(target)) else {
        return Err(Error::InsufficientData("rescaling needs non-empty series".into()));
    };
    if ms == 0.0 || !ms.is_finite() {
        return Err(Error::Estimation("source mean is zero".into()));
    }
    let factor = mt / ms;
    Ok(Rescaled {
        values: source.iter().map(|v| v * factor).collect(),
        factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionReport {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub lag: usize,
    pub n: usize,
}

/// Ordinary least squares of `y[t]` on `x[t - lag]` over the days where
/// both are present.
pub fn regress(x: &[Option<f64>], y: &[Option<f64>], lag: usize) -> Result<RegressionReport> {
    let pairs: Vec<(f64, f64)> = (lag..y.len().min(x.len() + lag))
        .filter_map(|t| Some((x[t - lag]?, y[t]?)))
        .collect();
    let n = pairs.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("regression needs 3 pairs, got {n}")));
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Estimation("regressor has zero variance".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(RegressionReport {
        slope,
        intercept: my - slope * mx,
        r2,
        lag,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledRegression {
    /// Regressor column, one of `l_i_inv`, `l_th_inv`, `illiq`.
    pub x: String,
    #[serde(flatten)]
    pub report: Option<RegressionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub days: usize,
    pub complete_days: usize,
    /// Factors applied to `l_i_inv`, `l_th_inv`, `illiq`.
    pub rescale_factors: [f64; 3],
    pub log: bool,
    pub regressions: Vec<LabeledRegression>,
}

/// Regresses the order-book illiquidity on each other measure at each lag,
/// after mean-rescaling (and optionally taking logs).
pub fn compare(aligned: &AlignedSeries, lags: &[usize], log: bool) -> Result<(ComparisonReport, AlignedSeries)> {
    let (rescaled, factors) = aligned.rescaled()?;
    let input = if log { rescaled.logged() } else { rescaled.clone() };
    let y = input.masked(0);
    let mut regressions = Vec::new();
    for &lag in lags {
        for (c, name) in COLUMNS.iter().enumerate().skip(1) {
            let result = regress(&input.masked(c), &y, lag);
            regressions.push(LabeledRegression {
                x: name.to_string(),
                error: result.as_ref().err().map(|e| e.to_string()),
                report: result.ok(),
            });
        }
    }
    let report = ComparisonReport {
        days: aligned.days.len(),
        complete_days: aligned.mask.iter().filter(|m| !**m).count(),
        rescale_factors: factors,
        log,
        regressions,
    };
    Ok((report, rescaled))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrashRow {
    pub event: CrashEvent,
    /// Timestamp of the snapshot used for the forecast.
    pub snapshot_ts: Option<f64>,
    /// No snapshot strictly precedes the event.
    pub flagged: bool,
    /// The imbalance exhausted the opposite side of the book.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrashTable {
    pub rows: Vec<CrashRow>,
    /// Correlation of forecast against realized return over unflagged rows.
    pub correlation: Option<f64>,
}

/// Liquidity-adjusted imbalance per event: the book-implied move for the
/// event's base-unit imbalance, read from the latest snapshot strictly
/// before the event starts. Sells consume bids (negative forecast), buys
/// consume asks.
pub fn crash_table(events: &[CrashEvent], snapshots: &[BookSnapshot]) -> Result<CrashTable> {
    let mut ordered: Vec<&BookSnapshot> = snapshots.iter().collect();
    ordered.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    let mut rows = Vec::with_capacity(events.len());
    for e in events {
        let k = ordered.partition_point(|s| s.ts < e.start);
        let mut event = *e;
        let Some(snap) = k.checked_sub(1).map(|i| ordered[i]) else {
            event.forecast_drop = None;
            rows.push(CrashRow { event, snapshot_ts: None, flagged: true, saturated: false });
            continue;
        };
        let q = e.imbalance_base;
        let (forecast, saturated) = if q == 0.0 {
            (0.0, false)
        } else {
            let side = if q < 0.0 { Side::Buy } else { Side::Sell };
            let m = expected_move(snap, q.abs(), side)?;
            (q.signum() * m.phi, m.saturated)
        };
        event.forecast_drop = Some(forecast);
        rows.push(CrashRow { event, snapshot_ts: Some(snap.ts), flagged: false, saturated });
    }
    let (f, r): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|row| !row.flagged)
        .map(|row| (row.event.forecast_drop.unwrap_or(0.0), row.event.realized_return))
        .unzip();
    Ok(CrashTable {
        correlation: correlation(&f, &r),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::Level;
    use approx::assert_relative_eq;

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn rescale_examples() {
        let r = rescale_to_mean(&[1.0, 2.0, 3.0], &[4.0, 4.0]).unwrap();
        assert_eq!(r.values, vec![2.0, 4.0, 6.0]);
        assert_eq!(r.factor, 2.0);
        let same = rescale_to_mean(&[1.0, 5.0], &[1.0, 5.0]).unwrap();
        assert_eq!(same.factor, 1.0);
        assert_eq!(same.values, vec![1.0, 5.0]);
        assert!(rescale_to_mean(&[1.0, -1.0], &[1.0]).is_err());
        assert!(rescale_to_mean(&[], &[1.0]).is_err());
    }

    #[test]
    fn regression_examples() {
        let x = some(&[1.0, 2.0, 3.0, 4.0]);
        let r = regress(&x, &some(&[2.0, 4.0, 6.0, 8.0]), 0).unwrap();
        assert_relative_eq!(r.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.r2, 1.0, epsilon = 1e-12);
        assert_eq!(r.n, 4);
        let flat = regress(&x, &some(&[3.0; 4]), 0).unwrap();
        assert_eq!(flat.r2, 0.0);
        assert!(regress(&some(&[1.0; 4]), &x, 0).is_err());
        assert!(regress(&x[..2], &x[..2], 0).is_err());
    }

    #[test]
    fn daily_column_reader() {
        let text = "# liq meta\ndate,value,n\n2013-01-01,0.5,3\n2013-01-02,NaN,0\n\n2013-01-04,,1\n2013-01-05,1e-3,2\n";
        let col = parse_daily_column(text.as_bytes(), "value").unwrap();
        let days: Vec<i64> = col.keys().copied().collect();
        assert_eq!(days, vec![15706, 15710]);
        assert_eq!(col[&15710], 1e-3);
        assert!(parse_daily_column(text.as_bytes(), "missing").is_err());
        assert!(parse_daily_column("ts,value\n1,2\n".as_bytes(), "value").is_err());
        assert!(parse_daily_column("date,value\n2013-01-01,1\n2013-01-01,2\n".as_bytes(), "value").is_err());
        assert!(parse_daily_column("".as_bytes(), "value").is_err());
    }

    #[test]
    fn lag_uses_previous_day() {
        // y[t] = 3 * x[t-1]
        let x = some(&[1.0, 5.0, 2.0, 7.0, 3.0]);
        let y: Vec<Option<f64>> = std::iter::once(None)
            .chain(x[..4].iter().map(|v| v.map(|v| 3.0 * v)))
            .collect();
        let r = regress(&x, &y, 1).unwrap();
        assert_eq!(r.n, 4);
        assert_relative_eq!(r.slope, 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.r2, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn alignment_masks_gaps() {
        let m = |pairs: &[(i64, f64)]| pairs.iter().copied().collect::<BTreeMap<_, _>>();
        let a = AlignedSeries::align(
            &m(&[(1, 1.0), (2, 2.0), (4, 4.0)]),
            &m(&[(1, 1.0), (2, 2.0), (4, 4.0)]),
            &m(&[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]),
            &m(&[(1, 1.0), (4, 4.0)]),
        );
        assert_eq!(a.days, vec![1, 2, 3, 4]);
        assert_eq!(a.mask, vec![false, true, true, false]);
        assert_eq!(a.masked(2), vec![Some(1.0), None, None, Some(4.0)]);
    }

    fn uniform_book(ts: f64) -> BookSnapshot {
        let bids = (0..100).map(|i| Level::new(99.5 - i as f64, 100.0)).collect();
        let asks = (0..100).map(|i| Level::new(100.5 + i as f64, 100.0)).collect();
        BookSnapshot::new(ts, bids, asks, None).unwrap()
    }

    fn event(start: f64, ret: f64, ob: f64) -> CrashEvent {
        CrashEvent {
            start,
            end: start + 10.0,
            realized_return: ret,
            imbalance_base: ob,
            imbalance_quote: ob * 100.0,
            forecast_drop: None,
        }
    }

    #[test]
    fn crash_table_rows() {
        let books = vec![uniform_book(50.0)];
        let t = crash_table(
            &[event(100.0, -0.1, -1000.0), event(200.0, 0.0, 0.0), event(10.0, -0.2, -50.0)],
            &books,
        )
        .unwrap();
        // step inverse: 1000 units reach the 90.5 level, within one level of -0.10
        let f = t.rows[0].event.forecast_drop.unwrap();
        assert!((f + 0.10).abs() <= 0.01);
        assert_eq!(t.rows[1].event.forecast_drop, Some(0.0));
        assert!(t.rows[2].flagged && t.rows[2].event.forecast_drop.is_none());
    }

    #[test]
    fn snapshot_must_strictly_precede() {
        let t = crash_table(&[event(50.0, -0.1, -10.0)], &[uniform_book(50.0)]).unwrap();
        assert!(t.rows[0].flagged);
    }
}
