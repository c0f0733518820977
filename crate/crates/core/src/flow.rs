//! Trade signing, windowed order-flow imbalance and extreme-return events.

use serde::Serialize;

use crate::book::Unit;
use crate::error::{Error, Result};
use crate::ingest::{Sign, TradeRecord};
use crate::time::bin_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignSource {
    Given,
    TickRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedTrade {
    pub trade: TradeRecord,
    pub sign: Sign,
    pub source: SignSource,
}

impl SignedTrade {
    pub fn signed_volume(&self) -> f64 {
        self.sign.value() * self.trade.volume
    }

    pub fn signed_value(&self) -> f64 {
        self.sign.value() * self.trade.volume * self.trade.price
    }

    fn signed_amount(&self, unit: Unit) -> f64 {
        match unit {
            Unit::Base => self.signed_volume(),
            Unit::Quote => self.signed_value(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Signing {
    pub trades: Vec<SignedTrade>,
    /// The first unsigned trade had no reference price and was defaulted
    /// to a buy.
    pub defaulted_first: bool,
}

/// Resolves missing signs with the tick rule: up-tick buys, down-tick sells,
/// zero-tick repeats the previous sign. Explicit signs pass through.
pub fn sign_trades(trades: &[TradeRecord]) -> Signing {
    let mut out = Vec::with_capacity(trades.len());
    let mut defaulted_first = false;
    let mut last_price: Option<f64> = None;
    let mut last_sign: Option<Sign> = None;
    for t in trades {
        let (sign, source) = match t.sign {
            Some(s) => (s, SignSource::Given),
            None => {
                let s = match (last_price, last_sign) {
                    (Some(p), _) if t.price > p => Sign::Buy,
                    (Some(p), _) if t.price < p => Sign::Sell,
                    (_, Some(s)) => s,
                    _ => {
                        defaulted_first = true;
                        Sign::Buy
                    }
                };
                (s, SignSource::TickRule)
            }
        };
        last_price = Some(t.price);
        last_sign = Some(sign);
        out.push(SignedTrade {
            trade: t.clone(),
            sign,
            source,
        });
    }
    Signing {
        trades: out,
        defaulted_first,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImbalancePoint {
    pub window_start: f64,
    pub imbalance: f64,
    pub trades: usize,
}

impl ImbalancePoint {
    pub fn is_empty(&self) -> bool {
        self.trades == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceSeries {
    pub window: f64,
    pub unit: Unit,
    pub points: Vec<ImbalancePoint>,
}

fn check_window(window: f64) -> Result<()> {
    if window.is_finite() && window > 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("window must be positive, got {window}")))
    }
}

/// Sums `eps * q` (base) or `eps * q * p` (quote) over epoch-aligned
/// windows covering the tape span. Windows without trades carry zero.
/// Trades must be in time order.
pub fn imbalance(signed: &[SignedTrade], window: f64, unit: Unit) -> Result<ImbalanceSeries> {
    check_window(window)?;
    let mut points: Vec<ImbalancePoint> = Vec::new();
    let mut first: Option<i64> = None;
    for s in signed {
        let k = bin_index(s.trade.timestamp, window);
        let base = *first.get_or_insert(k);
        let idx = (k - base) as usize;
        while points.len() <= idx {
            let start = (base + points.len() as i64) as f64 * window;
            points.push(ImbalancePoint {
                window_start: start,
                imbalance: 0.0,
                trades: 0,
            });
        }
        let p = &mut points[idx];
        p.imbalance += s.signed_amount(unit);
        p.trades += 1;
    }
    Ok(ImbalanceSeries { window, unit, points })
}

/// How the return of a window is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnMode {
    /// Last trade price over first trade price, minus one.
    #[default]
    OpenClose,
    /// Largest drawdown from a running peak inside the window.
    PeakTrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrashEvent {
    pub start: f64,
    pub end: f64,
    pub realized_return: f64,
    /// Order-flow imbalance over the window in base units.
    pub imbalance_base: f64,
    /// Same in quote units.
    pub imbalance_quote: f64,
    /// Book-implied move, filled in by the comparison stage.
    pub forecast_drop: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventQuery {
    pub k: usize,
    pub window: f64,
    /// Spacing between window starts; equal to `window` for disjoint
    /// windows, smaller for overlapping sliding windows.
    pub step: f64,
    pub mode: ReturnMode,
    /// Optional `[from, to)` restriction on trade timestamps.
    pub span: Option<(f64, f64)>,
}

impl EventQuery {
    pub fn new(k: usize, window: f64) -> Self {
        Self {
            k,
            window,
            step: window,
            mode: ReturnMode::OpenClose,
            span: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventScan {
    pub events: Vec<CrashEvent>,
    /// Set when fewer than `k` negative-return windows exist.
    pub shortfall: Option<usize>,
}

fn window_return(trades: &[SignedTrade], mode: ReturnMode) -> f64 {
    match mode {
        ReturnMode::OpenClose => {
            let open = trades[0].trade.price;
            let close = trades[trades.len() - 1].trade.price;
            close / open - 1.0
        }
        ReturnMode::PeakTrough => {
            let mut peak = trades[0].trade.price;
            let mut worst = 0.0f64;
            for t in trades {
                peak = peak.max(t.trade.price);
                worst = worst.min(t.trade.price / peak - 1.0);
            }
            worst
        }
    }
}

/// Every non-empty window with its return and imbalances, in time order.
pub fn scan_windows(signed: &[SignedTrade], query: &EventQuery) -> Result<Vec<CrashEvent>> {
    check_window(query.window)?;
    check_window(query.step)?;
    if query.step > query.window {
        return Err(Error::arg("event step must not exceed the window"));
    }
    let trades: Vec<&SignedTrade> = signed
        .iter()
        .filter(|s| {
            query
                .span
                .is_none_or(|(from, to)| s.trade.timestamp >= from && s.trade.timestamp < to)
        })
        .collect();
    let (Some(first), Some(last)) = (trades.first(), trades.last()) else {
        return Ok(Vec::new());
    };
    // windows [j*step, j*step + window) that can contain a trade
    let j_first = ((first.trade.timestamp - query.window) / query.step).floor() as i64 + 1;
    let j_last = bin_index(last.trade.timestamp, query.step);
    let mut out = Vec::new();
    let mut lo = 0usize;
    for j in j_first..=j_last {
        let start = j as f64 * query.step;
        let end = start + query.window;
        while lo < trades.len() && trades[lo].trade.timestamp < start {
            lo += 1;
        }
        let hi = lo + trades[lo..].partition_point(|s| s.trade.timestamp < end);
        if hi == lo {
            continue;
        }
        let members: Vec<SignedTrade> = trades[lo..hi].iter().map(|s| (*s).clone()).collect();
        out.push(CrashEvent {
            start,
            end,
            realized_return: window_return(&members, query.mode),
            imbalance_base: members.iter().map(SignedTrade::signed_volume).sum(),
            imbalance_quote: members.iter().map(SignedTrade::signed_value).sum(),
            forecast_drop: None,
        });
    }
    Ok(out)
}

/// The `k` most negative window returns, most negative first, with
/// overlapping windows suppressed in favour of the worse one.
pub fn extreme_events(signed: &[SignedTrade], query: &EventQuery) -> Result<EventScan> {
    if query.k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let mut candidates: Vec<CrashEvent> = scan_windows(signed, query)?
        .into_iter()
        .filter(|e| e.realized_return < 0.0)
        .collect();
    candidates.sort_by(|a, b| {
        a.realized_return
            .total_cmp(&b.realized_return)
            .then(a.start.total_cmp(&b.start))
    });
    let mut events: Vec<CrashEvent> = Vec::new();
    for c in candidates {
        if events.len() == query.k {
            break;
        }
        if events.iter().all(|e| c.end <= e.start || c.start >= e.end) {
            events.push(c);
        }
    }
    let shortfall = (events.len() < query.k).then_some(query.k - events.len());
    Ok(EventScan { events, shortfall })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tape(prices: &[f64]) -> Vec<TradeRecord> {
        prices
            .iter()
            .enumerate()
            .map(|(i, &p)| TradeRecord::new(i as f64, p, 1.0))
            .collect()
    }

    #[test]
    fn tick_rule_by_hand() {
        let s = sign_trades(&tape(&[10.0, 11.0, 11.0, 10.0]));
        let signs: Vec<Sign> = s.trades.iter().map(|t| t.sign).collect();
        assert_eq!(signs, vec![Sign::Buy, Sign::Buy, Sign::Buy, Sign::Sell]);
        assert!(s.defaulted_first);
        assert!(s.trades.iter().all(|t| t.source == SignSource::TickRule));
    }

    #[test]
    fn given_signs_pass_through() {
        let trades: Vec<_> = tape(&[10.0, 9.0, 8.0]).into_iter().map(|t| t.with_sign(Sign::Buy)).collect();
        let s = sign_trades(&trades);
        assert!(!s.defaulted_first);
        assert!(s.trades.iter().all(|t| t.sign == Sign::Buy && t.source == SignSource::Given));
    }

    #[test]
    fn constant_price_repeats_default() {
        let s = sign_trades(&tape(&[5.0; 6]));
        assert!(s.trades.iter().all(|t| t.sign == Sign::Buy));
    }

    #[test]
    fn zero_tick_after_given_sign_inherits_it() {
        let trades = vec![
            TradeRecord::new(0.0, 10.0, 1.0).with_sign(Sign::Sell),
            TradeRecord::new(1.0, 10.0, 1.0),
        ];
        let s = sign_trades(&trades);
        assert_eq!(s.trades[1].sign, Sign::Sell);
        assert!(!s.defaulted_first);
    }

    #[test]
    fn hand_imbalance() {
        let trades = vec![
            TradeRecord::new(0.0, 10.0, 2.0).with_sign(Sign::Buy),
            TradeRecord::new(60.0, 12.0, 5.0).with_sign(Sign::Sell),
        ];
        let signed = sign_trades(&trades).trades;
        let base = imbalance(&signed, 14_400.0, Unit::Base).unwrap();
        let quote = imbalance(&signed, 14_400.0, Unit::Quote).unwrap();
        assert_eq!(base.points.len(), 1);
        assert_eq!(base.points[0].imbalance, -3.0);
        assert_eq!(quote.points[0].imbalance, -40.0);
    }

    #[test]
    fn all_buys_count() {
        let trades: Vec<_> = (0..7).map(|i| TradeRecord::new(i as f64, 1.0, 1.0).with_sign(Sign::Buy)).collect();
        let s = imbalance(&sign_trades(&trades).trades, 3_600.0, Unit::Base).unwrap();
        assert_eq!(s.points[0].imbalance, 7.0);
    }

    #[test]
    fn empty_windows_are_zero() {
        let trades = vec![
            TradeRecord::new(10.0, 1.0, 1.0).with_sign(Sign::Buy),
            TradeRecord::new(250.0, 1.0, 2.0).with_sign(Sign::Sell),
        ];
        let s = imbalance(&sign_trades(&trades).trades, 60.0, Unit::Base).unwrap();
        let values: Vec<(f64, f64, usize)> = s.points.iter().map(|p| (p.window_start, p.imbalance, p.trades)).collect();
        assert_eq!(
            values,
            vec![(0.0, 1.0, 1), (60.0, 0.0, 0), (120.0, 0.0, 0), (180.0, 0.0, 0), (240.0, -2.0, 1)]
        );
        assert!(imbalance(&[], 60.0, Unit::Base).unwrap().points.is_empty());
        assert!(imbalance(&[], 0.0, Unit::Base).is_err());
    }

    fn window_tape(returns: &[f64]) -> Vec<SignedTrade> {
        // one window per 100 s, open at 100, close at 100 * (1 + r)
        let mut trades = Vec::new();
        for (w, r) in returns.iter().enumerate() {
            let t0 = w as f64 * 100.0;
            trades.push(TradeRecord::new(t0 + 1.0, 100.0, 1.0).with_sign(Sign::Buy));
            trades.push(TradeRecord::new(t0 + 50.0, 100.0 * (1.0 + r), 1.0).with_sign(Sign::Sell));
        }
        sign_trades(&trades).trades
    }

    #[test]
    fn order_statistics() {
        let signed = window_tape(&[-0.1, -0.3, 0.2]);
        let scan = extreme_events(&signed, &EventQuery::new(2, 100.0)).unwrap();
        let r: Vec<f64> = scan.events.iter().map(|e| e.realized_return).collect();
        assert_eq!(scan.events.len(), 2);
        assert!((r[0] + 0.3).abs() < 1e-12 && (r[1] + 0.1).abs() < 1e-12);
        assert_eq!(scan.shortfall, None);
        assert_eq!(scan.events[0].start, 100.0);
    }

    #[test]
    fn rising_tape_has_no_events() {
        let signed = sign_trades(&tape(&[1.0, 2.0, 3.0, 4.0, 5.0])).trades;
        let scan = extreme_events(&signed, &EventQuery::new(3, 2.0)).unwrap();
        assert!(scan.events.is_empty());
        assert_eq!(scan.shortfall, Some(3));
    }

    #[test]
    fn sliding_windows_do_not_overlap() {
        let signed = window_tape(&[-0.1, -0.3, 0.2, -0.05]);
        let mut q = EventQuery::new(4, 100.0);
        q.step = 25.0;
        let scan = extreme_events(&signed, &q).unwrap();
        for (i, a) in scan.events.iter().enumerate() {
            for b in &scan.events[i + 1..] {
                assert!(a.end <= b.start || b.end <= a.start);
            }
        }
        assert!(scan.events.windows(2).all(|w| w[0].realized_return <= w[1].realized_return));
    }

    #[test]
    fn peak_trough_mode() {
        let signed = sign_trades(&tape(&[100.0, 120.0, 60.0, 110.0])).trades;
        let mut q = EventQuery::new(1, 10.0);
        q.mode = ReturnMode::PeakTrough;
        let e = extreme_events(&signed, &q).unwrap().events[0];
        assert!((e.realized_return + 0.5).abs() < 1e-12);
    }

    #[test]
    fn k_zero_is_rejected() {
        assert!(extreme_events(&[], &EventQuery::new(0, 10.0)).is_err());
    }
}
