//! Order-book liquidity: depth within a relative price band, its inverse
//! (the expected crash amplitude for a given sell-off) and support prices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::DayCalendar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub price: f64,
    pub volume: f64,
}

impl Level {
    pub fn new(price: f64, volume: f64) -> Self {
        Self { price, volume }
    }
}

/// Side of the book whose resting orders are measured. `Buy` is the bid
/// side, which absorbs sell-offs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

/// Volume unit: `Base` counts contracts (BTC-like), `Quote` counts
/// currency (USD-like) by weighting each level with its price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Base,
    Quote,
}

/// A validated order-book snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct BookSnapshot {
    pub ts: f64,
    bids: Vec<Level>,
    asks: Vec<Level>,
    mid: f64,
}

impl BookSnapshot {
    /// Bids must be strictly descending and asks strictly ascending in price,
    /// with positive prices and volumes and an uncrossed top of book. The
    /// reference price defaults to the bid/ask midpoint, or to the only
    /// available best quote when one side is empty.
    pub fn new(ts: f64, bids: Vec<Level>, asks: Vec<Level>, mid: Option<f64>) -> Result<Self> {
        let invalid = |m: &str| Err(Error::InvalidSnapshot(m.to_string()));
        if !ts.is_finite() {
            return invalid("timestamp is not finite");
        }
        for (name, side) in [("bids", &bids), ("asks", &asks)] {
            for l in side.iter() {
                if !(l.price.is_finite() && l.price > 0.0) {
                    return Err(Error::InvalidSnapshot(format!("{name} contain non-positive price")));
                }
                if !(l.volume.is_finite() && l.volume > 0.0) {
                    return Err(Error::InvalidSnapshot(format!("{name} contain non-positive volume")));
                }
            }
        }
        if bids.windows(2).any(|w| w[1].price >= w[0].price) {
            return invalid("bids not descending");
        }
        if asks.windows(2).any(|w| w[1].price <= w[0].price) {
            return invalid("asks not ascending");
        }
        let best_bid = bids.first().map(|l| l.price);
        let best_ask = asks.first().map(|l| l.price);
        if let (Some(b), Some(a)) = (best_bid, best_ask) {
            if b >= a {
                return Err(Error::InvalidSnapshot(format!(
                    "crossed book: best bid {b} >= best ask {a}"
                )));
            }
        }
        let mid = match (mid, best_bid, best_ask) {
            (Some(m), _, _) => {
                if !(m.is_finite() && m > 0.0) {
                    return invalid("mid must be positive");
                }
                if best_bid.is_some_and(|b| m < b) || best_ask.is_some_and(|a| m > a) {
                    return invalid("mid outside best bid/ask");
                }
                m
            }
            (None, Some(b), Some(a)) => 0.5 * (b + a),
            (None, Some(b), None) => b,
            (None, None, Some(a)) => a,
            (None, None, None) => return invalid("empty book without a reference price"),
        };
        Ok(Self { ts, bids, asks, mid })
    }

    pub fn bids(&self) -> &[Level] {
        &self.bids
    }

    pub fn asks(&self) -> &[Level] {
        &self.asks
    }

    pub fn side(&self, side: Side) -> &[Level] {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    /// Reference price `p_t` against which bands are measured.
    pub fn mid(&self) -> f64 {
        self.mid
    }

    pub fn best_bid(&self) -> Option<f64> {
        self.bids.first().map(|l| l.price)
    }

    pub fn best_ask(&self) -> Option<f64> {
        self.asks.first().map(|l| l.price)
    }

    /// Replaces the reference price, e.g. with the last trade price. Unlike
    /// the midpoint it may lie outside the quotes; levels on the far side of
    /// the reference are then ignored by the band measures.
    pub fn with_reference(mut self, price: f64) -> Result<Self> {
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::arg(format!("reference price must be positive, got {price}")));
        }
        self.mid = price;
        Ok(self)
    }

    /// Returns a copy with every price multiplied by `c`.
    pub fn scaled_prices(&self, c: f64) -> Self {
        let scale = |v: &[Level]| v.iter().map(|l| Level::new(l.price * c, l.volume)).collect();
        Self {
            ts: self.ts,
            bids: scale(&self.bids),
            asks: scale(&self.asks),
            mid: self.mid * c,
        }
    }
}

/// Relative distance of a level from the reference price, positive on the
/// measured side.
fn band_fraction(reference: f64, price: f64, side: Side) -> f64 {
    match side {
        Side::Buy => (reference - price) / reference,
        Side::Sell => (price - reference) / reference,
    }
}

/// Cumulated depth as a right-continuous step function of the relative
/// band `phi`: `cumulative(phi)` is the volume resting between the reference
/// price and `reference*(1-phi)` (buy side) or `reference*(1+phi)` (sell).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthProfile {
    pub reference_price: f64,
    pub side: Side,
    pub unit: Unit,
    /// `(phi_k, cumulative volume through level k)`, both non-decreasing.
    pub steps: Vec<(f64, f64)>,
}

impl DepthProfile {
    pub fn new(snapshot: &BookSnapshot, side: Side, unit: Unit) -> Self {
        let reference = snapshot.mid();
        let mut cum = 0.0;
        let steps = snapshot
            .side(side)
            .iter()
            .map(|l| (band_fraction(reference, l.price, side), l))
            .filter(|(phi, _)| *phi >= 0.0)
            .map(|(phi, l)| {
                cum += match unit {
                    Unit::Base => l.volume,
                    Unit::Quote => l.volume * l.price,
                };
                (phi, cum)
            })
            .collect();
        Self {
            reference_price: reference,
            side,
            unit,
            steps,
        }
    }

    pub fn total(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.1)
    }

    pub fn cumulative(&self, phi: f64) -> f64 {
        let n = self.steps.partition_point(|s| s.0 <= phi);
        if n == 0 {
            0.0
        } else {
            self.steps[n - 1].1
        }
    }

    /// Smallest band reaching `volume`, or `None` when the side is exhausted.
    pub fn inverse(&self, volume: f64) -> Option<f64> {
        if volume <= 0.0 {
            return Some(0.0);
        }
        let k = self.steps.partition_point(|s| s.1 < volume);
        self.steps.get(k).map(|s| s.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Liquidity {
    pub value: f64,
    /// The requested side had no levels at all.
    pub empty_side: bool,
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("phi must lie in (0, 1), got {phi}")))
    }
}

/// Order-book liquidity: volume resting within `phi` of the reference price.
pub fn book_liquidity(snapshot: &BookSnapshot, phi: f64, side: Side, unit: Unit) -> Result<Liquidity> {
    check_phi(phi)?;
    Ok(Liquidity {
        value: DepthProfile::new(snapshot, side, unit).cumulative(phi),
        empty_side: snapshot.side(side).is_empty(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropEstimate {
    /// Relative price move `phi*`.
    pub phi: f64,
    /// Resting depth was exhausted; `phi` is reported as 1.
    pub saturated: bool,
}

/// Relative move produced by instantly consuming `q` base units from
/// `side`: the smallest band whose liquidity reaches `q`.
pub fn expected_move(snapshot: &BookSnapshot, q: f64, side: Side) -> Result<DropEstimate> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::arg(format!("volume must be non-negative, got {q}")));
    }
    Ok(match DepthProfile::new(snapshot, side, Unit::Base).inverse(q) {
        Some(phi) => DropEstimate { phi, saturated: false },
        None => DropEstimate { phi: 1.0, saturated: true },
    })
}

/// Expected crash amplitude for an instantaneous sell-off of `q_star` base
/// units: the inverse of buy-side order-book liquidity.
pub fn expected_drop(snapshot: &BookSnapshot, q_star: f64) -> Result<DropEstimate> {
    expected_move(snapshot, q_star, Side::Buy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportPrice {
    pub price: f64,
    pub saturated: bool,
}

/// Price reached when a sell-off of `q` base units eats into the bids.
///
/// Each bid level is spread uniformly over a price cell bounded by the
/// midpoints to its neighbours (the best bid's cell is mirrored upward but
/// capped at the reference price; the lowest level's cell stops at its own
/// price), and the boundary level is consumed pro rata. When the bids are
/// exhausted the lowest bid price is returned with `saturated` set.
pub fn support_price(snapshot: &BookSnapshot, q: f64) -> Result<SupportPrice> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::arg(format!("volume must be non-negative, got {q}")));
    }
    let reference = snapshot.mid();
    if q == 0.0 {
        return Ok(SupportPrice { price: reference, saturated: false });
    }
    let levels: Vec<Level> = snapshot
        .bids()
        .iter()
        .copied()
        .filter(|l| l.price <= reference)
        .collect();
    let Some(lowest) = levels.last() else {
        return Ok(SupportPrice { price: reference, saturated: true });
    };
    let n = levels.len();
    let mut cum = 0.0;
    for (k, level) in levels.iter().enumerate() {
        let upper = if k > 0 {
            0.5 * (levels[k - 1].price + level.price)
        } else if n > 1 {
            (level.price + 0.5 * (level.price - levels[1].price)).min(reference)
        } else {
            level.price
        };
        let lower = if k + 1 < n {
            0.5 * (level.price + levels[k + 1].price)
        } else {
            level.price
        };
        if cum + level.volume >= q {
            let fraction = (q - cum) / level.volume;
            return Ok(SupportPrice {
                price: upper - fraction * (upper - lower),
                saturated: false,
            });
        }
        cum += level.volume;
    }
    Ok(SupportPrice { price: lowest.price, saturated: true })
}

/// Per-snapshot quantity averaged by [`daily_book_liquidity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BookMeasure {
    Liquidity { phi: f64, side: Side, unit: Unit },
    Drop { q_star: f64 },
    Support { q: f64 },
}

impl BookMeasure {
    pub fn evaluate(&self, snapshot: &BookSnapshot) -> Result<f64> {
        match *self {
            BookMeasure::Liquidity { phi, side, unit } => {
                Ok(book_liquidity(snapshot, phi, side, unit)?.value)
            }
            BookMeasure::Drop { q_star } => Ok(expected_drop(snapshot, q_star)?.phi),
            BookMeasure::Support { q } => Ok(support_price(snapshot, q)?.price),
        }
    }
}

/// Arithmetic mean of `measure` over one day's snapshots; `None` marks a
/// day without data.
pub fn daily_book_liquidity(snapshots: &[BookSnapshot], measure: BookMeasure) -> Result<Option<f64>> {
    if snapshots.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for s in snapshots {
        sum += measure.evaluate(s)?;
    }
    Ok(Some(sum / snapshots.len() as f64))
}

/// Groups snapshots by calendar day, sorted by timestamp within each day.
pub fn group_by_day(snapshots: &[BookSnapshot], calendar: DayCalendar) -> BTreeMap<i64, Vec<BookSnapshot>> {
    let mut days: BTreeMap<i64, Vec<BookSnapshot>> = BTreeMap::new();
    for s in snapshots {
        days.entry(calendar.day_of(s.ts)).or_default().push(s.clone());
    }
    for v in days.values_mut() {
        v.sort_by(|a, b| a.ts.total_cmp(&b.ts));
    }
    days
}

/// Daily averages for every day from the first to the last snapshot; days
/// without snapshots are `None`.
pub fn daily_series(
    snapshots: &[BookSnapshot],
    calendar: DayCalendar,
    measure: BookMeasure,
) -> Result<Vec<(i64, Option<f64>)>> {
    let days = group_by_day(snapshots, calendar);
    let (Some(&first), Some(&last)) = (days.keys().next(), days.keys().next_back()) else {
        return Ok(Vec::new());
    };
    (first..=last)
        .map(|d| {
            let day = days.get(&d).map(Vec::as_slice).unwrap_or(&[]);
            Ok((d, daily_book_liquidity(day, measure)?))
        })
        .collect()
}
