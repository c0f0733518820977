//! Synthetic books, tapes and meta-order populations with known ground
//! truth.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`; normal draws use `rand_distr::StandardNormal`.
//! Draws happen in a fixed order and all reductions are sequential, so a
//! given spec and seed always produce the same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::book::{BookSnapshot, Level};
use crate::error::{Error, Result};
use crate::ingest::{Sign, TradeRecord, TradeTape};
use crate::pubmetrics::{amihud_illiq, theoretical_drop, DailyMetrics};
use crate::time::{day_label, DayCalendar, SECONDS_PER_DAY};

/// Constant density `density` (volume per unit price) on `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

/// Piecewise-constant resting demand (bids) and supply (asks).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(default)]
    pub bids: Vec<Segment>,
    #[serde(default)]
    pub asks: Vec<Segment>,
}

impl DensitySpec {
    pub fn uniform_bids(lo: f64, hi: f64, density: f64) -> Self {
        Self {
            bids: vec![Segment { lo, hi, density }],
            asks: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, segs) in [("bid", &self.bids), ("ask", &self.asks)] {
            for s in segs {
                if !(s.lo.is_finite() && s.hi.is_finite() && s.lo >= 0.0 && s.lo < s.hi) {
                    return Err(Error::arg(format!("{name} segment [{}, {}) is empty or invalid", s.lo, s.hi)));
                }
                if !(s.density.is_finite() && s.density > 0.0) {
                    return Err(Error::arg(format!("{name} segment density must be positive")));
                }
            }
            let mut sorted: Vec<&Segment> = segs.iter().collect();
            sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            if sorted.windows(2).any(|w| w[1].lo < w[0].hi) {
                return Err(Error::arg(format!("{name} segments overlap")));
            }
        }
        Ok(())
    }

    /// Exact volume between `lo` and `hi` on one side.
    pub fn mass(segments: &[Segment], lo: f64, hi: f64) -> f64 {
        segments
            .iter()
            .map(|s| (hi.min(s.hi) - lo.max(s.lo)).max(0.0) * s.density)
            .sum()
    }
}

fn default_sigma() -> f64 {
    0.04
}
fn default_y() -> f64 {
    1.0
}
fn default_volume() -> f64 {
    100_000.0
}
fn default_seed() -> u64 {
    42
}
fn default_price() -> f64 {
    100.0
}
fn default_start() -> f64 {
    // 2013-01-01T00:00:00Z
    1_356_998_400.0
}
fn default_metaorders() -> usize {
    500
}
fn default_volume_range() -> f64 {
    100.0
}
fn default_noise() -> f64 {
    0.1
}
fn default_children() -> (usize, usize) {
    (2, 6)
}
fn default_spacing() -> f64 {
    20.0
}
fn default_snapshots() -> usize {
    24
}
fn default_tick() -> f64 {
    0.0005
}
fn default_depth() -> f64 {
    0.1
}
fn default_q_stars() -> Vec<f64> {
    vec![40_000.0]
}

/// Generator parameters. Every field has a default, so `{}` is a valid
/// JSON spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Densities for [`gen_book`]; markets from [`gen_market`] derive their
    /// books from the square-root law instead.
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default = "default_sigma")]
    pub true_sigma: f64,
    #[serde(default = "default_y")]
    pub true_y: f64,
    #[serde(default = "default_volume")]
    pub v_d: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_price")]
    pub start_price: f64,
    #[serde(default = "default_start")]
    pub start_time: f64,
    #[serde(default = "default_metaorders")]
    pub metaorders_per_day: usize,
    /// Ratio of the largest to the smallest meta-order volume.
    #[serde(default = "default_volume_range")]
    pub volume_range: f64,
    /// Gaussian impact noise as a fraction of the square-root signal.
    #[serde(default = "default_noise")]
    pub impact_noise: f64,
    /// Inclusive range of child trades per meta-order (at least 2).
    #[serde(default = "default_children")]
    pub child_trades: (usize, usize),
    /// Seconds between child trades.
    #[serde(default = "default_spacing")]
    pub child_spacing: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots_per_day: usize,
    /// Book level spacing relative to the reference price.
    #[serde(default = "default_tick")]
    pub book_tick: f64,
    /// Relative band covered by each book side.
    #[serde(default = "default_depth")]
    pub book_depth: f64,
    /// Half-width of the log-uniform day-to-day spread of volatility.
    #[serde(default)]
    pub sigma_spread: f64,
    /// Same for daily volume.
    #[serde(default)]
    pub volume_spread: f64,
    /// Stress sizes for the ground-truth drop forecasts.
    #[serde(default = "default_q_stars")]
    pub q_stars: Vec<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        self.density.validate()?;
        let positive = [
            ("v_d", self.v_d),
            ("start_price", self.start_price),
            ("volume_range", self.volume_range),
            ("child_spacing", self.child_spacing),
            ("book_tick", self.book_tick),
            ("book_depth", self.book_depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::arg(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("true_sigma", self.true_sigma),
            ("true_y", self.true_y),
            ("impact_noise", self.impact_noise),
            ("sigma_spread", self.sigma_spread),
            ("volume_spread", self.volume_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg(format!("{name} must be non-negative")));
            }
        }
        if self.volume_range < 1.0 {
            return Err(Error::arg("volume_range must be at least 1"));
        }
        if self.metaorders_per_day == 0 || self.snapshots_per_day == 0 {
            return Err(Error::arg("need at least one meta-order and snapshot per day"));
        }
        let (lo, hi) = self.child_trades;
        if lo < 2 || hi < lo {
            return Err(Error::arg("child_trades must satisfy 2 <= min <= max"));
        }
        if (hi - 1) as f64 * self.child_spacing >= SECONDS_PER_DAY {
            return Err(Error::arg("meta-orders do not fit in a day"));
        }
        if self.book_depth >= 1.0 {
            return Err(Error::arg("book_depth must be below 1"));
        }
        if self.book_depth / self.book_tick > 1e6 {
            return Err(Error::arg("too many book levels"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBook {
    pub snapshot: BookSnapshot,
    pub empty_bids: bool,
    pub empty_asks: bool,
}

const MAX_LEVELS: f64 = 1e7;

/// Discretizes `density` into one level per `tick`-wide cell measured from
/// `p_t`, placed at the cell midpoint and holding the cell's exact volume.
/// Cells without volume are left out.
pub fn gen_book(density: &DensitySpec, p_t: f64, tick: f64) -> Result<SynthBook> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(Error::arg(format!("reference price must be positive, got {p_t}")));
    }
    if !(tick.is_finite() && tick > 0.0) {
        return Err(Error::arg("tick must be positive"));
    }
    density.validate()?;
    if density.bids.iter().any(|s| s.hi > p_t) {
        return Err(Error::arg("bid density extends above the reference price"));
    }
    if density.asks.iter().any(|s| s.lo < p_t) {
        return Err(Error::arg("ask density extends below the reference price"));
    }
    let bid_floor = density.bids.iter().map(|s| s.lo).fold(f64::INFINITY, f64::min);
    let ask_ceiling = density.asks.iter().map(|s| s.hi).fold(f64::NEG_INFINITY, f64::max);
    if (p_t - bid_floor.min(p_t)) / tick > MAX_LEVELS || (ask_ceiling.max(p_t) - p_t) / tick > MAX_LEVELS {
        return Err(Error::arg("too many book levels for this tick"));
    }

    let mut bids = Vec::new();
    let mut i = 0.0;
    while p_t - i * tick > bid_floor && p_t - i * tick > 0.0 {
        let hi = p_t - i * tick;
        let lo = (p_t - (i + 1.0) * tick).max(0.0);
        let volume = DensitySpec::mass(&density.bids, lo, hi);
        if volume > 0.0 {
            bids.push(Level::new(0.5 * (lo + hi), volume));
        }
        i += 1.0;
    }
    let mut asks = Vec::new();
    let mut i = 0.0;
    while p_t + i * tick < ask_ceiling {
        let lo = p_t + i * tick;
        let hi = p_t + (i + 1.0) * tick;
        let volume = DensitySpec::mass(&density.asks, lo, hi);
        if volume > 0.0 {
            asks.push(Level::new(0.5 * (lo + hi), volume));
        }
        i += 1.0;
    }
    let (empty_bids, empty_asks) = (bids.is_empty(), asks.is_empty());
    Ok(SynthBook {
        snapshot: BookSnapshot::new(0.0, bids, asks, Some(p_t))?,
        empty_bids,
        empty_asks,
    })
}

/// Book whose depth within a relative band `phi` of `p_t` is
/// `v_d * (phi / (y * sigma))^2` on both sides, the depth implied by the
/// square-root law. Levels sit at `p_t * (1 -/+ (i + 1/2) * tick)`.
pub fn sqrt_law_book(ts: f64, p_t: f64, sigma: f64, v_d: f64, y: f64, tick: f64, depth: f64) -> Result<BookSnapshot> {
    let scale = y * sigma;
    let n = (depth / tick).round() as usize;
    let mut bids = Vec::with_capacity(n);
    let mut asks = Vec::with_capacity(n);
    if scale > 0.0 {
        let cum = |phi: f64| v_d * (phi / scale).powi(2);
        for i in 0..n {
            let (a, b) = (i as f64 * tick, (i + 1) as f64 * tick);
            let volume = cum(b) - cum(a);
            let offset = (i as f64 + 0.5) * tick;
            bids.push(Level::new(p_t * (1.0 - offset), volume));
            asks.push(Level::new(p_t * (1.0 + offset), volume));
        }
    }
    BookSnapshot::new(ts, bids, asks, Some(p_t))
}

/// A generated market and the parameters it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthMarket {
    pub tape: TradeTape,
    pub snapshots: Vec<BookSnapshot>,
    pub truth: Vec<DailyMetrics>,
}

fn log_uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    let u: f64 = rng.random();
    (half_width * (2.0 * u - 1.0)).exp()
}

/// Simulates `days` days of meta-order flow on a geometric Brownian price
/// path, with hourly-style book snapshots consistent with the same daily
/// volatility and volume.
///
/// Each meta-order of volume `Q` and sign `eps` starts at the prevailing path
/// price `p0` and ends at `p0 * (1 + eps * y * sigma_d * sqrt(Q / V_d) * (1 +
/// noise * Z))`; child trades interpolate linearly in between and carry the
/// meta-order's sign and a unique trader id. Volumes are log-uniform and
/// rescaled so each day trades exactly `V_d`.
pub fn gen_market(spec: &SynthSpec, days: usize) -> Result<SynthMarket> {
    spec.validate()?;
    if days == 0 {
        return Err(Error::arg("days must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let calendar = DayCalendar::default();
    let first_day = calendar.day_of(spec.start_time);
    let (min_child, max_child) = spec.child_trades;
    let max_duration = (max_child - 1) as f64 * spec.child_spacing;

    let mut trades = Vec::new();
    let mut snapshots = Vec::new();
    let mut truth = Vec::with_capacity(days);
    let mut price = spec.start_price;
    let mut order_id = 0usize;

    for d in 0..days {
        let day = first_day + d as i64;
        let day_start = calendar.day_start(day);
        let sigma = spec.true_sigma * log_uniform(&mut rng, spec.sigma_spread);
        let v_d = spec.v_d * log_uniform(&mut rng, spec.volume_spread);
        let n = spec.metaorders_per_day;

        let mut starts: Vec<f64> = (0..n)
            .map(|_| rng.random::<f64>() * (SECONDS_PER_DAY - max_duration - 1.0))
            .collect();
        starts.sort_by(f64::total_cmp);
        let raw: Vec<f64> = (0..n)
            .map(|_| spec.volume_range.powf(rng.random::<f64>()))
            .collect();
        let raw_total: f64 = raw.iter().sum();
        let volumes: Vec<f64> = raw.iter().map(|q| q * v_d / raw_total).collect();
        let signs: Vec<Sign> = (0..n)
            .map(|_| if rng.random::<bool>() { Sign::Buy } else { Sign::Sell })
            .collect();
        let children: Vec<usize> = (0..n).map(|_| rng.random_range(min_child..=max_child)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

        // path events: meta-order starts and snapshot times, in time order
        let snap_times: Vec<f64> = (0..spec.snapshots_per_day)
            .map(|h| (h as f64 + 0.5) * SECONDS_PER_DAY / spec.snapshots_per_day as f64)
            .collect();
        let mut events: Vec<(f64, Option<usize>)> = starts
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, Some(i)))
            .chain(snap_times.iter().map(|&t| (t, None)))
            .collect();
        events.push((SECONDS_PER_DAY, None));
        events.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut now = 0.0;
        let mut order_prices = vec![0.0; n];
        let mut snap_prices = Vec::with_capacity(spec.snapshots_per_day);
        for (t, which) in &events {
            let dt = (t - now) / SECONDS_PER_DAY;
            let z: f64 = rng.sample(StandardNormal);
            price *= (sigma * dt.sqrt() * z - 0.5 * sigma * sigma * dt).exp();
            now = *t;
            match which {
                Some(i) => order_prices[*i] = price,
                None if *t < SECONDS_PER_DAY => snap_prices.push((*t, price)),
                None => {}
            }
        }

        for i in 0..n {
            let p0 = order_prices[i];
            let signal = spec.true_y * sigma * (volumes[i] / v_d).sqrt();
            let moved = signal * (1.0 + spec.impact_noise * noise[i]);
            let p1 = p0 * (1.0 + signs[i].value() * moved);
            let c = children[i];
            let id = format!("m{order_id}");
            order_id += 1;
            for j in 0..c {
                let frac = j as f64 / (c - 1) as f64;
                let price = if j + 1 == c { p1 } else { p0 + (p1 - p0) * frac };
                trades.push(
                    TradeRecord::new(day_start + starts[i] + j as f64 * spec.child_spacing, price, volumes[i] / c as f64)
                        .with_sign(signs[i])
                        .with_trader(id.clone()),
                );
            }
        }
        for (t, p) in snap_prices {
            snapshots.push(sqrt_law_book(day_start + t, p, sigma, v_d, spec.true_y, spec.book_tick, spec.book_depth)?);
        }
        let drop_th = spec
            .q_stars
            .iter()
            .map(|&q| Ok((q, Some(theoretical_drop(sigma, v_d, spec.true_y, q)?))))
            .collect::<Result<Vec<_>>>()?;
        truth.push(DailyMetrics {
            day,
            date: day_label(day),
            sigma_d: sigma,
            v_d,
            y: spec.true_y,
            illiq_amihud: Some(amihud_illiq(sigma, v_d)?),
            drop_th,
            bars: 0,
            floored: false,
        });
    }
    Ok(SynthMarket {
        tape: TradeTape::new(trades)?,
        snapshots,
        truth,
    })
}
