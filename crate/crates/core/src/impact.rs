//! Meta-order reconstruction, binned impact curves and the square-root law.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::SignedTrade;
use crate::ingest::Sign;
use crate::stats::{isotonic_increasing, weighted_ols};

/// A run of same-sign trades attributed to one trading decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaOrder {
    pub trader: Option<String>,
    pub sign: Sign,
    /// Total volume `Q` in base units.
    pub volume: f64,
    pub start_price: f64,
    pub end_price: f64,
    pub start: f64,
    pub end: f64,
    pub trades: usize,
}

impl MetaOrder {
    fn open(t: &SignedTrade, trader: Option<String>) -> Self {
        Self {
            trader,
            sign: t.sign,
            volume: t.trade.volume,
            start_price: t.trade.price,
            end_price: t.trade.price,
            start: t.trade.timestamp,
            end: t.trade.timestamp,
            trades: 1,
        }
    }

    fn extend(&mut self, t: &SignedTrade) {
        self.volume += t.trade.volume;
        self.end_price = t.trade.price;
        self.end = t.trade.timestamp;
        self.trades += 1;
    }

    /// Signed relative price move from first to last child trade.
    pub fn impact(&self) -> f64 {
        self.sign.value() * (self.end_price - self.start_price) / self.start_price
    }
}

/// Groups time-ordered signed trades into meta-orders.
///
/// With `use_ids`, trades carrying a trader id form maximal runs of the same
/// trader and sign whose consecutive gaps are at most `gap` seconds, even when
/// other traders interleave. Trades without an id (or all trades when
/// `use_ids` is false) form maximal runs of consecutive same-sign trades.
pub fn group_metaorders(signed: &[SignedTrade], gap: f64, use_ids: bool) -> Result<Vec<MetaOrder>> {
    if !(gap.is_finite() && gap > 0.0) {
        return Err(Error::arg(format!("gap must be positive, got {gap}")));
    }
    let mut orders: Vec<MetaOrder> = Vec::new();
    let mut open_by_trader: HashMap<&str, usize> = HashMap::new();
    let mut open_anonymous: Option<usize> = None;
    for t in signed {
        let trader = if use_ids { t.trade.trader_id.as_deref() } else { None };
        let current = match trader {
            Some(id) => open_by_trader.get(id).copied(),
            None => open_anonymous,
        };
        let continues = current.is_some_and(|i| {
            let o = &orders[i];
            o.sign == t.sign && t.trade.timestamp - o.end <= gap
        });
        match (continues, current) {
            (true, Some(i)) => orders[i].extend(t),
            _ => {
                orders.push(MetaOrder::open(t, trader.map(str::to_string)));
                let i = orders.len() - 1;
                match trader {
                    Some(id) => {
                        open_by_trader.insert(id, i);
                    }
                    None => open_anonymous = Some(i),
                }
            }
        }
    }
    Ok(orders)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactBin {
    /// Geometric centre of the bin edges.
    pub q_mid: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Mean signed relative move of the orders in the bin.
    pub impact: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactCurve {
    pub bins: Vec<ImpactBin>,
    /// Orders that went into binning, including those in dropped bins.
    pub n_orders: usize,
}

/// Bins `(volume, impact)` samples geometrically in volume into `n_bins`
/// bins spanning the observed range, keeping bins with at least
/// `min_count` samples.
pub fn impact_curve_from_samples(samples: &[(f64, f64)], n_bins: usize, min_count: usize) -> Result<ImpactCurve> {
    if n_bins == 0 {
        return Err(Error::arg("need at least one bin"));
    }
    let samples: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(q, i)| q.is_finite() && *q > 0.0 && i.is_finite())
        .collect();
    let Some(lo) = samples.iter().map(|s| s.0).min_by(f64::total_cmp) else {
        return Err(Error::Estimation("no meta-orders".into()));
    };
    let hi = samples.iter().map(|s| s.0).max_by(f64::total_cmp).unwrap_or(lo);
    let span = (hi / lo).ln();
    let n_bins = if span > 0.0 { n_bins } else { 1 };
    let edge = |i: usize| {
        if i == n_bins {
            hi
        } else {
            lo * (span * i as f64 / n_bins as f64).exp()
        }
    };
    let mut sums = vec![(0.0f64, 0usize); n_bins];
    for &(q, impact) in &samples {
        let idx = if span > 0.0 {
            ((n_bins as f64 * (q / lo).ln() / span).floor() as usize).min(n_bins - 1)
        } else {
            0
        };
        sums[idx].0 += impact;
        sums[idx].1 += 1;
    }
    let bins: Vec<ImpactBin> = sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n >= min_count.max(1))
        .map(|(i, &(sum, count))| {
            let (q_lo, q_hi) = (edge(i), edge(i + 1));
            ImpactBin {
                q_mid: (q_lo * q_hi).sqrt(),
                q_lo,
                q_hi,
                impact: sum / count as f64,
                count,
            }
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::Estimation(format!("no bin reached {min_count} meta-orders")));
    }
    Ok(ImpactCurve {
        bins,
        n_orders: samples.len(),
    })
}

/// Empirical impact `I(Q)`: the mean signed relative move of meta-orders,
/// binned geometrically in their volume.
pub fn impact_curve(orders: &[MetaOrder], n_bins: usize, min_count: usize) -> Result<ImpactCurve> {
    let samples: Vec<(f64, f64)> = orders.iter().map(|o| (o.volume, o.impact())).collect();
    impact_curve_from_samples(&samples, n_bins, min_count)
}

/// Square-root law `I(Q) = y * sigma_d * sqrt(Q / v_d)` fitted to a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqrtLawFit {
    pub y: f64,
    /// Free log-log slope of `I` against `Q`, for diagnostics.
    pub exponent: Option<f64>,
    pub sigma_d: f64,
    pub v_d: f64,
    pub n_orders: usize,
}

impl SqrtLawFit {
    pub fn impact(&self, q: f64) -> f64 {
        self.y * self.sigma_d * (q / self.v_d).sqrt()
    }

    pub fn volume_for(&self, phi: f64) -> f64 {
        self.v_d * (phi / (self.y * self.sigma_d)).powi(2)
    }
}

/// Count-weighted least squares of the bin means on `sigma_d*sqrt(Q/v_d)`
/// with the exponent pinned at one half.
pub fn fit_sqrt_law(curve: &ImpactCurve, sigma_d: f64, v_d: f64) -> Result<SqrtLawFit> {
    if !(sigma_d > 0.0 && v_d > 0.0 && sigma_d.is_finite() && v_d.is_finite()) {
        return Err(Error::arg("sigma_d and v_d must be positive"));
    }
    if curve.bins.len() < 2 {
        return Err(Error::Estimation("square-root fit needs at least two bins".into()));
    }
    if curve.bins.iter().all(|b| b.impact <= 0.0) {
        return Err(Error::Estimation("impact is non-positive in every bin".into()));
    }
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for b in &curve.bins {
        let x = sigma_d * (b.q_mid / v_d).sqrt();
        let w = b.count as f64;
        sxy += w * x * b.impact;
        sxx += w * x * x;
    }
    let positive: Vec<(f64, f64, f64)> = curve
        .bins
        .iter()
        .filter(|b| b.impact > 0.0)
        .map(|b| (b.q_mid.ln(), b.impact.ln(), b.count as f64))
        .collect();
    let exponent = weighted_ols(&positive).map(|(slope, _)| slope);
    Ok(SqrtLawFit {
        y: sxy / sxx,
        exponent,
        sigma_d,
        v_d,
        n_orders: curve.n_orders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveValue {
    pub value: f64,
    /// Outside the binned range; the fitted law was used instead.
    pub extrapolated: bool,
    /// Bin means had to be made monotone before interpolation.
    pub isotonic_adjusted: bool,
}

fn monotone_nodes(curve: &ImpactCurve) -> (Vec<(f64, f64)>, bool) {
    let values: Vec<f64> = curve.bins.iter().map(|b| b.impact).collect();
    let weights: Vec<f64> = curve.bins.iter().map(|b| b.count as f64).collect();
    let fitted = isotonic_increasing(&values, &weights);
    let adjusted = fitted != values;
    let nodes = curve.bins.iter().zip(fitted).map(|(b, v)| (b.q_mid, v)).collect();
    (nodes, adjusted)
}

/// Interpolates between two nodes, in log-log space when both coordinates
/// are positive so power laws are reproduced exactly.
fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, x: f64) -> f64 {
    if x1 == x0 {
        return y0;
    }
    if x0 > 0.0 && x1 > 0.0 && y0 > 0.0 && y1 > 0.0 && x > 0.0 {
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        (y0.ln() + t * (y1.ln() - y0.ln())).exp()
    } else {
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }
}

/// Impact liquidity: the meta-order volume whose average impact is `phi`.
/// Inverts the isotonic curve inside its range and the fitted law outside.
pub fn impact_liquidity(curve: &ImpactCurve, fit: &SqrtLawFit, phi: f64) -> Result<CurveValue> {
    if !(phi >= 0.0 && phi.is_finite()) {
        return Err(Error::arg(format!("phi must be non-negative, got {phi}")));
    }
    let (nodes, isotonic_adjusted) = monotone_nodes(curve);
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if phi < first.1 || phi > last.1 || first.1 == last.1 {
        return Ok(CurveValue {
            value: fit.volume_for(phi),
            extrapolated: true,
            isotonic_adjusted,
        });
    }
    let k = nodes.partition_point(|n| n.1 < phi);
    let value = if nodes[k].1 == phi || k == 0 {
        nodes[k].0
    } else {
        let ((q0, i0), (q1, i1)) = (nodes[k - 1], nodes[k]);
        interpolate(i0, q0, i1, q1, phi)
    };
    Ok(CurveValue {
        value,
        extrapolated: false,
        isotonic_adjusted,
    })
}

/// Impact-based drop forecast `I(Q)`: the curve interpolated at `q`, or the
/// fitted law outside the binned range.
pub fn impact_at(curve: &ImpactCurve, fit: &SqrtLawFit, q: f64) -> Result<CurveValue> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::arg(format!("volume must be non-negative, got {q}")));
    }
    let (nodes, isotonic_adjusted) = monotone_nodes(curve);
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if q < first.0 || q > last.0 {
        return Ok(CurveValue {
            value: fit.impact(q),
            extrapolated: true,
            isotonic_adjusted,
        });
    }
    let k = nodes.partition_point(|n| n.0 < q);
    let value = if nodes[k].0 == q || k == 0 {
        nodes[k].1
    } else {
        let ((q0, i0), (q1, i1)) = (nodes[k - 1], nodes[k]);
        interpolate(q0, i0, q1, i1, q)
    };
    Ok(CurveValue {
        value,
        extrapolated: false,
        isotonic_adjusted,
    })
}
