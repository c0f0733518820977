//! Per-day assembly of the three illiquidity measures from a tape and a
//! snapshot stream.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::book::{daily_series, BookMeasure, BookSnapshot};
use crate::compare::AlignedSeries;
use crate::error::{Error, Result};
use crate::flow::SignedTrade;
use crate::impact::{
    fit_sqrt_law, group_metaorders, impact_at, impact_curve, CurveValue, ImpactCurve, MetaOrder, SqrtLawFit,
};
use crate::pubmetrics::DailyMetrics;
use crate::time::DayCalendar;

/// Where the square-root coefficient used outside a day's binned range
/// comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// One coefficient fitted over every meta-order in the sample.
    #[default]
    Global,
    /// A coefficient per day from that day's meta-orders alone.
    Daily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactConfig {
    /// Largest pause between child trades of one meta-order, seconds.
    pub gap: f64,
    pub n_bins: usize,
    pub min_count: usize,
    /// Group by trader id where ids are present.
    pub use_ids: bool,
    pub fit: FitMode,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self {
            gap: 300.0,
            n_bins: 12,
            min_count: 20,
            use_ids: true,
            fit: FitMode::Global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyImpact {
    pub day: i64,
    pub n_orders: usize,
    pub fit: Option<SqrtLawFit>,
    /// `I(q_star)` from the day's curve.
    pub drop: Option<f64>,
    pub extrapolated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Splits meta-orders by the calendar day on which they start.
pub fn orders_by_day(orders: &[MetaOrder], calendar: DayCalendar) -> BTreeMap<i64, Vec<MetaOrder>> {
    let mut days: BTreeMap<i64, Vec<MetaOrder>> = BTreeMap::new();
    for o in orders {
        days.entry(calendar.day_of(o.start)).or_default().push(o.clone());
    }
    days
}

/// Evaluates each day's impact curve at `q_star`.
///
/// Outside a day's binned range the square-root law is used with the day's
/// volatility and volume and a coefficient that is either the day's own fit
/// or, when `global` is given, the sample-wide one. With a global
/// coefficient a day too thin for its own curve falls back to the law alone.
pub fn daily_impact(
    orders: &[MetaOrder],
    metrics: &[DailyMetrics],
    calendar: DayCalendar,
    cfg: &ImpactConfig,
    q_star: f64,
    global: Option<&SqrtLawFit>,
) -> Vec<DailyImpact> {
    let by_day = orders_by_day(orders, calendar);
    metrics
        .iter()
        .map(|m| {
            let day_orders = by_day.get(&m.day).map(Vec::as_slice).unwrap_or(&[]);
            let curve = impact_curve(day_orders, cfg.n_bins, cfg.min_count);
            let result = match global {
                Some(g) => {
                    let law = SqrtLawFit {
                        sigma_d: m.sigma_d,
                        v_d: m.v_d,
                        n_orders: day_orders.len(),
                        ..*g
                    };
                    match curve {
                        Ok(curve) => impact_at(&curve, &law, q_star).map(|at| (law, at)),
                        Err(_) if m.sigma_d > 0.0 && m.v_d > 0.0 => Ok((
                            law,
                            CurveValue {
                                value: law.impact(q_star),
                                extrapolated: true,
                                isotonic_adjusted: false,
                            },
                        )),
                        Err(e) => Err(e),
                    }
                }
                None => curve.and_then(|curve| {
                    let fit = fit_sqrt_law(&curve, m.sigma_d, m.v_d)?;
                    Ok((fit, impact_at(&curve, &fit, q_star)?))
                }),
            };
            match result {
                Ok((fit, at)) => DailyImpact {
                    day: m.day,
                    n_orders: day_orders.len(),
                    fit: Some(fit),
                    drop: Some(at.value),
                    extrapolated: at.extrapolated,
                    error: None,
                },
                Err(e) => DailyImpact {
                    day: m.day,
                    n_orders: day_orders.len(),
                    fit: None,
                    drop: None,
                    extrapolated: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// One curve over all meta-orders, fitted with the sample-average daily
/// volatility and volume.
pub fn global_impact(orders: &[MetaOrder], metrics: &[DailyMetrics], cfg: &ImpactConfig) -> Result<(ImpactCurve, SqrtLawFit)> {
    if metrics.is_empty() {
        return Err(Error::InsufficientData("no daily metrics".into()));
    }
    let n = metrics.len() as f64;
    let sigma = metrics.iter().map(|m| m.sigma_d).sum::<f64>() / n;
    let v_d = metrics.iter().map(|m| m.v_d).sum::<f64>() / n;
    let curve = impact_curve(orders, cfg.n_bins, cfg.min_count)?;
    let fit = fit_sqrt_law(&curve, sigma, v_d)?;
    Ok((curve, fit))
}

/// The four per-day drop forecasts at `q_star`, aligned on one calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSet {
    pub theory: Vec<DailyMetrics>,
    pub impact: Vec<DailyImpact>,
    pub aligned: AlignedSeries,
}

/// Computes order-book, impact, square-root-law and Amihud illiquidity per
/// day. `metrics` must have been computed with `q_star` as first stress size.
pub fn measure_set(
    signed: &[SignedTrade],
    snapshots: &[BookSnapshot],
    metrics: Vec<DailyMetrics>,
    calendar: DayCalendar,
    cfg: &ImpactConfig,
    q_star: f64,
) -> Result<MeasureSet> {
    let orders = group_metaorders(signed, cfg.gap, cfg.use_ids)?;
    let global = match cfg.fit {
        FitMode::Global => Some(global_impact(&orders, &metrics, cfg)?.1),
        FitMode::Daily => None,
    };
    let impact = daily_impact(&orders, &metrics, calendar, cfg, q_star, global.as_ref());
    let ob: BTreeMap<i64, f64> = daily_series(snapshots, calendar, BookMeasure::Drop { q_star })?
        .into_iter()
        .filter_map(|(d, v)| Some((d, v?)))
        .collect();
    let li: BTreeMap<i64, f64> = impact.iter().filter_map(|d| Some((d.day, d.drop?))).collect();
    let th: BTreeMap<i64, f64> = metrics
        .iter()
        .filter_map(|m| Some((m.day, m.drop_th.first()?.1?)))
        .collect();
    let il: BTreeMap<i64, f64> = metrics.iter().filter_map(|m| Some((m.day, m.illiq_amihud?))).collect();
    Ok(MeasureSet {
        aligned: AlignedSeries::align(&ob, &li, &th, &il),
        theory: metrics,
        impact,
    })
}
