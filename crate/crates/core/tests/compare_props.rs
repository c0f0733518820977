//! Rescaling, regression and crash-table properties.

use std::collections::BTreeMap;

use liq_core::book::{expected_drop, BookSnapshot, Level};
use liq_core::compare::{compare, crash_table, regress, rescale_to_mean, AlignedSeries};
use liq_core::flow::CrashEvent;
use liq_core::synth::{gen_book, DensitySpec};
use proptest::prelude::*;

fn some(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().copied().map(Some).collect()
}

proptest! {
    #[test]
    fn rescaled_mean_matches_target(
        source in prop::collection::vec(1e-6..1e3f64, 1..100),
        target in prop::collection::vec(1e-6..1e3f64, 1..100),
    ) {
        let r = rescale_to_mean(&source, &target).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&r.values) - mean(&target)).abs() <= 1e-12 * mean(&target));
        // positive scaling keeps the ordering
        for i in 0..source.len() {
            for j in 0..source.len() {
                prop_assert_eq!(source[i] < source[j], r.values[i] < r.values[j]);
            }
        }
    }

    #[test]
    fn r2_is_symmetric_and_affine_invariant(
        pairs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 3..60),
        a in 0.1..10.0f64, b in -50.0..50.0f64, c in 0.1..10.0f64, d in -50.0..50.0f64,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.0 * 0.3 + p.1).collect();
        let xy = regress(&some(&x), &some(&y), 0);
        let yx = regress(&some(&y), &some(&x), 0);
        prop_assume!(xy.is_ok() && yx.is_ok());
        let (xy, yx) = (xy.unwrap(), yx.unwrap());
        prop_assert_eq!(xy.r2, yx.r2);
        prop_assert!((xy.slope * yx.slope - xy.r2).abs() <= 1e-9);
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let t = regress(&some(&xt), &some(&yt), 0).unwrap();
        prop_assert!((t.r2 - xy.r2).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&xy.r2));
    }

    #[test]
    fn masked_days_are_dropped_listwise(
        rows in prop::collection::vec((prop::option::of(0.01..1.0f64), prop::option::of(0.01..1.0f64)), 6..40),
    ) {
        let mut ob = BTreeMap::new();
        let mut li = BTreeMap::new();
        let mut th = BTreeMap::new();
        let mut il = BTreeMap::new();
        for (d, &(a, b)) in rows.iter().enumerate() {
            let d = d as i64 + 15_000;
            if let Some(a) = a { ob.insert(d, a); }
            if let Some(b) = b { li.insert(d, b); }
            th.insert(d, 0.5 + (d % 7) as f64);
            il.insert(d, 1.0 + (d % 5) as f64);
        }
        let aligned = AlignedSeries::align(&ob, &li, &th, &il);
        let complete = aligned.mask.iter().filter(|m| !**m).count();
        prop_assume!(complete >= 3);
        prop_assert_eq!(aligned.days.len(), rows.len());
        if let Ok((report, _)) = compare(&aligned, &[0], false) {
            prop_assert_eq!(report.complete_days, complete);
            for r in report.regressions.iter().filter_map(|r| r.report) {
                prop_assert_eq!(r.n, complete);
            }
        }
    }
}

fn uniform_book(ts: f64) -> BookSnapshot {
    let mut b = gen_book(&DensitySpec::uniform_bids(0.0, 100.0, 100.0), 100.0, 1.0).unwrap().snapshot;
    b.ts = ts;
    b
}

fn event(start: f64, realized: f64, imbalance: f64) -> CrashEvent {
    CrashEvent {
        start,
        end: start + 14_400.0,
        realized_return: realized,
        imbalance_base: imbalance,
        imbalance_quote: imbalance * 100.0,
        forecast_drop: None,
    }
}

#[test]
fn uniform_book_forecasts() {
    let table = crash_table(&[event(10.0, -0.2, -1000.0), event(20.0, 0.0, 0.0)], &[uniform_book(0.0)]).unwrap();
    assert!((table.rows[0].event.forecast_drop.unwrap() + 0.1).abs() <= 0.01);
    assert_eq!(table.rows[1].event.forecast_drop, Some(0.0));
}

#[test]
fn constructed_returns_correlate_perfectly() {
    let book = uniform_book(0.0);
    let events: Vec<CrashEvent> = (1..20)
        .map(|i| {
            let q = 137.0 * i as f64;
            event(100.0 * i as f64, -expected_drop(&book, q).unwrap().phi, -q)
        })
        .collect();
    let table = crash_table(&events, &[book]).unwrap();
    assert!((table.correlation.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn flagged_rows_do_not_affect_the_rest() {
    let books: Vec<BookSnapshot> = [500.0, 1500.0]
        .iter()
        .map(|&ts| {
            let bids = vec![Level::new(99.0, 40.0), Level::new(95.0, 300.0), Level::new(80.0, 900.0)];
            BookSnapshot::new(ts, bids, vec![Level::new(101.0, 50.0), Level::new(110.0, 500.0)], None).unwrap()
        })
        .collect();
    let events = vec![
        event(100.0, -0.01, -20.0),
        event(1000.0, -0.05, -200.0),
        event(400.0, 0.02, 30.0),
        event(2000.0, -0.15, -1000.0),
    ];
    let full = crash_table(&events, &books).unwrap();
    assert!(full.rows[0].flagged && full.rows[2].flagged);
    let kept: Vec<CrashEvent> = full.rows.iter().filter(|r| !r.flagged).map(|r| CrashEvent { forecast_drop: None, ..r.event }).collect();
    let reduced = crash_table(&kept, &books).unwrap();
    let unflagged: Vec<_> = full.rows.iter().filter(|r| !r.flagged).cloned().collect();
    assert_eq!(reduced.rows, unflagged);
    assert_eq!(reduced.correlation, full.correlation);
}
