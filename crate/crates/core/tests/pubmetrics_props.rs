//! Square-root-law identities and volatility estimator properties.

use liq_core::ingest::{build_bars, Bar, TradeRecord};
use liq_core::pubmetrics::{amihud_illiq, daily_metrics, gk_volatility, theoretical_drop, theoretical_liquidity, TheoryConfig};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn square_root_homogeneity(
        sigma in 1e-4..1.0f64,
        v in 1.0..1e9f64,
        y in 0.1..5.0f64,
        q in 1e-3..1e9f64,
        phi in 1e-4..0.99f64,
    ) {
        prop_assert!(rel(theoretical_drop(sigma, v, y, v).unwrap(), y * sigma) <= 1e-12);
        prop_assert!(rel(theoretical_drop(sigma, v, y, 2.0 * q).unwrap(), 2f64.sqrt() * theoretical_drop(sigma, v, y, q).unwrap()) <= 1e-12);
        prop_assert!(rel(theoretical_liquidity(sigma, v, y, 2.0 * phi).unwrap(), 4.0 * theoretical_liquidity(sigma, v, y, phi).unwrap()) <= 1e-12);
        let drop = theoretical_drop(sigma, v, y, q).unwrap();
        prop_assert!(rel(theoretical_liquidity(sigma, v, y, drop).unwrap(), q) <= 1e-12);
        prop_assert!(rel(amihud_illiq(sigma, 2.0 * v).unwrap(), amihud_illiq(sigma, v).unwrap() / 2.0) <= 1e-15);
    }

    #[test]
    fn gk_is_scale_invariant(
        bars in prop::collection::vec((50.0..150.0f64, 0.0..0.1f64, 0.0..0.1f64, 0.0..1.0f64, 0.0..1.0f64), 1..48),
        c in prop::sample::select(vec![0.125, 0.5, 2.0, 1024.0]),
    ) {
        let make = |scale: f64| -> Vec<Bar> {
            bars.iter().enumerate().map(|(i, &(mid, up, down, a, b))| {
                let (high, low) = (mid * (1.0 + up), mid * (1.0 - down));
                Bar {
                    start: i as f64 * 3600.0,
                    open: scale * (low + a * (high - low)),
                    high: scale * high,
                    low: scale * low,
                    close: scale * (low + b * (high - low)),
                    volume: 1.0,
                }
            }).collect()
        };
        // power-of-two scales keep every ratio, and so the estimate, bit-identical
        let a = gk_volatility(&make(1.0), 24.0).unwrap();
        let b = gk_volatility(&make(c), 24.0).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn drop_is_invariant_under_price_rescaling() {
    let tape = |scale: f64| -> Vec<TradeRecord> {
        (0..500)
            .map(|i| TradeRecord::new(i as f64 * 170.0, scale * (100.0 + (i as f64 * 0.37).sin()), 1.0 + (i % 7) as f64))
            .collect()
    };
    let cfg = TheoryConfig::default();
    let a = daily_metrics(&tape(1.0), &cfg).unwrap();
    let b = daily_metrics(&tape(7.0), &cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(rel(y.sigma_d, x.sigma_d) <= 1e-12);
        assert_eq!(x.v_d, y.v_d);
        assert!(rel(y.drop_th[0].1.unwrap(), x.drop_th[0].1.unwrap()) <= 1e-12);
    }
}

#[test]
fn constant_day_has_zero_volatility() {
    let trades: Vec<TradeRecord> = (0..240).map(|i| TradeRecord::new(i as f64 * 360.0, 42.0, 1.0)).collect();
    let bars = build_bars(&trades, 3600.0).unwrap();
    assert_eq!(bars.len(), 24);
    let g = gk_volatility(&bars, 24.0).unwrap();
    assert_eq!(g.sigma, 0.0);
    assert!(!g.floored);
}

#[test]
fn drop_th_is_non_decreasing_in_q() {
    let trades: Vec<TradeRecord> = (0..300).map(|i| TradeRecord::new(i as f64 * 280.0, 50.0 + (i % 5) as f64, 2.0)).collect();
    let cfg = TheoryConfig { q_stars: vec![0.0, 10.0, 100.0, 1e4, 4e4], ..TheoryConfig::default() };
    for m in daily_metrics(&trades, &cfg).unwrap() {
        let drops: Vec<f64> = m.drop_th.iter().map(|d| d.1.unwrap()).collect();
        assert!(drops.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(drops[0], 0.0);
    }
}
