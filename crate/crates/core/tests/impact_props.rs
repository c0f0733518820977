//! Meta-order grouping, curve convergence and square-root-law inversion.

use liq_core::flow::sign_trades;
use liq_core::impact::{
    fit_sqrt_law, group_metaorders, impact_at, impact_curve, impact_curve_from_samples, impact_liquidity, ImpactBin,
    ImpactCurve,
};
use liq_core::ingest::{Sign, TradeRecord};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn grouping_is_a_partition(
        rows in prop::collection::vec((0u32..600, 1u32..40, 1u32..16, prop::option::of(0u8..4), prop::option::of(prop::bool::ANY)), 1..120),
        gap in prop::sample::select(vec![1.0, 30.0, 300.0, 5000.0]),
        use_ids in prop::bool::ANY,
    ) {
        let mut t = 0.0;
        let trades: Vec<TradeRecord> = rows
            .iter()
            .map(|&(dt, p, v, id, s)| {
                t += dt as f64;
                let mut r = TradeRecord::new(t, p as f64, v as f64 / 4.0);
                r.trader_id = id.map(|i| format!("t{i}"));
                r.sign = s.map(|b| if b { Sign::Buy } else { Sign::Sell });
                r
            })
            .collect();
        let signed = sign_trades(&trades).trades;
        let orders = group_metaorders(&signed, gap, use_ids).unwrap();
        prop_assert_eq!(orders.iter().map(|o| o.trades).sum::<usize>(), trades.len());
        let total: f64 = trades.iter().map(|r| r.volume).sum();
        prop_assert_eq!(orders.iter().map(|o| o.volume).sum::<f64>(), total);
        for o in &orders {
            prop_assert!(o.volume > 0.0 && o.end >= o.start);
            if !use_ids {
                prop_assert!(o.trader.is_none());
            }
        }
        // same-sign runs never touch when grouping ignores ids
        if !use_ids {
            for w in orders.windows(2) {
                prop_assert!(w[0].sign != w[1].sign || w[1].start - w[0].end > gap);
            }
        }
    }
}

#[test]
fn interleaved_ids_by_hand() {
    let rows = [("A", 0.0), ("B", 1.0), ("A", 2.0), ("B", 3.0)];
    let trades: Vec<TradeRecord> = rows
        .iter()
        .map(|&(id, t)| TradeRecord::new(t, 10.0 + t, 1.0).with_sign(Sign::Buy).with_trader(id))
        .collect();
    let signed = sign_trades(&trades).trades;
    assert_eq!(group_metaorders(&signed, 60.0, true).unwrap().len(), 2);
    assert_eq!(group_metaorders(&signed, 60.0, false).unwrap().len(), 1);
}

/// Expected bin mean of `a * sqrt(Q)` for `Q` log-uniform on `[lo, hi]`.
fn log_uniform_sqrt_mean(a: f64, lo: f64, hi: f64) -> f64 {
    a * 2.0 * (hi.sqrt() - lo.sqrt()) / (hi / lo).ln()
}

fn worst_bin_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = 0.01 / 1000f64.sqrt();
    let samples: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let q = 10.0 * 1000f64.powf(rng.random::<f64>());
            let z: f64 = rng.sample(StandardNormal);
            (q, a * q.sqrt() * (1.0 + 0.5 * z))
        })
        .collect();
    let curve = impact_curve_from_samples(&samples, 6, 1).unwrap();
    curve
        .bins
        .iter()
        .map(|b| {
            let want = log_uniform_sqrt_mean(a, b.q_lo, b.q_hi);
            (b.impact - want).abs() / want
        })
        .fold(0.0, f64::max)
}

#[test]
fn curve_converges_to_the_generating_law() {
    // averaged over seeds so the ordering is not a single-draw accident
    let mean_error = |n| (0..8).map(|s| worst_bin_error(n, s)).sum::<f64>() / 8.0;
    let errors = [mean_error(1_000), mean_error(10_000), mean_error(100_000)];
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[0] < 0.2 && errors[2] < 0.01, "{errors:?}");
}

#[test]
fn exact_law_is_recovered_and_inverted() {
    let (sigma, v) = (0.04, 10_000.0);
    let bins: Vec<ImpactBin> = (0..8)
        .map(|i| {
            let (q_lo, q_hi) = (10.0 * 2f64.powi(i), 10.0 * 2f64.powi(i + 1));
            let q_mid = (q_lo * q_hi).sqrt();
            ImpactBin { q_mid, q_lo, q_hi, impact: 1.2 * sigma * (q_mid / v).sqrt(), count: 20 + i as usize }
        })
        .collect();
    let curve = ImpactCurve { bins, n_orders: 220 };
    let fit = fit_sqrt_law(&curve, sigma, v).unwrap();
    assert!((fit.y - 1.2).abs() < 1e-12, "{}", fit.y);
    assert!((fit.exponent.unwrap() - 0.5).abs() < 1e-12);

    for b in &curve.bins {
        let back = impact_liquidity(&curve, &fit, b.impact).unwrap();
        assert!(!back.extrapolated);
        assert_eq!(back.value, b.q_mid);
    }
    for k in 1..50 {
        let lo = curve.bins[0].impact;
        let hi = curve.bins[curve.bins.len() - 1].impact;
        let phi = lo + (hi - lo) * k as f64 / 50.0;
        let q = impact_liquidity(&curve, &fit, phi).unwrap().value;
        let again = impact_at(&curve, &fit, q).unwrap().value;
        assert!((again - phi).abs() <= 1e-12 * phi, "{again} vs {phi}");
    }
    let outside = impact_liquidity(&curve, &fit, 10.0 * curve.bins[curve.bins.len() - 1].impact).unwrap();
    assert!(outside.extrapolated);
    assert_eq!(outside.value, fit.volume_for(10.0 * curve.bins[curve.bins.len() - 1].impact));
}

#[test]
fn fit_is_linear_in_impact() {
    let samples: Vec<(f64, f64)> = (1..200).map(|i| (i as f64, 0.001 * (i as f64).sqrt() + 1e-4 * (i % 3) as f64)).collect();
    let doubled: Vec<(f64, f64)> = samples.iter().map(|&(q, i)| (q, 2.0 * i)).collect();
    let a = fit_sqrt_law(&impact_curve_from_samples(&samples, 5, 1).unwrap(), 0.03, 500.0).unwrap();
    let b = fit_sqrt_law(&impact_curve_from_samples(&doubled, 5, 1).unwrap(), 0.03, 500.0).unwrap();
    assert!((b.y - 2.0 * a.y).abs() <= 1e-12 * b.y);
}

#[test]
fn orders_from_trades_feed_the_curve() {
    let trades = [
        TradeRecord::new(0.0, 100.0, 60.0).with_sign(Sign::Buy),
        TradeRecord::new(10.0, 102.0, 40.0).with_sign(Sign::Buy),
    ];
    let orders = group_metaorders(&sign_trades(&trades).trades, 300.0, true).unwrap();
    let curve = impact_curve(&orders, 12, 1).unwrap();
    assert_eq!(curve.bins.len(), 1);
    assert_eq!(curve.bins[0].q_mid, 100.0);
    assert!((curve.bins[0].impact - 0.02).abs() < 1e-15);
}
