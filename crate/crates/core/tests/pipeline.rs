//! Per-day measure assembly on a generated market.

use liq_core::flow::sign_trades;
use liq_core::pipeline::{measure_set, FitMode, ImpactConfig};
use liq_core::pubmetrics::{daily_metrics, TheoryConfig};
use liq_core::synth::{gen_market, SynthSpec};

#[test]
fn both_fit_modes_fill_every_day() {
    let spec = SynthSpec { metaorders_per_day: 300, sigma_spread: 0.5, ..SynthSpec::default() };
    let m = gen_market(&spec, 6).unwrap();
    let theory = TheoryConfig::default();
    let metrics = daily_metrics(m.tape.trades(), &theory).unwrap();
    let signed = sign_trades(m.tape.trades()).trades;
    for fit in [FitMode::Global, FitMode::Daily] {
        let cfg = ImpactConfig { fit, ..ImpactConfig::default() };
        let set = measure_set(&signed, &m.snapshots, metrics.clone(), theory.calendar, &cfg, 40_000.0).unwrap();
        assert_eq!(set.aligned.days.len(), 6);
        assert!(set.aligned.mask.iter().all(|masked| !masked), "{fit:?}");
        if fit == FitMode::Global {
            let ys: Vec<f64> = set.impact.iter().map(|d| d.fit.unwrap().y).collect();
            assert!(ys.iter().all(|y| *y == ys[0]));
        }
    }
}
