#![no_main]

use libfuzzer_sys::fuzz_target;
use liq_core::time::{day_label, parse_day_label, parse_duration};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(seconds) = parse_duration(text) {
        assert!(seconds.is_finite() && seconds > 0.0);
    }
    if let Ok(day) = parse_day_label(text) {
        assert_eq!(parse_day_label(&day_label(day)).unwrap(), day);
    }
});
