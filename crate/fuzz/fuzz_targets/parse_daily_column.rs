#![no_main]

use std::io::Cursor;

use libfuzzer_sys::fuzz_target;
use liq_core::compare::parse_daily_column;

fuzz_target!(|data: &[u8]| {
    // first line picks the column, the rest is the file
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let Ok(column) = std::str::from_utf8(&data[..split]) else { return };
    let rest = data.get(split + 1..).unwrap_or_default();
    if let Ok(values) = parse_daily_column(Cursor::new(rest), column) {
        assert!(values.values().all(|v| !v.is_nan()));
    }
});
