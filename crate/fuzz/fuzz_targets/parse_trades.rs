#![no_main]

use std::io::Cursor;

use libfuzzer_sys::fuzz_target;
use liq_core::ingest::{decode_input, parse_trades, write_trades, ParseOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(reader) = decode_input(Cursor::new(data.to_vec())) else { return };
    let Ok(parsed) = parse_trades(reader, ParseOptions::default()) else { return };
    let tape = parsed.value;
    assert!(tape.trades().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));

    let mut out = Vec::new();
    write_trades(&tape, &mut out).unwrap();
    let again = parse_trades(Cursor::new(out), ParseOptions { strict: true, header: false }).unwrap();
    assert_eq!(again.value, tape);
});
