#![no_main]

use std::io::Cursor;

use libfuzzer_sys::fuzz_target;
use liq_core::ingest::{decode_input, parse_book_snapshots, write_snapshots, ParseOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(reader) = decode_input(Cursor::new(data.to_vec())) else { return };
    let Ok(parsed) = parse_book_snapshots(reader, ParseOptions::default()) else { return };

    let mut out = Vec::new();
    write_snapshots(&parsed.value, &mut out).unwrap();
    let again = parse_book_snapshots(Cursor::new(out), ParseOptions { strict: true, header: false }).unwrap();
    assert_eq!(again.value, parsed.value);
});
