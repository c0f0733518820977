//! Trade tape and order-book snapshot ingestion, plus OHLCV bar building.
//!
//! Trades use the bitcoincharts layout `unixtime,price,amount`, optionally
//! extended with a fourth `sign` column (`1`/`+1`/`-1`) and a fifth
//! `trader_id` column. Empty optional fields mean "unknown". Lines starting
//! with `#` are comments. Book snapshots are JSON lines
//! `{"ts":..,"bids":[[price,volume],..],"asks":[..],"mid":..}` with `mid`
//! optional. Both readers accept gzip input, detected by its magic bytes.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::book::{BookSnapshot, Level};
use crate::error::{Error, Result};
use crate::time::bin_index;

/// Aggressor side of a trade: `+1` buyer-initiated, `-1` seller-initiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Buy,
    Sell,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Buy => 1.0,
            Sign::Sell => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Buy => 1,
            Sign::Sell => -1,
        }
    }

    fn parse(field: &str) -> std::result::Result<Self, String> {
        match field {
            "1" | "+1" => Ok(Sign::Buy),
            "-1" => Ok(Sign::Sell),
            other => Err(format!("sign must be +1 or -1, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    /// Seconds since the Unix epoch, possibly fractional.
    pub timestamp: f64,
    pub price: f64,
    /// Traded quantity in base units.
    pub volume: f64,
    pub sign: Option<Sign>,
    pub trader_id: Option<String>,
}

impl TradeRecord {
    pub fn new(timestamp: f64, price: f64, volume: f64) -> Self {
        Self {
            timestamp,
            price,
            volume,
            sign: None,
            trader_id: None,
        }
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = Some(sign);
        self
    }

    pub fn with_trader(mut self, id: impl Into<String>) -> Self {
        self.trader_id = Some(id.into());
        self
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.timestamp.is_finite() {
            return Err("timestamp is not finite".into());
        }
        if !(self.price.is_finite() && self.price > 0.0) {
            return Err(format!("price must be positive, got {}", self.price));
        }
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(format!("volume must be positive, got {}", self.volume));
        }
        if let Some(id) = &self.trader_id {
            if id.contains([',', '\n', '\r']) {
                return Err("trader id contains a separator".into());
            }
        }
        Ok(())
    }
}

/// Trades in non-decreasing timestamp order; ties keep their input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeTape {
    trades: Vec<TradeRecord>,
}

impl TradeTape {
    /// Validates every record and stable-sorts by timestamp.
    pub fn new(mut trades: Vec<TradeRecord>) -> Result<Self> {
        for (i, t) in trades.iter().enumerate() {
            t.validate()
                .map_err(|m| Error::arg(format!("trade {i}: {m}")))?;
        }
        trades.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        Ok(Self { trades })
    }

    pub fn trades(&self) -> &[TradeRecord] {
        &self.trades
    }

    pub fn len(&self) -> usize {
        self.trades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.trades.iter().map(|t| t.volume).sum()
    }

    pub fn into_inner(self) -> Vec<TradeRecord> {
        self.trades
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
    /// Skip the first physical line.
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParseReport {
    /// Data lines seen, excluding blanks, comments and the header.
    pub records: usize,
    pub issues: Vec<ParseIssue>,
}

impl ParseReport {
    pub fn skipped(&self) -> usize {
        self.issues.len()
    }

    fn record(&mut self, strict: bool, line: usize, message: String) -> Result<()> {
        if strict {
            return Err(Error::Parse { line, message });
        }
        self.issues.push(ParseIssue { line, message });
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub report: ParseReport,
}

/// Wraps a reader, transparently inflating gzip streams.
pub fn decode_input<R: Read + 'static>(reader: R) -> io::Result<Box<dyn BufRead>> {
    let mut buffered = BufReader::new(reader);
    let magic = buffered.fill_buf()?;
    if magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(buffered))))
    } else {
        Ok(Box::new(buffered))
    }
}

pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    decode_input(File::open(path)?)
}

/// Iterates `(line_number, text)` over data lines, recording undecodable
/// lines in `report`.
fn for_each_line<R: BufRead>(
    mut reader: R,
    opts: ParseOptions,
    report: &mut ParseReport,
    mut f: impl FnMut(usize, &str, &mut ParseReport) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if opts.header && line_no == 1 {
            continue;
        }
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        let text = match std::str::from_utf8(&buf) {
            Ok(t) => t.trim(),
            Err(_) => {
                report.records += 1;
                report.record(opts.strict, line_no, "invalid UTF-8".into())?;
                continue;
            }
        };
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        report.records += 1;
        f(line_no, text, report)?;
    }
    Ok(())
}

fn parse_number(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} is not a number: {field:?}"))?;
    if !v.is_finite() {
        return Err(format!("{name} is not finite"));
    }
    Ok(v)
}

/// Parses one CSV trade line.
pub fn parse_trade_line(line: &str) -> std::result::Result<TradeRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if !(3..=5).contains(&fields.len()) {
        return Err(format!("expected 3 to 5 fields, got {}", fields.len()));
    }
    let mut trade = TradeRecord::new(
        parse_number(fields[0], "timestamp")?,
        parse_number(fields[1], "price")?,
        parse_number(fields[2], "volume")?,
    );
    if let Some(sign) = fields.get(3).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        trade.sign = Some(Sign::parse(sign)?);
    }
    if let Some(id) = fields.get(4).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        trade.trader_id = Some(id.to_string());
    }
    trade.validate()?;
    Ok(trade)
}

/// Parses a CSV trade stream into a timestamp-sorted tape.
pub fn parse_trades<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Parsed<TradeTape>> {
    let mut report = ParseReport::default();
    let mut trades = Vec::new();
    for_each_line(reader, opts, &mut report, |line, text, report| {
        match parse_trade_line(text) {
            Ok(t) => trades.push(t),
            Err(m) => report.record(opts.strict, line, m)?,
        }
        Ok(())
    })?;
    trades.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(Parsed {
        value: TradeTape { trades },
        report,
    })
}

/// Writes trades in the same CSV layout [`parse_trades`] reads. Numbers use
/// the shortest representation that parses back to the identical value.
pub fn write_trades<W: Write>(tape: &TradeTape, mut w: W) -> io::Result<()> {
    for t in tape.trades() {
        write!(w, "{},{},{}", t.timestamp, t.price, t.volume)?;
        match (&t.sign, &t.trader_id) {
            (None, None) => {}
            (Some(s), None) => write!(w, ",{}", s.as_i8())?,
            (Some(s), Some(id)) => write!(w, ",{},{}", s.as_i8(), id)?,
            (None, Some(id)) => write!(w, ",,{id}")?,
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawSnapshot {
    ts: f64,
    #[serde(default)]
    bids: Vec<(f64, f64)>,
    #[serde(default)]
    asks: Vec<(f64, f64)>,
    #[serde(default)]
    mid: Option<f64>,
}

#[derive(Serialize)]
struct RawSnapshotOut {
    ts: f64,
    bids: Vec<(f64, f64)>,
    asks: Vec<(f64, f64)>,
    mid: f64,
}

fn to_pairs(levels: &[Level]) -> Vec<(f64, f64)> {
    levels.iter().map(|l| (l.price, l.volume)).collect()
}

/// Parses and validates one JSON snapshot line.
pub fn parse_snapshot_line(line: &str) -> std::result::Result<BookSnapshot, String> {
    let raw: RawSnapshot = serde_json::from_str(line).map_err(|e| format!("bad JSON: {e}"))?;
    let side = |v: Vec<(f64, f64)>| {
        v.into_iter()
            .map(|(price, volume)| Level { price, volume })
            .collect::<Vec<_>>()
    };
    BookSnapshot::new(raw.ts, side(raw.bids), side(raw.asks), raw.mid).map_err(|e| match e {
        Error::InvalidSnapshot(m) => m,
        other => other.to_string(),
    })
}

/// Parses JSON-lines book snapshots, preserving input order.
pub fn parse_book_snapshots<R: BufRead>(
    reader: R,
    opts: ParseOptions,
) -> Result<Parsed<Vec<BookSnapshot>>> {
    let mut report = ParseReport::default();
    let mut snapshots = Vec::new();
    for_each_line(reader, opts, &mut report, |line, text, report| {
        match parse_snapshot_line(text) {
            Ok(s) => snapshots.push(s),
            Err(m) => report.record(opts.strict, line, m)?,
        }
        Ok(())
    })?;
    Ok(Parsed {
        value: snapshots,
        report,
    })
}

pub fn write_snapshots<W: Write>(snapshots: &[BookSnapshot], mut w: W) -> Result<()> {
    for s in snapshots {
        let raw = RawSnapshotOut {
            ts: s.ts,
            bids: to_pairs(s.bids()),
            asks: to_pairs(s.asks()),
            mid: s.mid(),
        };
        serde_json::to_writer(&mut w, &raw)?;
        writeln!(w)?;
    }
    Ok(())
}

/// OHLCV bar over the epoch-aligned bin starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bar {
    pub start: f64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// Aggregates time-ordered trades into bars of `period` seconds. Bin `k`
/// covers `[k*period, (k+1)*period)`; bins without trades are omitted.
pub fn build_bars(trades: &[TradeRecord], period: f64) -> Result<Vec<Bar>> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::arg(format!("bar period must be positive, got {period}")));
    }
    let mut bars: Vec<Bar> = Vec::new();
    let mut current: Option<i64> = None;
    for t in trades {
        let k = bin_index(t.timestamp, period);
        match (current, bars.last_mut()) {
            (Some(c), Some(bar)) if c == k => {
                bar.high = bar.high.max(t.price);
                bar.low = bar.low.min(t.price);
                bar.close = t.price;
                bar.volume += t.volume;
            }
            _ => {
                bars.push(Bar {
                    start: k as f64 * period,
                    open: t.price,
                    high: t.price,
                    low: t.price,
                    close: t.price,
                    volume: t.volume,
                });
                current = Some(k);
            }
        }
    }
    Ok(bars)
}
