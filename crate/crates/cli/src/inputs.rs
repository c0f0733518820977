//! Opening and parsing input files, with parse issues reported on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use liq_core::book::BookSnapshot;
use liq_core::compare::parse_daily_column;
use liq_core::ingest::{open_input, parse_book_snapshots, parse_trades, ParseOptions, ParseReport, TradeTape};

use crate::error::CliError;
use crate::{Global, ReferenceArg};

fn open(path: &Path) -> Result<Box<dyn std::io::BufRead>, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input not found: {}", path.display())));
    }
    open_input(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn options(global: &Global) -> ParseOptions {
    ParseOptions {
        strict: global.strict,
        header: global.header,
    }
}

fn with_path(path: &Path, e: liq_core::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn warn_issues(path: &Path, report: &ParseReport) {
    for issue in &report.issues {
        eprintln!("warning: {}:{}: {}", path.display(), issue.line, issue.message);
    }
    if !report.issues.is_empty() {
        eprintln!(
            "warning: {}: skipped {} of {} lines",
            path.display(),
            report.skipped(),
            report.records
        );
    }
}

pub fn trades(path: &Path, global: &Global) -> Result<(TradeTape, ParseReport), CliError> {
    let parsed = parse_trades(open(path)?, options(global)).map_err(|e| with_path(path, e))?;
    warn_issues(path, &parsed.report);
    Ok((parsed.value, parsed.report))
}

pub fn books(path: &Path, global: &Global) -> Result<(Vec<BookSnapshot>, ParseReport), CliError> {
    let parsed = parse_book_snapshots(open(path)?, options(global)).map_err(|e| with_path(path, e))?;
    warn_issues(path, &parsed.report);
    Ok((parsed.value, parsed.report))
}

/// Snapshots with their reference price set as requested.
pub fn referenced_books(
    path: &Path,
    reference: ReferenceArg,
    trades_path: Option<&Path>,
    global: &Global,
) -> Result<Vec<BookSnapshot>, CliError> {
    let (snapshots, _) = books(path, global)?;
    match reference {
        ReferenceArg::Mid => Ok(snapshots),
        ReferenceArg::Last => {
            let trades_path = trades_path
                .ok_or_else(|| CliError::Usage("--reference last needs --trades".into()))?;
            let (tape, _) = trades(trades_path, global)?;
            reprice_to_last_trade(snapshots, &tape)
        }
    }
}

/// Replaces each snapshot's reference price with the last trade price at or
/// before its timestamp. Snapshots preceding every trade keep their midpoint.
pub fn reprice_to_last_trade(snapshots: Vec<BookSnapshot>, tape: &TradeTape) -> Result<Vec<BookSnapshot>, CliError> {
    let trades = tape.trades();
    let mut kept = 0usize;
    let out = snapshots
        .into_iter()
        .map(|s| {
            let k = trades.partition_point(|t| t.timestamp <= s.ts);
            match k.checked_sub(1) {
                Some(i) => s.with_reference(trades[i].price).map_err(CliError::from),
                None => {
                    kept += 1;
                    Ok(s)
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if kept > 0 {
        eprintln!("warning: {kept} snapshots precede the first trade and keep their midpoint");
    }
    Ok(out)
}

/// Splits `FILE[:COLUMN]`.
pub fn file_column(spec: &str, default: &str) -> (PathBuf, String) {
    match spec.rsplit_once(':') {
        Some((file, col)) if !file.is_empty() && !col.is_empty() && !col.contains(['/', '\\']) => {
            (PathBuf::from(file), col.to_string())
        }
        _ => (PathBuf::from(spec), default.to_string()),
    }
}

pub fn daily_column(path: &Path, column: &str) -> Result<BTreeMap<i64, f64>, CliError> {
    parse_daily_column(open(path)?, column).map_err(|e| with_path(path, e))
}

/// Header fields of a per-day CSV, skipping comment lines.
pub fn header_fields(path: &Path) -> Result<Vec<String>, CliError> {
    let mut reader = open(path)?;
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let text = line.trim();
        if !text.is_empty() && !text.starts_with('#') {
            return Ok(text.split(',').map(|f| f.trim().to_string()).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_column_split() {
        assert_eq!(file_column("a/drop.csv", "value"), (PathBuf::from("a/drop.csv"), "value".into()));
        assert_eq!(file_column("a/drop.csv:v2", "value"), (PathBuf::from("a/drop.csv"), "v2".into()));
        assert_eq!(file_column("c:/x.csv", "value"), (PathBuf::from("c:/x.csv"), "value".into()));
    }
}
