//! One function per subcommand.

use std::path::Path;

use liq_core::book::{
    book_liquidity, daily_book_liquidity, expected_drop, group_by_day, support_price, BookMeasure, BookSnapshot, Side,
    Unit,
};
use liq_core::compare::{compare, crash_table, AlignedSeries, COLUMNS};
use liq_core::flow::{extreme_events, imbalance, sign_trades, EventQuery, ReturnMode, SignedTrade};
use liq_core::impact::group_metaorders;
use liq_core::ingest::{build_bars, write_snapshots, write_trades, ParseReport, TradeTape};
use liq_core::pipeline::{daily_impact, global_impact, FitMode, ImpactConfig};
use liq_core::pubmetrics::{day_metrics, split_days, DailyMetrics, TheoryConfig};
use liq_core::synth::{gen_market, SynthSpec};
use liq_core::time::{day_label, parse_duration, DayCalendar};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::inputs;
use crate::output::{Cell, Meta, Sink, Table};
use crate::{
    BookArgs, BookInput, Cli, Command, CompareArgs, EventsArgs, FitArg, Global, ImbalanceArgs, ImpactArgs, IngestArgs,
    ModeArg, SideArg, StressArgs, SynthArgs, TheoryArgs, UnitArg,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if !g.day_offset.is_finite() {
        return Err(CliError::Usage("--day-offset must be finite".into()));
    }
    let sink = Sink::new(&g.out, g.format)?;
    match &cli.command {
        Command::Ingest(a) => ingest(g, a, &sink),
        Command::Book(a) => book(g, a, &sink),
        Command::Drop(a) => stress(g, a, &sink, Stress::Drop),
        Command::Support(a) => stress(g, a, &sink, Stress::Support),
        Command::Imbalance(a) => imbalance_cmd(g, a, &sink),
        Command::Events(a) => events(g, a, &sink),
        Command::Impact(a) => impact(g, a, &sink),
        Command::Theory(a) => theory(g, a, &sink),
        Command::Compare(a) => compare_cmd(g, a, &sink),
        Command::Synth(a) => synth(g, a, &sink),
    }
}

fn meta<A: Serialize>(cmd: &'static str, g: &Global, args: &A) -> Meta {
    Meta::new(cmd, json!({ "global": g, "args": args }))
}

fn calendar(g: &Global) -> DayCalendar {
    DayCalendar::new(g.day_offset)
}

fn unit(u: UnitArg) -> Unit {
    match u {
        UnitArg::Btc => Unit::Base,
        UnitArg::Usd => Unit::Quote,
    }
}

fn duration(flag: &str, text: &str) -> Result<f64, CliError> {
    parse_duration(text).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn signed(tape: &TradeTape) -> Vec<SignedTrade> {
    let signing = sign_trades(tape.trades());
    if signing.defaulted_first {
        eprintln!("warning: first unsigned trade has no prior price; signed as a buy");
    }
    signing.trades
}

fn report_json(report: &ParseReport, kept: usize) -> Value {
    json!({
        "records": report.records,
        "kept": kept,
        "skipped": report.skipped(),
        "issues": report.issues,
    })
}

fn ingest(g: &Global, a: &IngestArgs, sink: &Sink) -> Result<(), CliError> {
    if a.trades.is_none() && a.books.is_none() {
        return Err(CliError::Usage("ingest needs --trades or --books".into()));
    }
    let meta = meta("ingest", g, a);
    let mut summary = serde_json::Map::new();
    if let Some(path) = &a.trades {
        let (tape, report) = inputs::trades(path, g)?;
        let mut bytes = format!("{}\n", meta.comment_line()).into_bytes();
        write_trades(&tape, &mut bytes).map_err(|e| CliError::Data(e.to_string()))?;
        sink.write_bytes("ingest_trades.csv", &bytes)?;
        summary.insert("trades".into(), report_json(&report, tape.len()));
        if let Some(period) = &a.bars {
            let period = duration("bars", period)?;
            let mut table = Table::new(&["start", "open", "high", "low", "close", "volume"]);
            for b in build_bars(tape.trades(), period)? {
                table.push(vec![
                    Cell::Exact(b.start),
                    Cell::Exact(b.open),
                    Cell::Exact(b.high),
                    Cell::Exact(b.low),
                    Cell::Exact(b.close),
                    Cell::Num(b.volume),
                ]);
            }
            sink.table("bars", &table, &meta)?;
        }
    }
    if let Some(path) = &a.books {
        let (snapshots, report) = inputs::books(path, g)?;
        let mut bytes = format!("{}\n", meta.comment_line()).into_bytes();
        write_snapshots(&snapshots, &mut bytes)?;
        sink.write_bytes("ingest_books.jsonl", &bytes)?;
        summary.insert("books".into(), report_json(&report, snapshots.len()));
    }
    sink.report("ingest_report.json", &summary, &meta)?;
    Ok(())
}

fn load_books(g: &Global, input: &BookInput) -> Result<Vec<BookSnapshot>, CliError> {
    inputs::referenced_books(&input.books, input.reference, input.trades.as_deref(), g)
}

/// Per-day means of `measure` over every day from the first to the last
/// snapshot, with the number of snapshots behind each mean.
fn daily_means(
    snapshots: &[BookSnapshot],
    cal: DayCalendar,
    measure: BookMeasure,
) -> Result<Vec<(i64, Option<f64>, usize)>, CliError> {
    let days = group_by_day(snapshots, cal);
    let (Some(&first), Some(&last)) = (days.keys().next(), days.keys().next_back()) else {
        return Ok(Vec::new());
    };
    let range: Vec<i64> = (first..=last).collect();
    range
        .par_iter()
        .map(|d| {
            let day = days.get(d).map(Vec::as_slice).unwrap_or(&[]);
            Ok((*d, daily_book_liquidity(day, measure)?, day.len()))
        })
        .collect()
}

fn view(daily: bool) -> &'static str {
    if daily {
        "daily-mean"
    } else {
        "snapshot"
    }
}

fn book(g: &Global, a: &BookArgs, sink: &Sink) -> Result<(), CliError> {
    if a.phi.is_empty() || a.phi.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(CliError::Usage("--phi values must lie in (0, 1)".into()));
    }
    let meta = meta("book", g, a).label("view", view(a.input.daily));
    let snapshots = load_books(g, &a.input)?;
    let side = match a.side {
        SideArg::Buy => Side::Buy,
        SideArg::Sell => Side::Sell,
    };
    let unit = unit(a.unit);
    let table = if a.input.daily {
        let mut table = Table::new(&["date", "phi", "value", "snapshots"]);
        for &phi in &a.phi {
            let measure = BookMeasure::Liquidity { phi, side, unit };
            for (day, value, n) in daily_means(&snapshots, calendar(g), measure)? {
                table.push(vec![Cell::Text(day_label(day)), Cell::Num(phi), Cell::opt(value), Cell::Int(n as i64)]);
            }
        }
        table
    } else {
        let mut table = Table::new(&["ts", "phi", "value", "empty_side"]);
        let rows: Vec<Vec<Vec<Cell>>> = snapshots
            .par_iter()
            .map(|s| {
                a.phi
                    .iter()
                    .map(|&phi| {
                        let l = book_liquidity(s, phi, side, unit)?;
                        Ok(vec![Cell::Exact(s.ts), Cell::Num(phi), Cell::Num(l.value), Cell::Flag(l.empty_side)])
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })
            .collect::<Result<_, _>>()?;
        rows.into_iter().flatten().for_each(|r| table.push(r));
        table
    };
    sink.table("book", &table, &meta)?;
    Ok(())
}

#[derive(Clone, Copy)]
enum Stress {
    Drop,
    Support,
}

fn stress(g: &Global, a: &StressArgs, sink: &Sink, kind: Stress) -> Result<(), CliError> {
    if !(a.q >= 0.0 && a.q.is_finite()) {
        return Err(CliError::Usage("--q must be non-negative".into()));
    }
    let (cmd, stem, measure) = match kind {
        Stress::Drop => ("drop", "drop", BookMeasure::Drop { q_star: a.q }),
        Stress::Support => ("support", "support", BookMeasure::Support { q: a.q }),
    };
    let meta = meta(cmd, g, a).label("view", view(a.input.daily));
    let snapshots = load_books(g, &a.input)?;
    let table = if a.input.daily {
        let mut table = Table::new(&["date", "value", "snapshots"]);
        for (day, value, n) in daily_means(&snapshots, calendar(g), measure)? {
            table.push(vec![Cell::Text(day_label(day)), Cell::opt(value), Cell::Int(n as i64)]);
        }
        table
    } else {
        let mut table = Table::new(&["ts", "value", "saturated"]);
        let rows: Vec<Vec<Cell>> = snapshots
            .par_iter()
            .map(|s| {
                let (value, saturated) = match kind {
                    Stress::Drop => {
                        let d = expected_drop(s, a.q)?;
                        (d.phi, d.saturated)
                    }
                    Stress::Support => {
                        let p = support_price(s, a.q)?;
                        (p.price, p.saturated)
                    }
                };
                Ok(vec![Cell::Exact(s.ts), Cell::Num(value), Cell::Flag(saturated)])
            })
            .collect::<Result<_, CliError>>()?;
        rows.into_iter().for_each(|r| table.push(r));
        table
    };
    sink.table(stem, &table, &meta)?;
    Ok(())
}

fn imbalance_cmd(g: &Global, a: &ImbalanceArgs, sink: &Sink) -> Result<(), CliError> {
    let window = duration("window", &a.window)?;
    let meta = meta("imbalance", g, a);
    let (tape, _) = inputs::trades(&a.trades, g)?;
    let series = imbalance(&signed(&tape), window, unit(a.unit))?;
    let mut table = Table::new(&["window_start", "imbalance", "n_trades"]);
    for p in &series.points {
        table.push(vec![Cell::Exact(p.window_start), Cell::Num(p.imbalance), Cell::Int(p.trades as i64)]);
    }
    sink.table("imbalance", &table, &meta)?;
    Ok(())
}

fn events(g: &Global, a: &EventsArgs, sink: &Sink) -> Result<(), CliError> {
    let window = duration("window", &a.window)?;
    let step = match &a.step {
        Some(s) => duration("step", s)?,
        None => window,
    };
    let meta = meta("events", g, a);
    let (tape, _) = inputs::trades(&a.trades, g)?;
    let query = EventQuery {
        step,
        mode: match a.mode {
            ModeArg::OpenClose => ReturnMode::OpenClose,
            ModeArg::PeakTrough => ReturnMode::PeakTrough,
        },
        ..EventQuery::new(a.k, window)
    };
    let scan = extreme_events(&signed(&tape), &query)?;
    let mut table = Table::new(&[
        "rank",
        "start",
        "end",
        "realized_return",
        "imbalance_base",
        "imbalance_quote",
        "forecast_drop",
        "snapshot_ts",
        "flagged",
        "saturated",
    ]);
    let base = |rank: usize, e: &liq_core::flow::CrashEvent| {
        vec![
            Cell::Int(rank as i64 + 1),
            Cell::Exact(e.start),
            Cell::Exact(e.end),
            Cell::Num(e.realized_return),
            Cell::Num(e.imbalance_base),
            Cell::Num(e.imbalance_quote),
        ]
    };
    match &a.books {
        Some(path) => {
            let (snapshots, _) = inputs::books(path, g)?;
            let crash = crash_table(&scan.events, &snapshots)?;
            for (i, row) in crash.rows.iter().enumerate() {
                let mut cells = base(i, &row.event);
                cells.extend([
                    Cell::opt(row.event.forecast_drop),
                    row.snapshot_ts.map_or(Cell::Missing, Cell::Exact),
                    Cell::Flag(row.flagged),
                    Cell::Flag(row.saturated),
                ]);
                table.push(cells);
            }
            table.summary.push(("correlation", Cell::opt(crash.correlation)));
        }
        None => {
            for (i, e) in scan.events.iter().enumerate() {
                let mut cells = base(i, e);
                cells.extend([Cell::Missing, Cell::Missing, Cell::Flag(false), Cell::Flag(false)]);
                table.push(cells);
            }
        }
    }
    if let Some(n) = scan.shortfall {
        eprintln!("notice: only {} negative-return windows, {n} short of k={}", scan.events.len(), a.k);
        table.summary.push(("shortfall", Cell::Int(n as i64)));
    }
    sink.table("events", &table, &meta)?;
    Ok(())
}

/// Per-day metrics computed in parallel, in day order.
fn metrics_by_day(tape: &TradeTape, cfg: &TheoryConfig) -> Result<Vec<DailyMetrics>, CliError> {
    split_days(tape.trades(), cfg.calendar)
        .par_iter()
        .map(|(day, slice)| day_metrics(*day, slice, cfg).map_err(CliError::from))
        .collect()
}

fn impact(g: &Global, a: &ImpactArgs, sink: &Sink) -> Result<(), CliError> {
    let gap = duration("gap", &a.gap)?;
    let bar_period = duration("bars", &a.bars)?;
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    if !(a.q >= 0.0 && a.q.is_finite()) {
        return Err(CliError::Usage("--q must be non-negative".into()));
    }
    let meta = meta("impact", g, a);
    let (tape, _) = inputs::trades(&a.trades, g)?;
    let cfg = ImpactConfig {
        gap,
        n_bins: a.bins,
        min_count: a.min_count,
        use_ids: !a.no_ids,
        fit: match a.fit {
            FitArg::Global => FitMode::Global,
            FitArg::Daily => FitMode::Daily,
        },
    };
    let theory = TheoryConfig {
        bar_period,
        calendar: calendar(g),
        q_stars: vec![a.q],
        ..TheoryConfig::default()
    };
    let metrics = metrics_by_day(&tape, &theory)?;
    let orders = group_metaorders(&signed(&tape), cfg.gap, cfg.use_ids)?;
    let (curve, fit) = global_impact(&orders, &metrics, &cfg)?;
    let global = (cfg.fit == FitMode::Global).then_some(&fit);
    let days = daily_impact(&orders, &metrics, theory.calendar, &cfg, a.q, global);

    let mut table = Table::new(&["q_mid", "q_lo", "q_hi", "impact", "count"]);
    for b in &curve.bins {
        table.push(vec![Cell::Num(b.q_mid), Cell::Num(b.q_lo), Cell::Num(b.q_hi), Cell::Num(b.impact), Cell::Int(b.count as i64)]);
    }
    sink.table("impact_curve", &table, &meta)?;

    #[derive(Serialize)]
    struct FitReport {
        #[serde(rename = "Y")]
        y: f64,
        exponent: Option<f64>,
        n_orders: usize,
        sigma_d: f64,
        v_d: f64,
        bins: usize,
    }
    let report = FitReport {
        y: fit.y,
        exponent: fit.exponent,
        n_orders: fit.n_orders,
        sigma_d: fit.sigma_d,
        v_d: fit.v_d,
        bins: curve.bins.len(),
    };
    sink.report("impact_fit.json", &report, &meta)?;

    let mut daily = Table::new(&["date", "value", "y", "n_orders", "extrapolated"]);
    for d in &days {
        if let Some(err) = &d.error {
            eprintln!("warning: {}: {err}", day_label(d.day));
        }
        daily.push(vec![
            Cell::Text(day_label(d.day)),
            Cell::opt(d.drop),
            Cell::opt(d.fit.map(|f| f.y)),
            Cell::Int(d.n_orders as i64),
            Cell::Flag(d.extrapolated),
        ]);
    }
    sink.table("impact_daily", &daily, &meta)?;
    Ok(())
}

fn y_from_report(path: &Path) -> Result<f64, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input not found: {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    v.get("Y")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Data(format!("{}: no numeric Y field", path.display())))
}

fn theory_column(q: f64, multi: bool) -> String {
    if multi {
        format!("drop_th_{}", liq_core::format::sig9(q))
    } else {
        "drop_th".to_string()
    }
}

fn theory(g: &Global, a: &TheoryArgs, sink: &Sink) -> Result<(), CliError> {
    let bar_period = duration("bars", &a.bars)?;
    if a.q.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
        return Err(CliError::Usage("--q values must be non-negative".into()));
    }
    let y = match &a.y_from {
        Some(path) => y_from_report(path)?,
        None => a.y,
    };
    if !(y > 0.0 && y.is_finite()) {
        return Err(CliError::Usage(format!("Y must be positive, got {y}")));
    }
    let mut flags = json!({ "global": g, "args": a });
    flags["args"]["y"] = json!(y);
    let meta = Meta::new("theory", flags);
    let (tape, _) = inputs::trades(&a.trades, g)?;
    let cfg = TheoryConfig {
        bar_period,
        calendar: calendar(g),
        y,
        q_stars: a.q.clone(),
    };
    let metrics = metrics_by_day(&tape, &cfg)?;
    let multi = a.q.len() > 1;
    let mut columns: Vec<String> = ["date", "sigma_d", "v_d", "illiq_amihud"].map(String::from).to_vec();
    columns.extend(a.q.iter().map(|&q| theory_column(q, multi)));
    let mut table = Table::with_columns(columns);
    for m in &metrics {
        if m.floored {
            eprintln!("warning: {}: negative variance estimate floored at zero", m.date);
        }
        let mut row = vec![Cell::Text(m.date.clone()), Cell::Num(m.sigma_d), Cell::Num(m.v_d), Cell::opt(m.illiq_amihud)];
        row.extend(m.drop_th.iter().map(|d| Cell::opt(d.1)));
        table.push(row);
    }
    sink.table("theory", &table, &meta)?;
    Ok(())
}

fn compare_cmd(g: &Global, a: &CompareArgs, sink: &Sink) -> Result<(), CliError> {
    if a.lag.is_empty() {
        return Err(CliError::Usage("--lag needs at least one value".into()));
    }
    let meta = meta("compare", g, a);
    let (ob_path, ob_col) = inputs::file_column(&a.ob, "value");
    let (li_path, li_col) = inputs::file_column(&a.impact, "value");
    let th_default = {
        let (path, _) = inputs::file_column(&a.theory, "");
        let wanted = theory_column(a.q, true);
        if inputs::header_fields(&path)?.contains(&wanted) {
            wanted
        } else {
            "drop_th".to_string()
        }
    };
    let (th_path, th_col) = inputs::file_column(&a.theory, &th_default);
    let ob = inputs::daily_column(&ob_path, &ob_col)?;
    let li = inputs::daily_column(&li_path, &li_col)?;
    let th = inputs::daily_column(&th_path, &th_col)?;
    let il = inputs::daily_column(&th_path, &a.illiq_column)?;
    let aligned = AlignedSeries::align(&ob, &li, &th, &il);
    let (report, rescaled) = compare(&aligned, &a.lag, a.log)?;
    for r in &report.regressions {
        if let Some(err) = &r.error {
            eprintln!("warning: regression on {}: {err}", r.x);
        }
    }
    sink.report("compare.json", &report, &meta)?;

    let mut columns = vec!["date"];
    columns.extend(COLUMNS);
    columns.push("masked");
    let mut table = Table::new(&columns);
    let cols = rescaled.columns();
    for (i, day) in rescaled.days.iter().enumerate() {
        let mut row = vec![Cell::Text(day_label(*day))];
        row.extend(cols.iter().map(|c| Cell::opt(c[i])));
        row.push(Cell::Flag(rescaled.mask[i]));
        table.push(row);
    }
    sink.table("compare_aligned", &table, &meta)?;
    Ok(())
}

fn synth(g: &Global, a: &SynthArgs, sink: &Sink) -> Result<(), CliError> {
    if a.days == 0 {
        return Err(CliError::Usage("--days must be at least 1".into()));
    }
    let mut spec = match &a.spec {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("input not found: {}", path.display())));
            }
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SynthSpec>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let mut flags = json!({ "global": g, "args": a });
    flags["spec"] = serde_json::to_value(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    let meta = Meta::new("synth", flags);
    let market = gen_market(&spec, a.days)?;

    let mut bytes = format!("{}\n", meta.comment_line()).into_bytes();
    write_trades(&market.tape, &mut bytes).map_err(|e| CliError::Data(e.to_string()))?;
    sink.write_bytes("trades.csv", &bytes)?;
    let mut bytes = format!("{}\n", meta.comment_line()).into_bytes();
    write_snapshots(&market.snapshots, &mut bytes)?;
    sink.write_bytes("books.jsonl", &bytes)?;

    #[derive(Serialize)]
    struct Truth<'a> {
        spec: &'a SynthSpec,
        days: &'a [DailyMetrics],
    }
    sink.exact_report("truth.json", &Truth { spec: &spec, days: &market.truth }, &meta)?;
    Ok(())
}
