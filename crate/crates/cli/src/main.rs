//! `liq`: order-book, impact and public-data liquidity measures from trade
//! tapes and book snapshots.

mod commands;
mod error;
mod inputs;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "liq", version, about = "Liquidity measures and crash-amplitude forecasts from trades and order books")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Abort on the first malformed input line.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Skip the first line of every input file.
    #[arg(long, global = true)]
    pub header: bool,
    /// Layout of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for per-day and per-snapshot work.
    #[arg(long, global = true, env = "LIQ_JOBS")]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seconds added to UTC midnight to get the day boundary.
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    pub day_offset: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize trade and snapshot files, optionally building bars.
    Ingest(IngestArgs),
    /// Order-book liquidity within relative price bands.
    Book(BookArgs),
    /// Expected relative drop for a sell-off of a given size.
    Drop(StressArgs),
    /// Price reached by a sell-off of a given size.
    Support(StressArgs),
    /// Signed order-flow imbalance per window.
    Imbalance(ImbalanceArgs),
    /// Most negative window returns with their imbalances.
    Events(EventsArgs),
    /// Meta-order impact curve and square-root-law fit.
    Impact(ImpactArgs),
    /// Daily volatility, volume and square-root-law drop forecasts.
    Theory(TheoryArgs),
    /// Rescale and regress the daily illiquidity series.
    Compare(CompareArgs),
    /// Generate a synthetic market with known parameters.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitArg {
    #[value(alias = "base")]
    Btc,
    #[value(alias = "quote")]
    Usd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceArg {
    Mid,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    OpenClose,
    PeakTrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitArg {
    Global,
    Daily,
}

/// Snapshot input shared by the book commands.
#[derive(Debug, Args, Serialize)]
pub struct BookInput {
    /// Book snapshots, JSON lines (optionally gzipped).
    #[arg(long)]
    #[serde(skip)]
    pub books: PathBuf,
    /// Reference price: bid-ask midpoint or last trade at or before the snapshot.
    #[arg(long, value_enum, default_value_t = ReferenceArg::Mid)]
    pub reference: ReferenceArg,
    /// Trade tape for `--reference last`.
    #[arg(long)]
    #[serde(skip)]
    pub trades: Option<PathBuf>,
    /// Average per calendar day instead of one row per snapshot.
    #[arg(long)]
    pub daily: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trades: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub books: Option<PathBuf>,
    /// Also write OHLCV bars of this period, e.g. 1h.
    #[arg(long)]
    pub bars: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BookArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: BookInput,
    /// Relative band widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub phi: Vec<f64>,
    #[arg(long, value_enum, default_value_t = UnitArg::Btc)]
    pub unit: UnitArg,
    #[arg(long, value_enum, default_value_t = SideArg::Buy)]
    pub side: SideArg,
}

#[derive(Debug, Args, Serialize)]
pub struct StressArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: BookInput,
    /// Sell-off size in base units.
    #[arg(long, default_value_t = 40_000.0)]
    pub q: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ImbalanceArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trades: PathBuf,
    #[arg(long, default_value = "4h")]
    pub window: String,
    #[arg(long, value_enum, default_value_t = UnitArg::Btc)]
    pub unit: UnitArg,
}

#[derive(Debug, Args, Serialize)]
pub struct EventsArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trades: PathBuf,
    #[arg(long, default_value_t = 14)]
    pub k: usize,
    #[arg(long, default_value = "4h")]
    pub window: String,
    /// Window start spacing; defaults to the window length.
    #[arg(long)]
    pub step: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::OpenClose)]
    pub mode: ModeArg,
    /// Snapshots for the liquidity-adjusted forecast of each event.
    #[arg(long)]
    #[serde(skip)]
    pub books: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ImpactArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trades: PathBuf,
    /// Largest pause inside one meta-order.
    #[arg(long, default_value = "300")]
    pub gap: String,
    #[arg(long, default_value_t = 12)]
    pub bins: usize,
    #[arg(long, default_value_t = 20)]
    pub min_count: usize,
    /// Coefficient used outside each day's binned range.
    #[arg(long, value_enum, default_value_t = FitArg::Global)]
    pub fit: FitArg,
    /// Stress size for the per-day forecast.
    #[arg(long, default_value_t = 40_000.0)]
    pub q: f64,
    /// Bar period for the daily volatility.
    #[arg(long, default_value = "1h")]
    pub bars: String,
    /// Group by sign runs even when trader ids are present.
    #[arg(long)]
    pub no_ids: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TheoryArgs {
    #[arg(long)]
    #[serde(skip)]
    pub trades: PathBuf,
    /// Stress sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "40000")]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub y: f64,
    /// Take Y from an `impact_fit.json` report instead of `--y`.
    #[arg(long, conflicts_with = "y")]
    #[serde(skip)]
    pub y_from: Option<PathBuf>,
    #[arg(long, default_value = "1h")]
    pub bars: String,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Daily order-book drops, FILE[:COLUMN] (column defaults to value).
    #[arg(long)]
    #[serde(skip)]
    pub ob: String,
    /// Daily impact drops, FILE[:COLUMN] (column defaults to value).
    #[arg(long)]
    #[serde(skip)]
    pub impact: String,
    /// Theory table, FILE[:COLUMN] (column defaults to the drop for --q).
    #[arg(long)]
    #[serde(skip)]
    pub theory: String,
    /// Amihud column of the theory table.
    #[arg(long, default_value = "illiq_amihud")]
    pub illiq_column: String,
    #[arg(long, default_value_t = 40_000.0)]
    pub q: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub lag: Vec<usize>,
    /// Regress logarithms instead of raw values.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Generator parameters as JSON; every field is optional.
    #[arg(long)]
    #[serde(skip)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub days: usize,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("liq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
