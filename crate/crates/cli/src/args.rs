//! Command-line grammar.

use std::path::PathBuf;

use cellulat_core::{Lesion, Stimulus, TraceFormat};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cellulat", version, about = "Run, validate and lesion cellulat pathway models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a model and write its trace and firing log.
    Run(RunArgs),
    /// Check a model and print its diagnostics.
    Validate { model: PathBuf },
    /// Run a model with and without lesions and report where they diverge.
    LesionCompare(CompareArgs),
    /// Print a model in canonical form.
    Fmt { model: PathBuf },
    /// Print the agency columns and level occupancy of a model as JSON.
    Columns { model: PathBuf },
    /// Print the text of a bundled scenario (`ca2plus`, or `chainN` for N in 1..=64).
    Scenario { name: String },
}

#[derive(Debug, Args)]
pub struct SimArgs {
    pub model: PathBuf,
    #[arg(long)]
    pub ticks: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ligand schedule `LIGAND=AMOUNT@FROM..TO` (or `@TICK`). Replaces the
    /// model's own stimuli when given.
    #[arg(long = "stimulus", value_name = "SPEC", value_parser = parse_stimulus)]
    pub stimuli: Vec<Stimulus>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long = "lesion", value_name = "SPEC", value_parser = parse_lesion)]
    pub lesions: Vec<Lesion>,
    /// Trace destination; standard output when omitted.
    #[arg(long)]
    pub out_trace: Option<PathBuf>,
    /// Firing log destination (JSON lines, one tick report per line).
    #[arg(long)]
    pub out_log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// `knockout:AGENT@T`, `attenuate:AGENT:FACTOR@T`,
    /// `clamp:SPECIES:LEVEL[/REGION]:VALUE@T` or `block:AGENT@T`; windows
    /// are written `@T..T2`.
    #[arg(long = "lesion", value_name = "SPEC", value_parser = parse_lesion, required = true)]
    pub lesions: Vec<Lesion>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

impl From<Format> for TraceFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => TraceFormat::Csv,
            Format::Jsonl => TraceFormat::Jsonl,
        }
    }
}

fn parse_lesion(s: &str) -> Result<Lesion, String> {
    Lesion::parse_spec(s, s).map_err(|e| e.reason)
}

pub fn parse_stimulus(s: &str) -> Result<Stimulus, String> {
    let (ligand, rest) = s
        .split_once('=')
        .ok_or("expected LIGAND=AMOUNT@FROM..TO")?;
    let (amount, window) = rest.split_once('@').ok_or("missing `@FROM..TO`")?;
    let tick = |t: &str| {
        t.parse::<u64>()
            .map_err(|_| format!("`{t}` is not a tick number"))
    };
    let (from_tick, to_tick) = match window.split_once("..") {
        Some((a, b)) => (tick(a)?, tick(b)?),
        None => (tick(window)?, tick(window)?),
    };
    if ligand.is_empty() {
        return Err("empty ligand name".into());
    }
    let amount: f64 = amount
        .parse()
        .map_err(|_| format!("`{amount}` is not a number"))?;
    Ok(Stimulus {
        ligand: ligand.to_string(),
        amount,
        from_tick,
        to_tick,
    })
}
