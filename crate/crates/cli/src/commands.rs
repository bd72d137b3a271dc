//! Subcommand implementations. Each returns its outcome as a [`CliError`] so
//! `main` can map failures onto exit codes in one place.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cellulat_core::scenario::{bundled_by_name, toy_linear_chain};
use cellulat_core::trace::{record_run, write_jsonl, write_trace};
use cellulat_core::{
    detect_columns, level_occupancy, parse, pretty_print, run_paired, Diagnostic, LesionError,
    ModelDef, SimError, SimState,
};
use serde_json::json;
use thiserror::Error;

use crate::args::{CompareArgs, RunArgs, SimArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Diagnostics have already been printed.
    #[error("{0} has validation errors")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lesion(#[from] LesionError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io { .. } => 1,
            CliError::Invalid(_) | CliError::Sim(_) | CliError::Lesion(_) => 2,
            CliError::Usage(_) => 64,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn print_diagnostics(path: &Path, diags: &[Diagnostic], mut out: impl Write) {
    for d in diags {
        let _ = writeln!(out, "{}:{d}", path.display());
    }
}

/// Reads and parses a model file; diagnostics go to `diag_out`.
fn load(path: &Path, diag_out: impl Write) -> Result<ModelDef, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    match parse(&text) {
        Ok(p) => {
            print_diagnostics(path, &p.warnings, diag_out);
            Ok(p.model)
        }
        Err(diags) => {
            print_diagnostics(path, &diags, diag_out);
            Err(CliError::Invalid(path.display().to_string()))
        }
    }
}

fn sim_model(args: &SimArgs) -> Result<ModelDef, CliError> {
    let mut model = load(&args.model, io::stderr())?;
    if !args.stimuli.is_empty() {
        if !model.stimuli.is_empty() {
            eprintln!(
                "warning: --stimulus replaces the {} stimulus declaration(s) in {}",
                model.stimuli.len(),
                args.model.display()
            );
        }
        model.stimuli = args.stimuli.clone();
    }
    Ok(model)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    let model = sim_model(&args.sim)?;
    let mut sim = SimState::new(model, args.sim.seed)?;
    for l in args.lesions {
        sim.apply_lesion(l)?;
    }
    let (rows, reports) = record_run(&mut sim, args.sim.ticks);

    let format = args.format.into();
    match &args.out_trace {
        Some(p) => write_trace(&rows, format, create(p)?).map_err(io_err(p))?,
        None => write_trace(&rows, format, io::stdout().lock()).map_err(io_err(Path::new("-")))?,
    }
    if let Some(p) = &args.out_log {
        write_jsonl(&reports, create(p)?).map_err(io_err(p))?;
    }
    Ok(())
}

pub fn validate(path: &Path) -> Result<(), CliError> {
    load(path, io::stdout()).map(drop)
}

pub fn lesion_compare(args: CompareArgs) -> Result<(), CliError> {
    let model = sim_model(&args.sim)?;
    let run = run_paired(&model, &model.stimuli, &args.lesions, args.sim.ticks, args.sim.seed)?;
    let mut out = create(&args.out)?;
    serde_json::to_writer_pretty(&mut out, &run.report)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(out))
        .and_then(|_| out.flush())
        .map_err(io_err(&args.out))?;
    match run.report.first_divergence_tick {
        Some(t) => println!("first_divergence_tick={t}"),
        None => println!("first_divergence_tick=null"),
    }
    Ok(())
}

pub fn fmt(path: &Path) -> Result<(), CliError> {
    let model = load(path, io::stderr())?;
    print!("{}", pretty_print(&model));
    Ok(())
}

pub fn columns(path: &Path) -> Result<(), CliError> {
    let model = load(path, io::stderr())?;
    let doc = json!({
        "columns": detect_columns(&model),
        "level_occupancy": level_occupancy(&model),
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("plain JSON values"));
    Ok(())
}

pub fn scenario(name: &str) -> Result<(), CliError> {
    let found = match name.strip_prefix("chain") {
        Some(n) => {
            let n: usize = n
                .parse()
                .map_err(|_| CliError::Usage(format!("unknown scenario `{name}`")))?;
            toy_linear_chain(n).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => bundled_by_name(name).ok_or_else(|| CliError::Usage(format!("unknown scenario `{name}`")))?,
    };
    print!("{}", found.text);
    Ok(())
}
