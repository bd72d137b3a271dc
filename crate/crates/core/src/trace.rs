//! Dense per-tick traces of blackboard quantities and their file formats.
//!
//! Trace tick `k` is the board as it stands after `k` steps. Once a
//! (species, locus) pair has been nonzero it gets a row at every later tick,
//! so each series is dense after its first appearance.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::blackboard::SignalKey;
use crate::model::{Locus, ModelDef};
use crate::scheduler::{SimState, TickReport};

pub const CSV_HEADER: &str = "tick,level,region,species,quantity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub level: String,
    pub region: String,
    pub species: String,
    pub quantity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

/// Collects rows in the canonical order: tick, level rank, region, species.
#[derive(Debug, Clone, Default)]
pub struct TraceRecorder {
    ranks: BTreeMap<String, u32>,
    /// Sorted by the row order within a tick.
    seen: BTreeSet<(u32, String, String, String)>,
    rows: Vec<TraceRow>,
}

impl TraceRecorder {
    pub fn new(model: &ModelDef) -> Self {
        Self {
            ranks: model.levels.iter().map(|l| (l.name.clone(), l.rank)).collect(),
            ..Self::default()
        }
    }

    fn order_key(&self, key: &SignalKey) -> (u32, String, String, String) {
        (
            self.ranks.get(&key.locus.level).copied().unwrap_or(u32::MAX),
            key.locus.region.clone(),
            key.species.clone(),
            key.locus.level.clone(),
        )
    }

    /// Adds the rows for the simulation's current tick.
    pub fn record(&mut self, sim: &SimState) {
        let tick = sim.tick();
        let board = sim.board();
        for e in board.entries() {
            let key = SignalKey::new(e.species, e.locus);
            let k = self.order_key(&key);
            self.seen.insert(k);
        }
        for (_, region, species, level) in &self.seen {
            let locus = Locus::new(level.clone(), region.clone());
            self.rows.push(TraceRow {
                tick,
                level: level.clone(),
                region: region.clone(),
                species: species.clone(),
                quantity: board.read(species, &locus).unwrap_or(0.0),
            });
        }
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<TraceRow> {
        self.rows
    }
}

/// Steps `sim` for `ticks` ticks, returning the trace (ticks `t0..=t0+ticks`)
/// and one report per step.
pub fn record_run(sim: &mut SimState, ticks: u64) -> (Vec<TraceRow>, Vec<TickReport>) {
    let mut rec = TraceRecorder::new(sim.model());
    rec.record(sim);
    let mut reports = Vec::with_capacity(ticks as usize);
    for _ in 0..ticks {
        reports.push(sim.step());
        rec.record(sim);
    }
    (rec.into_rows(), reports)
}

pub fn write_csv<W: Write>(rows: &[TraceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.tick, r.level, r.region, r.species, r.quantity
        )?;
    }
    w.flush()
}

/// One JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(items: &[T], mut w: W) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_trace<W: Write>(rows: &[TraceRow], format: TraceFormat, w: W) -> io::Result<()> {
    match format {
        TraceFormat::Csv => write_csv(rows, w),
        TraceFormat::Jsonl => write_jsonl(rows, w),
    }
}
