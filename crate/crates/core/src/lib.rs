//! Cellulat: a blackboard multi-agent simulation of intracellular signalling.
//!
//! Agents (receptors, proteins, enzymes) react to writes on a multi-level
//! blackboard that stands for the cell's internal medium. The crate holds the
//! board, the agent model, the tick scheduler, column analysis, the model
//! DSL, the lesion lab and the bundled scenarios.

pub mod agent;
pub mod blackboard;
pub mod columns;
pub mod dsl;
pub mod lesion;
pub mod model;
pub mod scenario;
pub mod scheduler;
pub mod trace;

#[cfg(feature = "testing")]
pub mod testing;

pub use agent::{FiringOutcome, Modifiers, SensedInputs, SkipReason, StimulusView};
pub use blackboard::{
    Actor, Blackboard, BlackboardError, BlackboardSnapshot, SignalEntry, SignalKey, WriteEvent,
    WriteKind,
};
pub use columns::{
    column_diff, detect_columns, level_occupancy, AgencyColumn, ColumnDiffReport, LevelOccupancy,
};
pub use dsl::{parse, pretty_print, validate, Code, Diagnostic, Location, Parsed, Severity};
pub use lesion::{
    apply_lesion, run_paired, DivergenceReport, Lesion, LesionAck, LesionError, LesionKind,
    PairedRun,
};
pub use model::*;
pub use scenario::{ca2plus_scenario, toy_linear_chain, ExpectedProperties, Scenario};
pub use scheduler::{
    ActiveStimulus, AgendaEntry, AgendaReason, ExternalEmission, FiringRecord, SimError, SimState, TickReport,
};
pub use trace::{TraceFormat, TraceRow};
