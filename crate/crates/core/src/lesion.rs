//! In-silico lesions and paired baseline/lesioned runs.
//!
//! A lesion is in force for every tick `t` with `at_tick <= t <= until_tick`.
//! Knockouts keep the agent off the agenda, attenuation scales its
//! produce/consume amounts, receptor blocks hide ligands from it, and clamps
//! overwrite a locus after that tick's firings and decay.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blackboard::SignalKey;
use crate::model::{AgentClass, Locus, ModelDef, SpeciesKind, Stimulus, GLOBAL_REGION};
use crate::scheduler::{SimError, SimState, TickReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LesionKind {
    Knockout { agent: String },
    Attenuate { agent: String, factor: f64 },
    Clamp { species: String, locus: Locus, value: f64 },
    ReceptorBlock { agent: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub id: String,
    #[serde(flatten)]
    pub kind: LesionKind,
    pub at_tick: u64,
    #[serde(default)]
    pub until_tick: Option<u64>,
}

impl Lesion {
    pub fn is_active(&self, tick: u64) -> bool {
        self.at_tick <= tick && self.until_tick.is_none_or(|u| tick <= u)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LesionError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("agent `{0}` is not an interface agent")]
    NotInterface(String),
    #[error("attenuation factor {0} must lie strictly between 0 and 1")]
    FactorDomain(f64),
    #[error("clamp value {value} is out of domain for `{species}`")]
    ClampDomain { species: String, value: f64 },
    #[error("lesion window starts at tick {at} but the simulation is at tick {current}")]
    WindowInPast { at: u64, current: u64 },
    #[error("lesion window {at}..{until} is inverted")]
    WindowInverted { at: u64, until: u64 },
    #[error("duplicate lesion id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Confirmation returned when a lesion is registered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionAck {
    pub id: String,
    pub at_tick: u64,
    pub until_tick: Option<u64>,
}

/// Checks a lesion against a model, independent of simulation time.
pub fn validate_lesion(model: &ModelDef, lesion: &Lesion) -> Result<(), LesionError> {
    if let Some(until) = lesion.until_tick {
        if until < lesion.at_tick {
            return Err(LesionError::WindowInverted {
                at: lesion.at_tick,
                until,
            });
        }
    }
    let agent = |id: &str| {
        model
            .agent(id)
            .ok_or_else(|| LesionError::UnknownAgent(id.to_string()))
    };
    match &lesion.kind {
        LesionKind::Knockout { agent: id } => {
            agent(id)?;
        }
        LesionKind::Attenuate { agent: id, factor } => {
            agent(id)?;
            if !(*factor > 0.0 && *factor < 1.0) {
                return Err(LesionError::FactorDomain(*factor));
            }
        }
        LesionKind::ReceptorBlock { agent: id } => {
            if agent(id)?.class != AgentClass::Interface {
                return Err(LesionError::NotInterface(id.clone()));
            }
        }
        LesionKind::Clamp {
            species,
            locus,
            value,
        } => {
            let sp = model
                .species(species)
                .ok_or_else(|| LesionError::UnknownSpecies(species.clone()))?;
            if model.level(&locus.level).is_none() {
                return Err(LesionError::UnknownLevel(locus.level.clone()));
            }
            let in_domain = *value >= 0.0
                && value.is_finite()
                && (sp.kind == SpeciesKind::Messenger || *value == 0.0 || *value == 1.0);
            if !in_domain {
                return Err(LesionError::ClampDomain {
                    species: species.clone(),
                    value: *value,
                });
            }
        }
    }
    Ok(())
}

/// Registers a lesion on a running simulation. The window may not start
/// before the tick about to execute.
pub fn apply_lesion(sim: &mut SimState, lesion: Lesion) -> Result<LesionAck, LesionError> {
    validate_lesion(sim.model(), &lesion)?;
    if lesion.at_tick < sim.tick() {
        return Err(LesionError::WindowInPast {
            at: lesion.at_tick,
            current: sim.tick(),
        });
    }
    if sim.lesions().iter().any(|l| l.id == lesion.id) {
        return Err(LesionError::DuplicateId(lesion.id));
    }
    let ack = LesionAck {
        id: lesion.id.clone(),
        at_tick: lesion.at_tick,
        until_tick: lesion.until_tick,
    };
    sim.lesions_mut().push(lesion);
    Ok(ack)
}

impl SimState {
    pub fn apply_lesion(&mut self, lesion: Lesion) -> Result<LesionAck, LesionError> {
        apply_lesion(self, lesion)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid lesion spec `{spec}`: {reason}")]
pub struct LesionSpecError {
    pub spec: String,
    pub reason: String,
}

impl Lesion {
    /// Parses the compact command-line form, e.g. `knockout:PLCbeta@0`,
    /// `attenuate:PLCbeta:0.5@3..9`, `clamp:Ca2plus:cytosol/patch:0@0`,
    /// `block:GPCR@5`.
    pub fn parse_spec(spec: &str, id: impl Into<String>) -> Result<Lesion, LesionSpecError> {
        let err = |reason: &str| LesionSpecError {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (body, window) = spec.rsplit_once('@').ok_or_else(|| err("missing `@TICK`"))?;
        let tick = |s: &str| s.parse::<u64>().map_err(|_| err("tick must be a non-negative integer"));
        let (at_tick, until_tick) = match window.split_once("..") {
            Some((a, b)) => (tick(a)?, Some(tick(b)?)),
            None => (tick(window)?, None),
        };
        let number = |s: &str| s.parse::<f64>().map_err(|_| err("expected a number"));
        let parts: Vec<&str> = body.split(':').collect();
        let kind = match parts.as_slice() {
            ["knockout", agent] => LesionKind::Knockout {
                agent: agent.to_string(),
            },
            ["attenuate", agent, factor] => LesionKind::Attenuate {
                agent: agent.to_string(),
                factor: number(factor)?,
            },
            ["block", agent] => LesionKind::ReceptorBlock {
                agent: agent.to_string(),
            },
            ["clamp", species, locus, value] => {
                let locus = match locus.split_once('/') {
                    Some((level, region)) => Locus::new(level, region),
                    None => Locus::new(*locus, GLOBAL_REGION),
                };
                LesionKind::Clamp {
                    species: species.to_string(),
                    locus,
                    value: number(value)?,
                }
            }
            _ => return Err(err("expected knockout:, attenuate:, clamp: or block:")),
        };
        if parts.iter().any(|p| p.is_empty()) {
            return Err(err("empty field"));
        }
        Ok(Lesion {
            id: id.into(),
            kind,
            at_tick,
            until_tick,
        })
    }
}

impl fmt::Display for Lesion {
    /// Compact spec form accepted by [`Lesion::parse_spec`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LesionKind::Knockout { agent } => write!(f, "knockout:{agent}")?,
            LesionKind::Attenuate { agent, factor } => write!(f, "attenuate:{agent}:{factor}")?,
            LesionKind::ReceptorBlock { agent } => write!(f, "block:{agent}")?,
            LesionKind::Clamp {
                species,
                locus,
                value,
            } => write!(f, "clamp:{species}:{locus}:{value}")?,
        }
        write!(f, "@{}", self.at_tick)?;
        if let Some(u) = self.until_tick {
            write!(f, "..{u}")?;
        }
        Ok(())
    }
}

impl FromStr for Lesion {
    type Err = LesionSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lesion::parse_spec(s, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// First tick whose firings, emissions or end-of-tick state differ.
    pub first_divergence_tick: Option<u64>,
    /// Per species, the largest absolute quantity difference over all loci and
    /// all sampled ticks of the window.
    pub max_abs_difference: BTreeMap<String, f64>,
    /// Lesioned minus baseline firing count, per agent.
    pub firing_count_delta: BTreeMap<String, i64>,
}

/// One simulation of a paired experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub reports: Vec<TickReport>,
    /// Board state at the start of each tick `0..=n_ticks`.
    pub states: Vec<BTreeMap<SignalKey, f64>>,
}

impl RunTrace {
    fn record(mut sim: SimState, n_ticks: u64) -> RunTrace {
        let mut states = vec![sim.board().quantities().clone()];
        let mut reports = Vec::with_capacity(n_ticks as usize);
        for _ in 0..n_ticks {
            reports.push(sim.step());
            states.push(sim.board().quantities().clone());
        }
        RunTrace { reports, states }
    }

    pub fn firing_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for r in &self.reports {
            for f in &r.firings {
                *counts.entry(f.agent.clone()).or_insert(0) += f.fired_count as u64;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub baseline: RunTrace,
    pub lesioned: RunTrace,
    pub report: DivergenceReport,
}

/// Runs the model twice from the same initial state and seed, once with the
/// lesions registered, and compares the two runs over ticks `0..=n_ticks`.
pub fn run_paired(
    model: &ModelDef,
    stimuli: &[Stimulus],
    lesions: &[Lesion],
    n_ticks: u64,
    seed: u64,
) -> Result<PairedRun, LesionError> {
    let baseline_sim = SimState::new(model.clone(), seed)?.with_stimuli(stimuli.to_vec())?;
    let mut lesioned_sim = baseline_sim.clone();
    for lesion in lesions {
        apply_lesion(&mut lesioned_sim, lesion.clone())?;
    }

    let (baseline, lesioned) = std::thread::scope(|s| {
        let b = s.spawn(|| RunTrace::record(baseline_sim, n_ticks));
        let l = RunTrace::record(lesioned_sim, n_ticks);
        (b.join().expect("baseline run panicked"), l)
    });
    let report = compare(model, &baseline, &lesioned);
    Ok(PairedRun {
        baseline,
        lesioned,
        report,
    })
}

fn compare(model: &ModelDef, baseline: &RunTrace, lesioned: &RunTrace) -> DivergenceReport {
    let behaviour = |r: &TickReport| {
        r.firings
            .iter()
            .filter(|f| f.fired_count > 0)
            .map(|f| (f.agent.clone(), f.fired_count))
            .collect::<Vec<_>>()
    };
    let first_divergence_tick = baseline
        .reports
        .iter()
        .zip(&lesioned.reports)
        .enumerate()
        .find(|(t, (b, l))| {
            behaviour(b) != behaviour(l)
                || b.emissions != l.emissions
                || baseline.states[t + 1] != lesioned.states[t + 1]
        })
        .map(|(_, (b, _))| b.tick);

    let mut max_abs_difference: BTreeMap<String, f64> =
        model.species.iter().map(|s| (s.name.clone(), 0.0)).collect();
    for (b, l) in baseline.states.iter().zip(&lesioned.states) {
        for key in b.keys().chain(l.keys()) {
            let diff = (b.get(key).copied().unwrap_or(0.0) - l.get(key).copied().unwrap_or(0.0)).abs();
            let slot = max_abs_difference.entry(key.species.clone()).or_insert(0.0);
            *slot = slot.max(diff);
        }
    }

    let base_counts = baseline.firing_counts();
    let lesion_counts = lesioned.firing_counts();
    let firing_count_delta = model
        .agents
        .iter()
        .map(|a| {
            let b = base_counts.get(&a.id).copied().unwrap_or(0) as i64;
            let l = lesion_counts.get(&a.id).copied().unwrap_or(0) as i64;
            (a.id.clone(), l - b)
        })
        .collect();

    DivergenceReport {
        first_divergence_tick,
        max_abs_difference,
        firing_count_delta,
    }
}
