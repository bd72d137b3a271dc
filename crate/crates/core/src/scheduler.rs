//! The control mechanism.
//!
//! Time advances in discrete ticks. The agenda of tick `t` is a pure function
//! of what happened in tick `t - 1`: agents whose sensed signals were written,
//! agents that fired, and interface agents whose ligands are present now.
//! Agenda entries run in `(priority desc, id asc)` order and re-check their
//! condition against the live board, so they see earlier writes of the same
//! tick, but those writes only admit new agents from the next tick on.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{fire_multiple, sensed_inputs, Modifiers, SkipReason, StimulusView};
use crate::blackboard::{
    Actor, Blackboard, BlackboardError, BlackboardSnapshot, SignalKey, WriteEvent, WriteKind,
};
use crate::dsl::{self, Diagnostic};
use crate::lesion::{Lesion, LesionKind};
use crate::model::{AgentClass, AgentDef, Atom, ModelDef, Stimulus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("model has {} validation error(s)", .0.iter().filter(|d| d.is_error()).count())]
    InvalidModel(Vec<Diagnostic>),
    #[error(transparent)]
    Blackboard(#[from] BlackboardError),
    #[error("unknown ligand `{0}`")]
    UnknownLigand(String),
    #[error("stimulus window {from}..{to} is invalid at tick {current}")]
    StimulusWindow { from: u64, to: u64, current: u64 },
    #[error("stimulus amount {0} is negative")]
    NegativeStimulus(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgendaReason {
    EventMatch,
    Refire,
    InterfacePoll,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgendaEntry {
    pub agent: String,
    pub reason: AgendaReason,
}

/// Summary of one agenda entry's firing attempts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringRecord {
    pub agent: String,
    pub fired: bool,
    pub fired_count: u32,
    pub attempts: u32,
    /// Why the last attempt failed, when fewer than `multiplicity` firings succeeded.
    pub skip_reason: Option<SkipReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveStimulus {
    pub ligand: String,
    pub amount: f64,
}

/// A ligand released to the external medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmission {
    pub tick: u64,
    pub agent: String,
    pub ligand: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub stimuli_active: Vec<ActiveStimulus>,
    pub agenda: Vec<AgendaEntry>,
    pub firings: Vec<FiringRecord>,
    pub events: Vec<WriteEvent>,
    pub emissions: Vec<ExternalEmission>,
}

/// Ligand levels at `tick`; overlapping windows add up, zero totals are absent.
pub fn active_stimuli(stimuli: &[Stimulus], tick: u64) -> BTreeMap<String, f64> {
    let mut active = BTreeMap::new();
    for s in stimuli.iter().filter(|s| s.covers(tick)) {
        *active.entry(s.ligand.clone()).or_insert(0.0) += s.amount;
    }
    active.retain(|_, amount| *amount > 0.0);
    active
}

/// Event-subscription index: which agents sense which blackboard pairs and
/// ligands.
#[derive(Debug, Clone, Default)]
struct SubscriptionIndex {
    position: BTreeMap<String, usize>,
    by_signal: BTreeMap<SignalKey, Vec<usize>>,
    by_ligand: BTreeMap<String, Vec<usize>>,
}

impl SubscriptionIndex {
    fn build(model: &ModelDef) -> Self {
        let mut index = SubscriptionIndex::default();
        for (i, agent) in model.agents.iter().enumerate() {
            index.position.insert(agent.id.clone(), i);
            let sensed = sensed_inputs(agent);
            for key in sensed.signals {
                index.by_signal.entry(key).or_default().push(i);
            }
            if agent.class == AgentClass::Interface {
                for ligand in sensed.ligands {
                    index.by_ligand.entry(ligand).or_default().push(i);
                }
            }
        }
        index
    }

    fn agenda(
        &self,
        model: &ModelDef,
        prev_events: &[WriteEvent],
        prev_fired: &BTreeSet<String>,
        stimuli_active: &BTreeMap<String, f64>,
        excluded: &BTreeSet<String>,
    ) -> Vec<AgendaEntry> {
        let mut reasons: BTreeMap<usize, AgendaReason> = BTreeMap::new();
        for e in prev_events {
            let key = SignalKey::new(&e.species, e.locus.clone());
            for &i in self.by_signal.get(&key).into_iter().flatten() {
                reasons.entry(i).or_insert(AgendaReason::EventMatch);
            }
        }
        for id in prev_fired {
            if let Some(&i) = self.position.get(id) {
                reasons.entry(i).or_insert(AgendaReason::Refire);
            }
        }
        for ligand in stimuli_active.keys() {
            for &i in self.by_ligand.get(ligand).into_iter().flatten() {
                reasons.entry(i).or_insert(AgendaReason::InterfacePoll);
            }
        }
        ordered(
            reasons
                .into_iter()
                .map(|(i, r)| (&model.agents[i], r))
                .filter(|(a, _)| !excluded.contains(&a.id)),
        )
    }
}

fn ordered<'a>(entries: impl Iterator<Item = (&'a AgentDef, AgendaReason)>) -> Vec<AgendaEntry> {
    let mut entries: Vec<_> = entries.collect();
    entries.sort_by(|(a, _), (b, _)| b.priority.cmp(&a.priority).then_with(|| a.id.cmp(&b.id)));
    entries
        .into_iter()
        .map(|(a, reason)| AgendaEntry {
            agent: a.id.clone(),
            reason,
        })
        .collect()
}

/// Agenda for the next tick given what happened in the previous one.
pub fn build_agenda(
    prev_events: &[WriteEvent],
    prev_fired: &BTreeSet<String>,
    stimuli_active: &BTreeMap<String, f64>,
    model: &ModelDef,
) -> Vec<AgendaEntry> {
    SubscriptionIndex::build(model).agenda(
        model,
        prev_events,
        prev_fired,
        stimuli_active,
        &BTreeSet::new(),
    )
}

/// Agenda computed by scanning every agent against the full event list.
fn naive_agenda(
    model: &ModelDef,
    prev_events: &[WriteEvent],
    prev_fired: &BTreeSet<String>,
    stimuli_active: &BTreeMap<String, f64>,
    excluded: &BTreeSet<String>,
) -> Vec<AgendaEntry> {
    let mentions = |agent: &AgentDef, e: &WriteEvent| {
        agent.condition.atoms().into_iter().any(|a| {
            matches!(a, Atom::Signal { species, locus, .. } if *species == e.species && *locus == e.locus)
        })
    };
    let polls = |agent: &AgentDef| {
        agent.class == AgentClass::Interface
            && agent.condition.atoms().into_iter().any(|a| {
                matches!(a, Atom::Ligand { ligand, .. } if stimuli_active.contains_key(ligand))
            })
    };
    ordered(model.agents.iter().filter_map(|agent| {
        if excluded.contains(&agent.id) {
            return None;
        }
        let reason = if prev_events.iter().any(|e| mentions(agent, e)) {
            AgendaReason::EventMatch
        } else if prev_fired.contains(&agent.id) {
            AgendaReason::Refire
        } else if polls(agent) {
            AgendaReason::InterfacePoll
        } else {
            return None;
        };
        Some((agent, reason))
    }))
}

/// A running simulation: model, board, generator and scheduling memory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimState {
    model: Arc<ModelDef>,
    seed: u64,
    board: Blackboard,
    rng: ChaCha8Rng,
    stimuli: Vec<Stimulus>,
    lesions: Vec<Lesion>,
    prev_events: Vec<WriteEvent>,
    prev_fired: BTreeSet<String>,
    emissions: Vec<ExternalEmission>,
    #[serde(skip)]
    index: Option<Arc<SubscriptionIndex>>,
}

impl PartialEq for SimState {
    fn eq(&self, other: &Self) -> bool {
        self.model == other.model
            && self.seed == other.seed
            && self.board == other.board
            && self.rng == other.rng
            && self.stimuli == other.stimuli
            && self.lesions == other.lesions
            && self.prev_events == other.prev_events
            && self.prev_fired == other.prev_fired
            && self.emissions == other.emissions
    }
}

impl SimState {
    /// Validates the model and builds the tick-0 state. Stimuli come from the
    /// model's schedule.
    pub fn new(model: ModelDef, seed: u64) -> Result<Self, SimError> {
        let diagnostics = dsl::validate(&model);
        if diagnostics.iter().any(Diagnostic::is_error) {
            return Err(SimError::InvalidModel(diagnostics));
        }
        let board = Blackboard::new(&model)?;
        let stimuli = model.stimuli.clone();
        Ok(SimState {
            model: Arc::new(model),
            seed,
            board,
            rng: ChaCha8Rng::seed_from_u64(seed),
            stimuli,
            lesions: Vec::new(),
            prev_events: Vec::new(),
            prev_fired: BTreeSet::new(),
            emissions: Vec::new(),
            index: None,
        })
    }

    /// Replaces the stimulus schedule. Only valid before the first tick.
    pub fn with_stimuli(mut self, stimuli: Vec<Stimulus>) -> Result<Self, SimError> {
        self.stimuli.clear();
        for s in stimuli {
            self.add_stimulus(s)?;
        }
        Ok(self)
    }

    /// Schedules a ligand for the current tick or later.
    pub fn add_stimulus(&mut self, stimulus: Stimulus) -> Result<(), SimError> {
        if !self.model.has_ligand(&stimulus.ligand) {
            return Err(SimError::UnknownLigand(stimulus.ligand));
        }
        if stimulus.amount.is_nan() || stimulus.amount < 0.0 {
            return Err(SimError::NegativeStimulus(stimulus.amount));
        }
        let current = self.tick();
        if stimulus.from_tick > stimulus.to_tick || stimulus.from_tick < current {
            return Err(SimError::StimulusWindow {
                from: stimulus.from_tick,
                to: stimulus.to_tick,
                current,
            });
        }
        self.stimuli.push(stimulus);
        Ok(())
    }

    pub fn model(&self) -> &ModelDef {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The tick the next call to [`SimState::step`] will execute.
    pub fn tick(&self) -> u64 {
        self.board.tick()
    }

    pub fn board(&self) -> &Blackboard {
        &self.board
    }

    pub fn snapshot(&self) -> BlackboardSnapshot {
        self.board.snapshot()
    }

    pub fn stimuli(&self) -> &[Stimulus] {
        &self.stimuli
    }

    pub fn lesions(&self) -> &[Lesion] {
        &self.lesions
    }

    pub(crate) fn lesions_mut(&mut self) -> &mut Vec<Lesion> {
        &mut self.lesions
    }

    /// Lesions whose window has not closed yet.
    pub fn pending_lesions(&self) -> impl Iterator<Item = &Lesion> {
        let tick = self.tick();
        self.lesions
            .iter()
            .filter(move |l| l.until_tick.is_none_or(|u| u >= tick))
    }

    /// External-medium log.
    pub fn emissions(&self) -> &[ExternalEmission] {
        &self.emissions
    }

    /// Executes one tick.
    pub fn step(&mut self) -> TickReport {
        self.advance(false)
    }

    /// Same semantics as [`SimState::step`] but builds the agenda by scanning
    /// every agent instead of using the subscription index. Test oracle.
    pub fn reference_step(&mut self) -> TickReport {
        self.advance(true)
    }

    pub fn run(&mut self, ticks: u64) -> Vec<TickReport> {
        (0..ticks).map(|_| self.step()).collect()
    }

    fn modifiers(&self, agent: &AgentDef, tick: u64) -> Modifiers {
        let mut m = Modifiers::default();
        for lesion in self.lesions.iter().filter(|l| l.is_active(tick)) {
            match &lesion.kind {
                LesionKind::Attenuate { agent: id, factor } if *id == agent.id => {
                    m.attenuation *= factor
                }
                LesionKind::ReceptorBlock { agent: id } if *id == agent.id => {
                    m.receptor_blocked = true
                }
                _ => {}
            }
        }
        m
    }

    fn advance(&mut self, naive: bool) -> TickReport {
        let model = Arc::clone(&self.model);
        let tick = self.board.tick();
        let active = active_stimuli(&self.stimuli, tick);
        let knocked_out: BTreeSet<String> = self
            .lesions
            .iter()
            .filter(|l| l.is_active(tick))
            .filter_map(|l| match &l.kind {
                LesionKind::Knockout { agent } => Some(agent.clone()),
                _ => None,
            })
            .collect();

        let index = Arc::clone(
            self.index
                .get_or_insert_with(|| Arc::new(SubscriptionIndex::build(&model))),
        );
        let agenda = if naive {
            naive_agenda(&model, &self.prev_events, &self.prev_fired, &active, &knocked_out)
        } else {
            index.agenda(&model, &self.prev_events, &self.prev_fired, &active, &knocked_out)
        };

        let view = StimulusView::new(&active);
        let mut firings = Vec::with_capacity(agenda.len());
        let mut emissions = Vec::new();
        for entry in &agenda {
            let agent = &model.agents[index.position[&entry.agent]];
            let modifiers = self.modifiers(agent, tick);
            let outcomes = fire_multiple(agent, &mut self.board, &view, &mut self.rng, modifiers);
            let fired_count = outcomes.iter().filter(|o| o.fired).count() as u32;
            for o in &outcomes {
                emissions.extend(o.emissions.iter().map(|e| ExternalEmission {
                    tick,
                    agent: agent.id.clone(),
                    ligand: e.ligand.clone(),
                    amount: e.amount,
                }));
            }
            firings.push(FiringRecord {
                agent: agent.id.clone(),
                fired: fired_count > 0,
                fired_count,
                attempts: outcomes.len() as u32,
                skip_reason: outcomes.last().and_then(|o| o.skip_reason),
            });
        }

        self.board.apply_decay();
        for lesion in self.lesions.iter().filter(|l| l.is_active(tick)) {
            if let LesionKind::Clamp {
                species,
                locus,
                value,
            } = &lesion.kind
            {
                self.board
                    .apply(Actor::Lesion, species, locus, WriteKind::Set, *value)
                    .expect("clamp validated on registration");
            }
        }

        let events = self.board.current_tick_events().to_vec();
        self.prev_events = events.clone();
        self.prev_fired = firings
            .iter()
            .filter(|f| f.fired)
            .map(|f| f.agent.clone())
            .collect();
        self.emissions.extend(emissions.iter().cloned());
        self.board.advance_tick();

        TickReport {
            tick,
            stimuli_active: active
                .into_iter()
                .map(|(ligand, amount)| ActiveStimulus { ligand, amount })
                .collect(),
            agenda,
            firings,
            events,
            emissions,
        }
    }
}
