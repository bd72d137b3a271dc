//! Evaluation of agent condition parts and execution of their action parts.
//!
//! Conditions are pure predicates over the blackboard and the external
//! stimuli. Firing is atomic: every consume is checked up front and either the
//! whole effect list lands on the board or nothing does.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::blackboard::{Actor, Blackboard, SignalKey, WriteEvent, WriteKind};
use crate::model::{
    AgentClass, AgentDef, Atom, BooleanNet, Condition, ConditionExpr, EffectKind, Emission,
    NodeSource,
};

/// Ligand levels visible to one agent during one tick.
#[derive(Debug, Clone, Copy)]
pub struct StimulusView<'a> {
    active: &'a BTreeMap<String, f64>,
    blocked: bool,
}

impl<'a> StimulusView<'a> {
    pub fn new(active: &'a BTreeMap<String, f64>) -> Self {
        Self {
            active,
            blocked: false,
        }
    }

    /// Same view with every ligand reading as zero (receptor block).
    pub fn blocked(self) -> Self {
        Self {
            blocked: true,
            ..self
        }
    }

    pub fn ligand(&self, name: &str) -> f64 {
        if self.blocked {
            0.0
        } else {
            self.active.get(name).copied().unwrap_or(0.0)
        }
    }
}

pub fn evaluate_atom(atom: &Atom, board: &Blackboard, stimuli: &StimulusView) -> bool {
    match atom {
        Atom::Signal {
            species,
            locus,
            cmp,
            threshold,
        } => cmp.holds(board.quantity(species, locus), *threshold),
        Atom::Ligand {
            ligand,
            cmp,
            threshold,
        } => cmp.holds(stimuli.ligand(ligand), *threshold),
    }
}

fn evaluate_expr(expr: &ConditionExpr, board: &Blackboard, stimuli: &StimulusView) -> bool {
    match expr {
        ConditionExpr::Atom(a) => evaluate_atom(a, board, stimuli),
        ConditionExpr::And(xs) => xs.iter().all(|x| evaluate_expr(x, board, stimuli)),
        ConditionExpr::Or(xs) => xs.iter().any(|x| evaluate_expr(x, board, stimuli)),
        ConditionExpr::Not(x) => !evaluate_expr(x, board, stimuli),
    }
}

/// Runs a boolean network for `net.steps` synchronous updates. Input nodes are
/// held at their binarized atoms, rule nodes start at 0.
pub fn evaluate_net(net: &BooleanNet, inputs: impl Fn(&Atom) -> bool) -> bool {
    let position: BTreeMap<&str, usize> = net
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.as_str(), i))
        .collect();
    let mut state: Vec<bool> = net
        .nodes
        .iter()
        .map(|n| match &n.source {
            NodeSource::Input(a) => inputs(a),
            NodeSource::Rule { .. } => false,
        })
        .collect();
    for _ in 0..net.steps {
        let next = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match &n.source {
                NodeSource::Input(_) => state[i],
                NodeSource::Rule { inputs, table } => {
                    let row = inputs
                        .iter()
                        .fold(0usize, |acc, name| (acc << 1) | state[position[name.as_str()]] as usize);
                    table[row]
                }
            })
            .collect();
        state = next;
    }
    state[position[net.output.as_str()]]
}

pub fn evaluate_condition(agent: &AgentDef, board: &Blackboard, stimuli: &StimulusView) -> bool {
    match &agent.condition {
        Condition::Rule(expr) => evaluate_expr(expr, board, stimuli),
        Condition::Net(net) => evaluate_net(net, |a| evaluate_atom(a, board, stimuli)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    ConditionFalse,
    ConsumeUnsatisfiable,
    ProbabilityDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiringOutcome {
    pub fired: bool,
    pub events: Vec<WriteEvent>,
    pub emissions: Vec<Emission>,
    pub skip_reason: Option<SkipReason>,
}

impl FiringOutcome {
    fn skipped(reason: SkipReason) -> Self {
        Self {
            fired: false,
            events: Vec::new(),
            emissions: Vec::new(),
            skip_reason: Some(reason),
        }
    }
}

/// Per-firing adjustments imposed by active lesions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modifiers {
    /// Factor applied to produce and consume amounts.
    pub attenuation: f64,
    /// Ligand atoms read as zero.
    pub receptor_blocked: bool,
}

impl Default for Modifiers {
    fn default() -> Self {
        Self {
            attenuation: 1.0,
            receptor_blocked: false,
        }
    }
}

/// One firing attempt. The caller has already re-checked the condition.
///
/// A probability draw is taken only when `firing_probability < 1`, so models
/// without stochastic agents never touch the generator.
pub fn fire<R: Rng + ?Sized>(
    agent: &AgentDef,
    board: &mut Blackboard,
    rng: &mut R,
    modifiers: Modifiers,
) -> FiringOutcome {
    if agent.firing_probability < 1.0 && rng.random::<f64>() >= agent.firing_probability {
        return FiringOutcome::skipped(SkipReason::ProbabilityDraw);
    }

    let scaled = |kind: EffectKind, amount: f64| match kind {
        EffectKind::Produce | EffectKind::Consume => amount * modifiers.attenuation,
        EffectKind::SetFlag => amount,
    };

    let mut demand: BTreeMap<SignalKey, f64> = BTreeMap::new();
    for e in agent.effects.iter().filter(|e| e.kind == EffectKind::Consume) {
        *demand
            .entry(SignalKey::new(&e.species, e.locus.clone()))
            .or_insert(0.0) += scaled(e.kind, e.amount);
    }
    if demand
        .iter()
        .any(|(k, &need)| need > board.quantity(&k.species, &k.locus))
    {
        return FiringOutcome::skipped(SkipReason::ConsumeUnsatisfiable);
    }

    let actor = Actor::Agent(agent.id.clone());
    let consumes = agent.effects.iter().filter(|e| e.kind == EffectKind::Consume);
    let rest = agent.effects.iter().filter(|e| e.kind != EffectKind::Consume);
    let events = consumes
        .chain(rest)
        .map(|e| {
            let kind = match e.kind {
                EffectKind::Produce => WriteKind::Add,
                EffectKind::Consume => WriteKind::Remove,
                EffectKind::SetFlag => WriteKind::Set,
            };
            board
                .apply(actor.clone(), &e.species, &e.locus, kind, scaled(e.kind, e.amount))
                .expect("effects of a validated agent stay in domain once consumes are checked")
        })
        .collect();

    let emissions = match agent.class {
        AgentClass::Interface => agent.emissions.clone(),
        AgentClass::Internal => Vec::new(),
    };
    FiringOutcome {
        fired: true,
        events,
        emissions,
        skip_reason: None,
    }
}

/// Fires an encapsulated agent up to `multiplicity` times in sequence,
/// re-checking the condition before each attempt. Stops at the first failed
/// condition or unsatisfiable consume; a failed probability draw only skips
/// that attempt.
pub fn fire_multiple<R: Rng + ?Sized>(
    agent: &AgentDef,
    board: &mut Blackboard,
    stimuli: &StimulusView,
    rng: &mut R,
    modifiers: Modifiers,
) -> Vec<FiringOutcome> {
    let view = if modifiers.receptor_blocked {
        stimuli.blocked()
    } else {
        *stimuli
    };
    let mut outcomes = Vec::new();
    for _ in 0..agent.multiplicity {
        if !evaluate_condition(agent, board, &view) {
            outcomes.push(FiringOutcome::skipped(SkipReason::ConditionFalse));
            break;
        }
        let outcome = fire(agent, board, rng, modifiers);
        let stop = outcome.skip_reason == Some(SkipReason::ConsumeUnsatisfiable);
        outcomes.push(outcome);
        if stop {
            break;
        }
    }
    outcomes
}

/// External emissions an interface agent would release given the current
/// board. Internal agents never emit.
pub fn emit_external(agent: &AgentDef, board: &Blackboard, stimuli: &StimulusView) -> Vec<Emission> {
    if agent.class != AgentClass::Interface || !evaluate_condition(agent, board, stimuli) {
        return Vec::new();
    }
    agent.emissions.clone()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SensedInputs {
    pub signals: BTreeSet<SignalKey>,
    pub ligands: BTreeSet<String>,
}

/// Blackboard pairs and ligands referenced by the agent's condition.
pub fn sensed_inputs(agent: &AgentDef) -> SensedInputs {
    let mut out = SensedInputs::default();
    agent.condition.for_each_atom(&mut |a| match a {
        Atom::Signal { species, locus, .. } => {
            out.signals.insert(SignalKey::new(species, locus.clone()));
        }
        Atom::Ligand { ligand, .. } => {
            out.ligands.insert(ligand.clone());
        }
    });
    out
}
