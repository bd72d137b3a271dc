//! The blackboard: the cell's internal medium.
//!
//! Quantities are stored per `(species, locus)` and every mutation is recorded
//! as a [`WriteEvent`]. Agents never communicate except through this store, and
//! the scheduler builds its agendas from the event log.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Locus, ModelDef, SpeciesKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlackboardError {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("cannot remove {requested} of `{species}` at {locus}: only {available} present")]
    InsufficientQuantity {
        species: String,
        locus: Locus,
        requested: f64,
        available: f64,
    },
    #[error("negative quantity {value} for `{species}`")]
    NegativeQuantity { species: String, value: f64 },
    #[error("flag `{species}` cannot hold {value}")]
    FlagDomain { species: String, value: f64 },
    #[error("duplicate initializer for `{species}` at {locus}")]
    DuplicateInitializer { species: String, locus: Locus },
}

/// Who caused a write.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Actor {
    Agent(String),
    Stimulus,
    Lesion,
    Decay,
}

impl From<String> for Actor {
    fn from(s: String) -> Self {
        match s.as_str() {
            "stimulus" => Actor::Stimulus,
            "lesion" => Actor::Lesion,
            "decay" => Actor::Decay,
            _ => Actor::Agent(s),
        }
    }
}

impl From<Actor> for String {
    fn from(a: Actor) -> Self {
        a.to_string()
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::Agent(id) => f.write_str(id),
            Actor::Stimulus => f.write_str("stimulus"),
            Actor::Lesion => f.write_str("lesion"),
            Actor::Decay => f.write_str("decay"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WriteKind {
    Add,
    Remove,
    Set,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteEvent {
    pub tick: u64,
    pub seq: u64,
    pub actor: Actor,
    pub species: String,
    pub locus: Locus,
    pub kind: WriteKind,
    /// Delta for add/remove, assigned value for set.
    pub amount: f64,
    pub resulting_quantity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalKey {
    pub species: String,
    pub locus: Locus,
}

impl SignalKey {
    pub fn new(species: impl Into<String>, locus: Locus) -> Self {
        Self {
            species: species.into(),
            locus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEntry {
    pub species: String,
    pub locus: Locus,
    pub quantity: f64,
}

/// Immutable copy of the board at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackboardSnapshot {
    pub tick: u64,
    /// Nonzero quantities ordered by species, then locus.
    pub entries: Vec<SignalEntry>,
    pub event_count: u64,
}

impl BlackboardSnapshot {
    pub fn quantity(&self, species: &str, locus: &Locus) -> f64 {
        self.entries
            .iter()
            .find(|e| e.species == species && &e.locus == locus)
            .map_or(0.0, |e| e.quantity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpeciesInfo {
    kind: SpeciesKind,
    decay: f64,
}

/// Quantities are kept in maps with struct keys; JSON needs string keys, so
/// these maps travel as entry lists.
mod entry_list {
    use super::{SignalKey, SignalEntry};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<SignalKey, f64>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        map.iter()
            .map(|(k, &quantity)| SignalEntry {
                species: k.species.clone(),
                locus: k.locus.clone(),
                quantity,
            })
            .collect::<Vec<_>>()
            .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<SignalKey, f64>, D::Error> {
        let entries = Vec::<SignalEntry>::deserialize(de)?;
        Ok(entries
            .into_iter()
            .map(|e| (SignalKey::new(e.species, e.locus), e.quantity))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blackboard {
    levels: BTreeMap<String, u32>,
    species: BTreeMap<String, SpeciesInfo>,
    #[serde(with = "entry_list")]
    initial: BTreeMap<SignalKey, f64>,
    #[serde(with = "entry_list")]
    quantities: BTreeMap<SignalKey, f64>,
    tick: u64,
    next_seq: u64,
    log: Vec<WriteEvent>,
    /// Index into `log` of the first event of the current tick.
    tick_start: usize,
}

impl Blackboard {
    /// Builds the board for a model, applying its initializers.
    pub fn new(model: &ModelDef) -> Result<Self, BlackboardError> {
        let mut board = Blackboard {
            levels: model
                .levels
                .iter()
                .map(|l| (l.name.clone(), l.rank))
                .collect(),
            species: model
                .species
                .iter()
                .map(|s| {
                    (
                        s.name.clone(),
                        SpeciesInfo {
                            kind: s.kind,
                            decay: s.decay,
                        },
                    )
                })
                .collect(),
            initial: BTreeMap::new(),
            quantities: BTreeMap::new(),
            tick: 0,
            next_seq: 0,
            log: Vec::new(),
            tick_start: 0,
        };
        for init in &model.initializers {
            let kind = board.check(&init.species, &init.locus)?;
            let key = SignalKey::new(&init.species, init.locus.clone());
            if board.initial.contains_key(&key) {
                return Err(BlackboardError::DuplicateInitializer {
                    species: init.species.clone(),
                    locus: init.locus.clone(),
                });
            }
            check_value(&init.species, kind, init.quantity)?;
            board.initial.insert(key, init.quantity);
        }
        board.initial.retain(|_, q| *q != 0.0);
        board.quantities = board.initial.clone();
        Ok(board)
    }

    fn check(&self, species: &str, locus: &Locus) -> Result<SpeciesKind, BlackboardError> {
        let info = self
            .species
            .get(species)
            .ok_or_else(|| BlackboardError::UnknownSpecies(species.to_string()))?;
        if !self.levels.contains_key(&locus.level) {
            return Err(BlackboardError::UnknownLevel(locus.level.clone()));
        }
        Ok(info.kind)
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn read(&self, species: &str, locus: &Locus) -> Result<f64, BlackboardError> {
        self.check(species, locus)?;
        Ok(self.quantity(species, locus))
    }

    /// Unchecked read: undeclared pairs read as zero.
    pub(crate) fn quantity(&self, species: &str, locus: &Locus) -> f64 {
        self.quantities
            .get(&SignalKey::new(species, locus.clone()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn apply(
        &mut self,
        actor: Actor,
        species: &str,
        locus: &Locus,
        kind: WriteKind,
        amount: f64,
    ) -> Result<WriteEvent, BlackboardError> {
        let species_kind = self.check(species, locus)?;
        if amount.is_nan() || amount < 0.0 {
            return Err(BlackboardError::NegativeQuantity {
                species: species.to_string(),
                value: amount,
            });
        }
        let current = self.quantity(species, locus);
        let next = match kind {
            WriteKind::Add => current + amount,
            WriteKind::Remove => {
                if amount > current {
                    return Err(BlackboardError::InsufficientQuantity {
                        species: species.to_string(),
                        locus: locus.clone(),
                        requested: amount,
                        available: current,
                    });
                }
                current - amount
            }
            WriteKind::Set => amount,
        };
        check_value(species, species_kind, next)?;

        let key = SignalKey::new(species, locus.clone());
        if next == 0.0 {
            self.quantities.remove(&key);
        } else {
            self.quantities.insert(key, next);
        }
        let event = WriteEvent {
            tick: self.tick,
            seq: self.next_seq,
            actor,
            species: species.to_string(),
            locus: locus.clone(),
            kind,
            amount,
            resulting_quantity: self.quantity(species, locus),
        };
        self.next_seq += 1;
        self.log.push(event.clone());
        Ok(event)
    }

    /// Exponential decay of every messenger with a nonzero rate. Run once per
    /// tick after agent firings.
    pub fn apply_decay(&mut self) -> Vec<WriteEvent> {
        let decaying: Vec<(SignalKey, f64)> = self
            .quantities
            .iter()
            .filter_map(|(k, &q)| {
                let info = &self.species[&k.species];
                (info.kind == SpeciesKind::Messenger && info.decay > 0.0 && q > 0.0)
                    .then(|| (k.clone(), q * (1.0 - info.decay)))
            })
            .collect();
        decaying
            .into_iter()
            .map(|(k, next)| {
                self.apply(Actor::Decay, &k.species, &k.locus, WriteKind::Set, next)
                    .expect("decayed value stays in domain")
            })
            .collect()
    }

    pub fn snapshot(&self) -> BlackboardSnapshot {
        BlackboardSnapshot {
            tick: self.tick,
            entries: self.entries(),
            event_count: self.log.len() as u64,
        }
    }

    /// Current nonzero entries, ordered by species then locus.
    pub fn entries(&self) -> Vec<SignalEntry> {
        self.quantities
            .iter()
            .map(|(k, &quantity)| SignalEntry {
                species: k.species.clone(),
                locus: k.locus.clone(),
                quantity,
            })
            .collect()
    }

    pub(crate) fn quantities(&self) -> &BTreeMap<SignalKey, f64> {
        &self.quantities
    }

    /// Events of the tick in progress.
    pub fn current_tick_events(&self) -> &[WriteEvent] {
        &self.log[self.tick_start..]
    }

    /// Every event since creation.
    pub fn log(&self) -> &[WriteEvent] {
        &self.log
    }

    /// Closes the current tick: the next write starts a new seq run.
    pub fn advance_tick(&mut self) {
        self.tick += 1;
        self.next_seq = 0;
        self.tick_start = self.log.len();
    }

    /// Rebuilds the quantities by re-applying the event log to the initial
    /// state, independently of the cached `resulting_quantity` values.
    pub fn replay(&self) -> BTreeMap<SignalKey, f64> {
        let mut state = self.initial.clone();
        for e in &self.log {
            let key = SignalKey::new(&e.species, e.locus.clone());
            let q = state.get(&key).copied().unwrap_or(0.0);
            let next = match e.kind {
                WriteKind::Add => q + e.amount,
                WriteKind::Remove => q - e.amount,
                WriteKind::Set => e.amount,
            };
            if next == 0.0 {
                state.remove(&key);
            } else {
                state.insert(key, next);
            }
        }
        state
    }
}

fn check_value(species: &str, kind: SpeciesKind, value: f64) -> Result<(), BlackboardError> {
    if !value.is_finite() || value < 0.0 {
        return Err(BlackboardError::NegativeQuantity {
            species: species.to_string(),
            value,
        });
    }
    if kind == SpeciesKind::Flag && value != 0.0 && value != 1.0 {
        return Err(BlackboardError::FlagDomain {
            species: species.to_string(),
            value,
        });
    }
    Ok(())
}
