//! Static description of a pathway model: blackboard levels, signal species,
//! external ligands, agents and the stimulus schedule.
//!
//! A [`ModelDef`] is normally produced by [`crate::dsl::parse`]; every type here
//! derives structural equality so that parse/print round-trips can be checked
//! directly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Region every level carries implicitly.
pub const GLOBAL_REGION: &str = "global";

/// Agent ids that collide with the non-agent actors of the event log.
pub const RESERVED_ACTORS: [&str; 3] = ["stimulus", "lesion", "decay"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelKind {
    Membrane,
    Cytosol,
    Nucleus,
    Organelle,
    Custom,
}

impl LevelKind {
    pub const ALL: [LevelKind; 5] = [
        LevelKind::Membrane,
        LevelKind::Cytosol,
        LevelKind::Nucleus,
        LevelKind::Organelle,
        LevelKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LevelKind::Membrane => "membrane",
            LevelKind::Cytosol => "cytosol",
            LevelKind::Nucleus => "nucleus",
            LevelKind::Organelle => "organelle",
            LevelKind::Custom => "custom",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// One stratum of the blackboard. Rank 0 is the outermost level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub rank: u32,
    pub kind: LevelKind,
}

/// A position on the blackboard: a level plus a region tag shared across levels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Locus {
    pub level: String,
    pub region: String,
}

impl Locus {
    pub fn new(level: impl Into<String>, region: impl Into<String>) -> Self {
        Self {
            level: level.into(),
            region: region.into(),
        }
    }

    /// Locus in the implicit `global` region of `level`.
    pub fn global(level: impl Into<String>) -> Self {
        Self::new(level, GLOBAL_REGION)
    }
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.level, self.region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesKind {
    /// Graded second-messenger quantity, any non-negative real.
    Messenger,
    /// Activation/inactivation signal, exactly 0.0 or 1.0.
    Flag,
}

impl SpeciesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeciesKind::Messenger => "messenger",
            SpeciesKind::Flag => "flag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpecies {
    pub name: String,
    pub kind: SpeciesKind,
    /// Fraction lost per tick, in `[0, 1]`. Flags never decay.
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Initializer {
    pub species: String,
    pub locus: Locus,
    pub quantity: f64,
}

/// A ligand presented by the external medium over an inclusive tick window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub ligand: String,
    pub amount: f64,
    pub from_tick: u64,
    pub to_tick: u64,
}

impl Stimulus {
    pub fn covers(&self, tick: u64) -> bool {
        self.from_tick <= tick && tick <= self.to_tick
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "=")]
    Eq,
}

impl Comparator {
    pub const ALL: [Comparator; 5] = [
        Comparator::Ge,
        Comparator::Le,
        Comparator::Gt,
        Comparator::Lt,
        Comparator::Eq,
    ];

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => value >= threshold,
            Comparator::Le => value <= threshold,
            Comparator::Gt => value > threshold,
            Comparator::Lt => value < threshold,
            Comparator::Eq => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
            Comparator::Eq => "=",
        }
    }
}

/// Leaf of a condition: a threshold test over a blackboard quantity or an
/// external ligand level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Atom {
    Signal {
        species: String,
        locus: Locus,
        cmp: Comparator,
        threshold: f64,
    },
    Ligand {
        ligand: String,
        cmp: Comparator,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionExpr {
    Atom(Atom),
    And(Vec<ConditionExpr>),
    Or(Vec<ConditionExpr>),
    Not(Box<ConditionExpr>),
}

impl ConditionExpr {
    /// Visits every atom in left-to-right order.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            ConditionExpr::Atom(a) => f(a),
            ConditionExpr::And(xs) | ConditionExpr::Or(xs) => {
                xs.iter().for_each(|x| x.for_each_atom(f))
            }
            ConditionExpr::Not(x) => x.for_each_atom(f),
        }
    }
}

/// Where a boolean-network node gets its value from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSource {
    /// Held at the binarized truth value of the atom.
    Input(Atom),
    /// Updated synchronously from other nodes through a truth table. The first
    /// listed input is the most significant bit of the row index.
    Rule { inputs: Vec<String>, table: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetNode {
    pub name: String,
    pub source: NodeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BooleanNet {
    pub nodes: Vec<NetNode>,
    pub output: String,
    pub steps: u32,
}

impl BooleanNet {
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        for node in &self.nodes {
            if let NodeSource::Input(a) = &node.source {
                f(a);
            }
        }
    }
}

/// Condition part of an agent: a rule tree or a boolean network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Rule(ConditionExpr),
    Net(BooleanNet),
}

impl Condition {
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Condition::Rule(e) => e.for_each_atom(f),
            Condition::Net(n) => n.for_each_atom(f),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.for_each_atom(&mut |a| out.push(a));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Produce,
    Consume,
    SetFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub kind: EffectKind,
    pub species: String,
    pub locus: Locus,
    /// Quantity for produce/consume, target value for set_flag.
    pub amount: f64,
}

/// Ligand secreted into the external medium by an interface agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Emission {
    pub ligand: String,
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    /// Protein, enzyme or mechanism transducing blackboard signals.
    Internal,
    /// Receptor or secretion machinery bridging the external medium.
    Interface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDef {
    pub id: String,
    pub class: AgentClass,
    pub condition: Condition,
    pub effects: Vec<Effect>,
    pub emissions: Vec<Emission>,
    pub multiplicity: u32,
    pub priority: i64,
    pub firing_probability: f64,
    pub region: Option<String>,
}

impl AgentDef {
    /// Agent with default multiplicity, priority and probability.
    pub fn new(id: impl Into<String>, class: AgentClass, condition: Condition) -> Self {
        Self {
            id: id.into(),
            class,
            condition,
            effects: Vec::new(),
            emissions: Vec::new(),
            multiplicity: 1,
            priority: 0,
            firing_probability: 1.0,
            region: None,
        }
    }

    /// Region assumed for loci written without an explicit region.
    pub fn default_region(&self) -> &str {
        self.region.as_deref().unwrap_or(GLOBAL_REGION)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelDef {
    pub name: String,
    pub metadata: BTreeMap<String, String>,
    pub levels: Vec<Level>,
    pub species: Vec<SignalSpecies>,
    pub ligands: Vec<String>,
    pub initializers: Vec<Initializer>,
    pub stimuli: Vec<Stimulus>,
    pub agents: Vec<AgentDef>,
}

impl ModelDef {
    pub fn level(&self, name: &str) -> Option<&Level> {
        self.levels.iter().find(|l| l.name == name)
    }

    pub fn species(&self, name: &str) -> Option<&SignalSpecies> {
        self.species.iter().find(|s| s.name == name)
    }

    pub fn agent(&self, id: &str) -> Option<&AgentDef> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn has_ligand(&self, name: &str) -> bool {
        self.ligands.iter().any(|l| l == name)
    }

    /// Rank of a level, or `u32::MAX` for undeclared names so that they sort last.
    pub fn level_rank(&self, name: &str) -> u32 {
        self.level(name).map_or(u32::MAX, |l| l.rank)
    }

    /// Copy of the model with one agent removed.
    pub fn without_agent(&self, id: &str) -> ModelDef {
        let mut m = self.clone();
        m.agents.retain(|a| a.id != id);
        m
    }
}
