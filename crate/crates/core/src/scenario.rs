//! Bundled models and the machine-readable properties they are expected to show.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::columns::AgencyColumn;
use crate::dsl::{self, Diagnostic};
use crate::model::{ModelDef, Stimulus};

const CA2PLUS_TEXT: &str = include_str!("../scenarios/ca2plus.cellulat");
const CA2PLUS_EXPECTED: &str = include_str!("../scenarios/ca2plus.expected.json");

pub const CHAIN_MAX: usize = 64;

/// Cumulative amount consumed from `consumed` equals the amount produced into
/// each species of `produced`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationRule {
    pub consumed: Vec<String>,
    pub produced: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnockoutExpectation {
    pub agent: String,
    /// Species that must stay exactly zero everywhere.
    pub species: Vec<String>,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampExpectation {
    pub species: String,
    pub level: String,
    pub region: String,
    /// Agent that must never fire while the clamp holds the species at zero.
    pub agent: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpectedProperties {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub stimulus: Option<Stimulus>,
    /// Agents whose first-firing ticks strictly increase in this order.
    pub causal_chain: Vec<String>,
    pub first_firing: BTreeMap<String, u64>,
    /// First trace tick at which the species is nonzero at any locus.
    pub first_nonzero: BTreeMap<String, u64>,
    pub conservation: Vec<ConservationRule>,
    pub columns: Vec<AgencyColumn>,
    pub knockout_silences: Option<KnockoutExpectation>,
    pub clamp_silences: Option<ClampExpectation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub text: String,
    pub manifest: ExpectedProperties,
}

impl Scenario {
    /// Parses the bundled text. Bundled scenarios are tested to be valid.
    pub fn model(&self) -> ModelDef {
        self.try_model()
            .unwrap_or_else(|d| panic!("bundled scenario `{}` is invalid: {d:?}", self.name))
    }

    pub fn try_model(&self) -> Result<ModelDef, Vec<Diagnostic>> {
        dsl::parse(&self.text).map(|p| p.model)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("chain length must lie in 1..={CHAIN_MAX}, got {0}")]
pub struct ChainLengthError(pub usize);

/// The Ca2+ pathway: receptor, G protein, PLC-beta, ER calcium release and
/// PKC, plus a secretion interface.
pub fn ca2plus_scenario() -> Scenario {
    Scenario {
        name: "ca2plus".into(),
        description: "Ca2+ signalling pathway: GPCR -> G protein -> PLC-beta -> IP3/DAG -> \
                      ER calcium release -> PKC, with a secretor emitting L2 once PKC is active. \
                      The secretor is an addition to the original pathway figure."
            .into(),
        text: CA2PLUS_TEXT.into(),
        manifest: serde_json::from_str(CA2PLUS_EXPECTED).expect("bundled manifest is valid JSON"),
    }
}

/// Chain of `n` agents moving one unit from S0 to Sn, one hop per tick. The
/// first agent is an interface agent gated on a one-tick pulse of `STIM` at
/// tick 0, so Sn first appears in the trace at tick n.
pub fn toy_linear_chain(n: usize) -> Result<Scenario, ChainLengthError> {
    if !(1..=CHAIN_MAX).contains(&n) {
        return Err(ChainLengthError(n));
    }
    let mut text = format!("model chain{n}\n\nlevel cytosol kind cytosol rank 0\n\n");
    for i in 0..=n {
        writeln!(text, "signal S{i} kind messenger").unwrap();
    }
    text.push_str("\nligand STIM\n\ninit S0 at cytosol amount 1.0\n\nstimulus STIM amount 1.0 from 0 to 0\n");
    for i in 0..n {
        if i == 0 {
            text.push_str("\ninterface A0\n  when ligand STIM >= 1.0 and S0 at cytosol >= 1.0\n");
        } else {
            write!(text, "\nagent A{i}\n  when S{i} at cytosol >= 1.0\n").unwrap();
        }
        writeln!(text, "  consume S{i} at cytosol amount 1.0").unwrap();
        writeln!(text, "  produce S{} at cytosol amount 1.0", i + 1).unwrap();
        text.push_str("end\n");
    }

    let manifest = ExpectedProperties {
        scenario: format!("chain{n}"),
        seed: 0,
        ticks: n as u64 + 2,
        stimulus: Some(Stimulus {
            ligand: "STIM".into(),
            amount: 1.0,
            from_tick: 0,
            to_tick: 0,
        }),
        causal_chain: (0..n).map(|i| format!("A{i}")).collect(),
        first_firing: (0..n).map(|i| (format!("A{i}"), i as u64)).collect(),
        first_nonzero: (0..=n).map(|i| (format!("S{i}"), i as u64)).collect(),
        conservation: Vec::new(),
        columns: Vec::new(),
        knockout_silences: None,
        clamp_silences: None,
    };
    Ok(Scenario {
        name: format!("chain{n}"),
        description: format!("linear chain of {n} agents from S0 to S{n}"),
        text,
        manifest,
    })
}

/// All scenarios shipped as files.
pub fn bundled() -> Vec<Scenario> {
    vec![ca2plus_scenario()]
}

pub fn bundled_by_name(name: &str) -> Option<Scenario> {
    bundled().into_iter().find(|s| s.name == name)
}
