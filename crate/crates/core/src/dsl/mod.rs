//! The `.cellulat` model format: parser, validator and canonical printer.
//!
//! The grammar is line oriented. Each declaration sits on its own line and
//! agent bodies are closed with `end`; `#` starts a comment. See
//! `docs/dsl.md` for the full reference.

mod lexer;
mod parser;
mod printer;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ModelDef;

pub use printer::pretty_print;
pub use validate::validate;

/// Identifiers with a fixed meaning in the grammar.
pub const KEYWORDS: &[&str] = &[
    "model",
    "meta",
    "level",
    "kind",
    "rank",
    "signal",
    "decay",
    "ligand",
    "init",
    "at",
    "amount",
    "stimulus",
    "from",
    "to",
    "agent",
    "interface",
    "priority",
    "multiplicity",
    "probability",
    "region",
    "when",
    "net",
    "steps",
    "output",
    "input",
    "node",
    "table",
    "end",
    "consume",
    "produce",
    "set",
    "value",
    "emit",
    "and",
    "or",
    "not",
];

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Code {
    LexicalError,
    SyntaxError,
    DuplicateDeclaration,
    InvalidIdentifier,
    ReservedIdentifier,
    NoLevels,
    UnknownSpecies,
    UnknownLevel,
    UnknownLigand,
    UnknownNode,
    FlagDomain,
    AmountDomain,
    DecayDomain,
    ProbabilityDomain,
    MultiplicityDomain,
    StimulusRange,
    DuplicateInitializer,
    ClassConstraint,
    DegenerateCondition,
    NetStructure,
    UnreachableAgent,
    DeadEndSpecies,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::LexicalError => "lexical_error",
            Code::SyntaxError => "syntax_error",
            Code::DuplicateDeclaration => "duplicate_declaration",
            Code::InvalidIdentifier => "invalid_identifier",
            Code::ReservedIdentifier => "reserved_identifier",
            Code::NoLevels => "no_levels",
            Code::UnknownSpecies => "unknown_species",
            Code::UnknownLevel => "unknown_level",
            Code::UnknownLigand => "unknown_ligand",
            Code::UnknownNode => "unknown_node",
            Code::FlagDomain => "flag_domain",
            Code::AmountDomain => "amount_domain",
            Code::DecayDomain => "decay_domain",
            Code::ProbabilityDomain => "probability_domain",
            Code::MultiplicityDomain => "multiplicity_domain",
            Code::StimulusRange => "stimulus_range",
            Code::DuplicateInitializer => "duplicate_initializer",
            Code::ClassConstraint => "class_constraint",
            Code::DegenerateCondition => "degenerate_condition",
            Code::NetStructure => "net_structure",
            Code::UnreachableAgent => "unreachable_agent",
            Code::DeadEndSpecies => "dead_end_species",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl Default for Location {
    fn default() -> Self {
        Self::new(1, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    /// Absent for models that were not parsed from text.
    pub location: Option<Location>,
}

impl Diagnostic {
    pub fn error(code: Code, message: impl Into<String>, location: Option<Location>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            message: message.into(),
            location,
        }
    }

    pub fn warning(code: Code, message: impl Into<String>, location: Option<Location>) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            message: message.into(),
            location,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if let Some(loc) = self.location {
            write!(f, "{}:{}: ", loc.line, loc.column)?;
        }
        write!(f, "{sev}[{}]: {}", self.code, self.message)
    }
}

/// Source lines of an agent block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentSpans {
    pub header: Location,
    pub condition: Location,
    /// One per boolean-network node, in declaration order.
    pub nodes: Vec<Location>,
    pub effects: Vec<Location>,
    pub emissions: Vec<Location>,
}

/// Where each declaration of a parsed model came from. Entries are parallel
/// to the vectors of [`ModelDef`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceMap {
    pub model: Location,
    pub levels: Vec<Location>,
    pub species: Vec<Location>,
    pub ligands: Vec<Location>,
    pub initializers: Vec<Location>,
    pub stimuli: Vec<Location>,
    pub agents: Vec<AgentSpans>,
}

/// A successfully parsed model with its warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub model: ModelDef,
    pub warnings: Vec<Diagnostic>,
    pub source_map: SourceMap,
}

/// Parses and validates model text. Any error diagnostic (lexical, syntactic
/// or semantic) means no model is returned.
pub fn parse(text: &str) -> Result<Parsed, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let tokens = lexer::lex(text, &mut diags);
    let (model, source_map) = parser::Parser::new(tokens, &mut diags).run();
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    diags.extend(validate::validate_located(&model, Some(&source_map)));
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok(Parsed {
        model,
        warnings: diags,
        source_map,
    })
}
