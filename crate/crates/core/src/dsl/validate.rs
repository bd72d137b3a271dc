//! Semantic checks over a [`ModelDef`], independent of how it was built.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    AgentClass, AgentDef, Atom, Condition, ConditionExpr, EffectKind, Locus, ModelDef, NodeSource,
    SpeciesKind, RESERVED_ACTORS,
};

use super::{is_identifier, Code, Diagnostic, Location, SourceMap, KEYWORDS};

/// Truth tables above this many inputs are rejected.
const MAX_NODE_INPUTS: usize = 8;

/// Checks cross-references and value domains. Warnings are only computed for
/// models without errors.
pub fn validate(model: &ModelDef) -> Vec<Diagnostic> {
    validate_located(model, None)
}

pub(crate) fn validate_located(model: &ModelDef, map: Option<&SourceMap>) -> Vec<Diagnostic> {
    let mut v = Validator {
        model,
        map,
        out: Vec::new(),
    };
    v.run();
    if !v.out.iter().any(Diagnostic::is_error) {
        v.warnings();
    }
    v.out
}

struct Validator<'a> {
    model: &'a ModelDef,
    map: Option<&'a SourceMap>,
    out: Vec<Diagnostic>,
}

fn at(locs: Option<&Vec<Location>>, i: usize) -> Option<Location> {
    locs.and_then(|l| l.get(i).copied())
}

impl<'a> Validator<'a> {
    fn error(&mut self, code: Code, msg: String, loc: Option<Location>) {
        self.out.push(Diagnostic::error(code, msg, loc));
    }

    fn name(&mut self, what: &str, name: &str, loc: Option<Location>) {
        if KEYWORDS.contains(&name) {
            self.error(
                Code::ReservedIdentifier,
                format!("{what} `{name}` is a keyword"),
                loc,
            );
        } else if !is_identifier(name) {
            self.error(
                Code::InvalidIdentifier,
                format!("{what} `{name}` is not a valid identifier"),
                loc,
            );
        }
    }

    fn duplicates<'n>(
        &mut self,
        what: &str,
        names: impl Iterator<Item = &'n str>,
        locs: Option<&Vec<Location>>,
    ) {
        let mut seen = BTreeSet::new();
        for (i, n) in names.enumerate() {
            if !seen.insert(n) {
                self.error(
                    Code::DuplicateDeclaration,
                    format!("{what} `{n}` is declared more than once"),
                    at(locs, i),
                );
            }
        }
    }

    fn locus(&mut self, locus: &Locus, loc: Option<Location>) -> bool {
        if self.model.level(&locus.level).is_none() {
            self.error(
                Code::UnknownLevel,
                format!("unknown level `{}`", locus.level),
                loc,
            );
            return false;
        }
        self.name("region", &locus.region, loc);
        true
    }

    fn species_ref(&mut self, species: &str, loc: Option<Location>) -> Option<SpeciesKind> {
        match self.model.species(species) {
            Some(s) => Some(s.kind),
            None => {
                self.error(
                    Code::UnknownSpecies,
                    format!("unknown species `{species}`"),
                    loc,
                );
                None
            }
        }
    }

    fn run(&mut self) {
        let m = self.model;
        let map = self.map;
        self.name("model name", &m.name, map.map(|s| s.model));
        for key in m.metadata.keys() {
            if !key.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            {
                self.error(
                    Code::InvalidIdentifier,
                    format!("metadata key `{key}` is not a valid identifier"),
                    None,
                );
            }
        }

        if m.levels.is_empty() {
            self.error(
                Code::NoLevels,
                "a model needs at least one level".into(),
                map.map(|s| s.model),
            );
        }
        let level_locs = map.map(|s| &s.levels);
        for (i, l) in m.levels.iter().enumerate() {
            self.name("level", &l.name, at(level_locs, i));
        }
        self.duplicates("level", m.levels.iter().map(|l| l.name.as_str()), level_locs);

        let species_locs = map.map(|s| &s.species);
        for (i, s) in m.species.iter().enumerate() {
            let loc = at(species_locs, i);
            self.name("species", &s.name, loc);
            if !(0.0..=1.0).contains(&s.decay) {
                self.error(
                    Code::DecayDomain,
                    format!("decay of `{}` must lie in [0, 1], got {}", s.name, s.decay),
                    loc,
                );
            } else if s.kind == SpeciesKind::Flag && s.decay != 0.0 {
                self.error(
                    Code::DecayDomain,
                    format!("flag `{}` cannot decay", s.name),
                    loc,
                );
            }
        }
        self.duplicates("species", m.species.iter().map(|s| s.name.as_str()), species_locs);

        let ligand_locs = map.map(|s| &s.ligands);
        for (i, l) in m.ligands.iter().enumerate() {
            self.name("ligand", l, at(ligand_locs, i));
        }
        self.duplicates("ligand", m.ligands.iter().map(String::as_str), ligand_locs);

        let init_locs = map.map(|s| &s.initializers);
        let mut inits = BTreeSet::new();
        for (i, init) in m.initializers.iter().enumerate() {
            let loc = at(init_locs, i);
            let kind = self.species_ref(&init.species, loc);
            self.locus(&init.locus, loc);
            if !(init.quantity >= 0.0 && init.quantity.is_finite()) {
                self.error(
                    Code::AmountDomain,
                    format!("initial amount of `{}` must be non-negative", init.species),
                    loc,
                );
            } else if kind == Some(SpeciesKind::Flag) && init.quantity != 0.0 && init.quantity != 1.0 {
                self.error(
                    Code::FlagDomain,
                    format!("flag `{}` can only hold 0 or 1", init.species),
                    loc,
                );
            }
            if !inits.insert((&init.species, &init.locus)) {
                self.error(
                    Code::DuplicateInitializer,
                    format!("`{}` at {} is initialized twice", init.species, init.locus),
                    loc,
                );
            }
        }

        let stim_locs = map.map(|s| &s.stimuli);
        for (i, s) in m.stimuli.iter().enumerate() {
            let loc = at(stim_locs, i);
            if !m.has_ligand(&s.ligand) {
                self.error(
                    Code::UnknownLigand,
                    format!("unknown ligand `{}`", s.ligand),
                    loc,
                );
            }
            if !(s.amount >= 0.0 && s.amount.is_finite()) {
                self.error(
                    Code::AmountDomain,
                    format!("stimulus amount of `{}` must be non-negative", s.ligand),
                    loc,
                );
            }
            if s.from_tick > s.to_tick {
                self.error(
                    Code::StimulusRange,
                    format!(
                        "stimulus window {}..{} of `{}` ends before it starts",
                        s.from_tick, s.to_tick, s.ligand
                    ),
                    loc,
                );
            }
        }

        for (i, a) in m.agents.iter().enumerate() {
            self.agent(a, map.and_then(|s| s.agents.get(i)));
        }
        let agent_locs: Option<Vec<Location>> =
            map.map(|s| s.agents.iter().map(|a| a.header).collect());
        self.duplicates(
            "agent",
            m.agents.iter().map(|a| a.id.as_str()),
            agent_locs.as_ref(),
        );
    }

    fn agent(&mut self, a: &AgentDef, spans: Option<&super::AgentSpans>) {
        let header = spans.map(|s| s.header);
        let cond_loc = spans.map(|s| s.condition);
        if RESERVED_ACTORS.contains(&a.id.as_str()) {
            self.error(
                Code::ReservedIdentifier,
                format!("agent id `{}` is reserved for the event log", a.id),
                header,
            );
        } else {
            self.name("agent id", &a.id, header);
        }
        if let Some(r) = &a.region {
            self.name("region", r, header);
        }
        if a.multiplicity < 1 {
            self.error(
                Code::MultiplicityDomain,
                format!("multiplicity of `{}` must be at least 1", a.id),
                header,
            );
        }
        let p = a.firing_probability;
        if !(p > 0.0 && p <= 1.0) {
            self.error(
                Code::ProbabilityDomain,
                format!("firing probability of `{}` must lie in (0, 1], got {p}", a.id),
                header,
            );
        }

        match &a.condition {
            Condition::Rule(e) => self.expr(a, e, cond_loc),
            Condition::Net(net) => {
                let node_loc = |i: usize| spans.and_then(|s| s.nodes.get(i).copied()).or(cond_loc);
                if net.steps < 1 {
                    self.error(
                        Code::NetStructure,
                        format!("boolean network of `{}` needs at least one step", a.id),
                        cond_loc,
                    );
                }
                let names: BTreeSet<&str> = net.nodes.iter().map(|n| n.name.as_str()).collect();
                let mut seen = BTreeSet::new();
                for (i, node) in net.nodes.iter().enumerate() {
                    let loc = node_loc(i);
                    self.name("node", &node.name, loc);
                    if !seen.insert(node.name.as_str()) {
                        self.error(
                            Code::DuplicateDeclaration,
                            format!("node `{}` is declared more than once", node.name),
                            loc,
                        );
                    }
                    match &node.source {
                        NodeSource::Input(atom) => self.atom(a, atom, loc),
                        NodeSource::Rule { inputs, table } => {
                            for inp in inputs {
                                if !names.contains(inp.as_str()) {
                                    self.error(
                                        Code::UnknownNode,
                                        format!("unknown node `{inp}`"),
                                        loc,
                                    );
                                }
                            }
                            if inputs.len() > MAX_NODE_INPUTS
                                || table.len() != 1usize << inputs.len()
                            {
                                self.error(
                                    Code::NetStructure,
                                    format!(
                                        "node `{}` has {} inputs and needs a truth table of {} rows, got {}",
                                        node.name,
                                        inputs.len(),
                                        1u128 << inputs.len().min(100),
                                        table.len()
                                    ),
                                    loc,
                                );
                            }
                        }
                    }
                }
                if !names.contains(net.output.as_str()) {
                    self.error(
                        Code::UnknownNode,
                        format!("output node `{}` is not declared", net.output),
                        cond_loc,
                    );
                }
            }
        }

        for (i, e) in a.effects.iter().enumerate() {
            let loc = spans.and_then(|s| s.effects.get(i).copied()).or(header);
            let kind = self.species_ref(&e.species, loc);
            self.locus(&e.locus, loc);
            match (e.kind, kind) {
                (EffectKind::SetFlag, Some(SpeciesKind::Messenger)) => self.error(
                    Code::FlagDomain,
                    format!("`set` applies to flags; `{}` is a messenger", e.species),
                    loc,
                ),
                (EffectKind::SetFlag, _) if e.amount != 0.0 && e.amount != 1.0 => self.error(
                    Code::FlagDomain,
                    format!("flag `{}` can only be set to 0 or 1", e.species),
                    loc,
                ),
                (EffectKind::Produce | EffectKind::Consume, Some(SpeciesKind::Flag)) => self.error(
                    Code::FlagDomain,
                    format!("flag `{}` can only be changed with `set`", e.species),
                    loc,
                ),
                (EffectKind::Produce | EffectKind::Consume, _)
                    if !(e.amount > 0.0 && e.amount.is_finite()) =>
                {
                    self.error(
                        Code::AmountDomain,
                        format!("amount for `{}` must be positive", e.species),
                        loc,
                    )
                }
                _ => {}
            }
        }

        for (i, em) in a.emissions.iter().enumerate() {
            let loc = spans.and_then(|s| s.emissions.get(i).copied()).or(header);
            if a.class == AgentClass::Internal {
                self.error(
                    Code::ClassConstraint,
                    format!("internal agent `{}` cannot emit ligands", a.id),
                    loc,
                );
            }
            if !self.model.has_ligand(&em.ligand) {
                self.error(
                    Code::UnknownLigand,
                    format!("unknown ligand `{}`", em.ligand),
                    loc,
                );
            }
            if !(em.amount > 0.0 && em.amount.is_finite()) {
                self.error(
                    Code::AmountDomain,
                    format!("emitted amount of `{}` must be positive", em.ligand),
                    loc,
                );
            }
        }
    }

    fn expr(&mut self, a: &AgentDef, e: &ConditionExpr, loc: Option<Location>) {
        match e {
            ConditionExpr::Atom(atom) => self.atom(a, atom, loc),
            ConditionExpr::And(xs) | ConditionExpr::Or(xs) => {
                if xs.len() < 2 {
                    self.error(
                        Code::DegenerateCondition,
                        format!("`and`/`or` in `{}` needs at least two operands", a.id),
                        loc,
                    );
                }
                for x in xs {
                    self.expr(a, x, loc);
                }
            }
            ConditionExpr::Not(x) => self.expr(a, x, loc),
        }
    }

    fn atom(&mut self, a: &AgentDef, atom: &Atom, loc: Option<Location>) {
        match atom {
            Atom::Signal {
                species,
                locus,
                threshold,
                ..
            } => {
                self.species_ref(species, loc);
                self.locus(locus, loc);
                if !threshold.is_finite() {
                    self.error(Code::AmountDomain, "threshold must be finite".into(), loc);
                }
            }
            Atom::Ligand {
                ligand, threshold, ..
            } => {
                if a.class == AgentClass::Internal {
                    self.error(
                        Code::ClassConstraint,
                        format!("internal agent `{}` cannot sense ligand `{ligand}`", a.id),
                        loc,
                    );
                }
                if !self.model.has_ligand(ligand) {
                    self.error(Code::UnknownLigand, format!("unknown ligand `{ligand}`"), loc);
                }
                if !threshold.is_finite() {
                    self.error(Code::AmountDomain, "threshold must be finite".into(), loc);
                }
            }
        }
    }

    fn warnings(&mut self) {
        let m = self.model;
        let mut produced: BTreeSet<&str> = m
            .initializers
            .iter()
            .filter(|i| i.quantity > 0.0)
            .map(|i| i.species.as_str())
            .collect();
        let mut sensed = BTreeSet::new();
        for a in &m.agents {
            for e in &a.effects {
                if matches!(e.kind, EffectKind::Produce)
                    || (e.kind == EffectKind::SetFlag && e.amount > 0.0)
                {
                    produced.insert(e.species.as_str());
                }
            }
            a.condition.for_each_atom(&mut |atom| {
                if let Atom::Signal { species, .. } = atom {
                    sensed.insert(species.as_str());
                }
            });
        }

        for (i, a) in m.agents.iter().enumerate() {
            let mut missing: BTreeMap<&str, ()> = BTreeMap::new();
            a.condition.for_each_atom(&mut |atom| {
                if let Atom::Signal { species, .. } = atom {
                    if !produced.contains(species.as_str()) {
                        missing.insert(species, ());
                    }
                }
            });
            if !missing.is_empty() {
                let names: Vec<_> = missing.keys().map(|s| format!("`{s}`")).collect();
                self.out.push(Diagnostic::warning(
                    Code::UnreachableAgent,
                    format!(
                        "agent `{}` senses {} which nothing initializes or produces",
                        a.id,
                        names.join(", ")
                    ),
                    self.map.and_then(|s| s.agents.get(i)).map(|s| s.header),
                ));
            }
        }

        for (i, s) in m.species.iter().enumerate() {
            if !sensed.contains(s.name.as_str()) {
                self.out.push(Diagnostic::warning(
                    Code::DeadEndSpecies,
                    format!("species `{}` is never sensed by any agent", s.name),
                    at(self.map.map(|m| &m.species), i),
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const BASE: &str = "model m
level c kind cytosol rank 0
signal A kind messenger
signal F kind flag
ligand L
init A at c amount 1
";

    fn codes(extra: &str) -> Vec<(Code, u32)> {
        let text = format!("{BASE}{extra}");
        let d = match parse(&text) {
            Ok(p) => p.warnings,
            Err(d) => d,
        };
        d.iter()
            .map(|d| (d.code, d.location.map_or(0, |l| l.line)))
            .collect()
    }

    #[test]
    fn probability_zero() {
        let c = codes("agent X probability 0.0\n  when A at c >= 1\n  set F at c value 1\nend\ninterface Y\n  when F at c >= 1\n  emit L amount 1\nend\n");
        assert_eq!(c, [(Code::ProbabilityDomain, 7)]);
    }

    #[test]
    fn domains() {
        let c = codes(
            "agent X multiplicity 0
  when A at c >= 1
  set F at c value 2
  produce F at c amount 1
  consume A at c amount -1
  set A at c value 1
end
stimulus L amount 1 from 5 to 2
init F at c amount 0.5
",
        );
        assert_eq!(
            c,
            [
                (Code::FlagDomain, 15),
                (Code::StimulusRange, 14),
                (Code::MultiplicityDomain, 7),
                (Code::FlagDomain, 9),
                (Code::FlagDomain, 10),
                (Code::AmountDomain, 11),
                (Code::FlagDomain, 12),
            ]
        );
    }

    #[test]
    fn class_constraints() {
        let c = codes("agent X\n  when ligand L >= 1\n  emit L amount 1\nend\n");
        assert_eq!(c, [(Code::ClassConstraint, 8), (Code::ClassConstraint, 9)]);
    }

    #[test]
    fn unknown_references() {
        let c = codes("interface X\n  when ligand Q >= 1 and A at nowhere >= 1\n  emit Z amount 1\nend\nstimulus W amount 1 from 0 to 1\n");
        assert_eq!(
            c,
            [
                (Code::UnknownLigand, 11),
                (Code::UnknownLigand, 8),
                (Code::UnknownLevel, 8),
                (Code::UnknownLigand, 9),
            ]
        );
    }

    #[test]
    fn reserved_agent_id() {
        let c = codes("agent lesion\n  when A at c >= 1\n  set F at c value 1\nend\n");
        assert_eq!(c, [(Code::ReservedIdentifier, 7)]);
    }

    #[test]
    fn duplicate_initializer_and_agent() {
        let c = codes("init A at c amount 2\nagent X\n  when A at c >= 1\n  set F at c value 1\nend\nagent X\n  when F at c >= 1\n  produce A at c amount 1\nend\n");
        assert_eq!(c, [(Code::DuplicateInitializer, 7), (Code::DuplicateDeclaration, 12)]);
    }

    #[test]
    fn unreachable_and_dead_end() {
        let text = "model m
level c kind cytosol rank 0
signal A kind messenger
signal B kind messenger
agent X
  when A at c >= 1
  produce B at c amount 1
end
";
        let p = parse(text).unwrap();
        let c: Vec<_> = p
            .warnings
            .iter()
            .map(|d| (d.code, d.location.unwrap().line))
            .collect();
        assert_eq!(c, [(Code::UnreachableAgent, 5), (Code::DeadEndSpecies, 4)]);
    }

    #[test]
    fn net_structure() {
        let c = codes(
            "agent X
  net steps 0 output z
    input a when A at c >= 1
    node b from a q table 01
    node a from a table 01
  end
  set F at c value 1
end
",
        );
        assert_eq!(
            c,
            [
                (Code::NetStructure, 8),
                (Code::UnknownNode, 10),
                (Code::NetStructure, 10),
                (Code::DuplicateDeclaration, 11),
                (Code::UnknownNode, 8),
            ]
        );
    }

    #[test]
    fn programmatic_model_without_locations() {
        let mut m = parse("model m\nlevel c kind cytosol rank 0").unwrap().model;
        m.name = "bad name".into();
        m.agents.push(AgentDef::new(
            "X",
            AgentClass::Internal,
            Condition::Rule(ConditionExpr::And(vec![])),
        ));
        let d = validate(&m);
        let c: Vec<_> = d.iter().map(|d| (d.code, d.location)).collect();
        assert_eq!(
            c,
            [
                (Code::InvalidIdentifier, None),
                (Code::DegenerateCondition, None)
            ]
        );
    }
}
