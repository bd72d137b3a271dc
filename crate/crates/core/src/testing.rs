//! Seeded random model generator and brute-force oracles for the test suites.
//!
//! Generated models are small (at most 6 agents and 4 species) and always
//! pass validation. Numeric constants are drawn from short lists of exactly
//! representable values so that traces compare exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::columns::AgencyColumn;
use crate::model::{
    AgentClass, AgentDef, Atom, BooleanNet, Comparator, Condition, ConditionExpr, Effect,
    EffectKind, Emission, Initializer, Level, LevelKind, Locus, ModelDef, NetNode, NodeSource,
    SignalSpecies, SpeciesKind, Stimulus, GLOBAL_REGION,
};

pub const MAX_AGENTS: usize = 6;
pub const MAX_SPECIES: usize = 4;

const LEVEL_NAMES: [&str; 3] = ["membrane", "cytosol", "nucleus"];
const REGIONS: [&str; 3] = [GLOBAL_REGION, "p", "q"];
const THRESHOLDS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3.0];
const AMOUNTS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];
const DECAYS: [f64; 4] = [0.0, 0.0, 0.25, 0.5];

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    levels: Vec<String>,
    species: Vec<SignalSpecies>,
    ligands: Vec<String>,
}

impl Gen<'_> {
    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs.choose(&mut *self.rng).expect("non-empty choice").clone()
    }

    fn locus(&mut self) -> Locus {
        let level = self.pick(&self.levels.clone());
        let region = self.pick(&REGIONS);
        Locus::new(level, region)
    }

    fn comparator(&mut self) -> Comparator {
        self.pick(&Comparator::ALL)
    }

    fn atom(&mut self, class: AgentClass) -> Atom {
        if class == AgentClass::Interface && !self.ligands.is_empty() && self.rng.random_bool(0.4) {
            return Atom::Ligand {
                ligand: self.pick(&self.ligands.clone()),
                cmp: self.comparator(),
                threshold: self.pick(&THRESHOLDS),
            };
        }
        let s = self.pick(&self.species.clone());
        Atom::Signal {
            species: s.name,
            locus: self.locus(),
            cmp: self.comparator(),
            threshold: self.pick(&THRESHOLDS),
        }
    }

    fn expr(&mut self, class: AgentClass, depth: u32) -> ConditionExpr {
        let roll = if depth == 0 { 0 } else { self.rng.random_range(0..5) };
        match roll {
            0 | 1 => ConditionExpr::Atom(self.atom(class)),
            2 => ConditionExpr::Not(Box::new(self.expr(class, depth - 1))),
            r => {
                let n = self.rng.random_range(2..=3);
                let xs = (0..n).map(|_| self.expr(class, depth - 1)).collect();
                if r == 3 {
                    ConditionExpr::And(xs)
                } else {
                    ConditionExpr::Or(xs)
                }
            }
        }
    }

    fn net(&mut self, class: AgentClass) -> BooleanNet {
        let n_inputs = self.rng.random_range(1..=2);
        let mut nodes: Vec<NetNode> = (0..n_inputs)
            .map(|i| NetNode {
                name: format!("in{i}"),
                source: NodeSource::Input(self.atom(class)),
            })
            .collect();
        let n_rules = self.rng.random_range(1..=2);
        for r in 0..n_rules {
            let pool: Vec<String> = nodes.iter().map(|n| n.name.clone()).collect();
            let k = self.rng.random_range(1..=pool.len().min(3));
            let inputs: Vec<String> = (0..k).map(|_| self.pick(&pool)).collect();
            let table = (0..1usize << k).map(|_| self.rng.random_bool(0.5)).collect();
            nodes.push(NetNode {
                name: format!("r{r}"),
                source: NodeSource::Rule { inputs, table },
            });
        }
        let output = nodes.last().expect("at least one node").name.clone();
        BooleanNet {
            nodes,
            output,
            steps: self.rng.random_range(1..=3),
        }
    }

    fn effect(&mut self) -> Effect {
        let s = self.pick(&self.species.clone());
        let locus = self.locus();
        match s.kind {
            SpeciesKind::Flag => Effect {
                kind: EffectKind::SetFlag,
                species: s.name,
                locus,
                amount: if self.rng.random_bool(0.7) { 1.0 } else { 0.0 },
            },
            SpeciesKind::Messenger => Effect {
                kind: if self.rng.random_bool(0.5) {
                    EffectKind::Produce
                } else {
                    EffectKind::Consume
                },
                species: s.name,
                locus,
                amount: self.pick(&AMOUNTS),
            },
        }
    }

    fn agent(&mut self, i: usize) -> AgentDef {
        let class = if self.rng.random_bool(0.35) {
            AgentClass::Interface
        } else {
            AgentClass::Internal
        };
        let condition = if self.rng.random_bool(0.2) {
            Condition::Net(self.net(class))
        } else {
            Condition::Rule(self.expr(class, 2))
        };
        let mut a = AgentDef::new(format!("Ag{i}"), class, condition);
        a.effects = (0..self.rng.random_range(0..=3)).map(|_| self.effect()).collect();
        if class == AgentClass::Interface && !self.ligands.is_empty() && self.rng.random_bool(0.4) {
            a.emissions.push(Emission {
                ligand: self.pick(&self.ligands.clone()),
                amount: self.pick(&AMOUNTS),
            });
        }
        a.multiplicity = self.rng.random_range(1..=3);
        a.priority = self.rng.random_range(-2..=2);
        a.firing_probability = self.pick(&[1.0, 1.0, 1.0, 0.5, 0.75]);
        if self.rng.random_bool(0.3) {
            a.region = Some(self.pick(&["p", "q"]).to_string());
        }
        a
    }
}

/// A valid random model determined by `seed`.
pub fn random_model(seed: u64) -> ModelDef {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_levels = rng.random_range(1..=LEVEL_NAMES.len());
    let levels: Vec<Level> = (0..n_levels)
        .map(|i| Level {
            name: LEVEL_NAMES[i].to_string(),
            rank: i as u32,
            kind: LevelKind::ALL[i],
        })
        .collect();
    let n_species = rng.random_range(1..=MAX_SPECIES);
    let species: Vec<SignalSpecies> = (0..n_species)
        .map(|i| {
            let flag = rng.random_bool(0.3);
            SignalSpecies {
                name: format!("S{i}"),
                kind: if flag {
                    SpeciesKind::Flag
                } else {
                    SpeciesKind::Messenger
                },
                decay: if flag { 0.0 } else { *DECAYS.choose(&mut rng).unwrap() },
            }
        })
        .collect();
    let ligands: Vec<String> = (0..rng.random_range(0..=2)).map(|i| format!("L{i}")).collect();

    let mut g = Gen {
        rng: &mut rng,
        levels: levels.iter().map(|l| l.name.clone()).collect(),
        species: species.clone(),
        ligands: ligands.clone(),
    };

    let mut initializers = Vec::new();
    let mut seen = BTreeSet::new();
    for _ in 0..g.rng.random_range(0..=4) {
        let s = g.pick(&species);
        let locus = g.locus();
        if !seen.insert((s.name.clone(), locus.clone())) {
            continue;
        }
        let quantity = match s.kind {
            SpeciesKind::Flag => 1.0,
            SpeciesKind::Messenger => g.pick(&[1.0, 2.0, 5.0, 10.0]),
        };
        initializers.push(Initializer {
            species: s.name,
            locus,
            quantity,
        });
    }

    let mut stimuli = Vec::new();
    for l in &ligands {
        if g.rng.random_bool(0.7) {
            let from_tick = g.rng.random_range(0..5);
            stimuli.push(Stimulus {
                ligand: l.clone(),
                amount: g.pick(&AMOUNTS),
                from_tick,
                to_tick: from_tick + g.rng.random_range(0..8),
            });
        }
    }

    let n_agents = g.rng.random_range(0..=MAX_AGENTS);
    let agents = (0..n_agents).map(|i| g.agent(i)).collect();

    let mut metadata = BTreeMap::new();
    if g.rng.random_bool(0.5) {
        metadata.insert("author".to_string(), format!("gen \"{seed}\" \\ test"));
    }

    ModelDef {
        name: format!("random{seed}"),
        metadata,
        levels,
        species,
        ligands,
        initializers,
        stimuli,
        agents,
    }
}

fn atom_locus(atom: &Atom) -> Option<&Locus> {
    match atom {
        Atom::Signal { locus, .. } => Some(locus),
        Atom::Ligand { .. } => None,
    }
}

fn expr_loci<'a>(e: &'a ConditionExpr, out: &mut Vec<&'a Locus>) {
    match e {
        ConditionExpr::Atom(a) => out.extend(atom_locus(a)),
        ConditionExpr::And(xs) | ConditionExpr::Or(xs) => {
            for x in xs {
                expr_loci(x, out);
            }
        }
        ConditionExpr::Not(x) => expr_loci(x, out),
    }
}

/// Every (agent, locus) pair the agent reads or writes, with repeats.
pub fn agent_locus_pairs(model: &ModelDef) -> Vec<(String, Locus)> {
    let mut pairs = Vec::new();
    for a in &model.agents {
        let mut loci = Vec::new();
        match &a.condition {
            Condition::Rule(e) => expr_loci(e, &mut loci),
            Condition::Net(net) => {
                for n in &net.nodes {
                    if let NodeSource::Input(atom) = &n.source {
                        loci.extend(atom_locus(atom));
                    }
                }
            }
        }
        loci.extend(a.effects.iter().map(|e| &e.locus));
        pairs.extend(loci.into_iter().map(|l| (a.id.clone(), l.clone())));
    }
    pairs
}

/// Column detection by exhaustive grouping: for every region tag that occurs,
/// scan all pairs and keep the region if it covers two or more levels.
pub fn columns_oracle(model: &ModelDef) -> Vec<AgencyColumn> {
    let pairs = agent_locus_pairs(model);
    let regions: BTreeSet<&str> = pairs.iter().map(|(_, l)| l.region.as_str()).collect();
    let mut out = Vec::new();
    for region in regions {
        let mut levels = BTreeSet::new();
        let mut members = BTreeSet::new();
        for (agent, locus) in &pairs {
            if locus.region == region {
                levels.insert(locus.level.clone());
                members.insert(agent.clone());
            }
        }
        if levels.len() >= 2 {
            out.push(AgencyColumn {
                region: region.to_string(),
                levels_spanned: levels,
                members,
            });
        }
    }
    out
}
