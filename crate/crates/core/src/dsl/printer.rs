//! Canonical text form of a model.
//!
//! Sections appear in a fixed order and optional fields at their defaults are
//! left out, so printing a re-parsed model reproduces the same bytes.

use std::fmt::Write;

use crate::model::{
    AgentClass, AgentDef, Atom, Condition, ConditionExpr, EffectKind, Locus, ModelDef, NodeSource,
    GLOBAL_REGION,
};

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn locus(l: &Locus, default_region: &str) -> String {
    if l.region == default_region {
        l.level.clone()
    } else {
        format!("{}/{}", l.level, l.region)
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn atom(a: &Atom, region: &str) -> String {
    match a {
        Atom::Signal {
            species,
            locus: l,
            cmp,
            threshold,
        } => format!(
            "{species} at {} {} {}",
            locus(l, region),
            cmp.symbol(),
            num(*threshold)
        ),
        Atom::Ligand {
            ligand,
            cmp,
            threshold,
        } => format!("ligand {ligand} {} {}", cmp.symbol(), num(*threshold)),
    }
}

fn expr(e: &ConditionExpr, region: &str) -> String {
    let join = |xs: &[ConditionExpr], op: &str, wrap: fn(&ConditionExpr) -> bool| {
        xs.iter()
            .map(|x| {
                let s = expr(x, region);
                if wrap(x) {
                    format!("({s})")
                } else {
                    s
                }
            })
            .collect::<Vec<_>>()
            .join(op)
    };
    match e {
        ConditionExpr::Atom(a) => atom(a, region),
        // An `and` nested directly in an `and` needs parentheses to stay nested.
        ConditionExpr::And(xs) => join(xs, " and ", |x| {
            matches!(x, ConditionExpr::And(_) | ConditionExpr::Or(_))
        }),
        ConditionExpr::Or(xs) => join(xs, " or ", |x| matches!(x, ConditionExpr::Or(_))),
        ConditionExpr::Not(x) => match **x {
            ConditionExpr::And(_) | ConditionExpr::Or(_) => format!("not ({})", expr(x, region)),
            _ => format!("not {}", expr(x, region)),
        },
    }
}

fn agent(out: &mut String, a: &AgentDef) {
    let head = match a.class {
        AgentClass::Internal => "agent",
        AgentClass::Interface => "interface",
    };
    write!(out, "{head} {}", a.id).unwrap();
    if a.priority != 0 {
        write!(out, " priority {}", a.priority).unwrap();
    }
    if a.multiplicity != 1 {
        write!(out, " multiplicity {}", a.multiplicity).unwrap();
    }
    if a.firing_probability != 1.0 {
        write!(out, " probability {}", num(a.firing_probability)).unwrap();
    }
    if let Some(r) = &a.region {
        write!(out, " region {r}").unwrap();
    }
    out.push('\n');

    let region = a.default_region();
    match &a.condition {
        Condition::Rule(e) => writeln!(out, "  when {}", expr(e, region)).unwrap(),
        Condition::Net(net) => {
            writeln!(out, "  net steps {} output {}", net.steps, net.output).unwrap();
            for node in &net.nodes {
                match &node.source {
                    NodeSource::Input(a) => {
                        writeln!(out, "    input {} when {}", node.name, atom(a, region)).unwrap()
                    }
                    NodeSource::Rule { inputs, table } => {
                        write!(out, "    node {} from", node.name).unwrap();
                        for i in inputs {
                            write!(out, " {i}").unwrap();
                        }
                        let bits: String = table.iter().map(|&b| if b { '1' } else { '0' }).collect();
                        writeln!(out, " table {bits}").unwrap();
                    }
                }
            }
            out.push_str("  end\n");
        }
    }
    for e in &a.effects {
        let (word, field) = match e.kind {
            EffectKind::Consume => ("consume", "amount"),
            EffectKind::Produce => ("produce", "amount"),
            EffectKind::SetFlag => ("set", "value"),
        };
        writeln!(
            out,
            "  {word} {} at {} {field} {}",
            e.species,
            locus(&e.locus, region),
            num(e.amount)
        )
        .unwrap();
    }
    for em in &a.emissions {
        writeln!(out, "  emit {} amount {}", em.ligand, num(em.amount)).unwrap();
    }
    out.push_str("end\n");
}

pub fn pretty_print(model: &ModelDef) -> String {
    let mut out = String::new();
    writeln!(out, "model {}", model.name).unwrap();
    for (k, v) in &model.metadata {
        writeln!(out, "meta {k} {}", quote(v)).unwrap();
    }

    let section = |out: &mut String, lines: Vec<String>| {
        if !lines.is_empty() {
            out.push('\n');
            for l in lines {
                out.push_str(&l);
                out.push('\n');
            }
        }
    };
    section(
        &mut out,
        model
            .levels
            .iter()
            .map(|l| format!("level {} kind {} rank {}", l.name, l.kind.as_str(), l.rank))
            .collect(),
    );
    section(
        &mut out,
        model
            .species
            .iter()
            .map(|s| {
                let mut line = format!("signal {} kind {}", s.name, s.kind.as_str());
                if s.decay != 0.0 {
                    write!(line, " decay {}", num(s.decay)).unwrap();
                }
                line
            })
            .collect(),
    );
    section(
        &mut out,
        model.ligands.iter().map(|l| format!("ligand {l}")).collect(),
    );
    section(
        &mut out,
        model
            .initializers
            .iter()
            .map(|i| {
                format!(
                    "init {} at {} amount {}",
                    i.species,
                    locus(&i.locus, GLOBAL_REGION),
                    num(i.quantity)
                )
            })
            .collect(),
    );
    section(
        &mut out,
        model
            .stimuli
            .iter()
            .map(|s| {
                format!(
                    "stimulus {} amount {} from {} to {}",
                    s.ligand,
                    num(s.amount),
                    s.from_tick,
                    s.to_tick
                )
            })
            .collect(),
    );
    for a in &model.agents {
        out.push('\n');
        agent(&mut out, a);
    }
    out
}
