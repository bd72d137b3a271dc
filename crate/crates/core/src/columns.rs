//! Static spatial analysis of a model: per-level occupancy and agency columns.
//!
//! A column is the set of agents whose sensed or affected loci share a region
//! tag, provided those loci cover at least two blackboard levels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{AgentDef, Atom, Locus, ModelDef};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgencyColumn {
    pub region: String,
    pub levels_spanned: BTreeSet<String>,
    pub members: BTreeSet<String>,
}

/// Loci an agent reads through signal atoms or writes through effects.
pub fn touched_loci(agent: &AgentDef) -> BTreeSet<&Locus> {
    let mut out = BTreeSet::new();
    agent.condition.for_each_atom(&mut |a| {
        if let Atom::Signal { locus, .. } = a {
            out.insert(locus);
        }
    });
    out.extend(agent.effects.iter().map(|e| &e.locus));
    out
}

/// Columns sorted by region, at most one per region.
pub fn detect_columns(model: &ModelDef) -> Vec<AgencyColumn> {
    let mut by_region: BTreeMap<&str, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for agent in &model.agents {
        for locus in touched_loci(agent) {
            let (levels, members) = by_region.entry(&locus.region).or_default();
            levels.insert(locus.level.clone());
            members.insert(agent.id.clone());
        }
    }
    by_region
        .into_iter()
        .filter(|(_, (levels, _))| levels.len() >= 2)
        .map(|(region, (levels_spanned, members))| AgencyColumn {
            region: region.to_string(),
            levels_spanned,
            members,
        })
        .collect()
}

/// Several columns whose members now share one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub into: String,
    pub from: Vec<String>,
}

/// One column whose members are now spread over several columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub from: String,
    pub into: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipChange {
    pub region: String,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    pub levels_added: BTreeSet<String>,
    pub levels_removed: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDiffReport {
    pub merged: Vec<Merge>,
    pub split: Vec<Split>,
    pub appeared: Vec<AgencyColumn>,
    pub vanished: Vec<AgencyColumn>,
    pub membership_changes: Vec<MembershipChange>,
}

impl ColumnDiffReport {
    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
            && self.split.is_empty()
            && self.appeared.is_empty()
            && self.vanished.is_empty()
            && self.membership_changes.is_empty()
    }
}

fn overlapping<'a>(col: &AgencyColumn, others: &[&'a AgencyColumn]) -> Vec<&'a AgencyColumn> {
    others
        .iter()
        .filter(|o| !o.members.is_disjoint(&col.members))
        .copied()
        .collect()
}

/// Compares two column sets keyed by region. Merges and splits are found
/// through shared members among the columns that changed; a column present
/// unchanged on both sides never takes part in one.
pub fn column_diff(before: &[AgencyColumn], after: &[AgencyColumn]) -> ColumnDiffReport {
    let old: BTreeMap<&str, &AgencyColumn> = before.iter().map(|c| (c.region.as_str(), c)).collect();
    let new: BTreeMap<&str, &AgencyColumn> = after.iter().map(|c| (c.region.as_str(), c)).collect();
    let changed_old: Vec<&AgencyColumn> = before.iter().filter(|c| !after.contains(c)).collect();
    let changed_new: Vec<&AgencyColumn> = after.iter().filter(|c| !before.contains(c)).collect();
    let mut report = ColumnDiffReport::default();

    for (region, col) in &new {
        let sources = overlapping(col, &changed_old);
        if changed_new.contains(col) && sources.len() >= 2 {
            report.merged.push(Merge {
                into: region.to_string(),
                from: sources.iter().map(|c| c.region.clone()).collect(),
            });
        }
        if !old.contains_key(region) {
            report.appeared.push((*col).clone());
        }
    }
    for (region, col) in &old {
        let targets = overlapping(col, &changed_new);
        if changed_old.contains(col) && targets.len() >= 2 {
            report.split.push(Split {
                from: region.to_string(),
                into: targets.iter().map(|c| c.region.clone()).collect(),
            });
        }
        match new.get(region) {
            None => report.vanished.push((*col).clone()),
            Some(n) if n != col => report.membership_changes.push(MembershipChange {
                region: region.to_string(),
                added: n.members.difference(&col.members).cloned().collect(),
                removed: col.members.difference(&n.members).cloned().collect(),
                levels_added: n.levels_spanned.difference(&col.levels_spanned).cloned().collect(),
                levels_removed: col.levels_spanned.difference(&n.levels_spanned).cloned().collect(),
            }),
            Some(_) => {}
        }
    }
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelOccupancy {
    pub agents_sensing: BTreeSet<String>,
    pub agents_affecting: BTreeSet<String>,
    /// Species initialized, sensed or written on the level.
    pub species: BTreeSet<String>,
}

/// Horizontal summary with an entry for every declared level.
pub fn level_occupancy(model: &ModelDef) -> BTreeMap<String, LevelOccupancy> {
    let mut out: BTreeMap<String, LevelOccupancy> = model
        .levels
        .iter()
        .map(|l| (l.name.clone(), LevelOccupancy::default()))
        .collect();
    for init in &model.initializers {
        if let Some(o) = out.get_mut(&init.locus.level) {
            o.species.insert(init.species.clone());
        }
    }
    for agent in &model.agents {
        agent.condition.for_each_atom(&mut |a| {
            if let Atom::Signal { species, locus, .. } = a {
                if let Some(o) = out.get_mut(&locus.level) {
                    o.agents_sensing.insert(agent.id.clone());
                    o.species.insert(species.clone());
                }
            }
        });
        for e in &agent.effects {
            if let Some(o) = out.get_mut(&e.locus.level) {
                o.agents_affecting.insert(agent.id.clone());
                o.species.insert(e.species.clone());
            }
        }
    }
    out
}
