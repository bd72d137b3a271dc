//! The bundled scenarios reproduce the properties listed in their manifests.

use std::collections::BTreeMap;

use cellulat_core::trace::record_run;
use cellulat_core::{
    ca2plus_scenario, detect_columns, toy_linear_chain, Actor, Scenario, SimState, TickReport,
    TraceRow, WriteKind,
};

fn run(s: &Scenario) -> (Vec<TraceRow>, Vec<TickReport>, SimState) {
    let m = &s.manifest;
    let mut sim = SimState::new(s.model(), m.seed).unwrap();
    if let Some(stim) = &m.stimulus {
        sim = sim.with_stimuli(vec![stim.clone()]).unwrap();
    }
    let (rows, reports) = record_run(&mut sim, m.ticks);
    (rows, reports, sim)
}

fn first_firings(reports: &[TickReport]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in reports {
        for f in r.firings.iter().filter(|f| f.fired) {
            out.entry(f.agent.clone()).or_insert(r.tick);
        }
    }
    out
}

fn first_nonzero(rows: &[TraceRow]) -> BTreeMap<String, u64> {
    let mut out = BTreeMap::new();
    for r in rows.iter().filter(|r| r.quantity != 0.0) {
        out.entry(r.species.clone()).or_insert(r.tick);
    }
    out
}

#[test]
fn ca2plus_first_firings_match_manifest() {
    let s = ca2plus_scenario();
    let (_, reports, _) = run(&s);
    assert_eq!(first_firings(&reports), s.manifest.first_firing);
}

#[test]
fn ca2plus_first_nonzero_ticks_match_manifest() {
    let s = ca2plus_scenario();
    let (rows, _, _) = run(&s);
    assert_eq!(first_nonzero(&rows), s.manifest.first_nonzero);
}

#[test]
fn ca2plus_causal_chain_is_strictly_ordered() {
    let s = ca2plus_scenario();
    let (_, reports, _) = run(&s);
    let first = first_firings(&reports);
    let ticks: Vec<u64> = s.manifest.causal_chain.iter().map(|a| first[a]).collect();
    assert!(ticks.windows(2).all(|w| w[0] < w[1]), "{ticks:?}");
}

#[test]
fn ca2plus_conserves_mass_along_each_reaction() {
    let s = ca2plus_scenario();
    let (_, reports, _) = run(&s);
    let mut removed: BTreeMap<&str, f64> = BTreeMap::new();
    let mut added: BTreeMap<&str, f64> = BTreeMap::new();
    for e in reports.iter().flat_map(|r| &r.events) {
        if !matches!(e.actor, Actor::Agent(_)) {
            continue;
        }
        match e.kind {
            WriteKind::Remove => *removed.entry(&e.species).or_default() += e.amount,
            WriteKind::Add => *added.entry(&e.species).or_default() += e.amount,
            WriteKind::Set => {}
        }
    }
    for rule in &s.manifest.conservation {
        let consumed: f64 = rule.consumed.iter().map(|c| removed[c.as_str()]).sum();
        assert!(consumed > 0.0);
        for p in &rule.produced {
            assert_eq!(added[p.as_str()], consumed, "{p}");
        }
    }
}

#[test]
fn ca2plus_secretor_emits_only_after_pkc() {
    let s = ca2plus_scenario();
    let (_, reports, sim) = run(&s);
    let pkc = first_firings(&reports)["PKC"];
    let emissions = sim.emissions();
    assert!(!emissions.is_empty());
    assert!(emissions.iter().all(|e| e.agent == "Secretor" && e.ligand == "L2" && e.tick > pkc));
}

#[test]
fn ca2plus_column_matches_manifest() {
    let s = ca2plus_scenario();
    assert_eq!(detect_columns(&s.model()), s.manifest.columns);
}

#[test]
fn ca2plus_is_quiet_without_stimulus() {
    let s = ca2plus_scenario();
    let mut sim = SimState::new(s.model(), 7).unwrap().with_stimuli(Vec::new()).unwrap();
    assert!(sim.run(50).iter().all(|r| r.agenda.is_empty()));
}

#[test]
fn chain_of_three_by_hand() {
    let s = toy_linear_chain(3).unwrap();
    let (rows, reports, _) = run(&s);
    let series = |sp: &str| -> Vec<f64> {
        rows.iter().filter(|r| r.species == sp).map(|r| r.quantity).collect()
    };
    // Ticks 0..=5; a species' series starts at its first nonzero tick.
    assert_eq!(series("S0"), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(series("S1"), [1.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(series("S2"), [1.0, 0.0, 0.0, 0.0]);
    assert_eq!(series("S3"), [1.0, 1.0, 1.0]);
    let fired: Vec<Vec<&str>> = reports
        .iter()
        .map(|r| r.firings.iter().filter(|f| f.fired).map(|f| f.agent.as_str()).collect())
        .collect();
    assert_eq!(fired, [vec!["A0"], vec!["A1"], vec!["A2"], vec![], vec![]]);
}

#[test]
fn every_chain_length_takes_one_tick_per_hop() {
    for n in 1..=cellulat_core::scenario::CHAIN_MAX {
        let s = toy_linear_chain(n).unwrap();
        let (rows, reports, _) = run(&s);
        assert_eq!(first_nonzero(&rows), s.manifest.first_nonzero, "n = {n}");
        assert_eq!(first_firings(&reports), s.manifest.first_firing, "n = {n}");
    }
}
