//! Paired lesion runs on the Ca2+ scenario and on generated models.

use cellulat_core::testing::random_model;
use cellulat_core::{
    ca2plus_scenario, run_paired, Lesion, LesionKind, Locus, ModelDef, SimState, SpeciesKind,
};
use proptest::prelude::*;

fn lesion(id: &str, kind: LesionKind, at_tick: u64, until_tick: Option<u64>) -> Lesion {
    Lesion {
        id: id.into(),
        kind,
        at_tick,
        until_tick,
    }
}

fn knockout(agent: &str) -> LesionKind {
    LesionKind::Knockout {
        agent: agent.into(),
    }
}

#[test]
fn plcbeta_knockout_silences_its_products() {
    let scenario = ca2plus_scenario();
    let expect = scenario.manifest.knockout_silences.clone().unwrap();
    let model = scenario.model();
    let ko = lesion("ko", knockout(&expect.agent), 0, None);
    let run = run_paired(&model, &model.stimuli, &[ko], expect.ticks, scenario.manifest.seed).unwrap();

    assert_eq!(run.lesioned.states.len() as u64, expect.ticks + 1);
    for (t, state) in run.lesioned.states.iter().enumerate() {
        for (key, q) in state {
            if expect.species.contains(&key.species) {
                assert_eq!(*q, 0.0, "tick {t}: {key:?}");
            }
        }
    }
    // The baseline does produce them, so the knockout is what silences them.
    for s in &expect.species {
        assert!(run.report.max_abs_difference[s] > 0.0, "{s}");
    }
    assert_eq!(run.report.first_divergence_tick, Some(2));
    assert!(run.report.firing_count_delta[&expect.agent] < 0);
}

#[test]
fn gprotein_knockout_diverges_at_its_first_firing() {
    let scenario = ca2plus_scenario();
    let model = scenario.model();
    let ko = lesion("ko", knockout("Gprotein"), 0, None);
    let run = run_paired(&model, &model.stimuli, &[ko], 50, scenario.manifest.seed).unwrap();
    assert_eq!(run.report.first_divergence_tick, Some(scenario.manifest.first_firing["Gprotein"]));
    assert_eq!(run.report.first_divergence_tick, Some(1));
}

#[test]
fn calcium_clamp_keeps_pkc_silent() {
    let scenario = ca2plus_scenario();
    let expect = scenario.manifest.clamp_silences.clone().unwrap();
    let model = scenario.model();
    let clamp = lesion(
        "clamp",
        LesionKind::Clamp {
            species: expect.species.clone(),
            locus: Locus::new(&expect.level, &expect.region),
            value: 0.0,
        },
        0,
        None,
    );
    let ticks = scenario.manifest.ticks;
    let run = run_paired(&model, &model.stimuli, &[clamp], ticks, scenario.manifest.seed).unwrap();
    assert_eq!(run.lesioned.firing_counts().get(&expect.agent).copied().unwrap_or(0), 0);
    assert!(run.baseline.firing_counts()[&expect.agent] > 0);
    let locus = Locus::new(&expect.level, &expect.region);
    for state in &run.lesioned.states {
        let key = cellulat_core::SignalKey::new(&expect.species, locus.clone());
        assert_eq!(state.get(&key).copied().unwrap_or(0.0), 0.0);
    }
}

#[test]
fn attenuation_scales_amounts() {
    let model = ca2plus_scenario().model();
    let att = lesion(
        "att",
        LesionKind::Attenuate {
            agent: "PLCbeta".into(),
            factor: 0.5,
        },
        0,
        None,
    );
    let mut sim = SimState::new(model, 7).unwrap();
    sim.apply_lesion(att).unwrap();
    let reports = sim.run(4);
    let plc: Vec<_> = reports[2]
        .events
        .iter()
        .filter(|e| e.actor.to_string() == "PLCbeta")
        .map(|e| (e.species.as_str(), e.amount))
        .collect();
    assert_eq!(plc, [("PIP2", 0.5), ("IP3", 0.5), ("DAG", 0.5)]);
}

#[test]
fn receptor_block_stops_the_cascade() {
    let model = ca2plus_scenario().model();
    let block = lesion(
        "b",
        LesionKind::ReceptorBlock {
            agent: "GPCR".into(),
        },
        0,
        None,
    );
    let run = run_paired(&model, &model.stimuli, &[block], 30, 7).unwrap();
    let counts = run.lesioned.firing_counts();
    assert_eq!(counts.values().sum::<u64>(), 0);
    assert_eq!(run.report.first_divergence_tick, Some(0));
}

#[test]
fn no_lesions_means_no_divergence() {
    let model = ca2plus_scenario().model();
    let run = run_paired(&model, &model.stimuli, &[], 50, 7).unwrap();
    assert_eq!(run.baseline, run.lesioned);
    assert_eq!(run.report.first_divergence_tick, None);
    assert!(run.report.firing_count_delta.values().all(|d| *d == 0));
    assert!(run.report.max_abs_difference.values().all(|d| *d == 0.0));
}

/// Some lesion that is valid for `model`, picked by `pick`.
fn some_lesion(model: &ModelDef, pick: usize, factor: f64, id: &str, at: u64, until: Option<u64>) -> Option<Lesion> {
    let mut options = Vec::new();
    for a in &model.agents {
        options.push(knockout(&a.id));
        options.push(LesionKind::Attenuate {
            agent: a.id.clone(),
            factor,
        });
        if a.class == cellulat_core::AgentClass::Interface {
            options.push(LesionKind::ReceptorBlock { agent: a.id.clone() });
        }
    }
    for s in &model.species {
        let value = match s.kind {
            SpeciesKind::Flag => 1.0,
            SpeciesKind::Messenger => 2.0,
        };
        options.push(LesionKind::Clamp {
            species: s.name.clone(),
            locus: Locus::global(&model.levels[0].name),
            value,
        });
    }
    if options.is_empty() {
        return None;
    }
    Some(lesion(id, options[pick % options.len()].clone(), at, until))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn baseline_is_unaffected_by_lesions(seed in 0u64..5000, pick in 0usize..64, at in 0u64..10) {
        let model = random_model(seed);
        let Some(l) = some_lesion(&model, pick, 0.5, "x", at, None) else { return Ok(()) };
        let run = run_paired(&model, &model.stimuli, &[l], 15, seed).unwrap();
        let mut plain = SimState::new(model, seed).unwrap();
        prop_assert_eq!(&run.baseline.reports, &plain.run(15));
    }

    #[test]
    fn runs_agree_before_the_window_opens(seed in 0u64..5000, pick in 0usize..64, at in 0u64..12) {
        let model = random_model(seed);
        let Some(l) = some_lesion(&model, pick, 0.25, "x", at, None) else { return Ok(()) };
        let run = run_paired(&model, &model.stimuli, &[l], 15, seed).unwrap();
        if let Some(t) = run.report.first_divergence_tick {
            prop_assert!(t >= at);
        }
        for t in 0..=at.min(15) as usize {
            prop_assert_eq!(&run.baseline.states[t], &run.lesioned.states[t]);
        }
    }

    #[test]
    fn knockout_dominates_other_lesions_on_the_same_agent(
        seed in 0u64..5000, which in 0usize..6, at in 0u64..5, len in 0u64..10, factor in 0.05f64..0.95
    ) {
        let model = random_model(seed);
        if model.agents.is_empty() {
            return Ok(());
        }
        let agent = &model.agents[which % model.agents.len()];
        let window = Some(at + len);
        let ko = lesion("ko", knockout(&agent.id), at, window);
        let mut stacked = vec![
            ko.clone(),
            lesion("att", LesionKind::Attenuate { agent: agent.id.clone(), factor }, at, window),
        ];
        if agent.class == cellulat_core::AgentClass::Interface {
            stacked.push(lesion("blk", LesionKind::ReceptorBlock { agent: agent.id.clone() }, at, window));
        }
        let alone = run_paired(&model, &model.stimuli, &[ko], 20, seed).unwrap();
        let combined = run_paired(&model, &model.stimuli, &stacked, 20, seed).unwrap();
        prop_assert_eq!(alone.lesioned, combined.lesioned);
    }

    #[test]
    fn knocked_out_agents_stay_off_the_agenda(seed in 0u64..5000, which in 0usize..6, at in 0u64..8, len in 0u64..8) {
        let model = random_model(seed);
        if model.agents.is_empty() {
            return Ok(());
        }
        let id = model.agents[which % model.agents.len()].id.clone();
        let ko = lesion("ko", knockout(&id), at, Some(at + len));
        let run = run_paired(&model, &model.stimuli, &[ko], 20, seed).unwrap();
        for r in &run.lesioned.reports {
            if (at..=at + len).contains(&r.tick) {
                prop_assert!(r.agenda.iter().all(|e| e.agent != id));
            }
        }
    }

    #[test]
    fn clamp_holds_through_its_window(seed in 0u64..5000, pick in 0usize..4, at in 0u64..8, len in 0u64..8) {
        let model = random_model(seed);
        let s = &model.species[pick % model.species.len()];
        let value = if s.kind == SpeciesKind::Flag { 1.0 } else { 3.0 };
        let locus = Locus::global(&model.levels[0].name);
        let clamp = lesion(
            "c",
            LesionKind::Clamp { species: s.name.clone(), locus: locus.clone(), value },
            at,
            Some(at + len),
        );
        let run = run_paired(&model, &model.stimuli, &[clamp], 20, seed).unwrap();
        let key = cellulat_core::SignalKey::new(&s.name, locus);
        for t in at..=(at + len).min(19) {
            // states[t + 1] is the board once tick t has finished.
            prop_assert_eq!(run.lesioned.states[t as usize + 1].get(&key).copied().unwrap_or(0.0), value);
        }
    }

    #[test]
    fn registration_order_does_not_matter(seed in 0u64..5000, p in 0usize..64, q in 0usize..64, a in 0u64..6, b in 0u64..6) {
        let model = random_model(seed);
        let (Some(x), Some(y)) = (
            some_lesion(&model, p, 0.5, "x", a, Some(a + 4)),
            some_lesion(&model, q, 0.75, "y", b, None),
        ) else {
            return Ok(());
        };
        // Two clamps on the same pair resolve by registration order.
        if matches!((&x.kind, &y.kind), (LesionKind::Clamp { .. }, LesionKind::Clamp { .. })) {
            return Ok(());
        }
        let xy = run_paired(&model, &model.stimuli, &[x.clone(), y.clone()], 15, seed).unwrap();
        let yx = run_paired(&model, &model.stimuli, &[y, x], 15, seed).unwrap();
        prop_assert_eq!(xy.lesioned, yx.lesioned);
        prop_assert_eq!(xy.report, yx.report);
    }
}
