//! Workloads shared by the engine benchmarks.

use cellulat_core::{ca2plus_scenario, toy_linear_chain, SimState, Stimulus};

/// Ca2+ scenario with its bundled stimulus, ready to step.
pub fn ca2plus_sim(seed: u64) -> SimState {
    SimState::new(ca2plus_scenario().model(), seed).expect("bundled scenario is valid")
}

/// Linear chain of `n` agents with `STIM` held on, so the cascade runs once
/// end to end within `n + 1` ticks.
pub fn chain_sim(n: usize, seed: u64) -> SimState {
    let scenario = toy_linear_chain(n).expect("chain length in range");
    let model = scenario.model();
    let stimulus = Stimulus {
        ligand: "STIM".into(),
        amount: 1.0,
        from_tick: 0,
        to_tick: u64::MAX,
    };
    SimState::new(model, seed)
        .and_then(|s| s.with_stimuli(vec![stimulus]))
        .expect("chain scenario is valid")
}
