//! Seeded generator of small valid cases for property tests and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    CoordCase, DistributionBranch, DistributionBus, DistributionGenerator, DistributionSystem, InterfaceLink, TransmissionBus, TransmissionGenerator,
    TransmissionLine, TransmissionSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomCaseSpec {
    pub max_buses: usize,
    pub max_generators: usize,
    pub max_dsos: usize,
    /// Buses per feeder, root included.
    pub max_feeder_buses: usize,
}

impl Default for RandomCaseSpec {
    fn default() -> Self {
        Self { max_buses: 4, max_generators: 6, max_dsos: 3, max_feeder_buses: 3 }
    }
}

/// Builds a connected transmission system with one single-feeder DSO on each
/// of up to `max_dsos` distinct buses. Transmission capacity covers the total
/// load with every generator committed, so the case always has a feasible
/// commitment.
pub fn random_case(spec: &RandomCaseSpec, seed: u64) -> CoordCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_bus = rng.random_range(1..=spec.max_buses.max(1));
    let mut buses: Vec<TransmissionBus> = (0..n_bus)
        .map(|i| TransmissionBus { id: format!("t{i}"), active_load: rng.random_range(10.0..60.0_f64).round(), load_bid_price: 50.0, hosts_dso: None })
        .collect();
    let mut lines = Vec::new();
    for i in 1..n_bus {
        let parent = rng.random_range(0..i);
        lines.push((parent, i));
    }
    if n_bus >= 3 && rng.random_bool(0.5) {
        lines.push((0, n_bus - 1));
    }

    let n_dso = rng.random_range(0..=spec.max_dsos.min(n_bus));
    let mut distribution_systems = Vec::new();
    let mut interfaces = Vec::new();
    let mut dso_load = 0.0;
    for j in 0..n_dso {
        let ds = random_feeder(&mut rng, j, spec.max_feeder_buses.max(2));
        dso_load += ds.total_active_load();
        let host = &mut buses[j];
        host.hosts_dso = Some(ds.id.clone());
        interfaces.push(InterfaceLink {
            transmission_bus: host.id.clone(),
            distribution_system: ds.id.clone(),
            exchange_limit: (ds.total_active_load() + ds.generators.iter().map(|g| g.p_max).sum::<f64>() + 10.0).round(),
        });
        distribution_systems.push(ds);
    }

    let t_load: f64 = buses.iter().map(|b| b.active_load).sum();
    let n_gen = rng.random_range(1..=spec.max_generators.max(1));
    let share = 1.5 * (t_load + dso_load) / n_gen as f64;
    let generators = (0..n_gen)
        .map(|i| {
            let p_max = (share * rng.random_range(0.8..1.6_f64)).round().max(5.0);
            TransmissionGenerator {
                id: format!("G{i}"),
                bus: format!("t{}", rng.random_range(0..n_bus)),
                p_min: (p_max * rng.random_range(0.0..0.3_f64)).round(),
                p_max,
                offer_price: rng.random_range(5.0..30.0_f64).round(),
            }
        })
        .collect();
    let total_cap = 2.0 * (t_load + dso_load + 1.0);
    let lines = lines
        .into_iter()
        .enumerate()
        .map(|(l, (a, b))| TransmissionLine {
            id: format!("l{l}"),
            from_bus: format!("t{a}"),
            to_bus: format!("t{b}"),
            reactance: rng.random_range(0.05..0.3_f64),
            flow_limit: total_cap.round(),
        })
        .collect();

    CoordCase {
        base_mva: 100.0,
        per_unit: false,
        transmission: TransmissionSystem { buses, lines, generators },
        distribution_systems,
        interfaces,
    }
}

fn random_feeder(rng: &mut ChaCha8Rng, j: usize, max_buses: usize) -> DistributionSystem {
    let n = rng.random_range(2..=max_buses);
    let mut buses = vec![DistributionBus { id: "b0".into(), active_load: 0.0, reactive_load: 0.0, v_sq_min: 0.81, v_sq_max: 1.21, is_root: true }];
    let mut branches = Vec::new();
    for i in 1..n {
        let p = rng.random_range(2.0..15.0_f64).round();
        buses.push(DistributionBus { id: format!("b{i}"), active_load: p, reactive_load: (0.3 * p).round(), v_sq_min: 0.81, v_sq_max: 1.21, is_root: false });
        branches.push(DistributionBranch {
            id: format!("br{i}"),
            sending_bus: format!("b{i}"),
            receiving_bus: format!("b{}", i - 1),
            resistance: rng.random_range(0.001..0.01_f64),
            reactance: rng.random_range(0.001..0.01_f64),
            conductance: 0.0,
            susceptance: 0.0,
            apparent_limit: 200.0,
        });
    }
    // The root exchanges no reactive power, so feeder generators must be
    // able to cover the reactive load.
    let q_cap = buses.iter().map(|b| b.reactive_load).sum::<f64>() + 5.0;
    let n_gen = rng.random_range(1..=2usize);
    let generators = (0..n_gen)
        .map(|g| DistributionGenerator {
            id: format!("D{j}G{g}"),
            bus: format!("b{}", rng.random_range(1..n)),
            p_min: 0.0,
            p_max: rng.random_range(5.0..30.0_f64).round(),
            q_min: -q_cap,
            q_max: q_cap,
            incremental_cost: rng.random_range(2.0..25.0_f64).round(),
        })
        .collect();
    DistributionSystem { id: format!("F{j}"), tariff: 20.0, bid_price: None, offer_price: None, buses, branches, generators }
}
