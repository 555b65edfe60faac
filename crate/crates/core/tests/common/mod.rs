#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timely_access::channel::{Action, Environment};
use timely_access::mdp::{FullMdpState, TransitionModel};
use timely_access::traffic::SystemParams;

/// Comparison of sampled genie transitions against the model rows.
#[derive(Debug)]
pub struct TransitionCheck {
    /// (state, action) pairs with enough visits to compare.
    pub pairs: usize,
    /// Next-state cells compared.
    pub cells: usize,
    /// Cells whose count lies more than 3σ from `n·p`.
    pub outside: usize,
    /// Observed transitions the model gives probability zero.
    pub impossible: usize,
    pub worst_z: f64,
}

impl TransitionCheck {
    /// Zero impossible transitions and at most 1% of cells beyond 3σ
    /// (about 0.3% is expected from noise alone).
    pub fn passes(&self) -> bool {
        self.impossible == 0 && self.cells > 0 && (self.outside as f64) <= 0.01 * self.cells as f64
    }
}

/// Drives the simulator with a coin-flip genie and compares next-state
/// frequencies with the model, for pairs visited at least `min_visits` times.
pub fn sample_transitions(
    params: &SystemParams,
    slots: u64,
    seed: u64,
    min_visits: u64,
) -> TransitionCheck {
    let d = params.d2;
    let model = TransitionModel::<f64>::build(params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::two_user(params, &mut rng).unwrap();
    let mut counts: HashMap<(usize, usize), HashMap<usize, u64>> = HashMap::new();
    let mut s = FullMdpState::from_view(&env.genie_state().unwrap()).index(d);
    for _ in 0..slots {
        let a = if rng.random_bool(0.5) {
            Action::Transmit
        } else {
            Action::Wait
        };
        env.step(&[a], &mut rng).unwrap();
        let next = FullMdpState::from_view(&env.genie_state().unwrap()).index(d);
        *counts
            .entry((s, a.index()))
            .or_default()
            .entry(next)
            .or_default() += 1;
        s = next;
    }

    let mut check = TransitionCheck {
        pairs: 0,
        cells: 0,
        outside: 0,
        impossible: 0,
        worst_z: 0.0,
    };
    for ((s, a), next_counts) in &counts {
        let row = model.row(*s, Action::from_index(*a));
        let n: u64 = next_counts.values().sum();
        check.impossible += next_counts
            .keys()
            .filter(|k| !row.iter().any(|(j, _)| j == *k))
            .count();
        if n < min_visits {
            continue;
        }
        check.pairs += 1;
        for &(j, p) in row {
            let observed = next_counts.get(&j).copied().unwrap_or(0) as f64;
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let dev = (observed - n as f64 * p).abs();
            check.cells += 1;
            if sigma > 0.0 {
                let z = dev / sigma;
                check.worst_z = check.worst_z.max(z);
                if z > 3.0 {
                    check.outside += 1;
                }
            } else if dev > 0.0 {
                check.outside += 1;
            }
        }
    }
    check
}

/// Uniform draw on `(0, 1]`.
pub fn unit<G: Rng>(rng: &mut G) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn random_params<G: Rng>(rng: &mut G, d: u32) -> SystemParams {
    SystemParams::new(unit(rng), unit(rng), unit(rng), unit(rng), unit(rng), d)
}
