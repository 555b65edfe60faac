//! The genie LP bound against independent oracles.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timely_access::channel::Observation;
use timely_access::mdp::lp::DenseSimplex;
use timely_access::mdp::{build_lp, d1_optimal, solve_lp, upper_bound, TransitionModel};
use timely_access::traffic::SystemParams;

fn lp_value(params: &SystemParams) -> f64 {
    upper_bound(params, &DenseSimplex::default())
        .unwrap()
        .objective
}

/// D = 1 states as `(l1, l2, o)` with `o` an ordinal; index `(l1·2 + l2)·4 + o`.
fn d1_index(l1: usize, l2: usize, o: Observation) -> usize {
    (l1 * 2 + l2) * 4 + o.ordinal()
}

/// Next-state distribution at D = 1, written out event by event.
fn d1_row(p: &SystemParams, l1: usize, l2: usize, transmit: bool) -> Vec<(usize, f64)> {
    use Observation::*;
    let tx1 = if l1 == 1 {
        vec![(true, p.p_t), (false, 1.0 - p.p_t)]
    } else {
        vec![(false, 1.0)]
    };
    let tx2 = transmit && l2 == 1;
    let mut outcomes: Vec<(Observation, f64)> = Vec::new();
    for (t1, q) in tx1 {
        match (t1, tx2) {
            (false, false) => outcomes.push((Idle, q)),
            (true, false) => outcomes.extend([(Busy, q * p.p_s), (Failed, q * (1.0 - p.p_s))]),
            (false, true) => outcomes.extend([
                (Successful, q * p.p_s_prime),
                (Failed, q * (1.0 - p.p_s_prime)),
            ]),
            (true, true) => outcomes.push((Failed, q)),
        }
    }
    let mut row = Vec::new();
    for (o, q) in outcomes {
        for (a1, q1) in [(1, p.p_b), (0, 1.0 - p.p_b)] {
            for (a2, q2) in [(1, p.p_b_prime), (0, 1.0 - p.p_b_prime)] {
                row.push((d1_index(a1, a2, o), q * q1 * q2));
            }
        }
    }
    row
}

/// Long-run reward of a deterministic D = 1 policy, by iterating the lazy chain.
fn d1_gain(p: &SystemParams, transmit: impl Fn(usize) -> bool) -> f64 {
    let mut rows = vec![Vec::new(); 16];
    for l1 in 0..2 {
        for l2 in 0..2 {
            for o in Observation::ALL {
                let s = d1_index(l1, l2, o);
                rows[s] = d1_row(p, l1, l2, transmit(s));
            }
        }
    }
    let mut mu = vec![1.0 / 16.0; 16];
    for _ in 0..5_000 {
        let mut next = vec![0.0; 16];
        for s in 0..16 {
            next[s] += 0.5 * mu[s];
            for &(j, q) in &rows[s] {
                next[j] += 0.5 * mu[s] * q;
            }
        }
        mu = next;
    }
    (0..16)
        .filter(|s| {
            matches!(
                Observation::from_ordinal(s % 4),
                Some(Observation::Busy | Observation::Successful)
            )
        })
        .map(|s| mu[s])
        .sum()
}

/// Best deterministic policy: enumerate transmit/wait on the eight states with a packet.
fn d1_brute_force(p: &SystemParams) -> f64 {
    let with_packet: Vec<usize> = (0..16).filter(|s| (s / 4) % 2 == 1).collect();
    (0u32..256)
        .map(|bits| {
            d1_gain(p, |s| {
                with_packet
                    .iter()
                    .position(|&k| k == s)
                    .is_some_and(|i| bits >> i & 1 == 1)
            })
        })
        .fold(0.0, f64::max)
}

/// Optimum of a genie that sees user 1's queue: transmit alone whenever user 1
/// is empty, otherwise pick the better of transmitting and deferring.
fn d1_queue_aware(p: &SystemParams) -> f64 {
    let contend = (p.p_s_prime * (1.0 - p.p_t)).max(p.p_s * p.p_t);
    p.p_b_prime * ((1.0 - p.p_b) * p.p_s_prime + p.p_b * contend)
        + (1.0 - p.p_b_prime) * p.p_b * p.p_s * p.p_t
}

#[test]
fn d1_lp_equals_brute_force_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..12 {
        let p = common::random_params(&mut rng, 1);
        let brute = d1_brute_force(&p);
        let lp = lp_value(&p);
        assert!((lp - brute).abs() <= 1e-9, "{p:?}: lp {lp} brute {brute}");
    }
}

#[test]
fn d1_lp_equals_queue_aware_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..50 {
        let p = common::random_params(&mut rng, 1);
        let lp = lp_value(&p);
        assert!((lp - d1_queue_aware(&p)).abs() <= 1e-9, "{p:?}");
    }
}

#[test]
fn d1_lp_never_below_the_blind_closed_form() {
    // A genie can ignore user 1's queue, so the blind optimum is feasible.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let p = common::random_params(&mut rng, 1);
        assert!(lp_value(&p) >= d1_optimal(&p).1 - 1e-9, "{p:?}");
    }
    let reference = SystemParams::reference(1);
    assert!((lp_value(&reference) - 0.276).abs() <= 1e-6);
}

#[test]
fn vanishing_agent_traffic_leaves_aloha_alone() {
    let p = SystemParams::new(0.5, 1e-9, 0.7, 0.6, 0.4, 1);
    assert!((lp_value(&p) - 0.7 * 0.4 * 0.5).abs() <= 1e-6);
    let p = SystemParams::new(0.5, 0.0, 0.7, 0.6, 0.4, 1);
    assert!((lp_value(&p) - 0.7 * 0.4 * 0.5).abs() <= 1e-6);
}

#[test]
fn bound_without_agent_traffic_is_the_aloha_rate() {
    use timely_access::agents::Scheme;
    use timely_access::harness::{run_single, ExperimentConfig};
    // With D = 2 a backlogged packet gets a second attempt, so compare with simulation.
    let p = SystemParams::new(0.5, 0.0, 0.7, 0.6, 0.4, 2);
    let config = ExperimentConfig {
        slots: 1_000_000,
        window: 1_000_000,
        ..ExperimentConfig::default()
    };
    let simulated = run_single(&config, Scheme::Aloha, &p, 17)
        .unwrap()
        .throughput;
    let sigma = (simulated * (1.0 - simulated) / 1e6).sqrt();
    let lp = lp_value(&p);
    assert!(
        (lp - simulated).abs() <= 3.0 * sigma,
        "lp {lp} sim {simulated}"
    );
}

#[test]
fn bound_is_monotone_in_agent_channel_quality() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..4 {
        let base = common::random_params(&mut rng, 2);
        let mut last = 0.0;
        for p_s_prime in [0.2, 0.5, 0.8, 1.0] {
            let value = lp_value(&SystemParams { p_s_prime, ..base });
            assert!(value >= last - 1e-9, "{base:?}: {value} < {last}");
            last = value;
        }
    }
}

#[test]
fn bound_grows_with_deadline_on_reference_instance() {
    let values: Vec<f64> = (1..=3)
        .map(|d| lp_value(&SystemParams::reference(d)))
        .collect();
    assert!((values[0] - 0.276).abs() < 1e-6);
    assert!(values[0] < values[1] && values[1] < values[2], "{values:?}");
}

#[test]
fn single_precision_lp_agrees_with_double() {
    let p = SystemParams::reference(2);
    let m32 = TransitionModel::<f32>::build(&p).unwrap();
    let s32 = solve_lp(
        &build_lp(&m32, None).unwrap(),
        &DenseSimplex::<f32>::default(),
    )
    .unwrap();
    assert!((f64::from(s32.objective) - lp_value(&p)).abs() < 1e-4);
}
