//! The ALOHA transmitter and the tabular learning agents.
//!
//! All learners share one loop: encode `(queue, observation)` into a table row,
//! pick an ε-greedy action, observe the next observation, update. They differ
//! in the update rule and the state encoder:
//!
//! | scheme | update      | state                              | rows         |
//! |--------|-------------|------------------------------------|--------------|
//! | FSQA   | Q-learning  | presence bits of every lead time   | `2^(D+2)`    |
//! | FSRA   | R-learning  | presence bits of every lead time   | `2^(D+2)`    |
//! | HSRA   | R-learning  | lead time of the head-of-line pkt  | `4(D+1)`     |
//! | TSRA   | R-learning  | "has a lead-time-1 packet" bit     | `8`          |

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Action, Observation};
use crate::scalar::Real;
use crate::traffic::{bernoulli, PacketQueue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("scheme {0} has no learning agent")]
    NotLearning(Scheme),
    #[error("head-of-line lead time {h} outside [0, {deadline}]")]
    LeadTime { h: u32, deadline: u32 },
    #[error("reward offset {0} outside [0, 1]")]
    RewardOffset(f64),
    #[error("deadline {0} too large for a full-state table")]
    DeadlineTooLarge(u32),
    #[error("{name} = {value} is out of range")]
    Hyper { name: &'static str, value: f64 },
}

/// Access scheme of the controlled user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Aloha,
    Fsqa,
    Fsra,
    Hsra,
    Tsra,
}

impl Scheme {
    pub const LEARNERS: [Scheme; 4] = [Scheme::Fsqa, Scheme::Fsra, Scheme::Hsra, Scheme::Tsra];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Aloha => "ALOHA",
            Scheme::Fsqa => "FSQA",
            Scheme::Fsra => "FSRA",
            Scheme::Hsra => "HSRA",
            Scheme::Tsra => "TSRA",
        }
    }

    pub fn is_learning(self) -> bool {
        self != Scheme::Aloha
    }

    pub fn uses_r_learning(self) -> bool {
        matches!(self, Scheme::Fsra | Scheme::Hsra | Scheme::Tsra)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "ALOHA" => Ok(Scheme::Aloha),
            "FSQA" => Ok(Scheme::Fsqa),
            "FSRA" => Ok(Scheme::Fsra),
            "HSRA" => Ok(Scheme::Hsra),
            "TSRA" => Ok(Scheme::Tsra),
            _ => Err(AgentError::UnknownScheme(s.to_string())),
        }
    }
}

/// Slotted ALOHA: transmit the head-of-line packet with probability `p_t`.
pub fn aloha_act<R: Rng + ?Sized>(p_t: f64, queue: &PacketQueue, rng: &mut R) -> Action {
    if !queue.is_empty() && bernoulli(rng, p_t) {
        Action::Transmit
    } else {
        Action::Wait
    }
}

/// `(presence bits, o)` → `bits · 4 + ordinal(o)`, bit `k - 1` for lead time `k`.
pub fn encode_full(presence: &[bool], o: Observation) -> usize {
    let bits = presence
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0usize, |acc, (k, _)| acc | (1 << k));
    bits * 4 + o.ordinal()
}

/// `(h, o)` → `h · 4 + ordinal(o)` for a head-of-line lead time `h ∈ [0, D]`.
pub fn encode_hol(h: u32, deadline: u32, o: Observation) -> Result<usize, AgentError> {
    if h > deadline {
        return Err(AgentError::LeadTime { h, deadline });
    }
    Ok(h as usize * 4 + o.ordinal())
}

/// `(f, o)` → `f · 4 + ordinal(o)`.
pub fn encode_tiny(urgent: bool, o: Observation) -> usize {
    usize::from(urgent) * 4 + o.ordinal()
}

/// Maps what the agent sees onto a table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateEncoder {
    Full { deadline: u32 },
    Hol { deadline: u32 },
    Tiny,
}

impl StateEncoder {
    /// Largest deadline for which a full-state table is allocated.
    pub const MAX_FULL_DEADLINE: u32 = 24;

    pub fn for_scheme(scheme: Scheme, deadline: u32) -> Result<Self, AgentError> {
        match scheme {
            Scheme::Aloha => Err(AgentError::NotLearning(scheme)),
            Scheme::Fsqa | Scheme::Fsra if deadline > Self::MAX_FULL_DEADLINE => {
                Err(AgentError::DeadlineTooLarge(deadline))
            }
            Scheme::Fsqa | Scheme::Fsra => Ok(StateEncoder::Full { deadline }),
            Scheme::Hsra => Ok(StateEncoder::Hol { deadline }),
            Scheme::Tsra => Ok(StateEncoder::Tiny),
        }
    }

    /// Number of encoded states.
    pub fn size(&self) -> usize {
        match *self {
            StateEncoder::Full { deadline } => 1 << (deadline + 2),
            StateEncoder::Hol { deadline } => 4 * (deadline as usize + 1),
            StateEncoder::Tiny => 8,
        }
    }

    pub fn encode(&self, queue: &PacketQueue, o: Observation) -> usize {
        match *self {
            StateEncoder::Full { .. } => queue.presence_mask() as usize * 4 + o.ordinal(),
            StateEncoder::Hol { .. } => queue.hol_lead_time() as usize * 4 + o.ordinal(),
            StateEncoder::Tiny => encode_tiny(queue.has_urgent(), o),
        }
    }

    pub fn observation_of(&self, state: usize) -> Observation {
        Observation::from_ordinal(state % 4).expect("ordinal < 4")
    }

    /// Human-readable queue component of an encoded state.
    pub fn describe_queue(&self, state: usize) -> String {
        let queue_part = state / 4;
        match *self {
            StateEncoder::Full { deadline } => format_bits(queue_part as u64, deadline),
            StateEncoder::Hol { .. } | StateEncoder::Tiny => queue_part.to_string(),
        }
    }

    /// Whether the queue is known to be empty in this state, making `Transmit` a no-op.
    pub fn queue_known_empty(&self, state: usize) -> bool {
        match self {
            StateEncoder::Full { .. } | StateEncoder::Hol { .. } => state / 4 == 0,
            StateEncoder::Tiny => false,
        }
    }
}

/// `(l^1,...,l^D)` rendering of a presence mask.
pub fn format_bits(mask: u64, deadline: u32) -> String {
    let bits: Vec<String> = (0..deadline)
        .map(|k| ((mask >> k) & 1).to_string())
        .collect();
    format!("({})", bits.join(","))
}

/// `max(decay^(t-1), floor)`.
pub fn epsilon(t: u64, decay: f64, floor: f64) -> f64 {
    assert!(t >= 1, "slots are 1-based");
    let t_minus_1 = (t - 1).min(i32::MAX as u64) as i32;
    decay.powi(t_minus_1).max(floor)
}

/// Reward `1{o ∈ {BUSY, SUCCESSFUL}} - c`.
pub fn reward_with_offset(o_next: Observation, c: f64) -> f64 {
    f64::from(u8::from(o_next.is_ack())) - c
}

/// Learning rates and discount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.01,
            gamma: 0.9,
        }
    }
}

/// Dense `states × 2` value table plus the average-reward estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularValueStore<R: Real> {
    q: Vec<R>,
    rho: R,
    alpha: R,
    beta: R,
    gamma: R,
}

impl<R: Real> TabularValueStore<R> {
    /// All-zero table with `rho = 0`.
    pub fn new(states: usize, rates: LearningRates) -> Self {
        Self {
            q: vec![R::zero(); states * 2],
            rho: R::zero(),
            alpha: R::of(rates.alpha),
            beta: R::of(rates.beta),
            gamma: R::of(rates.gamma),
        }
    }

    pub fn states(&self) -> usize {
        self.q.len() / 2
    }

    pub fn q(&self, s: usize, a: Action) -> R {
        self.q[s * 2 + a.index()]
    }

    pub fn set_q(&mut self, s: usize, a: Action, value: R) {
        self.q[s * 2 + a.index()] = value;
    }

    pub fn row(&self, s: usize) -> [R; 2] {
        [self.q[s * 2], self.q[s * 2 + 1]]
    }

    pub fn rho(&self) -> R {
        self.rho
    }

    pub fn set_rho(&mut self, rho: R) {
        self.rho = rho;
    }

    pub fn max_q(&self, s: usize) -> R {
        self.q[s * 2].max(self.q[s * 2 + 1])
    }

    pub fn max_abs_q(&self) -> R {
        self.q.iter().fold(R::zero(), |m, v| m.max(v.abs()))
    }

    /// Greedy action, ties broken uniformly at random.
    pub fn greedy<G: Rng + ?Sized>(&self, s: usize, rng: &mut G) -> Action {
        let [wait, transmit] = self.row(s);
        if transmit > wait {
            Action::Transmit
        } else if wait > transmit {
            Action::Wait
        } else if rng.random_bool(0.5) {
            Action::Transmit
        } else {
            Action::Wait
        }
    }

    /// Greedy with probability `1 - eps`, uniform otherwise.
    pub fn act_epsilon_greedy<G: Rng + ?Sized>(&self, s: usize, eps: f64, rng: &mut G) -> Action {
        if bernoulli(rng, eps) {
            Action::from_index(usize::from(rng.random_bool(0.5)))
        } else {
            self.greedy(s, rng)
        }
    }

    /// One-step discounted Q-learning.
    pub fn q_learning_update(&mut self, s: usize, a: Action, r: R, s_next: usize) {
        let target = r + self.gamma * self.max_q(s_next);
        let i = s * 2 + a.index();
        self.q[i] = self.q[i] + self.alpha * (target - self.q[i]);
    }

    /// R-learning: one temporal difference from pre-update values drives both
    /// the relative value and the average-reward estimate.
    pub fn r_learning_update(&mut self, s: usize, a: Action, r: R, s_next: usize) {
        let i = s * 2 + a.index();
        let delta = r + self.max_q(s_next) - self.q[i] - self.rho;
        self.q[i] = self.q[i] + self.alpha * delta;
        self.rho = self.rho + self.beta * delta;
    }
}

/// Agent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub scheme: Scheme,
    pub deadline: u32,
    /// Constant subtracted from the ACK reward; zero except for the tuned Q-learner.
    pub reward_offset: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
    pub rates: LearningRates,
}

impl AgentConfig {
    pub fn new(scheme: Scheme, deadline: u32) -> Self {
        Self {
            scheme,
            deadline,
            reward_offset: 0.0,
            epsilon_floor: 0.01,
            epsilon_decay: 0.995,
            rates: LearningRates::default(),
        }
    }

    pub fn with_reward_offset(mut self, c: f64) -> Self {
        self.reward_offset = c;
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.reward_offset) {
            return Err(AgentError::RewardOffset(self.reward_offset));
        }
        let unit = [
            ("epsilon_floor", self.epsilon_floor),
            ("epsilon_decay", self.epsilon_decay),
            ("alpha", self.rates.alpha),
            ("beta", self.rates.beta),
            ("gamma", self.rates.gamma),
        ];
        for (name, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(AgentError::Hyper { name, value });
            }
        }
        if self.deadline == 0 {
            return Err(AgentError::Hyper {
                name: "deadline",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// A tabular learner driving one user.
#[derive(Debug, Clone)]
pub struct LearningAgent<R: Real> {
    config: AgentConfig,
    encoder: StateEncoder,
    store: TabularValueStore<R>,
    t: u64,
}

impl<R: Real> LearningAgent<R> {
    pub fn new(config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let encoder = StateEncoder::for_scheme(config.scheme, config.deadline)?;
        Ok(Self {
            store: TabularValueStore::new(encoder.size(), config.rates),
            config,
            encoder,
            t: 1,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn encoder(&self) -> StateEncoder {
        self.encoder
    }

    pub fn store(&self) -> &TabularValueStore<R> {
        &self.store
    }

    /// Next decision slot, starting at 1.
    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn encode(&self, queue: &PacketQueue, o: Observation) -> usize {
        self.encoder.encode(queue, o)
    }

    pub fn current_epsilon(&self) -> f64 {
        epsilon(self.t, self.config.epsilon_decay, self.config.epsilon_floor)
    }

    pub fn act<G: Rng + ?Sized>(&self, s: usize, rng: &mut G) -> Action {
        self.store
            .act_epsilon_greedy(s, self.current_epsilon(), rng)
    }

    /// Applies the scheme's update for `(s, a) → s_next` and advances the slot counter.
    pub fn learn(&mut self, s: usize, a: Action, o_next: Observation, s_next: usize) {
        let r = R::of(reward_with_offset(o_next, self.config.reward_offset));
        if self.config.scheme.uses_r_learning() {
            self.store.r_learning_update(s, a, r, s_next);
        } else {
            self.store.q_learning_update(s, a, r, s_next);
        }
        self.t += 1;
    }

    /// Deterministic greedy action for reporting: ties and states whose queue
    /// is known to be empty report `Wait`.
    pub fn effective_action(&self, s: usize) -> Action {
        let [wait, transmit] = self.store.row(s);
        if self.encoder.queue_known_empty(s) || transmit <= wait {
            Action::Wait
        } else {
            Action::Transmit
        }
    }

    /// One row per encoded state.
    pub fn policy_snapshot(&self) -> Vec<PolicyRow> {
        let rho = self
            .config
            .scheme
            .uses_r_learning()
            .then(|| self.store.rho().as_f64());
        (0..self.encoder.size())
            .map(|s| {
                let action = self.effective_action(s);
                let [q_wait, q_transmit] = self.store.row(s);
                PolicyRow {
                    aloha_queue: None,
                    queue: self.encoder.describe_queue(s),
                    obs: self.encoder.observation_of(s),
                    action,
                    p_transmit: if action == Action::Transmit { 1.0 } else { 0.0 },
                    q_wait: Some(q_wait.as_f64()),
                    q_transmit: Some(q_transmit.as_f64()),
                    rho,
                }
            })
            .collect()
    }
}

/// One policy table line, shared by learned and genie policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    /// ALOHA user's presence bits, genie policies only.
    pub aloha_queue: Option<String>,
    pub queue: String,
    pub obs: Observation,
    pub action: Action,
    pub p_transmit: f64,
    pub q_wait: Option<f64>,
    pub q_transmit: Option<f64>,
    pub rho: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use Observation::*;

    fn store(states: usize) -> TabularValueStore<f64> {
        TabularValueStore::new(states, LearningRates::default())
    }

    #[test]
    fn full_encoding_examples() {
        assert_eq!(encode_full(&[false, false], Busy), 0);
        assert_eq!(encode_full(&[true, false], Idle), 6);
        assert_eq!(encode_full(&[true, true], Failed), 15);
    }

    #[test]
    fn hol_encoding_examples() {
        assert_eq!(encode_hol(0, 3, Busy).unwrap(), 0);
        assert_eq!(encode_hol(2, 3, Successful).unwrap(), 9);
        assert_eq!(encode_hol(3, 3, Failed).unwrap(), 15);
        assert_eq!(
            encode_hol(4, 3, Busy),
            Err(AgentError::LeadTime { h: 4, deadline: 3 })
        );
    }

    #[test]
    fn tiny_encoding_examples() {
        assert_eq!(encode_tiny(false, Idle), 2);
        assert_eq!(encode_tiny(true, Busy), 4);
        assert_eq!(encode_tiny(true, Failed), 7);
    }

    #[test]
    fn encoders_are_bijective() {
        for d in 1..=6u32 {
            for enc in [
                StateEncoder::Full { deadline: d },
                StateEncoder::Hol { deadline: d },
                StateEncoder::Tiny,
            ] {
                let mut seen = vec![false; enc.size()];
                let queues: Vec<PacketQueue> = match enc {
                    StateEncoder::Full { .. } => (0..1u64 << d)
                        .map(|m| PacketQueue::from_mask(d, m))
                        .collect(),
                    StateEncoder::Hol { .. } => (0..=d)
                        .map(|h| if h == 0 { 0 } else { 1u64 << (h - 1) })
                        .map(|m| PacketQueue::from_mask(d, m))
                        .collect(),
                    StateEncoder::Tiny => {
                        vec![PacketQueue::from_mask(d, 0), PacketQueue::from_mask(d, 1)]
                    }
                };
                for q in &queues {
                    for o in Observation::ALL {
                        let s = enc.encode(q, o);
                        assert!(s < enc.size());
                        assert!(!seen[s], "{enc:?} collides at {s}");
                        seen[s] = true;
                    }
                }
                assert!(seen.iter().all(|&b| b), "{enc:?} not onto");
            }
        }
    }

    #[test]
    fn table_sizes_follow_encoders() {
        for d in 1..=6 {
            let size = |scheme| {
                LearningAgent::<f64>::new(AgentConfig::new(scheme, d))
                    .unwrap()
                    .store()
                    .states()
                    * 2
            };
            assert_eq!(size(Scheme::Fsqa), (1 << (d + 2)) * 2);
            assert_eq!(size(Scheme::Fsra), (1 << (d + 2)) * 2);
            assert_eq!(size(Scheme::Hsra), 4 * (d as usize + 1) * 2);
            assert_eq!(size(Scheme::Tsra), 16);
        }
        assert!(LearningAgent::<f64>::new(AgentConfig::new(Scheme::Aloha, 2)).is_err());
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon(1, 0.995, 0.01), 1.0);
        assert!((epsilon(2, 0.995, 0.01) - 0.995).abs() < 1e-15);
        assert!(0.995f64.powi(1999) < 0.01);
        assert_eq!(epsilon(2000, 0.995, 0.01), 0.01);
    }

    #[test]
    fn greedy_argmax_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = store(1);
        st.set_q(0, Action::Wait, 0.2);
        st.set_q(0, Action::Transmit, 0.7);
        for _ in 0..100 {
            assert_eq!(st.act_epsilon_greedy(0, 0.0, &mut rng).index(), 1);
        }
        let tied = store(1);
        let n = 100_000;
        let tx = (0..n)
            .filter(|_| tied.act_epsilon_greedy(0, 0.0, &mut rng) == Action::Transmit)
            .count();
        assert!((tx as f64 / n as f64 - 0.5).abs() <= 0.01);
        let tx = (0..n)
            .filter(|_| st.act_epsilon_greedy(0, 1.0, &mut rng) == Action::Transmit)
            .count();
        assert!((tx as f64 / n as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn q_learning_arithmetic() {
        let mut st = store(2);
        st.q_learning_update(0, Action::Transmit, 1.0, 1);
        assert!((st.q(0, Action::Transmit) - 0.01).abs() < 1e-15);

        let mut st = store(2);
        st.q_learning_update(0, Action::Transmit, 0.0, 1);
        assert_eq!(st, store(2));

        let mut st = store(2);
        st.set_q(0, Action::Transmit, 0.5);
        st.set_q(1, Action::Wait, 0.2);
        st.q_learning_update(0, Action::Transmit, 1.0, 1);
        assert!((st.q(0, Action::Transmit) - 0.5068).abs() < 1e-12);
    }

    #[test]
    fn r_learning_arithmetic() {
        let mut st = store(2);
        st.r_learning_update(0, Action::Wait, 1.0, 1);
        assert!((st.q(0, Action::Wait) - 0.01).abs() < 1e-15);
        assert!((st.rho() - 0.01).abs() < 1e-15);

        let mut st = store(2);
        st.r_learning_update(0, Action::Wait, 0.0, 1);
        assert_eq!(st, store(2));

        let mut st = store(2);
        st.set_q(0, Action::Transmit, 0.5);
        st.set_q(1, Action::Transmit, 0.2);
        st.set_rho(0.3);
        st.r_learning_update(0, Action::Transmit, 1.0, 1);
        assert!((st.q(0, Action::Transmit) - 0.504).abs() < 1e-12);
        assert!((st.rho() - 0.304).abs() < 1e-12);
    }

    #[test]
    fn reward_offsets() {
        assert_eq!(reward_with_offset(Successful, 0.0), 1.0);
        assert!((reward_with_offset(Idle, 0.3) + 0.3).abs() < 1e-15);
        assert!((reward_with_offset(Busy, 0.3) - 0.7).abs() < 1e-15);
        assert_eq!(reward_with_offset(Failed, 0.0), 0.0);
    }

    #[test]
    fn aloha_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let empty = PacketQueue::new(2);
        let busy = PacketQueue::from_mask(2, 0b10);
        assert_eq!(aloha_act(1.0, &empty, &mut rng), Action::Wait);
        assert_eq!(aloha_act(1.0, &busy, &mut rng), Action::Transmit);
        let n = 1_000_000;
        let tx = (0..n)
            .filter(|_| aloha_act(0.4, &busy, &mut rng) == Action::Transmit)
            .count();
        assert!((tx as f64 / n as f64 - 0.4).abs() <= 0.002);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [
            Scheme::Aloha,
            Scheme::Fsqa,
            Scheme::Fsra,
            Scheme::Hsra,
            Scheme::Tsra,
        ] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
            assert_eq!(s.name().to_lowercase().parse::<Scheme>().unwrap(), s);
        }
        assert!("DLMA".parse::<Scheme>().is_err());
    }

    #[test]
    fn offset_validation() {
        assert_eq!(
            AgentConfig::new(Scheme::Fsqa, 2)
                .with_reward_offset(1.5)
                .validate(),
            Err(AgentError::RewardOffset(1.5))
        );
    }

    #[test]
    fn f32_store_matches_f64_arithmetic() {
        let mut st = TabularValueStore::<f32>::new(2, LearningRates::default());
        st.r_learning_update(0, Action::Wait, 1.0, 1);
        assert!((st.rho() - 0.01).abs() < 1e-7);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn update_step_is_bounded(
                q in prop::collection::vec(-5.0f64..5.0, 8),
                rho in -1.0f64..1.0,
                r in -1.0f64..1.0,
                s in 0usize..4, s_next in 0usize..4, a in 0usize..2,
                r_learning in any::<bool>(),
            ) {
                let mut st = store(4);
                for (i, v) in q.iter().enumerate() {
                    st.set_q(i / 2, Action::from_index(i % 2), *v);
                }
                st.set_rho(rho);
                let bound = 0.01 * (1.0 + 2.0 * st.max_abs_q() + rho.abs()) + 1e-12;
                let action = Action::from_index(a);
                let before = st.q(s, action);
                if r_learning {
                    st.r_learning_update(s, action, r, s_next);
                } else {
                    st.q_learning_update(s, action, r, s_next);
                }
                prop_assert!((st.q(s, action) - before).abs() <= bound);
            }
        }
    }
}
