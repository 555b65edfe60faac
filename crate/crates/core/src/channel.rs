//! Slot-synchronous collision channel shared by ALOHA users and learning agents.
//!
//! One call to [`Environment::step`] runs one slot in this fixed order:
//!
//! 1. each agent's observation is the feedback stored from the previous slot,
//! 2. ALOHA users with a nonempty queue transmit with probability `p_t`; agents
//!    transmit their head-of-line packet on `Transmit` (a no-op on an empty queue),
//! 3. the access point resolves the slot into ACK / NACK / silence,
//! 4. the winner, if any, drops its head-of-line packet,
//! 5. every queue ages by one slot and lead-time-1 leftovers expire,
//! 6. fresh arrivals enter at full lifetime for the next slot,
//! 7. each agent's reward is the ACK indicator of this slot.
//!
//! With a one-slot deadline a packet arriving for slot `t` is gone by slot `t + 1`,
//! so consecutive slots decouple.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::traffic::{bernoulli, PacketQueue, SystemParams, TrafficError, TrafficModel};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("user {user}: transmit flag disagrees with the ACK winner")]
    InconsistentAck { user: usize },
    #[error("expected {expected} agent actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("user {user}: success probability {value} outside [0, 1]")]
    SuccessProbability { user: usize, value: f64 },
    #[error("environment needs at least one user")]
    NoUsers,
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("trace output: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace output: {0}")]
    Csv(#[from] csv::Error),
}

/// Four-valued feedback a user derives at a slot boundary.
///
/// Ordinals follow `BUSY = 0, SUCCESSFUL = 1, IDLE = 2, FAILED = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observation {
    /// Someone else's packet was acknowledged.
    Busy = 0,
    /// Our own packet was acknowledged.
    Successful = 1,
    /// The access point heard nothing.
    Idle = 2,
    /// NACK: collision or channel error.
    Failed = 3,
}

impl Observation {
    pub const ALL: [Observation; 4] = [
        Observation::Busy,
        Observation::Successful,
        Observation::Idle,
        Observation::Failed,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        Self::ALL.get(ordinal).copied()
    }

    /// Whether a packet was delivered in the slot this observation reports on.
    pub fn is_ack(self) -> bool {
        matches!(self, Observation::Busy | Observation::Successful)
    }

    /// One-letter code used in policy tables.
    pub fn code(self) -> char {
        match self {
            Observation::Busy => 'B',
            Observation::Successful => 'S',
            Observation::Idle => 'I',
            Observation::Failed => 'F',
        }
    }
}

/// Access-point broadcast at the end of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feedback {
    Ack,
    Nack,
    Silence,
}

impl Feedback {
    pub fn as_str(self) -> &'static str {
        match self {
            Feedback::Ack => "ACK",
            Feedback::Nack => "NACK",
            Feedback::Silence => "SILENCE",
        }
    }
}

/// Decision of the controlled user in one slot. Index 0 is `Wait`, 1 is `Transmit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Wait = 0,
    Transmit = 1,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Wait, Action::Transmit];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            Action::Wait
        } else {
            Action::Transmit
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Wait => "WAIT",
            Action::Transmit => "TRANSMIT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub transmitters: Vec<usize>,
    pub winner: Option<usize>,
    pub feedback: Feedback,
}

/// Resolves who got through: silence, a solo success with the sender's
/// success probability, or a NACK.
pub fn resolve_slot<R: Rng + ?Sized>(
    transmit_flags: &[bool],
    solo_success_probs: &[f64],
    rng: &mut R,
) -> SlotOutcome {
    debug_assert_eq!(transmit_flags.len(), solo_success_probs.len());
    let transmitters: Vec<usize> = transmit_flags
        .iter()
        .enumerate()
        .filter_map(|(u, &tx)| tx.then_some(u))
        .collect();
    let (winner, feedback) = match transmitters.as_slice() {
        [] => (None, Feedback::Silence),
        [u] if bernoulli(rng, solo_success_probs[*u]) => (Some(*u), Feedback::Ack),
        _ => (None, Feedback::Nack),
    };
    SlotOutcome {
        transmitters,
        winner,
        feedback,
    }
}

/// The observation `user` derives from its own transmit decision and the broadcast.
pub fn observation_for(
    user: usize,
    did_transmit: bool,
    outcome: &SlotOutcome,
) -> Result<Observation, ChannelError> {
    match outcome.feedback {
        Feedback::Ack => {
            let won = outcome.winner == Some(user);
            if won != did_transmit {
                return Err(ChannelError::InconsistentAck { user });
            }
            Ok(if won {
                Observation::Successful
            } else {
                Observation::Busy
            })
        }
        Feedback::Silence => Ok(Observation::Idle),
        Feedback::Nack => Ok(Observation::Failed),
    }
}

/// Successes per slot over a window.
pub fn timely_throughput(success_count: u64, window: u64) -> f64 {
    assert!(window > 0, "throughput window must be positive");
    success_count as f64 / window as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UserKind {
    Aloha { p_t: f64 },
    Agent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserConfig {
    pub kind: UserKind,
    pub traffic: TrafficModel,
    pub deadline: u32,
    pub success_prob: f64,
}

impl UserConfig {
    pub fn aloha(p_t: f64, traffic: TrafficModel, deadline: u32, success_prob: f64) -> Self {
        Self {
            kind: UserKind::Aloha { p_t },
            traffic,
            deadline,
            success_prob,
        }
    }

    pub fn agent(traffic: TrafficModel, deadline: u32, success_prob: f64) -> Self {
        Self {
            kind: UserKind::Agent,
            traffic,
            deadline,
            success_prob,
        }
    }
}

#[derive(Debug, Clone)]
struct User {
    config: UserConfig,
    queue: PacketQueue,
    last_obs: Observation,
}

/// Genie view of the two-user system at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FullStateView<'a> {
    pub aloha_queue: &'a PacketQueue,
    pub agent_queue: &'a PacketQueue,
    pub observation: Observation,
}

/// Everything a slot produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotReport {
    pub outcome: SlotOutcome,
    /// Per-user transmit decision actually executed.
    pub transmitted: Vec<bool>,
    /// Per-user observation for the next slot.
    pub observations: Vec<Observation>,
    /// Per-agent reward bit (shared ACK indicator).
    pub rewards: Vec<u8>,
    pub expired: u64,
}

/// Multi-user slotted channel.
#[derive(Debug, Clone)]
pub struct Environment {
    users: Vec<User>,
    agents: Vec<usize>,
    slot: u64,
    successes: u64,
    expired: u64,
}

impl Environment {
    /// Builds the system and draws the arrivals for slot 1.
    pub fn new<R: Rng + ?Sized>(
        configs: Vec<UserConfig>,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        if configs.is_empty() {
            return Err(ChannelError::NoUsers);
        }
        let mut users = Vec::with_capacity(configs.len());
        for (u, config) in configs.into_iter().enumerate() {
            config.traffic.validate()?;
            if !(0.0..=1.0).contains(&config.success_prob) {
                return Err(ChannelError::SuccessProbability {
                    user: u,
                    value: config.success_prob,
                });
            }
            if let UserKind::Aloha { p_t } = config.kind {
                if !(0.0..=1.0).contains(&p_t) {
                    return Err(TrafficError::Probability {
                        name: "p_t",
                        value: p_t,
                    }
                    .into());
                }
            }
            if config.deadline == 0 {
                return Err(TrafficError::Deadline { name: "user" }.into());
            }
            let queue = PacketQueue::new(config.deadline);
            users.push(User {
                config,
                queue,
                last_obs: Observation::Idle,
            });
        }
        let agents = users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.config.kind == UserKind::Agent)
            .map(|(i, _)| i)
            .collect();
        let mut env = Self {
            users,
            agents,
            slot: 1,
            successes: 0,
            expired: 0,
        };
        env.enqueue_arrivals(rng);
        Ok(env)
    }

    /// User 0 runs ALOHA, user 1 is the controlled agent.
    pub fn two_user<R: Rng + ?Sized>(
        params: &SystemParams,
        rng: &mut R,
    ) -> Result<Self, ChannelError> {
        params.validate()?;
        Self::new(
            vec![
                UserConfig::aloha(params.p_t, params.user1_traffic(), params.d1, params.p_s),
                UserConfig::agent(params.user2_traffic(), params.d2, params.p_s_prime),
            ],
            rng,
        )
    }

    /// Current slot index, starting at 1.
    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Cumulative successful deliveries.
    pub fn successes(&self) -> u64 {
        self.successes
    }

    /// Cumulative expired packets.
    pub fn expired(&self) -> u64 {
        self.expired
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// User indices of the learning agents, in action order.
    pub fn agent_users(&self) -> &[usize] {
        &self.agents
    }

    pub fn queue(&self, user: usize) -> &PacketQueue {
        &self.users[user].queue
    }

    pub fn observation(&self, user: usize) -> Observation {
        self.users[user].last_obs
    }

    pub fn user_config(&self, user: usize) -> &UserConfig {
        &self.users[user].config
    }

    /// Genie view; only defined for one ALOHA user followed by one agent.
    pub fn genie_state(&self) -> Option<FullStateView<'_>> {
        match self.users.as_slice() {
            [a, b]
                if matches!(a.config.kind, UserKind::Aloha { .. })
                    && b.config.kind == UserKind::Agent =>
            {
                Some(FullStateView {
                    aloha_queue: &a.queue,
                    agent_queue: &b.queue,
                    observation: b.last_obs,
                })
            }
            _ => None,
        }
    }

    fn enqueue_arrivals<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for user in &mut self.users {
            let n = user.config.traffic.sample_arrivals(rng);
            user.queue.enqueue_arrivals(n);
        }
    }

    /// Runs one slot. `actions` holds one entry per agent, in [`Self::agent_users`] order.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        actions: &[Action],
        rng: &mut R,
    ) -> Result<SlotReport, ChannelError> {
        if actions.len() != self.agents.len() {
            return Err(ChannelError::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let mut transmitted = Vec::with_capacity(self.users.len());
        let mut next_agent = 0;
        for user in &self.users {
            let tx = match user.config.kind {
                UserKind::Aloha { p_t } => !user.queue.is_empty() && bernoulli(rng, p_t),
                UserKind::Agent => {
                    let a = actions[next_agent];
                    next_agent += 1;
                    a == Action::Transmit && !user.queue.is_empty()
                }
            };
            transmitted.push(tx);
        }
        let probs: Vec<f64> = self.users.iter().map(|u| u.config.success_prob).collect();
        let outcome = resolve_slot(&transmitted, &probs, rng);

        if let Some(w) = outcome.winner {
            self.users[w].queue.remove_hol()?;
            self.successes += 1;
        }
        let mut expired = 0;
        let mut observations = Vec::with_capacity(self.users.len());
        for (u, user) in self.users.iter_mut().enumerate() {
            expired += u64::from(user.queue.advance());
            let obs = observation_for(u, transmitted[u], &outcome)?;
            user.last_obs = obs;
            observations.push(obs);
        }
        self.expired += expired;
        self.enqueue_arrivals(rng);
        self.slot += 1;

        let reward = u8::from(outcome.feedback == Feedback::Ack);
        Ok(SlotReport {
            rewards: vec![reward; self.agents.len()],
            outcome,
            transmitted,
            observations,
            expired,
        })
    }
}

/// Per-slot CSV trace: `t,actions,feedback,successes`.
///
/// `actions` lists every user's executed transmit decision as `T`/`W`.
pub struct SlotTraceWriter<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> SlotTraceWriter<W> {
    pub fn new(inner: W) -> Result<Self, ChannelError> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(["t", "actions", "feedback", "successes"])?;
        Ok(Self { writer })
    }

    pub fn record(
        &mut self,
        slot: u64,
        report: &SlotReport,
        successes: u64,
    ) -> Result<(), ChannelError> {
        let actions: String = report
            .transmitted
            .iter()
            .map(|&tx| if tx { 'T' } else { 'W' })
            .collect();
        self.writer.write_record([
            slot.to_string(),
            actions,
            report.outcome.feedback.as_str().to_string(),
            successes.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, ChannelError> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| ChannelError::Io(e.into_error()))
    }
}
