//! Delay-constrained random access over an unreliable collision channel.
//!
//! One slotted-ALOHA user shares an access point with one or more learning
//! agents. The crate provides
//!
//! * [`traffic`]: arrival models and lead-time packet queues,
//! * [`channel`]: the slot-synchronous environment and the timely-throughput metric,
//! * [`agents`]: the ALOHA transmitter and the tabular Q-learning / R-learning agents,
//! * [`mdp`]: the genie two-user MDP, its dual linear program and the `D = 1` closed form,
//! * [`harness`]: configuration-driven runs, sweeps, convergence traces and CSV output.
//!
//! Numerical cores ([`agents::TabularValueStore`], [`mdp::lp::DenseSimplex`],
//! [`mdp::TransitionModel`]) are generic over [`Real`]; the aliases below pin
//! them to `f64`, which is what the simulator and the CLI use.

pub mod agents;
pub mod channel;
pub mod harness;
pub mod mdp;
pub mod scalar;
pub mod traffic;

pub use scalar::Real;

/// Q-table and average-reward estimate in double precision.
pub type ValueStore = agents::TabularValueStore<f64>;
/// Learning agent in double precision.
pub type Agent = agents::LearningAgent<f64>;
/// Genie transition model in double precision.
pub type Transitions = mdp::TransitionModel<f64>;
/// Dual linear program in double precision.
pub type DualLp = mdp::lp::LpProblem<f64>;
/// Dense two-phase simplex in double precision.
pub type Simplex = mdp::lp::DenseSimplex<f64>;
/// Single precision Q-table, for memory-bound sweeps over large state spaces.
pub type ValueStoreF32 = agents::TabularValueStore<f32>;
