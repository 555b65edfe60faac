//! Packet arrivals and per-user lead-time queues.
//!
//! A queue keeps one counter per residual lifetime: `counts[k - 1]` is the
//! number of packets that expire in `k` slots. Bernoulli traffic keeps every
//! counter in `{0, 1}`; Poisson batches may stack several packets on the
//! same lead time.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("{name} = {value} is not a probability")]
    Probability { name: &'static str, value: f64 },
    #[error("{name} = {value} must lie in (0, 1]")]
    OpenProbability { name: &'static str, value: f64 },
    #[error("deadline {name} must be at least one slot")]
    Deadline { name: &'static str },
    #[error("arrival rate {0} must be finite and nonnegative")]
    Rate(f64),
    #[error("cannot remove the head-of-line packet of an empty queue")]
    EmptyQueue,
}

/// Two-user system parameters.
///
/// User 1 runs slotted ALOHA, user 2 is the controlled (learning or genie) user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// User-1 Bernoulli arrival probability.
    pub p_b: f64,
    /// User-2 Bernoulli arrival probability.
    pub p_b_prime: f64,
    /// User-1 solo success probability.
    pub p_s: f64,
    /// User-2 solo success probability.
    pub p_s_prime: f64,
    /// User-1 ALOHA transmit probability.
    pub p_t: f64,
    pub d1: u32,
    pub d2: u32,
    /// Poisson rate for user 1, replacing `p_b` when set.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl SystemParams {
    /// Bernoulli traffic for both users with a common deadline.
    pub fn new(p_b: f64, p_b_prime: f64, p_s: f64, p_s_prime: f64, p_t: f64, d: u32) -> Self {
        Self {
            p_b,
            p_b_prime,
            p_s,
            p_s_prime,
            p_t,
            d1: d,
            d2: d,
            lambda: None,
        }
    }

    /// The instance used throughout the policy tables and convergence plots.
    pub fn reference(d: u32) -> Self {
        Self::new(0.5, 0.4, 0.7, 0.6, 0.4, d)
    }

    pub fn with_deadlines(mut self, d1: u32, d2: u32) -> Self {
        self.d1 = d1;
        self.d2 = d2;
        self
    }

    pub fn with_poisson_user1(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    /// Common deadline, if both users share one.
    pub fn common_deadline(&self) -> Option<u32> {
        (self.d1 == self.d2).then_some(self.d1)
    }

    pub fn user1_traffic(&self) -> TrafficModel {
        match self.lambda {
            Some(lambda) => TrafficModel::Poisson(lambda),
            None => TrafficModel::Bernoulli(self.p_b),
        }
    }

    pub fn user2_traffic(&self) -> TrafficModel {
        TrafficModel::Bernoulli(self.p_b_prime)
    }

    /// Checks `[0, 1]` ranges, deadlines and the Poisson rate.
    pub fn validate(&self) -> Result<(), TrafficError> {
        for (name, value) in [
            ("p_b", self.p_b),
            ("p_b_prime", self.p_b_prime),
            ("p_s", self.p_s),
            ("p_s_prime", self.p_s_prime),
            ("p_t", self.p_t),
        ] {
            check_probability(name, value)?;
        }
        if self.d1 == 0 {
            return Err(TrafficError::Deadline { name: "d1" });
        }
        if self.d2 == 0 {
            return Err(TrafficError::Deadline { name: "d2" });
        }
        if let Some(lambda) = self.lambda {
            TrafficModel::Poisson(lambda).validate()?;
        }
        Ok(())
    }

    /// Stricter check: arrival and success probabilities in `(0, 1]`.
    pub fn validate_strict(&self) -> Result<(), TrafficError> {
        self.validate()?;
        for (name, value) in [
            ("p_b", self.p_b),
            ("p_b_prime", self.p_b_prime),
            ("p_s", self.p_s),
            ("p_s_prime", self.p_s_prime),
        ] {
            if value <= 0.0 {
                return Err(TrafficError::OpenProbability { name, value });
            }
        }
        Ok(())
    }
}

fn check_probability(name: &'static str, value: f64) -> Result<(), TrafficError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(TrafficError::Probability { name, value })
    }
}

/// Per-slot arrival process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rate", rename_all = "lowercase")]
pub enum TrafficModel {
    Bernoulli(f64),
    Poisson(f64),
}

impl TrafficModel {
    pub fn validate(&self) -> Result<(), TrafficError> {
        match *self {
            TrafficModel::Bernoulli(p) => check_probability("bernoulli p", p),
            TrafficModel::Poisson(lambda) if lambda.is_finite() && lambda >= 0.0 => Ok(()),
            TrafficModel::Poisson(lambda) => Err(TrafficError::Rate(lambda)),
        }
    }

    /// Mean arrivals per slot.
    pub fn mean(&self) -> f64 {
        match *self {
            TrafficModel::Bernoulli(p) => p,
            TrafficModel::Poisson(lambda) => lambda,
        }
    }

    /// Number of packets arriving in one slot.
    pub fn sample_arrivals<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            TrafficModel::Bernoulli(p) => u32::from(bernoulli(rng, p)),
            TrafficModel::Poisson(lambda) if lambda <= 0.0 => 0,
            TrafficModel::Poisson(lambda) => {
                let poisson = Poisson::new(lambda).expect("validated rate");
                let draw: f64 = poisson.sample(rng);
                draw as u32
            }
        }
    }
}

/// `true` with probability `p`; exact at the endpoints.
pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

/// Lead-time queue of one user.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PacketQueue {
    counts: Vec<u32>,
}

impl PacketQueue {
    /// Empty queue for packets with a hard deadline of `deadline` slots.
    ///
    /// # Panics
    /// If `deadline` is zero.
    pub fn new(deadline: u32) -> Self {
        assert!(deadline >= 1, "deadline must be at least one slot");
        Self {
            counts: vec![0; deadline as usize],
        }
    }

    /// Builds a queue from explicit counts, `counts[k - 1]` holding lead time `k`.
    pub fn from_counts(counts: Vec<u32>) -> Result<Self, TrafficError> {
        if counts.is_empty() {
            return Err(TrafficError::Deadline { name: "queue" });
        }
        Ok(Self { counts })
    }

    /// Builds a Bernoulli queue from a presence mask, bit `k - 1` for lead time `k`.
    pub fn from_mask(deadline: u32, mask: u64) -> Self {
        let mut queue = Self::new(deadline);
        for (k, count) in queue.counts.iter_mut().enumerate() {
            *count = ((mask >> k) & 1) as u32;
        }
        queue
    }

    pub fn deadline(&self) -> u32 {
        self.counts.len() as u32
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of packets with lead time `k` (1-based).
    pub fn count_at(&self, k: u32) -> u32 {
        self.counts[(k - 1) as usize]
    }

    pub fn len(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// New arrivals enter with the full lifetime.
    pub fn enqueue_arrivals(&mut self, n: u32) {
        if let Some(last) = self.counts.last_mut() {
            *last += n;
        }
    }

    /// Lead time of the head-of-line packet, `0` for an empty queue.
    pub fn hol_lead_time(&self) -> u32 {
        self.counts
            .iter()
            .position(|&c| c > 0)
            .map_or(0, |k| k as u32 + 1)
    }

    /// Whether a packet expires at the end of the current slot.
    pub fn has_urgent(&self) -> bool {
        self.counts[0] > 0
    }

    /// Drops the head-of-line packet after a successful delivery.
    pub fn remove_hol(&mut self) -> Result<(), TrafficError> {
        let slot = self
            .counts
            .iter_mut()
            .find(|c| **c > 0)
            .ok_or(TrafficError::EmptyQueue)?;
        *slot -= 1;
        Ok(())
    }

    /// Ends the slot: lead-time-1 packets expire and everything else ages by one.
    /// Returns the number of expired packets.
    pub fn advance(&mut self) -> u32 {
        let expired = self.counts[0];
        self.counts.rotate_left(1);
        *self.counts.last_mut().expect("nonempty") = 0;
        expired
    }

    /// Presence mask, bit `k - 1` set iff some packet has lead time `k`.
    /// Counts above one are clamped to presence.
    pub fn presence_mask(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold(0, |mask, (k, _)| mask | (1 << k))
    }

    pub fn presence_bits(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c > 0).collect()
    }
}
