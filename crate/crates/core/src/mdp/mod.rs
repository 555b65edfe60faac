//! Genie two-user MDP and its average-reward upper bound.
//!
//! The genie sees both lead-time vectors and the last observation,
//! `s = (l1, l2, o)`, but not user 1's transmit draw in the current slot.
//! The reward of a state is the ACK indicator carried by `o`, so the long-run
//! average reward equals the timely throughput. The optimum is found with the
//! dual linear program over occupation measures `x(s, a)` (recurrent part) and
//! `y(s, a)` (transient part), and a randomized policy is read off the solution.
//!
//! State index: `((mask(l1) · 2^D + mask(l2)) · 4 + ordinal(o))`.

pub mod lp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{format_bits, PolicyRow};
use crate::channel::{Action, ChannelError, Environment, FullStateView, Observation};
use crate::scalar::Real;
use crate::traffic::{SystemParams, TrafficError};

use self::lp::{LpError, LpProblem, LpSolver};

/// Largest deadline the genie state space is enumerated for.
pub const MAX_MDP_DEADLINE: u32 = 6;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("deadline {0} outside 1..={MAX_MDP_DEADLINE}")]
    Deadline(u32),
    #[error("the genie model needs a common deadline (got {d1} and {d2})")]
    MixedDeadlines { d1: u32, d2: u32 },
    #[error("the genie model needs Bernoulli arrivals for both users")]
    PoissonTraffic,
    #[error("alpha must have one positive entry per state summing to 1")]
    Alpha,
    #[error(transparent)]
    Params(#[from] TrafficError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Genie-visible state `(l1, l2, o)` with presence masks, bit `k - 1` for lead time `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FullMdpState {
    pub l1: u32,
    pub l2: u32,
    pub o: Observation,
}

impl FullMdpState {
    pub fn index(&self, deadline: u32) -> usize {
        (((self.l1 as usize) << deadline) | self.l2 as usize) * 4 + self.o.ordinal()
    }

    pub fn from_index(index: usize, deadline: u32) -> Self {
        let o = Observation::from_ordinal(index % 4).expect("ordinal < 4");
        let queues = index / 4;
        let low = (1usize << deadline) - 1;
        Self {
            l1: (queues >> deadline) as u32,
            l2: (queues & low) as u32,
            o,
        }
    }

    /// Reads the state off a running environment; Poisson counts clamp to presence.
    pub fn from_view(view: &FullStateView<'_>) -> Self {
        Self {
            l1: view.aloha_queue.presence_mask() as u32,
            l2: view.agent_queue.presence_mask() as u32,
            o: view.observation,
        }
    }
}

pub fn state_count(deadline: u32) -> usize {
    1 << (2 * deadline + 2)
}

fn check_deadline(deadline: u32) -> Result<(), MdpError> {
    if (1..=MAX_MDP_DEADLINE).contains(&deadline) {
        Ok(())
    } else {
        Err(MdpError::Deadline(deadline))
    }
}

/// All `2^(2D+2)` states in index order.
pub fn enumerate_states(deadline: u32) -> Result<Vec<FullMdpState>, MdpError> {
    check_deadline(deadline)?;
    Ok((0..state_count(deadline))
        .map(|i| FullMdpState::from_index(i, deadline))
        .collect())
}

/// One if the observation reports a delivery; the action and queues play no part.
pub fn reward(s: &FullMdpState, _a: Action) -> u8 {
    u8::from(s.o.is_ack())
}

fn model_deadline(params: &SystemParams) -> Result<u32, MdpError> {
    params.validate()?;
    if params.lambda.is_some() {
        return Err(MdpError::PoissonTraffic);
    }
    let deadline = params.common_deadline().ok_or(MdpError::MixedDeadlines {
        d1: params.d1,
        d2: params.d2,
    })?;
    check_deadline(deadline)?;
    Ok(deadline)
}

fn drop_hol(mask: u32) -> u32 {
    mask & mask.wrapping_sub(1)
}

/// Exact next-state distribution of one slot, as sorted `(index, probability)` pairs.
pub fn transition_row<R: Real>(
    s: &FullMdpState,
    a: Action,
    params: &SystemParams,
) -> Result<Vec<(usize, R)>, MdpError> {
    let deadline = model_deadline(params)?;
    let one = R::one();
    let p = |v: f64| R::of(v);
    let (p_t, p_s, p_s2) = (p(params.p_t), p(params.p_s), p(params.p_s_prime));
    let (p_b, p_b2) = (p(params.p_b), p(params.p_b_prime));

    // (user-1 transmits, probability)
    let user1 = if s.l1 != 0 {
        vec![(true, p_t), (false, one - p_t)]
    } else {
        vec![(false, one)]
    };
    let user2 = a == Action::Transmit && s.l2 != 0;

    // (l1 after service, l2 after service, observation, probability)
    let mut served: Vec<(u32, u32, Observation, R)> = Vec::with_capacity(4);
    for (tx1, p1) in user1 {
        match (tx1, user2) {
            (false, false) => served.push((s.l1, s.l2, Observation::Idle, p1)),
            (true, true) => served.push((s.l1, s.l2, Observation::Failed, p1)),
            (true, false) => {
                served.push((drop_hol(s.l1), s.l2, Observation::Busy, p1 * p_s));
                served.push((s.l1, s.l2, Observation::Failed, p1 * (one - p_s)));
            }
            (false, true) => {
                served.push((s.l1, drop_hol(s.l2), Observation::Successful, p1 * p_s2));
                served.push((s.l1, s.l2, Observation::Failed, p1 * (one - p_s2)));
            }
        }
    }

    let fresh = 1u32 << (deadline - 1);
    let arrivals = [
        (0, 0, (one - p_b) * (one - p_b2)),
        (fresh, 0, p_b * (one - p_b2)),
        (0, fresh, (one - p_b) * p_b2),
        (fresh, fresh, p_b * p_b2),
    ];
    let mut row: Vec<(usize, R)> = Vec::with_capacity(16);
    for (l1, l2, o, p_serve) in served {
        for &(n1, n2, p_arrive) in &arrivals {
            let prob = p_serve * p_arrive;
            if prob > R::zero() {
                let next = FullMdpState {
                    l1: (l1 >> 1) | n1,
                    l2: (l2 >> 1) | n2,
                    o,
                };
                row.push((next.index(deadline), prob));
            }
        }
    }
    row.sort_by_key(|(i, _)| *i);
    let mut merged: Vec<(usize, R)> = Vec::with_capacity(row.len());
    for (i, prob) in row {
        match merged.last_mut() {
            Some((j, acc)) if *j == i => *acc = *acc + prob,
            _ => merged.push((i, prob)),
        }
    }
    Ok(merged)
}

/// `P(s' | s, a)` for every state-action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel<R: Real> {
    deadline: u32,
    rows: Vec<Vec<(usize, R)>>,
}

impl<R: Real> TransitionModel<R> {
    pub fn build(params: &SystemParams) -> Result<Self, MdpError> {
        let deadline = model_deadline(params)?;
        let mut rows = Vec::with_capacity(state_count(deadline) * 2);
        for s in enumerate_states(deadline)? {
            for a in Action::ALL {
                rows.push(transition_row(&s, a, params)?);
            }
        }
        Ok(Self { deadline, rows })
    }

    pub fn deadline(&self) -> u32 {
        self.deadline
    }

    pub fn states(&self) -> usize {
        self.rows.len() / 2
    }

    pub fn row(&self, s: usize, a: Action) -> &[(usize, R)] {
        &self.rows[s * 2 + a.index()]
    }

    /// `(state, action, next, probability)` for every nonzero entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, Action, usize, R)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            let (s, a) = (i / 2, Action::from_index(i % 2));
            row.iter().map(move |&(next, p)| (s, a, next, p))
        })
    }
}

/// The dual program of the average-reward MDP.
///
/// Variables: `x(s, a)` at `2s + a`, then `y(s, a)` at `2|S| + 2s + a`.
/// Rows: `|S|` balance equations for `x`, then `|S|` equations tying `x`, `y` and `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageRewardLp<R: Real> {
    pub states: usize,
    pub alpha: Vec<R>,
    pub problem: LpProblem<R>,
}

/// Builds the dual program; `alpha` defaults to uniform `1/|S|`.
pub fn build_lp<R: Real>(
    model: &TransitionModel<R>,
    alpha: Option<Vec<R>>,
) -> Result<AverageRewardLp<R>, MdpError> {
    let n = model.states();
    let alpha = alpha.unwrap_or_else(|| vec![R::one() / R::of(n as f64); n]);
    let total: R = alpha.iter().copied().sum();
    if alpha.len() != n
        || alpha.iter().any(|&a| a <= R::zero())
        || (total - R::one()).abs() > R::of(1e-9)
    {
        return Err(MdpError::Alpha);
    }
    let deadline = model.deadline();
    let x = |s: usize, a: Action| 2 * s + a.index();
    let y = |s: usize, a: Action| 2 * n + 2 * s + a.index();

    let mut objective = vec![R::zero(); 4 * n];
    for s in 0..n {
        let state = FullMdpState::from_index(s, deadline);
        for a in Action::ALL {
            objective[x(s, a)] = R::of(f64::from(reward(&state, a)));
        }
    }

    // Incoming probability mass per target state.
    let mut incoming: Vec<Vec<(usize, Action, R)>> = vec![Vec::new(); n];
    for (s, a, next, p) in model.entries() {
        incoming[next].push((s, a, p));
    }

    let mut problem = LpProblem::new(objective);
    for (target, sources) in incoming.iter().enumerate() {
        let mut coeffs: Vec<(usize, R)> = Action::ALL
            .iter()
            .map(|&a| (x(target, a), R::one()))
            .collect();
        coeffs.extend(sources.iter().map(|&(s, a, p)| (x(s, a), -p)));
        problem.add_equality(coeffs, R::zero())?;
    }
    for (target, sources) in incoming.iter().enumerate() {
        let mut coeffs: Vec<(usize, R)> = Action::ALL
            .iter()
            .flat_map(|&a| [(x(target, a), R::one()), (y(target, a), R::one())])
            .collect();
        coeffs.extend(sources.iter().map(|&(s, a, p)| (y(s, a), -p)));
        problem.add_equality(coeffs, alpha[target])?;
    }
    Ok(AverageRewardLp {
        states: n,
        alpha,
        problem,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<R: Real> {
    /// `x[2s + a]`.
    pub x: Vec<R>,
    /// `y[2s + a]`.
    pub y: Vec<R>,
    /// Optimal average reward, the throughput upper bound.
    pub objective: R,
    pub max_residual: R,
}

pub fn solve_lp<R: Real, S: LpSolver<R>>(
    lp: &AverageRewardLp<R>,
    solver: &S,
) -> Result<DualSolution<R>, MdpError> {
    let sol = solver.solve(&lp.problem)?;
    let n = lp.states;
    Ok(DualSolution {
        x: sol.values[..2 * n].to_vec(),
        y: sol.values[2 * n..].to_vec(),
        objective: sol.objective,
        max_residual: sol.max_residual,
    })
}

/// Where a state's action distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Positive recurrent frequency `x`.
    Recurrent,
    /// Only transient mass `y`.
    Transient,
    /// Neither; defaulted to `Wait`.
    Unreachable,
}

/// Randomized genie policy: probability of `Transmit` per state.
#[derive(Debug, Clone, PartialEq)]
pub struct GeniePolicy {
    pub deadline: u32,
    pub transmit: Vec<f64>,
    pub support: Vec<Support>,
}

impl GeniePolicy {
    /// Deterministic policy from a rule over states.
    pub fn from_fn(deadline: u32, rule: impl Fn(&FullMdpState) -> f64) -> Self {
        let transmit = (0..state_count(deadline))
            .map(|i| rule(&FullMdpState::from_index(i, deadline)))
            .collect();
        Self {
            deadline,
            transmit,
            support: vec![Support::Recurrent; state_count(deadline)],
        }
    }

    pub fn transmit_probability(&self, s: &FullMdpState) -> f64 {
        self.transmit[s.index(self.deadline)]
    }

    pub fn rows(&self) -> Vec<PolicyRow> {
        (0..self.transmit.len())
            .map(|i| {
                let s = FullMdpState::from_index(i, self.deadline);
                let p = self.transmit[i];
                PolicyRow {
                    aloha_queue: Some(format_bits(u64::from(s.l1), self.deadline)),
                    queue: format_bits(u64::from(s.l2), self.deadline),
                    obs: s.o,
                    action: if p > 0.5 {
                        Action::Transmit
                    } else {
                        Action::Wait
                    },
                    p_transmit: p,
                    q_wait: None,
                    q_transmit: None,
                    rho: None,
                }
            })
            .collect()
    }
}

/// Mass below this counts as zero when normalizing occupation measures.
const SUPPORT_EPS: f64 = 1e-12;

/// `π(a|s) = x(s,a) / Σ x(s,·)`, falling back to `y`, then to `Wait`.
///
/// With an empty own queue both actions do the same thing; such states report `Wait`.
pub fn extract_policy<R: Real>(solution: &DualSolution<R>, deadline: u32) -> GeniePolicy {
    let n = solution.x.len() / 2;
    let mut transmit = vec![0.0; n];
    let mut support = vec![Support::Unreachable; n];
    for s in 0..n {
        let split = |v: &[R]| {
            let (w, t) = (v[2 * s].as_f64(), v[2 * s + 1].as_f64());
            (w + t > SUPPORT_EPS).then(|| t / (w + t))
        };
        let (p, kind) = match (split(&solution.x), split(&solution.y)) {
            (Some(p), _) => (p, Support::Recurrent),
            (None, Some(p)) => (p, Support::Transient),
            (None, None) => (0.0, Support::Unreachable),
        };
        let state = FullMdpState::from_index(s, deadline);
        transmit[s] = if state.l2 == 0 { 0.0 } else { p };
        support[s] = kind;
    }
    GeniePolicy {
        deadline,
        transmit,
        support,
    }
}

/// Full upper-bound computation for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    pub objective: f64,
    pub policy: GeniePolicy,
    pub max_residual: f64,
}

pub fn upper_bound<S: LpSolver<f64>>(
    params: &SystemParams,
    solver: &S,
) -> Result<UpperBound, MdpError> {
    let model = TransitionModel::<f64>::build(params)?;
    let lp = build_lp(&model, None)?;
    let solution = solve_lp(&lp, solver)?;
    Ok(UpperBound {
        objective: solution.objective,
        policy: extract_policy(&solution, model.deadline()),
        max_residual: solution.max_residual,
    })
}

/// Best blind transmit probability for a one-slot deadline and its throughput.
///
/// Returns `(p'_t, R)` with `p'_t = 1` iff `p_b·p_t < p'_s / (p_s + p'_s)`.
pub fn d1_optimal(params: &SystemParams) -> (f64, f64) {
    let SystemParams {
        p_b,
        p_b_prime,
        p_s,
        p_s_prime,
        p_t,
        ..
    } = *params;
    let user1_load = p_b * p_t;
    let always = p_s + p_s_prime > 0.0 && user1_load < p_s_prime / (p_s + p_s_prime);
    let base = p_s * user1_load;
    if always {
        (
            1.0,
            (p_s_prime - (p_s + p_s_prime) * user1_load) * p_b_prime + base,
        )
    } else {
        (0.0, base)
    }
}

/// Runs the genie policy in the simulator and returns the throughput of the last `window` slots.
pub fn evaluate_policy_by_simulation(
    policy: &GeniePolicy,
    params: &SystemParams,
    slots: u64,
    window: u64,
    seed: u64,
) -> Result<f64, MdpError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = Environment::two_user(params, &mut rng)?;
    let window = window.min(slots).max(1);
    let mut at_window_start = 0;
    for t in 0..slots {
        if t == slots - window {
            at_window_start = env.successes();
        }
        let view = env.genie_state().expect("two-user environment");
        let s = FullMdpState::from_view(&view);
        let p = policy.transmit_probability(&s);
        let a = if p > 0.0 && rng.random::<f64>() < p {
            Action::Transmit
        } else {
            Action::Wait
        };
        env.step(&[a], &mut rng)?;
    }
    Ok((env.successes() - at_window_start) as f64 / window as f64)
}
