//! Configuration-driven experiments: single runs, paired parameter sweeps and
//! convergence traces.
//!
//! Every run owns its environment, agents and random source. Per-run seeds are
//! derived from the master seed and the run's position in the sweep, so a
//! parallel sweep reproduces a sequential one record for record.

pub mod output;
pub mod presets;

use std::fmt;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentConfig, AgentError, LearningAgent, PolicyRow, Scheme};
use crate::channel::{Action, ChannelError, Environment, UserConfig};
use crate::mdp::lp::DenseSimplex;
use crate::mdp::{self, MdpError, MAX_MDP_DEADLINE};
use crate::traffic::{SystemParams, TrafficError, TrafficModel};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot serialize configuration: {0}")]
    TomlWrite(#[from] toml::ser::Error),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Channel and arrival probabilities of one parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probabilities {
    pub p_b: f64,
    pub p_b_prime: f64,
    pub p_s: f64,
    pub p_s_prime: f64,
    pub p_t: f64,
}

impl Probabilities {
    pub const REFERENCE: Probabilities = Probabilities {
        p_b: 0.5,
        p_b_prime: 0.4,
        p_s: 0.7,
        p_s_prime: 0.6,
        p_t: 0.4,
    };

    /// Each component uniform on `(0, 1]`.
    pub fn random<G: Rng + ?Sized>(rng: &mut G) -> Self {
        let mut draw = || 1.0 - rng.random::<f64>();
        Self {
            p_b: draw(),
            p_b_prime: draw(),
            p_s: draw(),
            p_s_prime: draw(),
            p_t: draw(),
        }
    }

    pub fn with_deadlines(&self, d1: u32, d2: u32) -> SystemParams {
        SystemParams::new(
            self.p_b,
            self.p_b_prime,
            self.p_s,
            self.p_s_prime,
            self.p_t,
            d2,
        )
        .with_deadlines(d1, d2)
    }
}

/// One experiment, read from a TOML file. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    /// Adds the genie LP optimum as pseudo-scheme `UB` to sweeps.
    pub upper_bound: bool,
    /// Parameter groups per cell. Zero yields an empty sweep.
    pub groups: usize,
    /// Deadlines of the controlled users.
    pub deadlines: Vec<u32>,
    /// Deadline of the ALOHA users; defaults to the controlled deadline.
    pub user1_deadline: Option<u32>,
    /// Poisson rates for the ALOHA users; empty means Bernoulli `p_b`.
    pub user1_lambdas: Vec<f64>,
    pub aloha_users: usize,
    /// Numbers of learning agents to sweep over.
    pub agent_counts: Vec<usize>,
    /// Fixed probabilities; random groups when absent.
    pub params: Option<Probabilities>,
    pub slots: u64,
    /// Slot budget for FSRA runs.
    pub fsra_slots: u64,
    /// Throughput is measured over the last `window` slots.
    pub window: u64,
    /// Reward offset for FSQA agents.
    pub reward_offset: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: PathBuf,
    /// Checkpoint spacing of convergence traces.
    pub checkpoint: u64,
    /// Sliding window of convergence traces.
    pub trace_window: u64,
    /// Independent runs averaged into each trace.
    pub trace_runs: usize,
    /// Keep the final policy table of every run.
    pub keep_policy: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Tsra],
            upper_bound: false,
            groups: 50,
            deadlines: vec![2],
            user1_deadline: None,
            user1_lambdas: Vec::new(),
            aloha_users: 1,
            agent_counts: vec![1],
            params: None,
            slots: 100_000,
            fsra_slots: 1_000_000,
            window: 100_000,
            reward_offset: 0.0,
            seed: 0,
            jobs: None,
            out: PathBuf::from("results"),
            checkpoint: 1_000,
            trace_window: 5_000,
            trace_runs: 1,
            keep_policy: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.slots < self.window || self.fsra_slots < self.window {
            return bad(format!(
                "slots ({}, FSRA {}) must be at least the window ({})",
                self.slots, self.fsra_slots, self.window
            ));
        }
        if self.window == 0 {
            return bad("window must be positive".into());
        }
        if self.deadlines.is_empty() || self.deadlines.contains(&0) {
            return bad("deadlines must be a non-empty list of positive integers".into());
        }
        if self.user1_deadline == Some(0) {
            return bad("user1_deadline must be positive".into());
        }
        if self.agent_counts.is_empty() {
            return bad("agent_counts must not be empty".into());
        }
        if self.schemes.is_empty() && !self.upper_bound {
            return bad("nothing to run: no schemes and no upper bound".into());
        }
        if self.checkpoint == 0 || self.trace_window == 0 || self.trace_runs == 0 {
            return bad("checkpoint, trace_window and trace_runs must be positive".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        for &lambda in &self.user1_lambdas {
            TrafficModel::Poisson(lambda).validate()?;
        }
        if let Some(p) = self.params {
            p.with_deadlines(1, 1).validate()?;
        }
        for &scheme in &self.schemes {
            AgentConfig::new(scheme, 1)
                .with_reward_offset(self.offset_for(scheme))
                .validate()?;
            for &d in &self.deadlines {
                if scheme.is_learning() {
                    crate::agents::StateEncoder::for_scheme(scheme, d)?;
                }
            }
        }
        if self.schemes.iter().any(|s| s.is_learning()) && self.agent_counts.contains(&0) {
            return bad("learning schemes need at least one agent".into());
        }
        if self.schemes.contains(&Scheme::Aloha) && self.aloha_users == 0 {
            return bad("scheme ALOHA needs at least one ALOHA user".into());
        }
        if self.upper_bound {
            if self.aloha_users != 1 || self.agent_counts.iter().any(|&n| n != 1) {
                return bad("the upper bound is defined for one ALOHA user and one agent".into());
            }
            if !self.user1_lambdas.is_empty() {
                return bad("the upper bound assumes Bernoulli arrivals".into());
            }
            for &d in &self.deadlines {
                if self.user1_deadline.is_some_and(|d1| d1 != d) {
                    return Err(MdpError::MixedDeadlines {
                        d1: self.user1_deadline.unwrap_or(d),
                        d2: d,
                    }
                    .into());
                }
                if d > MAX_MDP_DEADLINE {
                    return Err(MdpError::Deadline(d).into());
                }
            }
        }
        Ok(())
    }

    pub fn slots_for(&self, scheme: Scheme) -> u64 {
        if scheme == Scheme::Fsra {
            self.fsra_slots
        } else {
            self.slots
        }
    }

    fn offset_for(&self, scheme: Scheme) -> f64 {
        if scheme == Scheme::Fsqa {
            self.reward_offset
        } else {
            0.0
        }
    }

    /// Every (deadline, rate, agent count) combination, in sweep order.
    pub fn cells(&self) -> Vec<Cell> {
        let lambdas: Vec<Option<f64>> = if self.user1_lambdas.is_empty() {
            vec![None]
        } else {
            self.user1_lambdas.iter().copied().map(Some).collect()
        };
        let mut cells = Vec::new();
        for &deadline in &self.deadlines {
            for &lambda in &lambdas {
                for &agents in &self.agent_counts {
                    cells.push(Cell {
                        deadline,
                        lambda,
                        agents,
                    });
                }
            }
        }
        cells
    }

    /// System parameters of one cell and group.
    pub fn group_params(&self, cell: &Cell, group_seed: u64) -> SystemParams {
        let probs = self.params.unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(group_seed);
            rng.set_stream(1);
            Probabilities::random(&mut rng)
        });
        let d1 = self.user1_deadline.unwrap_or(cell.deadline);
        let params = probs.with_deadlines(d1, cell.deadline);
        match cell.lambda {
            Some(lambda) => params.with_poisson_user1(lambda),
            None => params,
        }
    }

    fn plan(&self, scheme: Scheme, params: SystemParams, agents: usize, seed: u64) -> RunPlan {
        RunPlan {
            scheme,
            params,
            aloha_users: self.aloha_users,
            agents: if scheme.is_learning() { agents } else { 0 },
            slots: self.slots_for(scheme),
            window: self.window,
            reward_offset: self.offset_for(scheme),
            seed,
            checkpoints: None,
            keep_policy: self.keep_policy,
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub deadline: u32,
    pub lambda: Option<f64>,
    pub agents: usize,
}

/// Seed of run `index` in stream `stream`, derived from the master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((stream << 32) | (index & 0xffff_ffff));
    rng.random()
}

/// What produced a record's throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Scheme(Scheme),
    /// Genie LP optimum.
    UpperBound,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Scheme(s) => f.write_str(s.name()),
            Method::UpperBound => f.write_str("UB"),
        }
    }
}

/// Sliding-window throughput `(slot, throughput)`.
pub type TracePoint = (u64, f64);

/// Fully resolved description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub scheme: Scheme,
    pub params: SystemParams,
    pub aloha_users: usize,
    /// Learning agents; ignored for ALOHA.
    pub agents: usize,
    pub slots: u64,
    pub window: u64,
    pub reward_offset: f64,
    pub seed: u64,
    /// `(interval, window)` of the convergence trace, if any.
    pub checkpoints: Option<(u64, u64)>,
    pub keep_policy: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: Method,
    pub group: usize,
    pub seed: u64,
    pub params: SystemParams,
    pub aloha_users: usize,
    pub agents: usize,
    pub slots: u64,
    pub window: u64,
    pub throughput: f64,
    pub trace: Vec<TracePoint>,
    /// Final policy of the first agent.
    pub policy: Option<Vec<PolicyRow>>,
    /// Final average-reward estimate of the first agent.
    pub rho: Option<f64>,
}

impl ExperimentRecord {
    pub fn deadline(&self) -> u32 {
        self.params.d2
    }
}

/// Runs `scheme` on `params` with the config's user counts and budgets.
pub fn run_single(
    config: &ExperimentConfig,
    scheme: Scheme,
    params: &SystemParams,
    seed: u64,
) -> Result<ExperimentRecord, HarnessError> {
    let agents = config.agent_counts.first().copied().unwrap_or(1);
    run_plan(&config.plan(scheme, *params, agents, seed))
}

/// Builds the users of a run: ALOHA users first, then the agents.
fn users(plan: &RunPlan) -> Vec<UserConfig> {
    let p = &plan.params;
    let aloha = UserConfig::aloha(p.p_t, p.user1_traffic(), p.d1, p.p_s);
    let agent = UserConfig::agent(p.user2_traffic(), p.d2, p.p_s_prime);
    let mut users = vec![aloha; plan.aloha_users];
    users.extend(std::iter::repeat_n(agent, plan.agents));
    users
}

pub fn run_plan(plan: &RunPlan) -> Result<ExperimentRecord, HarnessError> {
    if plan.window == 0 || plan.slots < plan.window {
        return Err(HarnessError::Config(format!(
            "window {} must lie in [1, slots = {}]",
            plan.window, plan.slots
        )));
    }
    plan.params.validate()?;
    let mut agents = Vec::with_capacity(plan.agents);
    if plan.scheme.is_learning() {
        if plan.agents == 0 {
            return Err(HarnessError::Config(
                "a learning scheme needs at least one agent".into(),
            ));
        }
        let config =
            AgentConfig::new(plan.scheme, plan.params.d2).with_reward_offset(plan.reward_offset);
        for _ in 0..plan.agents {
            agents.push(LearningAgent::<f64>::new(config)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut env = Environment::new(users(plan), &mut rng)?;
    let agent_users = env.agent_users().to_vec();

    let mut trace = Vec::new();
    let mut ring = plan.checkpoints.map(|(_, w)| vec![0u64; w as usize + 1]);
    let mut states: Vec<usize> = agents
        .iter()
        .zip(&agent_users)
        .map(|(a, &u)| a.encode(env.queue(u), env.observation(u)))
        .collect();
    let mut actions = vec![Action::Wait; agents.len()];
    let window_start = plan.slots - plan.window;
    let mut at_window_start = 0;

    for t in 1..=plan.slots {
        for (i, agent) in agents.iter().enumerate() {
            actions[i] = agent.act(states[i], &mut rng);
        }
        env.step(&actions, &mut rng)?;
        for (i, agent) in agents.iter_mut().enumerate() {
            let u = agent_users[i];
            let o = env.observation(u);
            let next = agent.encode(env.queue(u), o);
            agent.learn(states[i], actions[i], o, next);
            states[i] = next;
        }
        if t == window_start {
            at_window_start = env.successes();
        }
        if let (Some((interval, w)), Some(ring)) = (plan.checkpoints, ring.as_mut()) {
            let len = ring.len() as u64;
            ring[(t % len) as usize] = env.successes();
            if t % interval == 0 {
                let span = w.min(t);
                let before = if span == t {
                    0
                } else {
                    ring[((t - span) % len) as usize]
                };
                trace.push((t, (env.successes() - before) as f64 / span as f64));
            }
        }
    }

    let first = agents.first();
    Ok(ExperimentRecord {
        method: Method::Scheme(plan.scheme),
        group: 0,
        seed: plan.seed,
        params: plan.params,
        aloha_users: plan.aloha_users,
        agents: agents.len(),
        slots: plan.slots,
        window: plan.window,
        throughput: (env.successes() - at_window_start) as f64 / plan.window as f64,
        trace,
        policy: first
            .filter(|_| plan.keep_policy)
            .map(|a| a.policy_snapshot()),
        rho: first
            .filter(|a| a.config().scheme.uses_r_learning())
            .map(|a| a.store().rho()),
    })
}

fn upper_bound_record(
    params: &SystemParams,
    group: usize,
    seed: u64,
) -> Result<ExperimentRecord, HarnessError> {
    let bound = mdp::upper_bound(params, &DenseSimplex::default())?;
    Ok(ExperimentRecord {
        method: Method::UpperBound,
        group,
        seed,
        params: *params,
        aloha_users: 1,
        agents: 1,
        slots: 0,
        window: 0,
        throughput: bound.objective,
        trace: Vec::new(),
        policy: None,
        rho: None,
    })
}

fn with_pool<T: Send>(
    jobs: Option<usize>,
    work: impl FnOnce() -> T + Send,
) -> Result<T, HarnessError> {
    match jobs {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(work)),
        None => Ok(work()),
    }
}

/// Runs every scheme on `groups` shared parameter draws per cell.
///
/// Records come back ordered by cell, then group, then scheme (with `UB`
/// last), regardless of how many threads ran them.
pub fn sweep(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, HarnessError> {
    config.validate()?;
    let mut methods: Vec<Method> = config.schemes.iter().copied().map(Method::Scheme).collect();
    if config.upper_bound {
        methods.push(Method::UpperBound);
    }
    let mut tasks = Vec::new();
    for (c, cell) in config.cells().iter().enumerate() {
        for group in 0..config.groups {
            let seed = derive_seed(config.seed, c as u64, group as u64);
            let params = config.group_params(cell, seed);
            for &method in &methods {
                tasks.push((method, group, seed, params, cell.agents));
            }
        }
    }
    let run =
        |&(method, group, seed, params, agents): &(Method, usize, u64, SystemParams, usize)| {
            match method {
                Method::Scheme(scheme) => {
                    run_plan(&config.plan(scheme, params, agents, seed)).map(|mut r| {
                        r.group = group;
                        r
                    })
                }
                Method::UpperBound => upper_bound_record(&params, group, seed),
            }
        };
    with_pool(config.jobs, || {
        tasks.par_iter().map(run).collect::<Result<Vec<_>, _>>()
    })?
}

/// Mean throughput of one (method, cell).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub method: Method,
    pub deadline: u32,
    pub lambda: Option<f64>,
    pub agents: usize,
    pub groups: usize,
    pub mean: f64,
    /// Standard error of the mean; zero for a single group.
    pub std_error: f64,
}

/// Groups records by (method, deadline, rate, agents) in first-seen order.
pub fn means(records: &[ExperimentRecord]) -> Vec<MeanRow> {
    let mut keys: Vec<(Method, u32, Option<f64>, usize)> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in records {
        let key = (r.method, r.deadline(), r.params.lambda, r.agents);
        match keys.iter().position(|k| *k == key) {
            Some(i) => values[i].push(r.throughput),
            None => {
                keys.push(key);
                values.push(vec![r.throughput]);
            }
        }
    }
    keys.into_iter()
        .zip(values)
        .map(|((method, deadline, lambda, agents), v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std_error = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            MeanRow {
                method,
                deadline,
                lambda,
                agents,
                groups: v.len(),
                mean,
                std_error,
            }
        })
        .collect()
}

/// Mean of `method` at `deadline` over every cell with that deadline.
pub fn mean_of(rows: &[MeanRow], method: Method, deadline: u32) -> Option<f64> {
    rows.iter()
        .find(|r| r.method == method && r.deadline == deadline)
        .map(|r| r.mean)
}

/// Averaged convergence trace of one scheme in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub scheme: Scheme,
    pub deadline: u32,
    pub lambda: Option<f64>,
    pub agents: usize,
    pub runs: usize,
    pub points: Vec<TracePoint>,
}

impl TraceSeries {
    /// Trace value at the last checkpoint not after `slot`.
    pub fn at(&self, slot: u64) -> Option<f64> {
        self.points
            .iter()
            .rev()
            .find(|(t, _)| *t <= slot)
            .map(|&(_, v)| v)
    }
}

/// Sliding-window throughput at every checkpoint, averaged over
/// `trace_runs` independent runs. Uses the reference probabilities unless
/// the config fixes others.
pub fn convergence_trace(config: &ExperimentConfig) -> Result<Vec<TraceSeries>, HarnessError> {
    config.validate()?;
    let fixed = ExperimentConfig {
        params: Some(config.params.unwrap_or(Probabilities::REFERENCE)),
        ..config.clone()
    };
    let mut tasks = Vec::new();
    for (c, cell) in fixed.cells().iter().enumerate() {
        for &scheme in &fixed.schemes {
            for run in 0..fixed.trace_runs {
                let seed = derive_seed(fixed.seed, c as u64, run as u64);
                let mut plan =
                    fixed.plan(scheme, fixed.group_params(cell, seed), cell.agents, seed);
                plan.checkpoints = Some((fixed.checkpoint, fixed.trace_window));
                tasks.push((*cell, plan));
            }
        }
    }
    let records = with_pool(fixed.jobs, || {
        tasks
            .par_iter()
            .map(|(_, plan)| run_plan(plan))
            .collect::<Result<Vec<_>, _>>()
    })??;

    let runs = fixed.trace_runs;
    Ok(tasks
        .chunks(runs)
        .zip(records.chunks(runs))
        .map(|(plans, recs)| {
            let (cell, plan) = &plans[0];
            let points = recs[0]
                .trace
                .iter()
                .enumerate()
                .map(|(k, &(t, _))| {
                    (
                        t,
                        recs.iter().map(|r| r.trace[k].1).sum::<f64>() / runs as f64,
                    )
                })
                .collect();
            TraceSeries {
                scheme: plan.scheme,
                deadline: cell.deadline,
                lambda: cell.lambda,
                agents: plan.agents,
                runs,
                points,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schemes: Vec<Scheme>) -> ExperimentConfig {
        ExperimentConfig {
            schemes,
            groups: 3,
            deadlines: vec![1, 2],
            slots: 4_000,
            fsra_slots: 4_000,
            window: 2_000,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_round_trips_through_toml() {
        let config = ExperimentConfig::default();
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), config);
    }

    #[test]
    fn shipped_example_config_parses() {
        let config = ExperimentConfig::from_toml(include_str!("../../../../configs/example.toml")).unwrap();
        assert_eq!(config.schemes, vec![Scheme::Fsqa, Scheme::Fsra]);
        assert_eq!(config.deadlines, vec![2, 3, 4, 5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("slotz = 10").unwrap_err();
        assert!(matches!(err, HarnessError::Toml(_)), "{err}");
        let err = ExperimentConfig::from_toml("[params]\np_b = 0.5\np_x = 1").unwrap_err();
        assert!(matches!(err, HarnessError::Toml(_)), "{err}");
    }

    #[test]
    fn window_longer_than_run_is_rejected() {
        let err =
            ExperimentConfig::from_toml("slots = 10\nfsra_slots = 10\nwindow = 11").unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let config = ExperimentConfig::from_toml(
            r#"
            schemes = ["FSRA", "TSRA"]
            deadlines = [2, 3]
            [params]
            p_b = 0.5
            p_b_prime = 0.4
            p_s = 0.7
            p_s_prime = 0.6
            p_t = 0.4
            "#,
        )
        .unwrap();
        assert_eq!(config.schemes, vec![Scheme::Fsra, Scheme::Tsra]);
        assert_eq!(config.params, Some(Probabilities::REFERENCE));
        assert_eq!(config.window, ExperimentConfig::default().window);
    }

    #[test]
    fn upper_bound_needs_the_two_user_bernoulli_system() {
        let mut config = small(vec![Scheme::Tsra]);
        config.upper_bound = true;
        config.validate().unwrap();
        config.deadlines = vec![7];
        assert!(matches!(
            config.validate(),
            Err(HarnessError::Mdp(MdpError::Deadline(7)))
        ));
        config.deadlines = vec![2];
        config.user1_lambdas = vec![0.5];
        assert!(config.validate().is_err());
    }

    #[test]
    fn invalid_params_fail_before_stepping() {
        let config = small(vec![Scheme::Tsra]);
        let mut params = SystemParams::reference(2);
        params.p_t = 1.5;
        assert!(matches!(
            run_single(&config, Scheme::Tsra, &params, 1),
            Err(HarnessError::Traffic(_))
        ));
        let err = run_single(&config, Scheme::Fsqa, &SystemParams::reference(40), 1).unwrap_err();
        assert!(matches!(
            err,
            HarnessError::Agent(AgentError::DeadlineTooLarge(40))
        ));
    }

    #[test]
    fn same_seed_same_record() {
        let config = small(vec![Scheme::Tsra]);
        let params = SystemParams::reference(3);
        let a = run_single(&config, Scheme::Fsra, &params, 9).unwrap();
        let b = run_single(&config, Scheme::Fsra, &params, 9).unwrap();
        assert_eq!(a, b);
        let c = run_single(&config, Scheme::Fsra, &params, 10).unwrap();
        assert_ne!(a.throughput, c.throughput);
    }

    #[test]
    fn zero_groups_is_an_empty_sweep() {
        let mut config = small(vec![Scheme::Tsra, Scheme::Fsra]);
        config.groups = 0;
        assert!(sweep(&config).unwrap().is_empty());
        assert!(means(&[]).is_empty());
    }

    #[test]
    fn sweep_pairs_parameters_across_schemes() {
        let config = small(vec![Scheme::Fsqa, Scheme::Tsra]);
        let records = sweep(&config).unwrap();
        assert_eq!(records.len(), 2 * 3 * 2);
        for pair in records.chunks(2) {
            assert_eq!(pair[0].params, pair[1].params);
            assert_eq!(pair[0].seed, pair[1].seed);
            assert_eq!(pair[0].method, Method::Scheme(Scheme::Fsqa));
            assert_eq!(pair[1].method, Method::Scheme(Scheme::Tsra));
        }
        assert_ne!(records[0].params, records[2].params);
        for r in &records {
            assert!((0.0..=1.0).contains(&r.throughput));
            let p = r.params;
            for v in [p.p_b, p.p_b_prime, p.p_s, p.p_s_prime, p.p_t] {
                assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let mut config = small(vec![Scheme::Hsra, Scheme::Tsra]);
        config.jobs = Some(1);
        let sequential = sweep(&config).unwrap();
        config.jobs = Some(4);
        assert_eq!(sweep(&config).unwrap(), sequential);
    }

    #[test]
    fn upper_bound_rows_dominate_at_d1() {
        let mut config = small(vec![Scheme::Tsra]);
        config.deadlines = vec![1];
        config.upper_bound = true;
        let records = sweep(&config).unwrap();
        for pair in records.chunks(2) {
            assert_eq!(pair[1].method, Method::UpperBound);
            assert!(pair[1].throughput <= 1.0);
            assert!(pair[1].throughput > 0.0);
        }
    }

    #[test]
    fn means_group_by_method_and_deadline() {
        let config = small(vec![Scheme::Tsra]);
        let records = sweep(&config).unwrap();
        let rows = means(&records);
        assert_eq!(rows.len(), 2);
        let d1: Vec<f64> = records
            .iter()
            .filter(|r| r.deadline() == 1)
            .map(|r| r.throughput)
            .collect();
        let expected = d1.iter().sum::<f64>() / 3.0;
        assert!(
            (mean_of(&rows, Method::Scheme(Scheme::Tsra), 1).unwrap() - expected).abs() < 1e-15
        );
    }

    #[test]
    fn aloha_only_trace_is_flat() {
        let config = ExperimentConfig {
            schemes: vec![Scheme::Aloha],
            deadlines: vec![2],
            slots: 200_000,
            window: 100_000,
            checkpoint: 20_000,
            trace_window: 20_000,
            ..ExperimentConfig::default()
        };
        let series = convergence_trace(&config).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].points.len(), 10);
        let values: Vec<f64> = series[0].points.iter().map(|p| p.1).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        // ALOHA alone, D = 2: binomial noise over 20k slots is about 0.0035.
        for v in values {
            assert!((v - mean).abs() < 0.015, "{v} vs {mean}");
        }
    }

    #[test]
    fn trace_window_counts_only_recent_slots() {
        let plan = RunPlan {
            scheme: Scheme::Aloha,
            params: Probabilities {
                p_b: 1.0,
                p_b_prime: 1.0,
                p_s: 1.0,
                p_s_prime: 1.0,
                p_t: 1.0,
            }
            .with_deadlines(1, 1),
            aloha_users: 1,
            agents: 0,
            slots: 50,
            window: 10,
            reward_offset: 0.0,
            seed: 3,
            checkpoints: Some((7, 5)),
            keep_policy: false,
        };
        let record = run_plan(&plan).unwrap();
        assert_eq!(record.throughput, 1.0);
        assert_eq!(record.trace.len(), 7);
        assert!(record.trace.iter().all(|&(t, v)| t % 7 == 0 && v == 1.0));
    }
}
