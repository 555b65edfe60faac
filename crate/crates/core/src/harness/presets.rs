//! Named experiment configurations.

use crate::agents::Scheme;

use super::{ExperimentConfig, Probabilities};

/// Rates `0.1, 0.2, …, 1.0`.
fn tenths() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// FSRA against FSQA on random groups, `D = 2..5`.
pub fn fsra_vs_fsqa() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Fsqa, Scheme::Fsra],
        deadlines: (2..=5).collect(),
        ..ExperimentConfig::default()
    }
}

/// TSRA against the genie bound on random groups, `D = 1..3`.
pub fn tsra_vs_bound() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Tsra],
        upper_bound: true,
        deadlines: (1..=3).collect(),
        ..ExperimentConfig::default()
    }
}

/// TSRA against FSRA, `D = 1..5`.
pub fn tsra_vs_fsra() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Fsra, Scheme::Tsra],
        deadlines: (1..=5).collect(),
        ..ExperimentConfig::default()
    }
}

/// TSRA against HSRA, `D = 1..10`.
pub fn tsra_vs_hsra() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Hsra, Scheme::Tsra],
        deadlines: (1..=10).collect(),
        ..ExperimentConfig::default()
    }
}

/// Convergence traces on the reference instance, `D ∈ {10, 20, 30}`.
pub fn tsra_convergence() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Tsra],
        deadlines: vec![10, 20, 30],
        params: Some(Probabilities::REFERENCE),
        slots: 1_000_000,
        checkpoint: 1_000,
        trace_runs: 10,
        ..ExperimentConfig::default()
    }
}

/// ALOHA deadline fixed at 5, agent deadline `1..10`. FSQA is the baseline.
pub fn robustness_case1() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Fsqa, Scheme::Tsra],
        deadlines: (1..=10).collect(),
        user1_deadline: Some(5),
        ..ExperimentConfig::default()
    }
}

/// Poisson ALOHA traffic with rates `0.1..1.0`, both deadlines 2.
pub fn robustness_case2() -> ExperimentConfig {
    ExperimentConfig {
        schemes: vec![Scheme::Fsqa, Scheme::Tsra],
        deadlines: vec![2],
        user1_lambdas: tenths(),
        ..ExperimentConfig::default()
    }
}

/// Poisson ALOHA traffic with ALOHA deadline 4 and agent deadline 2.
pub fn robustness_case3() -> ExperimentConfig {
    ExperimentConfig {
        user1_deadline: Some(4),
        ..robustness_case2()
    }
}

/// Several TSRA agents sharing the channel with several ALOHA users.
///
/// Returns `(label, config)` for `(D, ALOHA users)` in
/// `(5, 3), (7, 2), (10, 1)`, each sweeping one to five agents.
pub fn multi_user() -> Vec<(String, ExperimentConfig)> {
    [(5, 3), (7, 2), (10, 1)]
        .into_iter()
        .map(|(d, aloha)| {
            let config = ExperimentConfig {
                schemes: vec![Scheme::Tsra],
                groups: 10,
                deadlines: vec![d],
                aloha_users: aloha,
                agent_counts: (1..=5).collect(),
                params: Some(Probabilities::REFERENCE),
                ..ExperimentConfig::default()
            };
            (format!("multi-d{d}-aloha{aloha}"), config)
        })
        .collect()
}

pub const NAMES: [&str; 9] = [
    "fsra-fsqa",
    "tsra-bound",
    "tsra-fsra",
    "tsra-hsra",
    "tsra-convergence",
    "case1",
    "case2",
    "case3",
    "multi-user",
];

/// Looks up a preset by name. Multi-config presets return one entry per part.
pub fn by_name(name: &str) -> Option<Vec<(String, ExperimentConfig)>> {
    let single = |config: ExperimentConfig| Some(vec![(name.to_string(), config)]);
    match name {
        "fsra-fsqa" => single(fsra_vs_fsqa()),
        "tsra-bound" => single(tsra_vs_bound()),
        "tsra-fsra" => single(tsra_vs_fsra()),
        "tsra-hsra" => single(tsra_vs_hsra()),
        "tsra-convergence" => single(tsra_convergence()),
        "case1" => single(robustness_case1()),
        "case2" => single(robustness_case2()),
        "case3" => single(robustness_case3()),
        "multi-user" => Some(multi_user()),
        _ => None,
    }
}
