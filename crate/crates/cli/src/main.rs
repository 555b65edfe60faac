//! Command-line front end: single runs, sweeps, LP bounds, traces and policy dumps.

use std::error::Error;
use std::fs::{self, File};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use timely_access::agents::Scheme;
use timely_access::harness::output::{self, format_sig, SIGNIFICANT_DIGITS};
use timely_access::harness::{self, presets, ExperimentConfig, Method, Probabilities};
use timely_access::mdp::{self, TransitionModel};
use timely_access::Simplex;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "timely-access",
    version,
    about = "Deadline-aware random access experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme once and report its throughput.
    Run(Common),
    /// Paired sweep over random parameter groups; writes summary.csv and means.csv.
    Sweep(Common),
    /// Solve the genie LP upper bound; writes bound.csv and the genie policy.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Also dump every nonzero transition probability.
        #[arg(long)]
        transitions: bool,
    },
    /// Convergence traces; writes trace.csv.
    Trace(Common),
    /// Train one scheme (or solve the genie LP with `--scheme UB`) and write policy.csv.
    Policy(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset instead of a config file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated schemes; `UB` selects the LP upper bound.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// Slot budget for every scheme, FSRA included.
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    window: Option<u64>,
    /// Comma-separated agent deadlines.
    #[arg(long, value_delimiter = ',')]
    deadline: Vec<u32>,
    #[arg(long)]
    groups: Option<usize>,
}

impl Common {
    /// Loads the config or preset parts and applies the overrides.
    fn configs(&self) -> Result<Vec<(String, ExperimentConfig)>> {
        let parts = match (&self.config, &self.preset) {
            (Some(path), _) => vec![(String::new(), ExperimentConfig::load(path)?)],
            (None, Some(name)) => presets::by_name(name).ok_or_else(|| {
                format!(
                    "unknown preset `{name}`; known presets: {}",
                    presets::NAMES.join(", ")
                )
            })?,
            (None, None) => vec![(String::new(), ExperimentConfig::default())],
        };
        let multi = parts.len() > 1;
        parts
            .into_iter()
            .map(|(label, mut c)| {
                self.apply(&mut c)?;
                if multi {
                    c.out = c.out.join(&label);
                }
                c.validate()?;
                Ok((label, c))
            })
            .collect()
    }

    fn apply(&self, c: &mut ExperimentConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(out) = &self.out {
            c.out = out.clone();
        }
        if self.jobs.is_some() {
            c.jobs = self.jobs;
        }
        if !self.scheme.is_empty() {
            c.schemes.clear();
            c.upper_bound = false;
            for name in &self.scheme {
                if name.eq_ignore_ascii_case("UB") {
                    c.upper_bound = true;
                } else {
                    c.schemes.push(name.parse::<Scheme>()?);
                }
            }
        }
        if let Some(slots) = self.slots {
            c.slots = slots;
            c.fsra_slots = slots;
            if self.window.is_none() {
                c.window = c.window.min(slots);
            }
        }
        if let Some(window) = self.window {
            c.window = window;
        }
        if !self.deadline.is_empty() {
            c.deadlines = self.deadline.clone();
        }
        if let Some(groups) = self.groups {
            c.groups = groups;
        }
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    format_sig(x, SIGNIFICANT_DIGITS)
}

fn run(common: &Common) -> Result<()> {
    for (_, c) in common.configs()? {
        let probs = c.params.unwrap_or(Probabilities::REFERENCE);
        let mut records = Vec::new();
        for &d in &c.deadlines {
            let cell = harness::Cell {
                deadline: d,
                lambda: c.user1_lambdas.first().copied(),
                agents: c.agent_counts[0],
            };
            let params = ExperimentConfig {
                params: Some(probs),
                ..c.clone()
            }
            .group_params(&cell, c.seed);
            for &scheme in &c.schemes {
                let r = harness::run_single(&c, scheme, &params, c.seed)?;
                println!(
                    "{scheme} D={d} throughput={}{}",
                    fmt(r.throughput),
                    r.rho
                        .map(|rho| format!(" rho={}", fmt(rho)))
                        .unwrap_or_default()
                );
                records.push(r);
            }
        }
        fs::create_dir_all(&c.out)?;
        output::write_summary(
            File::create(c.out.join("summary.csv"))?,
            &output::summary_rows(&records),
        )?;
    }
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    for (label, c) in common.configs()? {
        let records = harness::sweep(&c)?;
        output::write_sweep(&c.out, &records)?;
        if !label.is_empty() {
            println!("[{label}]");
        }
        for m in harness::means(&records) {
            println!(
                "{:<5} D={:<2} agents={} lambda={} groups={} mean={} se={}",
                m.method.to_string(),
                m.deadline,
                m.agents,
                m.lambda.map(fmt).unwrap_or_else(|| "-".into()),
                m.groups,
                fmt(m.mean),
                fmt(m.std_error)
            );
        }
        println!("wrote {}", c.out.display());
    }
    Ok(())
}

fn bound(common: &Common, transitions: bool) -> Result<()> {
    for (_, c) in common.configs()? {
        let probs = c.params.unwrap_or(Probabilities::REFERENCE);
        fs::create_dir_all(&c.out)?;
        let mut w = csv::Writer::from_path(c.out.join("bound.csv"))?;
        w.write_record(["D", "objective", "max_residual", "closed_form_d1"])?;
        for &d in &c.deadlines {
            let params = probs.with_deadlines(d, d);
            let ub = mdp::upper_bound(&params, &Simplex::default())?;
            let closed = (d == 1).then(|| mdp::d1_optimal(&params).1);
            println!("D={d} upper bound {}", fmt(ub.objective));
            w.write_record([
                d.to_string(),
                fmt(ub.objective),
                fmt(ub.max_residual),
                closed.map(fmt).unwrap_or_default(),
            ])?;
            output::write_policy(
                File::create(c.out.join(format!("policy_D{d}.csv")))?,
                &ub.policy.rows(),
            )?;
            if transitions {
                let model = TransitionModel::<f64>::build(&params)?;
                output::write_transitions(
                    File::create(c.out.join(format!("transitions_D{d}.csv")))?,
                    &model,
                )?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn trace(common: &Common) -> Result<()> {
    for (_, c) in common.configs()? {
        let series = harness::convergence_trace(&c)?;
        fs::create_dir_all(&c.out)?;
        output::write_trace(File::create(c.out.join("trace.csv"))?, &series)?;
        for s in &series {
            let last = s.points.last().map(|p| fmt(p.1)).unwrap_or_default();
            println!(
                "{} D={} final windowed throughput {last}",
                s.scheme, s.deadline
            );
        }
        println!("wrote {}", c.out.join("trace.csv").display());
    }
    Ok(())
}

fn policy(common: &Common) -> Result<()> {
    for (_, c) in common.configs()? {
        let probs = c.params.unwrap_or(Probabilities::REFERENCE);
        let d = c.deadlines[0];
        let params = probs.with_deadlines(c.user1_deadline.unwrap_or(d), d);
        let (method, rows) = match c.schemes.first() {
            Some(&scheme) if !c.upper_bound => {
                let c = ExperimentConfig {
                    keep_policy: true,
                    ..c.clone()
                };
                let r = harness::run_single(&c, scheme, &params, c.seed)?;
                let rows = r
                    .policy
                    .ok_or_else(|| format!("{scheme} has no learned policy"))?;
                (Method::Scheme(scheme), rows)
            }
            _ => (
                Method::UpperBound,
                mdp::upper_bound(&params, &Simplex::default())?
                    .policy
                    .rows(),
            ),
        };
        fs::create_dir_all(&c.out)?;
        output::write_policy(File::create(c.out.join("policy.csv"))?, &rows)?;
        println!(
            "{method} D={d}: wrote {} states to {}",
            rows.len(),
            c.out.join("policy.csv").display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Run(c) => run(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Bound {
            common,
            transitions,
        } => bound(&common, transitions),
        Command::Trace(c) => trace(&c),
        Command::Policy(c) => policy(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
