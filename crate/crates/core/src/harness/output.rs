//! CSV tables. Every float is printed with six significant digits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::PolicyRow;
use crate::channel::Action;
use crate::mdp::{FullMdpState, TransitionModel};
use crate::scalar::Real;

use super::{ExperimentRecord, HarnessError, MeanRow, TraceSeries};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value a CSV reader gets back for `x`.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x, SIGNIFICANT_DIGITS).parse().unwrap_or(x)
}

fn fmt(x: f64) -> String {
    format_sig(x, SIGNIFICANT_DIGITS)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    #[serde(rename = "D")]
    pub deadline: u32,
    pub group: usize,
    pub seed: u64,
    pub throughput: f64,
    /// Poisson rate of the ALOHA users, if any.
    pub lambda: Option<f64>,
    pub agents: usize,
}

impl SummaryRow {
    /// Summary line with floats already rounded to what the CSV holds.
    pub fn from_record(r: &ExperimentRecord) -> Self {
        Self {
            scheme: r.method.to_string(),
            deadline: r.deadline(),
            group: r.group,
            seed: r.seed,
            throughput: round_sig(r.throughput),
            lambda: r.params.lambda.map(round_sig),
            agents: r.agents,
        }
    }
}

pub fn summary_rows(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    records.iter().map(SummaryRow::from_record).collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "D",
        "group",
        "seed",
        "throughput",
        "lambda",
        "agents",
    ])?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.deadline.to_string(),
            r.group.to_string(),
            r.seed.to_string(),
            fmt(r.throughput),
            fmt_opt(r.lambda),
            r.agents.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

pub fn write_means<W: Write>(out: W, rows: &[MeanRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "D",
        "lambda",
        "agents",
        "groups",
        "mean",
        "std_error",
    ])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.deadline.to_string(),
            fmt_opt(r.lambda),
            r.agents.to_string(),
            r.groups.to_string(),
            fmt(r.mean),
            fmt(r.std_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of `trace.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub scheme: String,
    #[serde(rename = "D")]
    pub deadline: u32,
    pub slot: u64,
    pub throughput: f64,
}

pub fn write_trace<W: Write>(out: W, series: &[TraceSeries]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scheme", "D", "slot", "throughput"])?;
    for s in series {
        for &(slot, v) in &s.points {
            w.write_record([
                s.scheme.to_string(),
                s.deadline.to_string(),
                slot.to_string(),
                fmt(v),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

/// `policy.csv`: decoded state, action, transmit probability, q-values, rho.
pub fn write_policy<W: Write>(out: W, rows: &[PolicyRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "aloha_queue",
        "queue",
        "obs",
        "action",
        "p_transmit",
        "q_wait",
        "q_transmit",
        "rho",
    ])?;
    for r in rows {
        w.write_record([
            r.aloha_queue.clone().unwrap_or_default(),
            r.queue.clone(),
            r.obs.code().to_string(),
            r.action.as_str().to_string(),
            fmt(r.p_transmit),
            fmt_opt(r.q_wait),
            fmt_opt(r.q_transmit),
            fmt_opt(r.rho),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Every nonzero transition as `state,action,next,probability`, states decoded.
pub fn write_transitions<W: Write, R: Real>(
    out: W,
    model: &TransitionModel<R>,
) -> Result<(), HarnessError> {
    let d = model.deadline();
    let show = |s: usize| {
        let st = FullMdpState::from_index(s, d);
        format!(
            "{}|{}|{}",
            crate::agents::format_bits(st.l1 as u64, d),
            crate::agents::format_bits(st.l2 as u64, d),
            st.o.code()
        )
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "action", "next", "probability"])?;
    for (s, a, next, p) in model.entries() {
        w.write_record([show(s), a.as_str().to_string(), show(next), fmt(p.as_f64())])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv` and `means.csv` into `dir`.
pub fn write_sweep(dir: &Path, records: &[ExperimentRecord]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_summary(
        File::create(dir.join("summary.csv"))?,
        &summary_rows(records),
    )?;
    write_means(File::create(dir.join("means.csv"))?, &super::means(records))?;
    Ok(())
}

/// Parses an action as written by the policy table.
pub fn parse_action(s: &str) -> Option<Action> {
    Action::ALL.into_iter().find(|a| a.as_str() == s)
}
