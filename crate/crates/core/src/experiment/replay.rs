use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use super::run::simulate;
use super::ExperimentError;
use crate::algorithm::Trace;
use crate::problem::{load_trace, TraceError, TrackingInstance};

const TOLERANCE: f64 = 1e-12;

fn header(dim: usize, m: usize) -> String {
    let mut h = String::from("t,i,alpha,beta,gamma");
    for j in 1..=dim {
        let _ = write!(h, ",x_{j}");
    }
    for k in 1..=m {
        let _ = write!(h, ",q_{k}");
    }
    h
}

/// One row per round and agent: step sizes, decision and dual. Agents are
/// 1-based.
pub fn rounds_csv(trace: &Trace) -> String {
    let first = &trace.rounds[0][0];
    let mut out = header(first.x.len(), first.q.len());
    out.push('\n');
    for (k, (round, s)) in trace.rounds.iter().zip(&trace.steps).enumerate() {
        for (i, a) in round.iter().enumerate() {
            let _ = write!(out, "{},{},{:?},{:?},{:?}", k + 1, i + 1, s.alpha, s.beta, s.gamma);
            for v in a.x.iter().chain(&a.q) {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}

/// First disagreement between a recorded trace and the re-run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMismatch {
    pub t: usize,
    /// 1-based, as in the file.
    pub agent: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub rows_checked: usize,
    pub mismatch: Option<ReplayMismatch>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Re-runs the config and compares every row of a recorded `rounds.csv`.
///
/// When an `instance.trace` sits next to the recorded file, its data is
/// first compared with the instance the config generates.
pub fn replay(trace_path: impl AsRef<Path>, config: &ExperimentConfig) -> Result<ReplayReport, ExperimentError> {
    let path = trace_path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let sim = simulate(config)?;
    let recorded = path.with_file_name("instance.trace");
    if recorded.exists() {
        let inst = load_trace(&recorded).map_err(|e| match e {
            TraceError::Io(source) => ExperimentError::io(&recorded, source),
            other => ExperimentError::Replay(format!("{}: {other}", recorded.display())),
        })?;
        if let Some(mismatch) = compare_instances(&inst, &sim.instance) {
            return Ok(ReplayReport {
                rows_checked: 0,
                mismatch: Some(mismatch),
            });
        }
    }
    let expected = rounds_csv(&sim.trace);
    Ok(compare(&text, &expected))
}

fn compare_instances(recorded: &TrackingInstance, fresh: &TrackingInstance) -> Option<ReplayMismatch> {
    let (a, b) = (recorded.params(), fresh.params());
    let shape = |p: &crate::problem::TrackingParams| (p.agents, p.constraints, p.dimension, p.horizon);
    let mismatch = |t, agent, detail: &str| {
        Some(ReplayMismatch {
            t,
            agent,
            detail: detail.into(),
        })
    };
    if shape(a) != shape(b) {
        return mismatch(0, 0, "recorded instance has a different shape than the config");
    }
    for (k, (ra, rb)) in recorded.rounds().iter().zip(fresh.rounds()).enumerate() {
        if let Some(i) = ra.iter().zip(rb).position(|(x, y)| x != y) {
            return mismatch(k + 1, i + 1, "recorded instance data differs from the config");
        }
    }
    if a != b {
        return mismatch(0, 0, "recorded instance parameters differ from the config");
    }
    None
}

fn compare(recorded: &str, expected: &str) -> ReplayReport {
    let mut rec = recorded.lines();
    let mut exp = expected.lines();
    let mismatch = |t, agent, detail: String| ReplayMismatch { t, agent, detail };
    let (rh, eh) = (rec.next().unwrap_or(""), exp.next().unwrap_or(""));
    if rh != eh {
        return ReplayReport {
            rows_checked: 0,
            mismatch: Some(mismatch(0, 0, format!("header `{rh}` differs from `{eh}`"))),
        };
    }
    let columns: Vec<&str> = eh.split(',').collect();
    let mut rows = 0;
    for e in exp {
        let ev: Vec<f64> = e.split(',').map(|v| v.parse().expect("own output parses")).collect();
        let (t, agent) = (ev[0] as usize, ev[1] as usize);
        let Some(r) = rec.next() else {
            return ReplayReport {
                rows_checked: rows,
                mismatch: Some(mismatch(t, agent, "trace ends early".into())),
            };
        };
        let fields: Vec<&str> = r.split(',').collect();
        if fields.len() != columns.len() {
            return ReplayReport {
                rows_checked: rows,
                mismatch: Some(mismatch(
                    t,
                    agent,
                    format!("{} fields, expected {}", fields.len(), columns.len()),
                )),
            };
        }
        for ((name, field), want) in columns.iter().zip(&fields).zip(&ev) {
            let ok = match field.trim().parse::<f64>() {
                Ok(got) => close(got, *want),
                Err(_) => false,
            };
            if !ok {
                return ReplayReport {
                    rows_checked: rows,
                    mismatch: Some(mismatch(
                        t,
                        agent,
                        format!("{name} is {field}, re-run gives {want:?}"),
                    )),
                };
            }
        }
        rows += 1;
    }
    if let Some(extra) = rec.find(|l| !l.trim().is_empty()) {
        return ReplayReport {
            rows_checked: rows,
            mismatch: Some(mismatch(0, 0, format!("unexpected trailing row `{extra}`"))),
        };
    }
    ReplayReport {
        rows_checked: rows,
        mismatch: None,
    }
}
