//! Text persistence for tracking instances.
//!
//! ```text
//! pdmd-instance v1
//! agents 1
//! constraints 1
//! dimension 2
//! horizon 2
//! zeta 1 30
//! lambda 1 30
//! box_upper 5
//! slack 0
//! dynamics mixing
//! placement explicit
//! seed 7
//! round 1 agent 1
//! price 2 0
//! target 1 1
//! reference 0.5 0.5
//! offset 1
//! constraint 1 1
//! transition 1 0
//! transition 0 1
//! round 2 agent 1
//! ...
//! ```
//!
//! Rounds and agents are 1-based. `constraint` appears once per constraint row
//! and `transition` once per dimension. Numbers are written in shortest
//! round-trip form, so a save/load cycle is bit-exact. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use thiserror::Error;

use super::tracking::{
    AgentRound, RegularizationPlacement, TargetDynamics, TrackingInstance, TrackingParams,
};

const HEADER: &str = "pdmd-instance v1";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn push_row<'a>(out: &mut String, label: &str, values: impl Iterator<Item = &'a f64>) {
    out.push_str(label);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

pub fn trace_to_string(inst: &TrackingInstance) -> String {
    let p = inst.params();
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "agents {}", p.agents);
    let _ = writeln!(out, "constraints {}", p.constraints);
    let _ = writeln!(out, "dimension {}", p.dimension);
    let _ = writeln!(out, "horizon {}", p.horizon);
    let _ = writeln!(out, "zeta {:?} {:?}", p.zeta[0], p.zeta[1]);
    let _ = writeln!(out, "lambda {:?} {:?}", p.lambda[0], p.lambda[1]);
    let _ = writeln!(out, "box_upper {:?}", p.box_upper);
    let _ = writeln!(out, "slack {:?}", p.slack);
    let dynamics = match p.dynamics {
        TargetDynamics::Mixing => "mixing",
        TargetDynamics::Frozen => "frozen",
    };
    let _ = writeln!(out, "dynamics {dynamics}");
    let placement = match p.placement {
        RegularizationPlacement::Explicit => "explicit",
        RegularizationPlacement::Folded => "folded",
    };
    let _ = writeln!(out, "placement {placement}");
    let _ = writeln!(out, "seed {}", p.seed);
    for (t, round) in inst.rounds().iter().enumerate() {
        for (i, a) in round.iter().enumerate() {
            let _ = writeln!(out, "round {} agent {}", t + 1, i + 1);
            push_row(&mut out, "price", a.price.iter());
            push_row(&mut out, "target", a.target.iter());
            push_row(&mut out, "reference", a.reference.iter());
            push_row(&mut out, "offset", a.offset.iter());
            for row in a.constraint_matrix.rows() {
                push_row(&mut out, "constraint", row.iter());
            }
            for row in a.transition.rows() {
                push_row(&mut out, "transition", row.iter());
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, TraceError> {
        Err(TraceError::Parse {
            line: self.last,
            message: message.into(),
        })
    }

    fn next_line(&mut self) -> Result<&'a str, TraceError> {
        for (k, line) in self.inner.by_ref() {
            self.last = k + 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                return Ok(trimmed);
            }
        }
        self.last += 1;
        self.err("unexpected end of file")
    }

    /// The rest of the next line after `label`.
    fn labeled(&mut self, label: &str) -> Result<&'a str, TraceError> {
        let line = self.next_line()?;
        match line.split_once(char::is_whitespace) {
            Some((head, rest)) if head == label => Ok(rest.trim()),
            _ if line == label => Ok(""),
            _ => self.err(format!("expected `{label}`, found `{line}`")),
        }
    }

    fn scalar<T: std::str::FromStr>(&mut self, label: &str) -> Result<T, TraceError> {
        let rest = self.labeled(label)?;
        match rest.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("bad value `{rest}` for `{label}`")),
        }
    }

    fn row(&mut self, label: &str, len: usize) -> Result<Vec<f64>, TraceError> {
        let rest = self.labeled(label)?;
        let mut values = Vec::with_capacity(len);
        for token in rest.split_whitespace() {
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => return self.err(format!("bad number `{token}` in `{label}`")),
            }
        }
        if values.len() != len {
            return self.err(format!(
                "`{label}` has {} values, expected {len}",
                values.len()
            ));
        }
        Ok(values)
    }

    fn matrix(&mut self, label: &str, rows: usize, cols: usize) -> Result<Array2<f64>, TraceError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.row(label, cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked row by row"))
    }
}

pub fn trace_from_str(text: &str) -> Result<TrackingInstance, TraceError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let header = lines.next_line()?;
    if header != HEADER {
        return lines.err(format!("expected header `{HEADER}`, found `{header}`"));
    }
    let agents: usize = lines.scalar("agents")?;
    let constraints: usize = lines.scalar("constraints")?;
    let dimension: usize = lines.scalar("dimension")?;
    let horizon: usize = lines.scalar("horizon")?;
    let zeta = lines.row("zeta", 2)?;
    let lambda = lines.row("lambda", 2)?;
    let box_upper: f64 = lines.scalar("box_upper")?;
    let slack: f64 = lines.scalar("slack")?;
    let dynamics = match lines.labeled("dynamics")? {
        "mixing" => TargetDynamics::Mixing,
        "frozen" => TargetDynamics::Frozen,
        other => return lines.err(format!("unknown dynamics `{other}`")),
    };
    let placement = match lines.labeled("placement")? {
        "explicit" => RegularizationPlacement::Explicit,
        "folded" => RegularizationPlacement::Folded,
        other => return lines.err(format!("unknown placement `{other}`")),
    };
    let seed: u64 = lines.scalar("seed")?;
    let params = TrackingParams {
        agents,
        constraints,
        dimension,
        horizon,
        zeta: [zeta[0], zeta[1]],
        lambda: [lambda[0], lambda[1]],
        box_upper,
        slack,
        dynamics,
        placement,
        seed,
    };
    if let Err(e) = params.validate() {
        return lines.err(e.to_string());
    }

    let (n, m, p) = (agents, constraints, dimension);
    let mut rounds = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let mut round = Vec::with_capacity(n);
        for i in 1..=n {
            let expected = format!("{t} agent {i}");
            let got = lines.labeled("round")?;
            if got.split_whitespace().ne(expected.split_whitespace()) {
                return lines.err(format!("expected `round {expected}`, found `round {got}`"));
            }
            let price = Array1::from(lines.row("price", p)?);
            let target = Array1::from(lines.row("target", p)?);
            let reference = Array1::from(lines.row("reference", p)?);
            let offset = Array1::from(lines.row("offset", m)?);
            let constraint_matrix = lines.matrix("constraint", m, p)?;
            let transition = lines.matrix("transition", p, p)?;
            round.push(AgentRound {
                price,
                constraint_matrix,
                offset,
                reference,
                target,
                transition,
            });
        }
        rounds.push(round);
    }
    if let Ok(extra) = lines.next_line() {
        return lines.err(format!("trailing content `{extra}`"));
    }
    TrackingInstance::from_parts(params, rounds).map_err(|e| TraceError::Parse {
        line: lines.last,
        message: e.to_string(),
    })
}

pub fn save_trace(inst: &TrackingInstance, path: impl AsRef<Path>) -> Result<(), TraceError> {
    std::fs::write(path, trace_to_string(inst))?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<TrackingInstance, TraceError> {
    let text = std::fs::read_to_string(path)?;
    trace_from_str(&text)
}
