//! Time-varying communication graphs and dual consensus mixing.
//!
//! Edges are directed pairs `(from, to)` with 0-based agent indices; `(j, i)`
//! means agent `i` receives from agent `j`, matching `[W]_{ij} > 0`.
//! Round `k` of a sequence holds `W_k`; the engine mixes with `W_{t-1}` in
//! round `t`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Edge = (usize, usize);

/// Tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Weights of the undirected experiment protocol: `1/n` on every edge and the
/// remainder on the diagonal.
pub fn build_weights(edges: &[Edge], n: usize) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Graph("no agents".into()));
    }
    let set: BTreeSet<Edge> = edges.iter().copied().collect();
    for &(j, i) in &set {
        if j >= n || i >= n {
            return Err(Error::Graph(format!("edge ({j}, {i}) out of range for {n} agents")));
        }
        if i == j {
            return Err(Error::Graph(format!("self-loop on agent {i} must not be listed")));
        }
        if !set.contains(&(i, j)) {
            return Err(Error::Graph(format!(
                "edge ({j}, {i}) has no reverse; the protocol needs undirected edges"
            )));
        }
    }
    let off = 1.0 / n as f64;
    let mut w = Array2::zeros((n, n));
    let mut degree = vec![0usize; n];
    for &(j, i) in &set {
        w[[i, j]] = off;
        degree[i] += 1;
    }
    for (i, &deg) in degree.iter().enumerate() {
        if deg >= n {
            return Err(Error::Graph(format!("agent {i} has {deg} neighbors")));
        }
        // (n - deg) / n is correctly rounded, so it never drops below 1/n
        w[[i, i]] = (n - deg) as f64 / n as f64;
    }
    Ok(w)
}

/// Per-round edge sets with their doubly stochastic weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CommGraphSequence {
    n: usize,
    rounds: Vec<Vec<Edge>>,
    weights: Vec<Array2<f64>>,
    weight_floor: f64,
    window: usize,
}

impl CommGraphSequence {
    /// Builds every round with [`build_weights`].
    pub fn from_edges(n: usize, rounds: Vec<Vec<Edge>>, window: usize) -> Result<Self> {
        let weights = rounds
            .iter()
            .map(|e| build_weights(e, n))
            .collect::<Result<Vec<_>>>()?;
        let rounds = rounds
            .into_iter()
            .map(|e| e.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        Ok(CommGraphSequence {
            n,
            rounds,
            weights,
            weight_floor: 1.0 / n as f64,
            window: window.max(1),
        })
    }

    /// General directed weights; edges are read off the positive off-diagonal
    /// entries and the floor is the smallest positive entry.
    pub fn from_weights(weights: Vec<Array2<f64>>, window: usize) -> Result<Self> {
        let n = weights
            .first()
            .map(|w| w.nrows())
            .ok_or_else(|| Error::Graph("empty weight sequence".into()))?;
        let mut floor = f64::INFINITY;
        let mut rounds = Vec::with_capacity(weights.len());
        for w in &weights {
            if w.dim() != (n, n) {
                return Err(Error::Graph(format!(
                    "weight matrix of shape {:?}, expected ({n}, {n})",
                    w.dim()
                )));
            }
            let mut edges = Vec::new();
            for ((i, j), &v) in w.indexed_iter() {
                if v > 0.0 {
                    floor = floor.min(v);
                    if i != j {
                        edges.push((j, i));
                    }
                }
            }
            edges.sort_unstable();
            rounds.push(edges);
        }
        Ok(CommGraphSequence {
            n,
            rounds,
            weights,
            weight_floor: floor,
            window: window.max(1),
        })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn edges(&self, k: usize) -> &[Edge] {
        &self.rounds[k]
    }

    pub fn weights(&self, k: usize) -> &Array2<f64> {
        &self.weights[k]
    }

    pub fn all_weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    /// Reported weight floor `w`.
    pub fn weight_floor(&self) -> f64 {
        self.weight_floor
    }

    /// Reported joint-connectivity window `iota`.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Line-oriented text form; weights are not stored.
    ///
    /// ```text
    /// graph-sequence v1
    /// agents 3
    /// round 0
    /// 1 2
    /// 2 1
    /// round 1
    /// ```
    /// Edge lines are `from to` with 1-based agents.
    pub fn to_text(&self) -> String {
        let mut out = format!("graph-sequence v1\nagents {}\n", self.n);
        for (k, edges) in self.rounds.iter().enumerate() {
            out.push_str(&format!("round {k}\n"));
            for (j, i) in edges {
                out.push_str(&format!("{} {}\n", j + 1, i + 1));
            }
        }
        out
    }

    /// Parses [`CommGraphSequence::to_text`] output and rebuilds the weights.
    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Graph(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
        match lines.next() {
            Some((_, "graph-sequence v1")) => {}
            _ => return Err(err(1, "missing header `graph-sequence v1`")),
        }
        let n = match lines.next() {
            Some((no, l)) => l
                .strip_prefix("agents ")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| err(no, "expected `agents N`"))?,
            None => return Err(err(2, "truncated before agent count")),
        };
        let mut rounds: Vec<Vec<Edge>> = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(k) = line.strip_prefix("round ") {
                let k: usize = k.parse().map_err(|_| err(no, "bad round index"))?;
                if k != rounds.len() {
                    return Err(err(no, &format!("expected round {}, found {k}", rounds.len())));
                }
                rounds.push(Vec::new());
                continue;
            }
            let current = rounds
                .last_mut()
                .ok_or_else(|| err(no, "edge before the first round"))?;
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .and_then(|v| v.parse::<usize>().ok())
                    .filter(|v| *v >= 1 && *v <= n)
                    .ok_or_else(|| err(no, "expected `from to` with 1-based agents"))
            };
            let (j, i) = (next()?, next()?);
            current.push((j - 1, i - 1));
        }
        Self::from_edges(n, rounds, 1)
    }
}

/// Random undirected graph per round with the path backbone `(i, i+1)` always
/// present; each remaining pair is connected with probability `rho`.
pub fn generate_graph_sequence(
    n: usize,
    rho: f64,
    rounds: usize,
    seed: u64,
) -> Result<CommGraphSequence> {
    if n == 0 {
        return Err(Error::InvalidParameter("graph needs at least one agent".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "connection probability {rho} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let draw = rng.random::<f64>() < rho;
                if draw || j == i + 1 {
                    edges.push((i, j));
                    edges.push((j, i));
                }
            }
        }
        all.push(edges);
    }
    CommGraphSequence::from_edges(n, all, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Column,
}

/// First failure found by [`check_assumption1`].
#[derive(Debug, Clone, PartialEq)]
pub enum GraphViolation {
    NotDoublyStochastic {
        round: usize,
        axis: Axis,
        index: usize,
        sum: f64,
    },
    BelowWeightFloor {
        round: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    MissingSelfWeight {
        round: usize,
        agent: usize,
    },
    NotJointlyConnected {
        start: usize,
        window: usize,
    },
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::NotDoublyStochastic {
                round,
                axis,
                index,
                sum,
            } => write!(f, "round {round}: {axis:?} {index} sums to {sum}"),
            GraphViolation::BelowWeightFloor {
                round,
                row,
                col,
                value,
            } => write!(f, "round {round}: weight [{row},{col}] = {value} below the floor"),
            GraphViolation::MissingSelfWeight { round, agent } => {
                write!(f, "round {round}: agent {agent} has no self weight")
            }
            GraphViolation::NotJointlyConnected { start, window } => write!(
                f,
                "union of rounds {start}..{} is not strongly connected",
                start + window
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphReport {
    pub rounds_checked: usize,
    pub window: usize,
    pub weight_floor: f64,
    pub violation: Option<GraphViolation>,
}

impl GraphReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn strongly_connected(n: usize, adjacency: &[Vec<usize>], reverse: &[Vec<usize>]) -> bool {
    let reach = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(adjacency) && reach(reverse)
}

/// Verifies double stochasticity, the weight floor and strong connectivity of
/// every `window`-round union. Returns the first violation found.
pub fn check_assumption1(seq: &CommGraphSequence, window: usize, floor: f64) -> GraphReport {
    let n = seq.agents();
    let window = window.max(1);
    let report = |violation| GraphReport {
        rounds_checked: seq.len(),
        window,
        weight_floor: floor,
        violation,
    };
    for (k, w) in seq.all_weights().iter().enumerate() {
        for (axis, sums) in [(Axis::Row, w.sum_axis(ndarray::Axis(1))), (Axis::Column, w.sum_axis(ndarray::Axis(0)))] {
            if let Some((index, &sum)) = sums
                .iter()
                .enumerate()
                .find(|(_, s)| !((**s - 1.0).abs() <= STOCHASTIC_TOL))
            {
                return report(Some(GraphViolation::NotDoublyStochastic {
                    round: k,
                    axis,
                    index,
                    sum,
                }));
            }
        }
        for i in 0..n {
            if !(w[[i, i]] > 0.0) {
                return report(Some(GraphViolation::MissingSelfWeight { round: k, agent: i }));
            }
        }
        if let Some(((row, col), &value)) = w
            .indexed_iter()
            .find(|(_, v)| **v != 0.0 && !(**v >= floor))
        {
            return report(Some(GraphViolation::BelowWeightFloor {
                round: k,
                row,
                col,
                value,
            }));
        }
    }
    let starts: Vec<usize> = if seq.len() >= window {
        (0..=seq.len() - window).collect()
    } else {
        vec![0]
    };
    for start in starts {
        let mut adj = vec![Vec::new(); n];
        let mut rev = vec![Vec::new(); n];
        for w in seq.all_weights().iter().skip(start).take(window) {
            for ((i, j), &v) in w.indexed_iter() {
                if v > 0.0 && i != j {
                    adj[j].push(i);
                    rev[i].push(j);
                }
            }
        }
        if !strongly_connected(n, &adj, &rev) {
            return report(Some(GraphViolation::NotJointlyConnected { start, window }));
        }
    }
    report(None)
}

/// Consensus step `q~_i = sum_j W_ij q_j`.
pub fn mix_duals(w: &Array2<f64>, duals: &[Array1<f64>]) -> Result<Vec<Array1<f64>>> {
    let n = duals.len();
    if w.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.nrows(),
            context: "mixing matrix vs dual count",
        });
    }
    let m = duals.first().map_or(0, |q| q.len());
    if let Some(q) = duals.iter().find(|q| q.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: q.len(),
            context: "dual vector length",
        });
    }
    Ok((0..n)
        .map(|i| {
            let mut acc = Array1::zeros(m);
            for (j, q) in duals.iter().enumerate() {
                let wij = w[[i, j]];
                if wij != 0.0 {
                    acc.scaled_add(wij, q);
                }
            }
            acc
        })
        .collect())
}
