//! Regret, constraint violation, comparator sequences and the theoretical
//! bound calculator.

mod bounds;
mod constants;
mod oracle;

pub use bounds::{theoretical_bounds, BoundInputs, Bounds};
pub use constants::{estimate_constants, TheoreticalConstants};
pub use oracle::{
    dynamic_optimum, estimate_slater_margin, solve_round, static_optimum, stationarity_residual,
    DynamicOptimum,
    OptimumSource, OracleOptions, OracleSolution,
};

use ndarray::Array1;

use crate::algorithm::DynamicMapping;
use crate::error::{check_len, Error, Result};
use crate::problem::{global_constraint, global_objective, OnlineProblem};

/// Feasibility slack allowed for comparators.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Decisions of all agents, indexed `[t - 1][i]`.
pub type Sequence = Vec<Vec<Array1<f64>>>;

/// `sum_t (cost_t - comparator_t)`.
pub fn regret_from_costs(costs: &[f64], comparator_costs: &[f64]) -> Result<f64> {
    check_len(costs.len(), comparator_costs.len(), "comparator horizon")?;
    Ok(costs
        .iter()
        .zip(comparator_costs)
        .map(|(a, b)| a - b)
        .sum())
}

/// `|| [sum_t g_t]_+ ||`.
pub fn violation_from_sums(sums: &[Array1<f64>]) -> f64 {
    let Some(first) = sums.first() else {
        return 0.0;
    };
    let mut total = Array1::<f64>::zeros(first.len());
    for s in sums {
        total += s;
    }
    total.mapv(|v| v.max(0.0).powi(2)).sum().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparatorKind {
    DynamicOptimal,
    StaticOptimal,
    Reference,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorSequence {
    pub kind: ComparatorKind,
    /// `points[t - 1][i]`.
    pub points: Sequence,
}

impl ComparatorSequence {
    /// The same point in every round.
    pub fn constant(kind: ComparatorKind, point: Vec<Array1<f64>>, horizon: usize) -> Self {
        ComparatorSequence {
            kind,
            points: vec![point; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    /// Every round lies in the domains and satisfies `sum_i g_{i,t} <= 1e-9`.
    pub fn check_feasible<P: OnlineProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        for (k, round) in self.points.iter().enumerate() {
            let t = k + 1;
            for (i, y) in round.iter().enumerate() {
                if !problem.domain(i).contains(y.view()) {
                    return Err(Error::Infeasible(format!(
                        "comparator of agent {i} leaves the domain in round {t}"
                    )));
                }
            }
            let g = global_constraint(problem, t, round)?;
            if let Some(v) = g.iter().find(|v| **v > FEASIBILITY_TOL) {
                return Err(Error::Infeasible(format!(
                    "comparator violates a coupled constraint by {v} in round {t}"
                )));
            }
        }
        Ok(())
    }
}

fn check_horizon(decisions: &Sequence, comparator: &ComparatorSequence) -> Result<()> {
    if decisions.len() != comparator.horizon() {
        return Err(Error::InvalidParameter(format!(
            "trajectory has {} rounds, comparator {}",
            decisions.len(),
            comparator.horizon()
        )));
    }
    Ok(())
}

/// Per-round global objective values `f_t(x_t)`.
pub fn objective_series<P: OnlineProblem + ?Sized>(problem: &P, decisions: &Sequence) -> Result<Vec<f64>> {
    decisions
        .iter()
        .enumerate()
        .map(|(k, xs)| global_objective(problem, k + 1, xs))
        .collect()
}

/// Per-round coupled constraint sums `g_t(x_t)`.
pub fn constraint_series<P: OnlineProblem + ?Sized>(
    problem: &P,
    decisions: &Sequence,
) -> Result<Vec<Array1<f64>>> {
    decisions
        .iter()
        .enumerate()
        .map(|(k, xs)| global_constraint(problem, k + 1, xs))
        .collect()
}

/// Regret of `decisions` against a feasible comparator.
pub fn regret<P: OnlineProblem + ?Sized>(
    problem: &P,
    decisions: &Sequence,
    comparator: &ComparatorSequence,
) -> Result<f64> {
    check_horizon(decisions, comparator)?;
    comparator.check_feasible(problem)?;
    regret_from_costs(
        &objective_series(problem, decisions)?,
        &objective_series(problem, &comparator.points)?,
    )
}

pub fn constraint_violation<P: OnlineProblem + ?Sized>(problem: &P, decisions: &Sequence) -> Result<f64> {
    Ok(violation_from_sums(&constraint_series(problem, decisions)?))
}

/// Cumulative regret and violation after every round.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeSeries {
    pub regret: Vec<f64>,
    pub violation: Vec<f64>,
}

pub fn cumulative_series<P: OnlineProblem + ?Sized>(
    problem: &P,
    decisions: &Sequence,
    comparator: &ComparatorSequence,
) -> Result<CumulativeSeries> {
    check_horizon(decisions, comparator)?;
    comparator.check_feasible(problem)?;
    let costs = objective_series(problem, decisions)?;
    let best = objective_series(problem, &comparator.points)?;
    let sums = constraint_series(problem, decisions)?;
    let mut regret = Vec::with_capacity(costs.len());
    let mut violation = Vec::with_capacity(costs.len());
    let mut r = 0.0;
    let mut total = Array1::<f64>::zeros(problem.constraints());
    for ((c, b), g) in costs.iter().zip(&best).zip(&sums) {
        r += c - b;
        total += g;
        regret.push(r);
        violation.push(total.mapv(|v| v.max(0.0).powi(2)).sum().sqrt());
    }
    Ok(CumulativeSeries { regret, violation })
}

/// `sum_t sum_i || y_{i,t+1} - Phi_{i,t+1}(y_{i,t}) ||`.
pub fn accumulated_variation(comparator: &ComparatorSequence, mapping: &DynamicMapping) -> Result<f64> {
    let mut total = 0.0;
    for (k, pair) in comparator.points.windows(2).enumerate() {
        let t_next = k + 2;
        for (i, (cur, next)) in pair[0].iter().zip(&pair[1]).enumerate() {
            let predicted = mapping.apply(i, t_next, cur.view())?;
            let d = next - &predicted;
            total += d.dot(&d).sqrt();
        }
    }
    Ok(total)
}

pub fn accumulated_variation_identity(comparator: &ComparatorSequence) -> Result<f64> {
    accumulated_variation(comparator, &DynamicMapping::Identity)
}
