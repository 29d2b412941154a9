//! Online problems with reveal-after-decision semantics.
//!
//! Rounds are numbered `1..=horizon`; agents `0..agents`. Round-`t` data may
//! only be queried by the engine after the round-`t` decision is fixed; the
//! engine enforces that ordering, implementations just answer queries.

mod quadratic;
mod trace;
mod tracking;

pub use quadratic::{QuadraticAffineProblem, QuadraticTerm};
pub use trace::{load_trace, save_trace, trace_from_str, trace_to_string, TraceError};
pub use tracking::{
    generate_instance, AgentRound, RegularizationPlacement, TargetDynamics, TrackingInstance,
    TrackingParams,
};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{check_len, Error, Result};
use crate::geometry::{Domain, RegularizerSpec};

/// Analytic uniform bounds on a problem family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionBounds {
    /// Bound on `|f|`, `|r|` and `||g||` over the domains.
    pub value: f64,
    /// Bound on `||grad f||`, `||grad r||` and `||grad g||` over the domains.
    pub gradient: f64,
    /// Largest `c` with `f(x) >= f(y) + <grad f(y), x - y> + c ||x - y||^2`
    /// for every cost, if positive.
    pub euclidean_modulus: Option<f64>,
}

/// The online problem seen by the agents.
pub trait OnlineProblem: Sync {
    fn agents(&self) -> usize;

    /// Number of coupled constraints `m`.
    fn constraints(&self) -> usize;

    fn horizon(&self) -> usize;

    fn domain(&self, agent: usize) -> &Domain;

    /// `f_{i,t}(x)` and a subgradient.
    fn cost(&self, agent: usize, t: usize, x: ArrayView1<f64>) -> Result<(f64, Array1<f64>)>;

    /// `r_{i,t}`, which the mirror step keeps unlinearized.
    fn regularizer(&self, agent: usize, t: usize) -> RegularizerSpec;

    /// `g_{i,t}(x)` and its Jacobian (`m x p_i`).
    fn constraint(
        &self,
        agent: usize,
        t: usize,
        x: ArrayView1<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)>;

    /// A per-round point the problem claims is optimal, to be audited.
    fn reference_optimum(&self, _t: usize) -> Option<Vec<Array1<f64>>> {
        None
    }

    /// Known linear dynamics `x*_{t+1} = A_{i,t} x*_t` of the optimal sequence.
    fn transition(&self, _agent: usize, _t: usize) -> Option<&Array2<f64>> {
        None
    }

    fn function_bounds(&self) -> Option<FunctionBounds> {
        None
    }
}

/// Data an agent observes about round `t` at its round-`t` decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradients {
    pub cost_grad: Array1<f64>,
    pub reg_grad: Array1<f64>,
    pub constraint_jacobian: Array2<f64>,
    pub constraint_value: Array1<f64>,
}

impl Subgradients {
    /// Round-0 data: `f = r = 0`, `g = 0`.
    pub fn zero(dim: usize, constraints: usize) -> Self {
        Subgradients {
            cost_grad: Array1::zeros(dim),
            reg_grad: Array1::zeros(dim),
            constraint_jacobian: Array2::zeros((constraints, dim)),
            constraint_value: Array1::zeros(constraints),
        }
    }

    pub fn observe<P: OnlineProblem + ?Sized>(
        problem: &P,
        agent: usize,
        t: usize,
        x: ArrayView1<f64>,
    ) -> Result<Self> {
        let (_, cost_grad) = problem.cost(agent, t, x)?;
        let reg_grad = problem.regularizer(agent, t).subgradient(x);
        let (constraint_value, constraint_jacobian) = problem.constraint(agent, t, x)?;
        let s = Subgradients {
            cost_grad,
            reg_grad,
            constraint_jacobian,
            constraint_value,
        };
        s.validate(x.len(), problem.constraints())?;
        Ok(s)
    }

    pub fn validate(&self, dim: usize, constraints: usize) -> Result<()> {
        check_len(dim, self.cost_grad.len(), "cost gradient")?;
        check_len(dim, self.reg_grad.len(), "regularizer subgradient")?;
        check_len(constraints, self.constraint_value.len(), "constraint value")?;
        if self.constraint_jacobian.dim() != (constraints, dim) {
            return Err(Error::DimensionMismatch {
                expected: constraints * dim,
                got: self.constraint_jacobian.len(),
                context: "constraint jacobian",
            });
        }
        let finite = self.cost_grad.iter().all(|v| v.is_finite())
            && self.reg_grad.iter().all(|v| v.is_finite())
            && self.constraint_value.iter().all(|v| v.is_finite())
            && self.constraint_jacobian.iter().all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("revealed round data"))
        }
    }
}

/// `f_t(x) = sum_i f_{i,t}(x_i) + r_{i,t}(x_i)`.
pub fn global_objective<P: OnlineProblem + ?Sized>(
    problem: &P,
    t: usize,
    xs: &[Array1<f64>],
) -> Result<f64> {
    check_len(problem.agents(), xs.len(), "agent count")?;
    let mut total = 0.0;
    for (i, x) in xs.iter().enumerate() {
        total += problem.cost(i, t, x.view())?.0 + problem.regularizer(i, t).value(x.view());
    }
    Ok(total)
}

/// `g_t(x) = sum_i g_{i,t}(x_i)`.
pub fn global_constraint<P: OnlineProblem + ?Sized>(
    problem: &P,
    t: usize,
    xs: &[Array1<f64>],
) -> Result<Array1<f64>> {
    check_len(problem.agents(), xs.len(), "agent count")?;
    let mut total = Array1::zeros(problem.constraints());
    for (i, x) in xs.iter().enumerate() {
        total += &problem.constraint(i, t, x.view())?.0;
    }
    Ok(total)
}

pub(crate) fn check_round<P: OnlineProblem + ?Sized>(problem: &P, agent: usize, t: usize) -> Result<()> {
    if agent >= problem.agents() {
        return Err(Error::InvalidParameter(format!("agent {agent} out of range")));
    }
    if t == 0 || t > problem.horizon() {
        return Err(Error::InvalidParameter(format!(
            "round {t} outside 1..={}",
            problem.horizon()
        )));
    }
    Ok(())
}

pub(crate) fn check_in_domain(domain: &Domain, x: ArrayView1<f64>, what: &str) -> Result<()> {
    check_len(domain.dim(), x.len(), "decision dimension")?;
    if domain.contains(x) {
        Ok(())
    } else {
        Err(Error::OutsideDomain(format!("{what} evaluated at {x}")))
    }
}

/// Bounds for `h ||x - c||^2 + <l, x> + r(x)` (r with `l1, l2 >= 0`) over a box:
/// `(sup |value|, sup ||subgradient||)`.
pub(crate) fn quadratic_box_bounds(
    domain: &Domain,
    curvature: f64,
    center: ArrayView1<f64>,
    linear: ArrayView1<f64>,
    reg: &RegularizerSpec,
) -> (f64, f64) {
    let vertices = domain.vertices();
    let mut max_value = f64::NEG_INFINITY;
    let mut max_grad = 0.0f64;
    for v in &vertices {
        let d = v - &center;
        let value = curvature * d.dot(&d) + linear.dot(v) + reg.value(v.view());
        max_value = max_value.max(value);
        let smooth = &d * (2.0 * curvature) + linear + (v * (2.0 * reg.l2));
        max_grad = max_grad.max(smooth.dot(&smooth).sqrt());
    }
    // both the quadratic and r are nonnegative, so only <l, x> can go negative
    let bound_abs: Vec<f64> = match domain {
        Domain::Box { lower, upper } => lower
            .iter()
            .zip(upper.iter())
            .map(|(lo, hi)| lo.abs().max(hi.abs()))
            .collect(),
        Domain::Simplex { dim } => vec![1.0; *dim],
    };
    let min_linear: f64 = linear
        .iter()
        .zip(bound_abs.iter())
        .map(|(l, m)| l.abs() * m)
        .sum();
    (
        max_value.max(min_linear),
        max_grad + reg.l1 * (domain.dim() as f64).sqrt(),
    )
}

/// `(sup ||D x - d||, ||D||_F)` over the domain vertices.
pub(crate) fn affine_box_bounds(
    domain: &Domain,
    matrix: &Array2<f64>,
    offset: ArrayView1<f64>,
) -> (f64, f64) {
    let max_value = domain
        .vertices()
        .iter()
        .map(|v| {
            let g = matrix.dot(v) - offset;
            g.dot(&g).sqrt()
        })
        .fold(0.0, f64::max);
    let frobenius = matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
    (max_value, frobenius)
}

/// Sup of `|r|` and `||grad r||` over the domain.
pub(crate) fn regularizer_bounds(domain: &Domain, reg: &RegularizerSpec) -> (f64, f64) {
    let value = domain
        .vertices()
        .iter()
        .map(|v| reg.value(v.view()))
        .fold(0.0, f64::max);
    (value, reg.gradient_bound(domain))
}
