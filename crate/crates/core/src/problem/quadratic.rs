use ndarray::{Array1, Array2, ArrayView1};

use super::{
    affine_box_bounds, check_in_domain, check_round, quadratic_box_bounds, regularizer_bounds,
    FunctionBounds, OnlineProblem,
};
use crate::error::{check_len, Error, Result};
use crate::geometry::{Domain, RegularizerSpec};

/// `f(x) = curvature ||x - center||^2 + <linear, x>`, `g(x) = D x - d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTerm {
    pub curvature: f64,
    pub center: Array1<f64>,
    pub linear: Array1<f64>,
    pub constraint_matrix: Array2<f64>,
    pub offset: Array1<f64>,
}

impl QuadraticTerm {
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        let d = &x - &self.center;
        self.curvature * d.dot(&d) + self.linear.dot(&x)
    }

    pub fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        (&x - &self.center) * (2.0 * self.curvature) + &self.linear
    }
}

/// A small hand-assembled problem: one [`QuadraticTerm`] per round and agent.
#[derive(Debug, Clone)]
pub struct QuadraticAffineProblem {
    domains: Vec<Domain>,
    constraints: usize,
    regularizers: Vec<RegularizerSpec>,
    terms: Vec<Vec<QuadraticTerm>>,
}

impl QuadraticAffineProblem {
    /// `terms[t - 1][i]` is the round-`t` data of agent `i`.
    pub fn new(
        domains: Vec<Domain>,
        constraints: usize,
        regularizers: Vec<RegularizerSpec>,
        terms: Vec<Vec<QuadraticTerm>>,
    ) -> Result<Self> {
        let n = domains.len();
        if n == 0 {
            return Err(Error::InvalidParameter("no agents".into()));
        }
        check_len(n, regularizers.len(), "regularizers per agent")?;
        for round in &terms {
            check_len(n, round.len(), "terms per round")?;
            for (term, domain) in round.iter().zip(&domains) {
                let p = domain.dim();
                check_len(p, term.center.len(), "term center")?;
                check_len(p, term.linear.len(), "term linear part")?;
                check_len(constraints, term.offset.len(), "term offset")?;
                if term.constraint_matrix.dim() != (constraints, p) {
                    return Err(Error::DimensionMismatch {
                        expected: constraints * p,
                        got: term.constraint_matrix.len(),
                        context: "term constraint matrix",
                    });
                }
                if !(term.curvature >= 0.0 && term.curvature.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "curvature {} must be finite and nonnegative",
                        term.curvature
                    )));
                }
            }
        }
        Ok(QuadraticAffineProblem {
            domains,
            constraints,
            regularizers,
            terms,
        })
    }

    pub fn term(&self, agent: usize, t: usize) -> &QuadraticTerm {
        &self.terms[t - 1][agent]
    }
}

impl OnlineProblem for QuadraticAffineProblem {
    fn agents(&self) -> usize {
        self.domains.len()
    }

    fn constraints(&self) -> usize {
        self.constraints
    }

    fn horizon(&self) -> usize {
        self.terms.len()
    }

    fn domain(&self, agent: usize) -> &Domain {
        &self.domains[agent]
    }

    fn cost(&self, agent: usize, t: usize, x: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
        check_round(self, agent, t)?;
        check_in_domain(&self.domains[agent], x, "cost")?;
        let term = self.term(agent, t);
        Ok((term.value(x), term.gradient(x)))
    }

    fn regularizer(&self, agent: usize, _t: usize) -> RegularizerSpec {
        self.regularizers[agent]
    }

    fn constraint(
        &self,
        agent: usize,
        t: usize,
        x: ArrayView1<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        check_round(self, agent, t)?;
        check_in_domain(&self.domains[agent], x, "constraint")?;
        let term = self.term(agent, t);
        Ok((
            term.constraint_matrix.dot(&x) - &term.offset,
            term.constraint_matrix.clone(),
        ))
    }

    fn function_bounds(&self) -> Option<FunctionBounds> {
        let mut value = 0.0f64;
        let mut gradient = 0.0f64;
        let mut modulus = f64::INFINITY;
        for (i, domain) in self.domains.iter().enumerate() {
            let (rv, rg) = regularizer_bounds(domain, &self.regularizers[i]);
            value = value.max(rv);
            gradient = gradient.max(rg);
        }
        for round in &self.terms {
            for (term, domain) in round.iter().zip(&self.domains) {
                let (fv, fg) = quadratic_box_bounds(
                    domain,
                    term.curvature,
                    term.center.view(),
                    term.linear.view(),
                    &RegularizerSpec::ZERO,
                );
                let (gv, gg) = affine_box_bounds(domain, &term.constraint_matrix, term.offset.view());
                value = value.max(fv).max(gv);
                gradient = gradient.max(fg).max(gg);
                modulus = modulus.min(term.curvature);
            }
        }
        Some(FunctionBounds {
            value,
            gradient,
            euclidean_modulus: (modulus.is_finite() && modulus > 0.0).then_some(modulus),
        })
    }
}
