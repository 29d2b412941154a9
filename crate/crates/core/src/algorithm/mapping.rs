use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::BregmanGeometry;
use crate::problem::OnlineProblem;

/// `(agent, round, point) -> mapped point`.
pub type MappingFn = dyn Fn(usize, usize, ArrayView1<f64>) -> Array1<f64> + Send + Sync;

/// The map `Phi_{i,t}` applied to the mirror-step output of round `t`.
#[derive(Clone)]
pub enum DynamicMapping {
    Identity,
    /// `matrices[t - 1][i]` is used by agent `i` in round `t`.
    Linear(Arc<Vec<Vec<Array2<f64>>>>),
    Custom(Arc<MappingFn>),
}

impl fmt::Debug for DynamicMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicMapping::Identity => f.write_str("Identity"),
            DynamicMapping::Linear(m) => write!(f, "Linear({} rounds)", m.len()),
            DynamicMapping::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Outcome of sampling `D(Phi x, Phi y) <= D(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractivityReport {
    pub pairs: usize,
    pub violations: usize,
    /// Largest observed `D(Phi x, Phi y) / D(x, y)`.
    pub worst_ratio: f64,
}

impl ContractivityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl DynamicMapping {
    /// The problem's own transitions: the round-`t` map is the transition
    /// recorded at round `t - 1`, and the identity in round 1.
    pub fn true_dynamics<P: OnlineProblem + ?Sized>(problem: &P) -> Result<Self> {
        let mut rounds = Vec::with_capacity(problem.horizon());
        for t in 1..=problem.horizon() {
            let mut per_agent = Vec::with_capacity(problem.agents());
            for i in 0..problem.agents() {
                let p = problem.domain(i).dim();
                if t == 1 {
                    per_agent.push(Array2::eye(p));
                    continue;
                }
                match problem.transition(i, t - 1) {
                    Some(a) if a.dim() == (p, p) => per_agent.push(a.clone()),
                    Some(_) => {
                        return Err(Error::DimensionMismatch {
                            expected: p * p,
                            got: 0,
                            context: "transition matrix",
                        })
                    }
                    None => {
                        return Err(Error::Unsupported(
                            "problem does not expose its dynamics".into(),
                        ))
                    }
                }
            }
            rounds.push(per_agent);
        }
        Ok(DynamicMapping::Linear(Arc::new(rounds)))
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(usize, usize, ArrayView1<f64>) -> Array1<f64> + Send + Sync + 'static,
    {
        DynamicMapping::Custom(Arc::new(f))
    }

    pub fn apply(&self, agent: usize, t: usize, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let out = match self {
            DynamicMapping::Identity => x.to_owned(),
            DynamicMapping::Linear(m) => {
                let a = m
                    .get(t.wrapping_sub(1))
                    .and_then(|round| round.get(agent))
                    .ok_or_else(|| {
                        Error::InvalidParameter(format!(
                            "no linear map for agent {agent} in round {t}"
                        ))
                    })?;
                if a.ncols() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: a.ncols(),
                        got: x.len(),
                        context: "dynamic mapping input",
                    });
                }
                a.dot(&x)
            }
            DynamicMapping::Custom(f) => f(agent, t, x),
        };
        if out.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: out.len(),
                context: "dynamic mapping output",
            });
        }
        Ok(out)
    }

    /// Samples random pairs from the geometry's domain and counts pairs where
    /// the mapping increases the divergence.
    pub fn check_contractive<R: Rng + ?Sized>(
        &self,
        geom: &BregmanGeometry,
        agent: usize,
        t: usize,
        pairs: usize,
        rng: &mut R,
    ) -> Result<ContractivityReport> {
        let mut violations = 0;
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let x = geom.domain().sample(rng);
            let y = geom.domain().sample(rng);
            let before = geom.divergence(x.view(), y.view())?;
            let after = geom.divergence(
                self.apply(agent, t, x.view())?.view(),
                self.apply(agent, t, y.view())?.view(),
            )?;
            if before > 0.0 {
                worst = worst.max(after / before);
            }
            if after > before * (1.0 + 1e-12) + 1e-15 {
                violations += 1;
            }
        }
        Ok(ContractivityReport {
            pairs,
            violations,
            worst_ratio: worst,
        })
    }
}
