//! The distributed tracking benchmark: each agent follows a target that moves
//! under random doubly stochastic dynamics, pays a linear price, and shares
//! coupled affine constraints with the others.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    affine_box_bounds, check_in_domain, check_round, quadratic_box_bounds, regularizer_bounds,
    FunctionBounds, OnlineProblem,
};
use crate::error::{Error, Result};
use crate::geometry::{Domain, RegularizerSpec};

/// Where the elastic-net term lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizationPlacement {
    /// Kept as the regularizer and handled exactly by the mirror step.
    Explicit,
    /// Added to the cost and linearized with it.
    Folded,
}

/// How the hidden optimal points move between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetDynamics {
    /// A fresh convex combination of three random permutations each round.
    Mixing,
    /// The identity; the optimum never moves.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingParams {
    pub agents: usize,
    pub constraints: usize,
    pub dimension: usize,
    pub horizon: usize,
    /// `(price weight, tracking weight)`.
    pub zeta: [f64; 2],
    /// `(l1 weight, l2 weight)`.
    pub lambda: [f64; 2],
    pub box_upper: f64,
    /// Added to every constraint offset; positive slack makes the optimum strictly feasible.
    pub slack: f64,
    pub dynamics: TargetDynamics,
    pub placement: RegularizationPlacement,
    pub seed: u64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        TrackingParams {
            agents: 10,
            constraints: 3,
            dimension: 4,
            horizon: 2000,
            zeta: [1.0, 30.0],
            lambda: [1.0, 30.0],
            box_upper: 5.0,
            slack: 0.0,
            dynamics: TargetDynamics::Mixing,
            placement: RegularizationPlacement::Explicit,
            seed: 0,
        }
    }
}

impl TrackingParams {
    /// The larger setting: 50 agents, 5 constraints, dimension 6.
    pub fn large() -> Self {
        TrackingParams {
            agents: 50,
            constraints: 5,
            dimension: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.agents == 0 || self.constraints == 0 || self.dimension == 0 || self.horizon == 0 {
            return bad("agents, constraints, dimension and horizon must be positive".into());
        }
        if self.dimension > 16 {
            return bad(format!("dimension {} too large for vertex bounds", self.dimension));
        }
        if !(self.zeta[1] > 0.0 && self.zeta[1].is_finite()) {
            return bad(format!("tracking weight {} must be positive", self.zeta[1]));
        }
        let nonneg = [self.zeta[0], self.lambda[0], self.lambda[1], self.slack];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("weights and slack must be finite and nonnegative".into());
        }
        if !(self.box_upper > 0.0 && self.box_upper.is_finite()) {
            return bad(format!("box upper bound {} must be positive", self.box_upper));
        }
        Ok(())
    }
}

/// Round data of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRound {
    pub price: Array1<f64>,
    pub constraint_matrix: Array2<f64>,
    pub offset: Array1<f64>,
    /// The hidden optimal point of this round.
    pub reference: Array1<f64>,
    pub target: Array1<f64>,
    /// Maps this round's reference to the next one.
    pub transition: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingInstance {
    params: TrackingParams,
    domain: Domain,
    rounds: Vec<Vec<AgentRound>>,
}

fn random_permutation<R: Rng>(p: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    perm
}

fn mixing_matrix<R: Rng>(p: usize, rng: &mut R) -> Array2<f64> {
    // Dirichlet(1, 1, 1) weights through normalized exponentials
    let raw: Vec<f64> = (0..3).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let mut a = Array2::zeros((p, p));
    for w in raw {
        let perm = random_permutation(p, rng);
        for (row, col) in perm.into_iter().enumerate() {
            a[[row, col]] += w / total;
        }
    }
    a
}

pub fn generate_instance(params: &TrackingParams) -> Result<TrackingInstance> {
    params.validate()?;
    let (n, m, p) = (params.agents, params.constraints, params.dimension);
    let domain = Domain::cube(p, 0.0, params.box_upper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut current: Vec<Array1<f64>> = (0..n).map(|_| domain.sample(&mut rng)).collect();
    let [zeta1, zeta2] = params.zeta;
    let [lambda1, lambda2] = params.lambda;

    let mut rounds = Vec::with_capacity(params.horizon);
    for _ in 0..params.horizon {
        let mut round = Vec::with_capacity(n);
        for x0 in current.iter_mut() {
            let price = Array1::from_shape_fn(p, |_| rng.random_range(0..=10) as f64);
            let constraint_matrix =
                Array2::from_shape_fn((m, p), |_| rng.random_range(-5..=5) as f64);
            let transition = match params.dynamics {
                TargetDynamics::Mixing => mixing_matrix(p, &mut rng),
                TargetDynamics::Frozen => Array2::eye(p),
            };
            let offset = constraint_matrix.dot(&*x0) + params.slack;
            let target = (&*x0 * (2.0 * (zeta2 + lambda2)) + &(&price * zeta1) + lambda1)
                / (2.0 * zeta2);
            let next = transition.dot(&*x0);
            round.push(AgentRound {
                price,
                constraint_matrix,
                offset,
                reference: x0.clone(),
                target,
                transition,
            });
            *x0 = next;
        }
        rounds.push(round);
    }
    Ok(TrackingInstance {
        params: params.clone(),
        domain,
        rounds,
    })
}

impl TrackingInstance {
    /// Assemble from stored data; shapes are checked.
    pub fn from_parts(params: TrackingParams, rounds: Vec<Vec<AgentRound>>) -> Result<Self> {
        params.validate()?;
        let (n, m, p) = (params.agents, params.constraints, params.dimension);
        if rounds.len() != params.horizon {
            return Err(Error::InvalidParameter(format!(
                "{} rounds for horizon {}",
                rounds.len(),
                params.horizon
            )));
        }
        for (t, round) in rounds.iter().enumerate() {
            if round.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "round {} has {} agents, expected {n}",
                    t + 1,
                    round.len()
                )));
            }
            for a in round {
                let ok = a.price.len() == p
                    && a.offset.len() == m
                    && a.reference.len() == p
                    && a.target.len() == p
                    && a.constraint_matrix.dim() == (m, p)
                    && a.transition.dim() == (p, p);
                if !ok {
                    return Err(Error::InvalidParameter(format!(
                        "round {} has inconsistent shapes",
                        t + 1
                    )));
                }
            }
        }
        let domain = Domain::cube(p, 0.0, params.box_upper)?;
        Ok(TrackingInstance {
            params,
            domain,
            rounds,
        })
    }

    pub fn params(&self) -> &TrackingParams {
        &self.params
    }

    /// A copy that differs only in where the regularizer is placed.
    pub fn with_placement(&self, placement: RegularizationPlacement) -> Self {
        let mut copy = self.clone();
        copy.params.placement = placement;
        copy
    }

    pub fn round(&self, agent: usize, t: usize) -> &AgentRound {
        &self.rounds[t - 1][agent]
    }

    pub fn rounds(&self) -> &[Vec<AgentRound>] {
        &self.rounds
    }

    /// `zeta1 <pi, x> + zeta2 ||x - y||^2` and its gradient, without the regularizer.
    pub fn tracking_cost(
        &self,
        agent: usize,
        t: usize,
        x: ArrayView1<f64>,
    ) -> Result<(f64, Array1<f64>)> {
        check_round(self, agent, t)?;
        check_in_domain(&self.domain, x, "tracking cost")?;
        let data = self.round(agent, t);
        let [zeta1, zeta2] = self.params.zeta;
        let diff = &x - &data.target;
        let value = zeta1 * data.price.dot(&x) + zeta2 * diff.dot(&diff);
        let grad = &data.price * zeta1 + &(diff * (2.0 * zeta2));
        Ok((value, grad))
    }

    pub fn elastic_net(&self) -> RegularizerSpec {
        RegularizerSpec {
            l1: self.params.lambda[0],
            l2: self.params.lambda[1],
        }
    }
}

impl OnlineProblem for TrackingInstance {
    fn agents(&self) -> usize {
        self.params.agents
    }

    fn constraints(&self) -> usize {
        self.params.constraints
    }

    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn domain(&self, _agent: usize) -> &Domain {
        &self.domain
    }

    fn cost(&self, agent: usize, t: usize, x: ArrayView1<f64>) -> Result<(f64, Array1<f64>)> {
        let (value, grad) = self.tracking_cost(agent, t, x)?;
        match self.params.placement {
            RegularizationPlacement::Explicit => Ok((value, grad)),
            RegularizationPlacement::Folded => {
                let reg = self.elastic_net();
                Ok((value + reg.value(x), grad + reg.subgradient(x)))
            }
        }
    }

    fn regularizer(&self, _agent: usize, _t: usize) -> RegularizerSpec {
        match self.params.placement {
            RegularizationPlacement::Explicit => self.elastic_net(),
            RegularizationPlacement::Folded => RegularizerSpec::ZERO,
        }
    }

    fn constraint(
        &self,
        agent: usize,
        t: usize,
        x: ArrayView1<f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        check_round(self, agent, t)?;
        check_in_domain(&self.domain, x, "tracking constraint")?;
        let data = self.round(agent, t);
        Ok((
            data.constraint_matrix.dot(&x) - &data.offset,
            data.constraint_matrix.clone(),
        ))
    }

    fn reference_optimum(&self, t: usize) -> Option<Vec<Array1<f64>>> {
        let round = self.rounds.get(t.checked_sub(1)?)?;
        Some(round.iter().map(|a| a.reference.clone()).collect())
    }

    fn transition(&self, agent: usize, t: usize) -> Option<&Array2<f64>> {
        let round = self.rounds.get(t.checked_sub(1)?)?;
        round.get(agent).map(|a| &a.transition)
    }

    fn function_bounds(&self) -> Option<FunctionBounds> {
        let [zeta1, zeta2] = self.params.zeta;
        let net = self.elastic_net();
        let (folded, modulus) = match self.params.placement {
            RegularizationPlacement::Explicit => (RegularizerSpec::ZERO, zeta2),
            RegularizationPlacement::Folded => (net, zeta2 + net.l2),
        };
        let (mut value, mut gradient) = regularizer_bounds(&self.domain, &self.regularizer(0, 1));
        for round in &self.rounds {
            for a in round {
                let linear = &a.price * zeta1;
                let (fv, fg) = quadratic_box_bounds(
                    &self.domain,
                    zeta2,
                    a.target.view(),
                    linear.view(),
                    &folded,
                );
                let (gv, gg) = affine_box_bounds(&self.domain, &a.constraint_matrix, a.offset.view());
                value = value.max(fv).max(gv);
                gradient = gradient.max(fg).max(gg);
            }
        }
        Some(FunctionBounds {
            value,
            gradient,
            euclidean_modulus: Some(modulus),
        })
    }
}
