use std::fmt;

use ndarray::{Array1, ArrayView1, Zip};
use rayon::prelude::*;

use super::mapping::DynamicMapping;
use super::schedule::{StepsizeSchedule, Stepsizes};
use crate::error::{check_len, Error, Result};
use crate::geometry::{deviation_budget, within_deviation_bound, BregmanGeometry, RegularizerSpec};
use crate::network::{mix_duals, CommGraphSequence};
use crate::problem::{OnlineProblem, Subgradients};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Array1<f64>,
    pub q: Array1<f64>,
}

/// Everything one agent computes in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    /// Mixed dual `q~`.
    pub q_mix: Array1<f64>,
    /// Linearized direction `a`.
    pub direction: Array1<f64>,
    /// Mirror-step output `x~`.
    pub x_mirror: Array1<f64>,
    /// Linearized constraint estimate `b`.
    pub b: Array1<f64>,
    pub q: Array1<f64>,
    /// The decision played this round.
    pub x: Array1<f64>,
}

impl AgentStep {
    pub fn state(&self) -> AgentState {
        AgentState {
            x: self.x.clone(),
            q: self.q.clone(),
        }
    }
}

/// Per-round inputs of [`agent_round`] besides the agent's own data.
#[derive(Debug, Clone, Copy)]
pub struct RoundInput<'a> {
    pub t: usize,
    pub agent: usize,
    pub steps: Stepsizes,
    pub geometry: &'a BregmanGeometry,
    /// The regularizer revealed in the previous round.
    pub regularizer: RegularizerSpec,
    pub mapping: &'a DynamicMapping,
}

/// One agent's update from its previous decision, the data revealed at that
/// decision and its mixed dual variable.
pub fn agent_round(
    x_prev: ArrayView1<f64>,
    revealed: &Subgradients,
    q_mix: ArrayView1<f64>,
    input: &RoundInput<'_>,
) -> Result<AgentStep> {
    let p = input.geometry.dim();
    let m = q_mix.len();
    check_len(p, x_prev.len(), "previous decision")?;
    revealed.validate(p, m)?;
    if q_mix.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter(
            "mixed dual must be finite and nonnegative".into(),
        ));
    }
    let Stepsizes { alpha, beta, gamma } = input.steps;

    let direction = &revealed.cost_grad + &revealed.constraint_jacobian.t().dot(&q_mix);
    let x_mirror =
        input
            .geometry
            .mirror_step(x_prev, direction.view(), &input.regularizer, alpha)?;
    let b = revealed.constraint_jacobian.dot(&(&x_mirror - &x_prev)) + &revealed.constraint_value;
    let q = Zip::from(&q_mix)
        .and(&b)
        .map_collect(|&qm, &bk| (qm + gamma * (bk - beta * qm)).max(0.0));
    let x = input.mapping.apply(input.agent, input.t, x_mirror.view())?;
    Ok(AgentStep {
        q_mix: q_mix.to_owned(),
        direction,
        x_mirror,
        b,
        q,
        x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    NegativeDual,
    OutsideDomain,
    DualBound,
    Deviation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantViolation {
    pub t: usize,
    pub agent: usize,
    pub kind: InvariantKind,
    pub detail: String,
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "round {}, agent {}: {:?}: {}",
            self.t, self.agent, self.kind, self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViolationPolicy {
    #[default]
    Halt,
    Record,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Starting decisions; the domain centers when absent.
    pub initial: Option<Vec<Array1<f64>>>,
    /// `F`; enables the check `||q|| <= F / beta_t`.
    pub dual_bound: Option<f64>,
    pub policy: ViolationPolicy,
    /// Rounds to run; the problem horizon when absent.
    pub horizon: Option<usize>,
    /// Update agents of a round on the rayon pool.
    pub parallel: bool,
}

/// The full record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub initial: Vec<Array1<f64>>,
    /// `steps[t - 1]` are the step sizes of round `t`.
    pub steps: Vec<Stepsizes>,
    /// `rounds[t - 1][i]`; round `t` mixes with graph `t - 1`.
    pub rounds: Vec<Vec<AgentStep>>,
    pub violations: Vec<InvariantViolation>,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn agents(&self) -> usize {
        self.initial.len()
    }

    pub fn step(&self, t: usize, agent: usize) -> &AgentStep {
        &self.rounds[t - 1][agent]
    }

    /// Decisions played in round `t`.
    pub fn decisions(&self, t: usize) -> Vec<Array1<f64>> {
        self.rounds[t - 1].iter().map(|s| s.x.clone()).collect()
    }

    /// Largest `beta_t ||q_{i,t}|| / F` over the run; at most 1 when the dual
    /// bound holds.
    pub fn dual_bound_ratio(&self, f_bound: f64) -> f64 {
        self.rounds
            .iter()
            .zip(&self.steps)
            .flat_map(|(round, s)| {
                round.iter().map(move |a| {
                    let nq = a.q.dot(&a.q).sqrt().max(a.q_mix.dot(&a.q_mix).sqrt());
                    s.beta * nq / f_bound
                })
            })
            .fold(0.0, f64::max)
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn audit(
    t: usize,
    agent: usize,
    step: &AgentStep,
    x_prev: ArrayView1<f64>,
    input: &RoundInput<'_>,
    dual_bound: Option<f64>,
) -> Vec<InvariantViolation> {
    let mut out = Vec::new();
    let mut flag = |kind, detail: String| {
        out.push(InvariantViolation {
            t,
            agent,
            kind,
            detail,
        })
    };
    if let Some(v) = step.q.iter().find(|v| !(**v >= 0.0)) {
        flag(InvariantKind::NegativeDual, format!("dual entry {v}"));
    }
    let domain = input.geometry.domain();
    if !domain.contains(step.x_mirror.view()) {
        flag(
            InvariantKind::OutsideDomain,
            format!("mirror output {}", step.x_mirror),
        );
    }
    if !domain.contains(step.x.view()) {
        flag(InvariantKind::OutsideDomain, format!("decision {}", step.x));
    }
    if let Some(f) = dual_bound {
        let limit = f / input.steps.beta;
        for (name, v) in [("mixed dual", &step.q_mix), ("dual", &step.q)] {
            let nv = norm(v);
            if !(nv <= limit) {
                flag(
                    InvariantKind::DualBound,
                    format!("{name} norm {nv} exceeds F/beta = {limit}"),
                );
            }
        }
    }
    let g_h = deviation_budget(
        input.geometry,
        step.direction.view(),
        &input.regularizer,
        input.steps.alpha,
    );
    if !within_deviation_bound(input.geometry, x_prev, step.x_mirror.view(), g_h) {
        let d = norm(&(&step.x_mirror - &x_prev));
        flag(
            InvariantKind::Deviation,
            format!(
                "step length {d} exceeds {}",
                g_h / input.geometry.strong_convexity()
            ),
        );
    }
    out
}

/// Runs synchronous rounds `1..=horizon`.
///
/// In round `t` every agent mixes the previous duals with `W_{t-1}`, then
/// updates from the data revealed at its round-`t-1` decision (zero in round
/// 1). Round-`t` data is read only after all round-`t` decisions exist.
pub fn run<P: OnlineProblem + ?Sized>(
    problem: &P,
    graphs: &CommGraphSequence,
    schedule: &StepsizeSchedule,
    mapping: &DynamicMapping,
    geometries: &[BregmanGeometry],
    options: &RunOptions,
) -> Result<Trace> {
    let n = problem.agents();
    let m = problem.constraints();
    let horizon = options.horizon.unwrap_or(problem.horizon());
    if horizon == 0 || horizon > problem.horizon() {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} outside 1..={}",
            problem.horizon()
        )));
    }
    check_len(n, graphs.agents(), "graph agents")?;
    check_len(n, geometries.len(), "geometries")?;
    if graphs.len() < horizon {
        return Err(Error::InvalidParameter(format!(
            "{} graphs for {horizon} rounds",
            graphs.len()
        )));
    }
    for (i, g) in geometries.iter().enumerate() {
        if g.domain() != problem.domain(i) {
            return Err(Error::InvalidParameter(format!(
                "geometry domain of agent {i} differs from the problem domain"
            )));
        }
    }
    schedule.validate()?;

    let initial: Vec<Array1<f64>> = match &options.initial {
        Some(xs) => {
            check_len(n, xs.len(), "initial points")?;
            for (i, x) in xs.iter().enumerate() {
                if !geometries[i].domain().contains(x.view()) {
                    return Err(Error::OutsideDomain(format!("initial point of agent {i}")));
                }
            }
            xs.clone()
        }
        None => geometries.iter().map(|g| g.domain().center()).collect(),
    };

    let mut x_prev = initial.clone();
    let mut q_prev = vec![Array1::<f64>::zeros(m); n];
    let mut revealed: Vec<Subgradients> = geometries
        .iter()
        .map(|g| Subgradients::zero(g.dim(), m))
        .collect();
    let mut trace = Trace {
        initial,
        steps: Vec::with_capacity(horizon),
        rounds: Vec::with_capacity(horizon),
        violations: Vec::new(),
    };

    for t in 1..=horizon {
        let steps = schedule.at(t)?;
        let q_mix = mix_duals(graphs.weights(t - 1), &q_prev)?;
        let update = |i: usize| -> Result<(AgentStep, Vec<InvariantViolation>)> {
            let input = RoundInput {
                t,
                agent: i,
                steps,
                geometry: &geometries[i],
                regularizer: if t == 1 {
                    RegularizerSpec::ZERO
                } else {
                    problem.regularizer(i, t - 1)
                },
                mapping,
            };
            let step = agent_round(x_prev[i].view(), &revealed[i], q_mix[i].view(), &input)
                .map_err(|e| Error::Invariant {
                    t,
                    agent: i,
                    detail: e.to_string(),
                })?;
            let found = audit(t, i, &step, x_prev[i].view(), &input, options.dual_bound);
            Ok((step, found))
        };
        let results: Vec<(AgentStep, Vec<InvariantViolation>)> = if options.parallel {
            (0..n).into_par_iter().map(update).collect::<Result<_>>()?
        } else {
            (0..n).map(update).collect::<Result<_>>()?
        };

        let mut round = Vec::with_capacity(n);
        for (step, found) in results {
            if let Some(first) = found.first() {
                if options.policy == ViolationPolicy::Halt {
                    return Err(Error::Invariant {
                        t: first.t,
                        agent: first.agent,
                        detail: format!("{:?}: {}", first.kind, first.detail),
                    });
                }
            }
            trace.violations.extend(found);
            round.push(step);
        }

        if t < horizon {
            let observe = |i: usize| Subgradients::observe(problem, i, t, round[i].x.view());
            revealed = if options.parallel {
                (0..n).into_par_iter().map(observe).collect::<Result<_>>()?
            } else {
                (0..n).map(observe).collect::<Result<_>>()?
            };
        }
        x_prev = round.iter().map(|s| s.x.clone()).collect();
        q_prev = round.iter().map(|s| s.q.clone()).collect();
        trace.steps.push(steps);
        trace.rounds.push(round);
    }
    Ok(trace)
}
