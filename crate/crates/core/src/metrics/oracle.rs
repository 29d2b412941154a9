//! Offline solvers for the comparator sequences.
//!
//! Both the per-round and the static problem are solved with an augmented
//! Lagrangian on the coupled constraints. Each inner problem is minimized by
//! accelerated proximal gradient with backtracking and adaptive restart; the
//! proximal map handles the elastic-net regularizer and the domain exactly.
//! The inner solver needs differentiable costs, which holds for every
//! problem in this crate.

use ndarray::{Array1, Array2};

use super::FEASIBILITY_TOL;
use crate::error::{Error, Result};
use crate::geometry::{project_simplex, soft_threshold, Domain, RegularizerSpec};
use crate::problem::{global_constraint, OnlineProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Gradient-mapping residual, relative to the first gradient norm, at
    /// which an inner solve stops.
    pub tolerance: f64,
    /// Largest accepted constraint violation.
    pub feasibility: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Largest accepted objective change of a tighter refinement solve.
    pub refine_gap: f64,
    pub initial_penalty: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tolerance: 1e-9,
            feasibility: 1e-6,
            max_outer: 60,
            max_inner: 100_000,
            refine_gap: 1e-4,
            initial_penalty: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub points: Vec<Array1<f64>>,
    pub objective: f64,
    pub max_violation: f64,
    pub multipliers: Array1<f64>,
    pub outer_iterations: usize,
}

/// Objective value, gradients, constraint values and Jacobians at a point.
struct Eval {
    value: f64,
    grads: Vec<Array1<f64>>,
    cons: Array1<f64>,
    jacs: Vec<Array2<f64>>,
}

struct Inner {
    points: Vec<Array1<f64>>,
    converged: bool,
}

type Evaluator<'a> = Box<dyn Fn(&[Array1<f64>]) -> Result<Eval> + 'a>;

struct Program<'a> {
    domains: Vec<&'a Domain>,
    regs: Vec<RegularizerSpec>,
    eval: Evaluator<'a>,
}

fn prox(domain: &Domain, reg: &RegularizerSpec, z: &Array1<f64>, eta: f64) -> Array1<f64> {
    match domain {
        Domain::Box { lower, upper } => Array1::from_shape_fn(z.len(), |j| {
            (soft_threshold(z[j], eta * reg.l1) / (1.0 + 2.0 * eta * reg.l2)).clamp(lower[j], upper[j])
        }),
        // l1 is constant on the simplex
        Domain::Simplex { .. } => project_simplex((z / (1.0 + 2.0 * eta * reg.l2)).view()),
    }
}

fn dist_sq(a: &[Array1<f64>], b: &[Array1<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d.dot(&d)
        })
        .sum()
}

impl Program<'_> {
    fn reg_value(&self, xs: &[Array1<f64>]) -> f64 {
        xs.iter().zip(&self.regs).map(|(x, r)| r.value(x.view())).sum()
    }

    /// Smooth part of the augmented Lagrangian and, on request, its gradient.
    fn smooth(
        &self,
        xs: &[Array1<f64>],
        mu: &Array1<f64>,
        rho: f64,
        with_grad: bool,
    ) -> Result<(f64, Vec<Array1<f64>>)> {
        let e = (self.eval)(xs)?;
        let shifted = (mu + &(&e.cons * rho)).mapv(|v| v.max(0.0));
        let penalty = (shifted.mapv(|v| v * v).sum() - mu.mapv(|v| v * v).sum()) / (2.0 * rho);
        let grads = if with_grad {
            e.grads
                .into_iter()
                .zip(&e.jacs)
                .map(|(g, j)| g + j.t().dot(&shifted))
                .collect()
        } else {
            Vec::new()
        };
        Ok((e.value + penalty, grads))
    }

    fn prox_all(&self, ys: &[Array1<f64>], grads: &[Array1<f64>], step: f64) -> Vec<Array1<f64>> {
        ys.iter()
            .zip(grads)
            .enumerate()
            .map(|(i, (y, g))| prox(self.domains[i], &self.regs[i], &(y - &(g * step)), step))
            .collect()
    }

    /// Accelerated proximal gradient on the augmented Lagrangian.
    fn inner(
        &self,
        start: Vec<Array1<f64>>,
        mu: &Array1<f64>,
        rho: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<Inner> {
        let mut x = start;
        let mut y = x.clone();
        let mut theta = 1.0f64;
        let mut lip = 1.0f64;
        let mut fx = self.smooth(&x, mu, rho, false)?.0 + self.reg_value(&x);
        let mut residual = f64::INFINITY;
        let mut scale = None;
        let mut restarted = false;
        for _ in 0..max_iter {
            let (sy, gy) = self.smooth(&y, mu, rho, true)?;
            // the stopping rule is relative to the size of the first gradient
            let scale = *scale.get_or_insert_with(|| {
                gy.iter().map(|g| g.dot(g)).sum::<f64>().sqrt().max(1.0)
            });
            let (x_new, s_new) = loop {
                let cand = self.prox_all(&y, &gy, 1.0 / lip);
                let s_cand = self.smooth(&cand, mu, rho, false)?.0;
                let lin: f64 = cand
                    .iter()
                    .zip(&y)
                    .zip(&gy)
                    .map(|((c, yy), g)| g.dot(&(c - yy)))
                    .sum();
                let model = sy + lin + 0.5 * lip * dist_sq(&cand, &y);
                if s_cand <= model + 4.0 * f64::EPSILON * sy.abs().max(1.0) || lip > 1e16 {
                    break (cand, s_cand);
                }
                lip *= 2.0;
            };
            residual = lip * dist_sq(&x_new, &y).sqrt();
            let f_new = s_new + self.reg_value(&x_new);
            if residual <= tol * scale {
                return Ok(Inner {
                    points: x_new,
                    converged: true,
                });
            }
            if f_new > fx {
                if restarted {
                    if lip > 1e16 {
                        // no step from x decreases f: rounding floor
                        return Ok(Inner {
                            points: x,
                            converged: true,
                        });
                    }
                    lip *= 2.0;
                    continue;
                }
                // restart the momentum from the last good point
                theta = 1.0;
                y = x.clone();
                restarted = true;
                continue;
            }
            restarted = false;
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let w = (theta - 1.0) / theta_next;
            y = x_new
                .iter()
                .zip(&x)
                .enumerate()
                .map(|(i, (xn, xo))| self.domains[i].project((xn + &((xn - xo) * w)).view()))
                .collect();
            x = x_new;
            fx = f_new;
            theta = theta_next;
            lip *= 0.95;
        }
        let _ = residual;
        Ok(Inner {
            points: x,
            converged: false,
        })
    }

    fn solve(&self, start: Vec<Array1<f64>>, opts: &OracleOptions) -> Result<OracleSolution> {
        let mut x = start;
        let k = (self.eval)(&x)?.cons.len();
        let mut mu = Array1::<f64>::zeros(k);
        let mut rho = opts.initial_penalty;
        let mut last_violation = f64::INFINITY;
        let mut violation = f64::INFINITY;
        let mut converged = false;
        let mut stalled = 0;
        for outer in 1..=opts.max_outer {
            let inner = self.inner(x, &mu, rho, opts.tolerance, opts.max_inner)?;
            x = inner.points;
            converged = inner.converged;
            let e = (self.eval)(&x)?;
            violation = e.cons.iter().fold(0.0f64, |m, v| m.max(*v));
            let mu_next = (&mu + &(&e.cons * rho)).mapv(|v| v.max(0.0));
            let slackness = e
                .cons
                .iter()
                .zip(&mu_next)
                .map(|(c, m)| (-c).min(*m).abs())
                .fold(0.0f64, f64::max);
            let step = (&mu_next - &mu).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            mu = mu_next;
            let settled = step <= 1e-6 * (1.0 + rho);
            if converged && violation <= opts.feasibility && slackness <= opts.feasibility && settled {
                return Ok(OracleSolution {
                    objective: e.value + self.reg_value(&x),
                    points: x,
                    max_violation: violation.max(0.0),
                    multipliers: mu,
                    outer_iterations: outer,
                });
            }
            if violation > opts.feasibility && violation > 0.25 * last_violation && rho < 1e8 {
                rho *= 10.0;
            }
            // a large penalty that no longer moves the violation means there
            // is no feasible point to move to
            if violation > 1e-4 && violation > 0.5 * last_violation && rho >= 1e4 {
                stalled += 1;
                if stalled >= 3 {
                    break;
                }
            } else {
                stalled = 0;
            }
            last_violation = violation;
        }
        if violation > 1e-4 {
            Err(Error::Infeasible(format!(
                "every iterate violates the coupled constraints, last by {violation:e}"
            )))
        } else if !converged {
            Err(Error::NoConvergence(format!(
                "inner solve did not reach residual {:e} in {} iterations",
                opts.tolerance, opts.max_inner
            )))
        } else {
            Err(Error::NoConvergence(format!(
                "multipliers did not settle in {} outer iterations",
                opts.max_outer
            )))
        }
    }

    /// Solve, then re-solve from the solution with a tolerance ten times
    /// tighter and require the objectives to agree.
    fn solve_checked(&self, start: Vec<Array1<f64>>, opts: &OracleOptions) -> Result<OracleSolution> {
        let first = self.solve(start, opts)?;
        let tight = OracleOptions {
            tolerance: opts.tolerance * 0.1,
            ..*opts
        };
        let refined = self.solve(first.points.clone(), &tight)?;
        let gap = (refined.objective - first.objective).abs();
        if gap > opts.refine_gap {
            return Err(Error::NoConvergence(format!(
                "refinement moved the objective by {gap:e}"
            )));
        }
        Ok(refined)
    }
}

fn round_program<P: OnlineProblem + ?Sized>(problem: &P, t: usize) -> Program<'_> {
    let n = problem.agents();
    Program {
        domains: (0..n).map(|i| problem.domain(i)).collect(),
        regs: (0..n).map(|i| problem.regularizer(i, t)).collect(),
        eval: Box::new(move |xs: &[Array1<f64>]| {
            let mut value = 0.0;
            let mut grads = Vec::with_capacity(n);
            let mut jacs = Vec::with_capacity(n);
            let mut cons = Array1::zeros(problem.constraints());
            for (i, x) in xs.iter().enumerate() {
                let (f, g) = problem.cost(i, t, x.view())?;
                let (c, j) = problem.constraint(i, t, x.view())?;
                value += f;
                grads.push(g);
                cons += &c;
                jacs.push(j);
            }
            Ok(Eval {
                value,
                grads,
                cons,
                jacs,
            })
        }),
    }
}

fn centers<P: OnlineProblem + ?Sized>(problem: &P) -> Vec<Array1<f64>> {
    (0..problem.agents())
        .map(|i| problem.domain(i).center())
        .collect()
}

/// Offline minimizer of round `t` subject to the coupled constraints.
pub fn solve_round<P: OnlineProblem + ?Sized>(
    problem: &P,
    t: usize,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    round_program(problem, t).solve_checked(centers(problem), opts)
}

/// The best fixed decision over rounds `1..=horizon`, feasible in every round.
pub fn static_optimum<P: OnlineProblem + ?Sized>(
    problem: &P,
    horizon: usize,
    opts: &OracleOptions,
) -> Result<OracleSolution> {
    if horizon == 0 || horizon > problem.horizon() {
        return Err(Error::InvalidParameter(format!("horizon {horizon} out of range")));
    }
    let n = problem.agents();
    let m = problem.constraints();
    let regs = (0..n)
        .map(|i| {
            (1..=horizon).fold(RegularizerSpec::ZERO, |acc, t| {
                let r = problem.regularizer(i, t);
                RegularizerSpec {
                    l1: acc.l1 + r.l1,
                    l2: acc.l2 + r.l2,
                }
            })
        })
        .collect();
    let program = Program {
        domains: (0..n).map(|i| problem.domain(i)).collect(),
        regs,
        eval: Box::new(move |xs: &[Array1<f64>]| {
            let mut value = 0.0;
            let mut grads: Vec<Array1<f64>> = xs.iter().map(|x| Array1::zeros(x.len())).collect();
            let mut jacs: Vec<Array2<f64>> = xs
                .iter()
                .map(|x| Array2::zeros((m * horizon, x.len())))
                .collect();
            let mut cons = Array1::zeros(m * horizon);
            for t in 1..=horizon {
                let rows = (t - 1) * m..t * m;
                for (i, x) in xs.iter().enumerate() {
                    let (f, g) = problem.cost(i, t, x.view())?;
                    let (c, j) = problem.constraint(i, t, x.view())?;
                    value += f;
                    grads[i] += &g;
                    let mut block = cons.slice_mut(ndarray::s![rows.clone()]);
                    block += &c;
                    jacs[i]
                        .slice_mut(ndarray::s![rows.clone(), ..])
                        .assign(&j);
                }
            }
            Ok(Eval {
                value,
                grads,
                cons,
                jacs,
            })
        }),
    };
    program.solve_checked(centers(problem), opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimumSource {
    /// The problem's own claimed optimum, which passed the stationarity audit.
    Reference { residual: f64 },
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicOptimum {
    pub points: Vec<Array1<f64>>,
    pub source: OptimumSource,
}

/// Largest proximal-gradient residual of `sum_i f_{i,t} + r_{i,t}` over the
/// domains, ignoring the coupled constraints. Zero means the point minimizes
/// the relaxed problem; if it is also feasible it is optimal.
pub fn stationarity_residual<P: OnlineProblem + ?Sized>(
    problem: &P,
    t: usize,
    xs: &[Array1<f64>],
) -> Result<f64> {
    let eta = 1e-2;
    let mut worst = 0.0f64;
    for (i, x) in xs.iter().enumerate() {
        let (_, g) = problem.cost(i, t, x.view())?;
        let next = prox(problem.domain(i), &problem.regularizer(i, t), &(x - &(&g * eta)), eta);
        let d = (&next - x) / eta;
        worst = worst.max(d.dot(&d).sqrt());
    }
    Ok(worst)
}

/// Optimal decisions of round `t`.
///
/// A problem-supplied optimum is used when it is feasible and passes the
/// stationarity audit at `1e-6`; otherwise the offline solver runs.
pub fn dynamic_optimum<P: OnlineProblem + ?Sized>(
    problem: &P,
    t: usize,
    opts: &OracleOptions,
) -> Result<DynamicOptimum> {
    if let Some(points) = problem.reference_optimum(t) {
        let inside = points
            .iter()
            .enumerate()
            .all(|(i, x)| problem.domain(i).contains(x.view()));
        if inside {
            let feasible = global_constraint(problem, t, &points)?
                .iter()
                .all(|v| *v <= FEASIBILITY_TOL);
            let residual = stationarity_residual(problem, t, &points)?;
            if feasible && residual <= 1e-6 {
                return Ok(DynamicOptimum {
                    points,
                    source: OptimumSource::Reference { residual },
                });
            }
        }
    }
    let sol = solve_round(problem, t, opts)?;
    Ok(DynamicOptimum {
        points: sol.points,
        source: OptimumSource::Oracle,
    })
}

/// Largest margin `eps` such that some candidate satisfies
/// `sum_i g_{i,t}(x_i) <= -eps` in every round up to `horizon`.
pub fn estimate_slater_margin<P: OnlineProblem + ?Sized>(
    problem: &P,
    candidates: &[Vec<Array1<f64>>],
    horizon: usize,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for xs in candidates {
        let mut margin = f64::INFINITY;
        for t in 1..=horizon {
            let g = global_constraint(problem, t, xs)?;
            let worst = g.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            margin = margin.min(-worst);
        }
        best = best.max(margin);
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::Infeasible(format!(
            "no candidate is strictly feasible in every round (best margin {best})"
        )))
    }
}
