//! Bregman geometries, projections and the composite mirror step.
//!
//! A [`BregmanGeometry`] pairs a mirror map `psi` with the compact domain it
//! lives on. Two mirror maps are supported:
//!
//! * scaled Euclidean, `psi(x) = s * ||x||^2`, giving `D(x, y) = s * ||x - y||^2`;
//! * negative entropy on the probability simplex, giving the KL divergence.
//!
//! The composite step minimizes
//! `alpha * <x, a> + alpha * r(x) + D(x, x_prev)` over the domain, where `r` is
//! an `l1 + squared-l2` regularizer that is kept exact rather than linearized.

use ndarray::{Array1, ArrayView1, Zip};
use rand::Rng;

use crate::error::{check_len, Error, Result};

/// Slack used when testing domain membership of computed points.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Target residual of the iterative composite-step solver.
pub const INNER_TOL: f64 = 1e-10;

/// Iteration cap of the iterative composite-step solver.
pub const INNER_MAX_ITER: usize = 100_000;

/// Compact convex domain of a single agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Axis-aligned box `[lower, upper]`.
    Box {
        lower: Array1<f64>,
        upper: Array1<f64>,
    },
    /// Probability simplex of the given dimension.
    Simplex { dim: usize },
}

impl Domain {
    pub fn new_box(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        check_len(lower.len(), upper.len(), "box bounds")?;
        if lower.is_empty() {
            return Err(Error::InvalidParameter("empty box".into()));
        }
        for (lo, hi) in lower.iter().zip(upper.iter()) {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter("box bounds must be finite".into()));
            }
            if lo > hi {
                return Err(Error::InvalidParameter(format!(
                    "box lower bound {lo} exceeds upper bound {hi}"
                )));
            }
        }
        Ok(Domain::Box { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(Array1::from_elem(dim, lo), Array1::from_elem(dim, hi))
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("empty simplex".into()));
        }
        Ok(Domain::Simplex { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Simplex { dim } => *dim,
        }
    }

    pub fn contains(&self, x: ArrayView1<f64>) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (lo, hi))| *v >= lo - DOMAIN_TOL && *v <= hi + DOMAIN_TOL),
            Domain::Simplex { .. } => {
                x.iter().all(|v| *v >= -DOMAIN_TOL) && (x.sum() - 1.0).abs() <= DOMAIN_TOL
            }
        }
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, z: ArrayView1<f64>) -> Array1<f64> {
        match self {
            Domain::Box { lower, upper } => {
                let mut out = z.to_owned();
                Zip::from(&mut out)
                    .and(lower)
                    .and(upper)
                    .for_each(|v, lo, hi| *v = v.clamp(*lo, *hi));
                out
            }
            Domain::Simplex { .. } => project_simplex(z),
        }
    }

    /// `sup ||x - y||` over the domain.
    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => (upper - lower).mapv(|d| d * d).sum().sqrt(),
            Domain::Simplex { dim } => {
                if *dim > 1 {
                    2f64.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup ||x||` over the domain.
    pub fn max_norm(&self) -> f64 {
        match self {
            Domain::Box { lower, upper } => lower
                .iter()
                .zip(upper.iter())
                .map(|(lo, hi)| {
                    let m = lo.abs().max(hi.abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
            Domain::Simplex { .. } => 1.0,
        }
    }

    /// Box midpoint or simplex barycenter.
    pub fn center(&self) -> Array1<f64> {
        match self {
            Domain::Box { lower, upper } => (lower + upper) * 0.5,
            Domain::Simplex { dim } => Array1::from_elem(*dim, 1.0 / *dim as f64),
        }
    }

    /// Extreme points. Exponential in the dimension for boxes.
    pub fn vertices(&self) -> Vec<Array1<f64>> {
        match self {
            Domain::Box { lower, upper } => {
                let p = lower.len();
                (0..1usize << p)
                    .map(|mask| {
                        Array1::from_shape_fn(p, |j| {
                            if mask >> j & 1 == 1 {
                                upper[j]
                            } else {
                                lower[j]
                            }
                        })
                    })
                    .collect()
            }
            Domain::Simplex { dim } => (0..*dim)
                .map(|j| {
                    let mut e = Array1::zeros(*dim);
                    e[j] = 1.0;
                    e
                })
                .collect(),
        }
    }

    /// Uniform sample (Dirichlet(1) on the simplex).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Array1<f64> {
        match self {
            Domain::Box { lower, upper } => Array1::from_shape_fn(lower.len(), |j| {
                lower[j] + (upper[j] - lower[j]) * rng.random::<f64>()
            }),
            Domain::Simplex { dim } => {
                let e = Array1::from_shape_fn(*dim, |_| -(1.0 - rng.random::<f64>()).ln());
                let s = e.sum();
                e / s
            }
        }
    }
}

/// Componentwise projection onto the nonnegative orthant.
pub fn nonneg_project(z: ArrayView1<f64>) -> Array1<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(z: ArrayView1<f64>) -> Array1<f64> {
    let mut sorted: Vec<f64> = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    z.mapv(|v| (v - theta).max(0.0))
}

pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `r(x) = l1 * ||x||_1 + l2 * ||x||^2` with `l1, l2 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegularizerSpec {
    pub l1: f64,
    pub l2: f64,
}

impl RegularizerSpec {
    pub const ZERO: RegularizerSpec = RegularizerSpec { l1: 0.0, l2: 0.0 };

    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        if !(l1.is_finite() && l2.is_finite()) || l1 < 0.0 || l2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularizer weights must be finite and nonnegative, got ({l1}, {l2})"
            )));
        }
        Ok(RegularizerSpec { l1, l2 })
    }

    pub fn is_zero(&self) -> bool {
        self.l1 == 0.0 && self.l2 == 0.0
    }

    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.l1 * x.iter().map(|v| v.abs()).sum::<f64>() + self.l2 * x.dot(&x)
    }

    /// Subgradient with the convention `d|v|/dv = 0` at `v = 0`.
    pub fn subgradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.mapv(|v| self.l1 * sign0(v) + 2.0 * self.l2 * v)
    }

    /// Upper bound of `||subgradient||` over the domain.
    pub fn gradient_bound(&self, domain: &Domain) -> f64 {
        self.l1 * (domain.dim() as f64).sqrt() + 2.0 * self.l2 * domain.max_norm()
    }
}

/// The mirror map generating a Bregman divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mirror {
    /// `psi(x) = scale * ||x||^2`.
    ScaledEuclidean { scale: f64 },
    /// `psi(x) = sum x_j ln x_j - x_j`, simplex only.
    Kl,
}

/// A mirror map together with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanGeometry {
    mirror: Mirror,
    domain: Domain,
}

/// Output of the iterative composite-step solver.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub point: Array1<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl BregmanGeometry {
    pub fn new(mirror: Mirror, domain: Domain) -> Result<Self> {
        match (&mirror, &domain) {
            (Mirror::ScaledEuclidean { scale }, _) => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "euclidean scale must be positive, got {scale}"
                    )));
                }
            }
            (Mirror::Kl, Domain::Simplex { .. }) => {}
            (Mirror::Kl, Domain::Box { .. }) => {
                return Err(Error::Unsupported(
                    "the KL geometry is defined on the simplex only".into(),
                ))
            }
        }
        Ok(BregmanGeometry { mirror, domain })
    }

    pub fn scaled_euclidean(scale: f64, domain: Domain) -> Result<Self> {
        Self::new(Mirror::ScaledEuclidean { scale }, domain)
    }

    pub fn kl_simplex(dim: usize) -> Result<Self> {
        Self::new(Mirror::Kl, Domain::simplex(dim)?)
    }

    pub fn mirror(&self) -> Mirror {
        self.mirror
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Strong-convexity parameter of `psi` w.r.t. the Euclidean norm.
    pub fn strong_convexity(&self) -> f64 {
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => 2.0 * scale,
            Mirror::Kl => 1.0,
        }
    }

    /// Lipschitz constant of `D(., y)` over the domain, if finite.
    ///
    /// For the scaled Euclidean map this is `2 * scale * diameter`. The KL
    /// divergence has unbounded gradient near the simplex boundary.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => Some(2.0 * scale * self.domain.diameter()),
            Mirror::Kl => None,
        }
    }

    pub fn potential(&self, x: ArrayView1<f64>) -> f64 {
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => scale * x.dot(&x),
            Mirror::Kl => x
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() - v } else { 0.0 })
                .sum(),
        }
    }

    pub fn potential_gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => x.mapv(|v| 2.0 * scale * v),
            Mirror::Kl => x.mapv(f64::ln),
        }
    }

    /// `D(x, y) = psi(x) - psi(y) - <grad psi(y), x - y>`.
    pub fn divergence(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        check_len(self.dim(), x.len(), "divergence first argument")?;
        check_len(self.dim(), y.len(), "divergence second argument")?;
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => {
                let d = &x - &y;
                Ok(scale * d.dot(&d))
            }
            Mirror::Kl => {
                if let Some(v) = x.iter().find(|v| !(**v >= 0.0)) {
                    return Err(Error::OutsideDomain(format!(
                        "KL first argument has negative entry {v}"
                    )));
                }
                if let Some(v) = y.iter().find(|v| !(**v > 0.0)) {
                    return Err(Error::OutsideDomain(format!(
                        "KL second argument must be strictly positive, found {v}"
                    )));
                }
                Ok(x.iter()
                    .zip(y.iter())
                    .map(|(&xj, &yj)| if xj > 0.0 { xj * (xj / yj).ln() } else { 0.0 })
                    .sum())
            }
        }
    }

    /// `alpha * <x, a> + alpha * r(x) + D(x, x_prev)`.
    pub fn composite_objective(
        &self,
        x: ArrayView1<f64>,
        x_prev: ArrayView1<f64>,
        direction: ArrayView1<f64>,
        reg: &RegularizerSpec,
        alpha: f64,
    ) -> Result<f64> {
        Ok(alpha * x.dot(&direction) + alpha * reg.value(x) + self.divergence(x, x_prev)?)
    }

    fn check_step_inputs(
        &self,
        x_prev: ArrayView1<f64>,
        direction: ArrayView1<f64>,
        alpha: f64,
    ) -> Result<()> {
        check_len(self.dim(), x_prev.len(), "mirror step x_prev")?;
        check_len(self.dim(), direction.len(), "mirror step direction")?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {alpha}"
            )));
        }
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mirror step direction"));
        }
        if !self.domain.contains(x_prev) {
            return Err(Error::OutsideDomain(format!(
                "mirror step x_prev = {x_prev}"
            )));
        }
        if self.mirror == Mirror::Kl && x_prev.iter().any(|v| *v <= 0.0) {
            return Err(Error::OutsideDomain(
                "KL mirror step needs a strictly positive x_prev".into(),
            ));
        }
        Ok(())
    }

    /// Minimizer of the composite objective over the domain.
    ///
    /// Closed form for scaled Euclidean on a box (soft-threshold then clamp,
    /// exact because the objective separates per coordinate) and for KL with no
    /// quadratic regularization (exponentiated gradient). Everything else goes
    /// through [`BregmanGeometry::mirror_step_iterative`].
    pub fn mirror_step(
        &self,
        x_prev: ArrayView1<f64>,
        direction: ArrayView1<f64>,
        reg: &RegularizerSpec,
        alpha: f64,
    ) -> Result<Array1<f64>> {
        self.check_step_inputs(x_prev, direction, alpha)?;
        match (&self.mirror, &self.domain) {
            (Mirror::ScaledEuclidean { scale }, Domain::Box { lower, upper }) => {
                let two_s = 2.0 * scale;
                let denom = two_s + 2.0 * alpha * reg.l2;
                Ok(Array1::from_shape_fn(self.dim(), |j| {
                    let v = two_s * x_prev[j] - alpha * direction[j];
                    (soft_threshold(v, alpha * reg.l1) / denom).clamp(lower[j], upper[j])
                }))
            }
            // l1 is constant on the simplex, so only l2 prevents the closed form.
            (Mirror::Kl, _) if reg.l2 == 0.0 => {
                let logits: Array1<f64> =
                    Zip::from(x_prev)
                        .and(direction)
                        .map_collect(|&x, &a| x.ln() - alpha * a);
                let max = logits.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
                let w = logits.mapv(|l| (l - max).exp());
                let s = w.sum();
                Ok(w / s)
            }
            _ => Ok(self.mirror_step_iterative(x_prev, direction, reg, alpha)?.point),
        }
    }

    /// Iterative solve of the composite step, independent of the closed forms.
    ///
    /// Euclidean geometries use proximal projected gradient with step `1/L`;
    /// the stopping rule is the gradient-map residual. The KL geometry solves
    /// the KKT system through bisection on the simplex multiplier.
    pub fn mirror_step_iterative(
        &self,
        x_prev: ArrayView1<f64>,
        direction: ArrayView1<f64>,
        reg: &RegularizerSpec,
        alpha: f64,
    ) -> Result<InnerSolution> {
        self.check_step_inputs(x_prev, direction, alpha)?;
        match self.mirror {
            Mirror::ScaledEuclidean { scale } => {
                self.proximal_gradient(scale, x_prev, direction, reg, alpha)
            }
            Mirror::Kl => Ok(kl_kkt_solve(x_prev, direction, reg, alpha)),
        }
    }

    fn proximal_gradient(
        &self,
        scale: f64,
        x_prev: ArrayView1<f64>,
        direction: ArrayView1<f64>,
        reg: &RegularizerSpec,
        alpha: f64,
    ) -> Result<InnerSolution> {
        let lipschitz = 2.0 * scale + 2.0 * alpha * reg.l2;
        let step = 1.0 / lipschitz;
        let mut x = x_prev.to_owned();
        for iter in 1..=INNER_MAX_ITER {
            let grad = Zip::from(&x)
                .and(x_prev)
                .and(direction)
                .map_collect(|&xj, &pj, &aj| {
                    alpha * aj + 2.0 * alpha * reg.l2 * xj + 2.0 * scale * (xj - pj)
                });
            let trial = &x - &(grad * step);
            let next = match &self.domain {
                Domain::Box { lower, upper } => Array1::from_shape_fn(x.len(), |j| {
                    soft_threshold(trial[j], step * alpha * reg.l1).clamp(lower[j], upper[j])
                }),
                // ||x||_1 == 1 on the simplex
                Domain::Simplex { .. } => project_simplex(trial.view()),
            };
            let residual = lipschitz * (&next - &x).mapv(|d| d * d).sum().sqrt();
            x = next;
            if residual <= INNER_TOL {
                return Ok(InnerSolution {
                    point: x,
                    iterations: iter,
                    residual,
                });
            }
        }
        Err(Error::NoConvergence(format!(
            "composite step did not reach residual {INNER_TOL} in {INNER_MAX_ITER} iterations"
        )))
    }
}

/// Solve `ln x + k x = c` for `x > 0` (`k >= 0`), returned as `ln x`.
fn solve_log_linear(k: f64, c: f64) -> f64 {
    if k == 0.0 {
        return c;
    }
    // root lies in [min(-ln k, c - 1), c]
    let mut lo = (-k.ln()).min(c - 1.0);
    let mut hi = c;
    let mut u = hi;
    for _ in 0..200 {
        let e = k * u.exp();
        let phi = u + e - c;
        if phi > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let mut next = u - phi / (1.0 + e);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * (1.0 + u.abs()) {
            return next;
        }
        u = next;
    }
    u
}

fn kl_kkt_solve(
    x_prev: ArrayView1<f64>,
    direction: ArrayView1<f64>,
    reg: &RegularizerSpec,
    alpha: f64,
) -> InnerSolution {
    let p = x_prev.len();
    let k = 2.0 * alpha * reg.l2;
    let c: Vec<f64> = x_prev
        .iter()
        .zip(direction.iter())
        .map(|(x, a)| x.ln() - alpha * a - 1.0)
        .collect();
    let cmax = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let point_for = |nu: f64| -> Array1<f64> {
        Array1::from_shape_fn(p, |j| solve_log_linear(k, c[j] - nu).exp())
    };
    // sum(x(nu)) is decreasing in nu; these endpoints bracket sum == 1
    let mut lo = cmax - k;
    let mut hi = cmax + (p as f64).ln();
    let mut iterations = 0;
    while iterations < 400 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if point_for(mid).sum() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let x = point_for(nu);
    let s = x.sum();
    let x = x / s;
    let residual = x
        .iter()
        .zip(x_prev.iter().zip(direction.iter()))
        .filter(|(xj, _)| **xj > 0.0)
        .map(|(xj, (pj, aj))| (alpha * aj + k * xj + (xj / pj).ln() + 1.0 + nu).abs())
        .fold(0.0, f64::max);
    InnerSolution {
        point: x,
        iterations,
        residual,
    }
}

/// Bound on the composite-objective subgradient norm used by the deviation
/// check: `alpha * ||a|| + alpha * (l1 * sqrt(p) + 2 * l2 * sup ||x||)`.
pub fn deviation_budget(
    geom: &BregmanGeometry,
    direction: ArrayView1<f64>,
    reg: &RegularizerSpec,
    alpha: f64,
) -> f64 {
    alpha * direction.dot(&direction).sqrt() + alpha * reg.gradient_bound(geom.domain())
}

/// Checks `||x_new - x_prev|| <= g_h / sigma` with an absolute slack of 1e-12.
pub fn within_deviation_bound(
    geom: &BregmanGeometry,
    x_prev: ArrayView1<f64>,
    x_new: ArrayView1<f64>,
    g_h: f64,
) -> bool {
    let d = &x_new - &x_prev;
    d.dot(&d).sqrt() <= g_h / geom.strong_convexity() + 1e-12
}
