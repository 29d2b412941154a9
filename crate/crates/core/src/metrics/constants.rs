use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::geometry::{BregmanGeometry, Mirror};
use crate::network::CommGraphSequence;
use crate::problem::OnlineProblem;

/// Problem, geometry and network constants entering the regret and
/// violation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoreticalConstants {
    /// Bound on function values.
    pub f: f64,
    /// Bound on subgradient norms.
    pub g: f64,
    /// Lipschitz constant of the divergences in their first argument.
    pub k: f64,
    /// Diameter of the joint decision set.
    pub diameter: f64,
    /// Smallest mirror-map strong convexity.
    pub sigma_min: f64,
    /// Smallest strong convexity of the costs relative to the mirror maps.
    pub mu_min: Option<f64>,
    pub agents: usize,
    pub constraints: usize,
    pub weight_floor: f64,
    pub window: usize,
    pub tau: f64,
    pub lambda: f64,
    pub b1: f64,
    pub c11: f64,
    pub c12: f64,
    pub b3: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
    }
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl TheoreticalConstants {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f: f64,
        g: f64,
        k: f64,
        diameter: f64,
        sigma_min: f64,
        mu_min: Option<f64>,
        agents: usize,
        constraints: usize,
        weight_floor: f64,
        window: usize,
    ) -> Result<Self> {
        positive("F", f)?;
        positive("G", g)?;
        positive("K", k)?;
        positive("d(X)", diameter)?;
        positive("sigma", sigma_min)?;
        if let Some(mu) = mu_min {
            positive("mu", mu)?;
        }
        if agents == 0 || constraints == 0 || window == 0 {
            return Err(Error::InvalidParameter(
                "agents, constraints and window must be positive".into(),
            ));
        }
        if !(weight_floor > 0.0 && weight_floor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "weight floor {weight_floor} must lie in (0, 1]"
            )));
        }
        let n = agents as f64;
        let shrink = 1.0 - weight_floor / (2.0 * n * n);
        let tau = shrink.powi(-2);
        let lambda = shrink.powf(1.0 / window as f64);
        let b1 = 2.0 * f + g * diameter;
        let c11 = 3.0 * n * n * tau * b1 * f / (1.0 - lambda) + n * b1 * b1 / 2.0;
        let c12 = 4.0 * n * g * g / sigma_min;
        Ok(TheoreticalConstants {
            f,
            g,
            k,
            diameter,
            sigma_min,
            mu_min,
            agents,
            constraints,
            weight_floor,
            window,
            tau,
            lambda,
            b1,
            c11,
            c12,
            b3: 2.0 * f + c11,
        })
    }

    fn n(&self) -> f64 {
        self.agents as f64
    }

    pub fn c1(&self, c: f64, kappa: f64) -> Result<f64> {
        open_unit("c", c)?;
        open_unit("kappa", kappa)?;
        Ok(self.c11 / kappa + self.c12 / (1.0 - c) + 2.0 * self.n() * self.diameter * self.k)
    }

    pub fn c21(&self, c: f64, kappa: f64) -> Result<f64> {
        open_unit("c", c)?;
        open_unit("kappa", kappa)?;
        let n = self.n();
        Ok(2.0 * n * (2.0 * self.g * self.g / ((1.0 - c) * self.sigma_min) + 1.0 / (1.0 - kappa) + 2.0))
    }

    pub fn c2(&self, c: f64, kappa: f64) -> Result<f64> {
        Ok(self.c21(c, kappa)? * (2.0 * self.n() * self.f + self.c1(c, kappa)?))
    }

    /// `B_2` for a Slater margin `eps`.
    pub fn b2(&self, eps: f64) -> Result<f64> {
        positive("epsilon", eps)?;
        let near = 2.0 * eps + 2.0 * (eps * eps + self.n() * self.diameter * self.k).sqrt();
        Ok(near.max(2.0 * self.b3 / eps))
    }

    pub fn c3(&self, kappa: f64, eps: f64) -> Result<f64> {
        open_unit("kappa", kappa)?;
        let b2 = self.b2(eps)?;
        let m = self.constraints as f64;
        Ok(self.n()
            * (2.0 * b2
                + b2 / (1.0 - kappa)
                + self.g * self.g * (b2 + 2.0) * m.sqrt() / (self.sigma_min * kappa)))
    }

    pub fn b4(&self, kappa: f64) -> Result<f64> {
        open_unit("kappa", kappa)?;
        let mu = self
            .mu_min
            .ok_or_else(|| Error::RegimeMismatch("costs are not strongly convex".into()))?;
        Ok((1.0 / mu).powf(1.0 / kappa).ceil())
    }

    pub fn c4(&self, kappa: f64) -> Result<f64> {
        let b4 = self.b4(kappa)?;
        let n = self.n();
        Ok(n * self.b1 * self.b1 / (2.0 * kappa)
            + self.b1 * self.c11 / kappa
            + self.c12 / kappa
            + 2.0 * n * self.diameter * self.k * b4.powf(1.0 - kappa))
    }
}

/// Constants of a problem run with the given geometries and graphs.
///
/// `F` and `G` come from the problem's analytic bounds, `K` is the largest
/// per-agent Lipschitz constant and the diameter is that of the product of
/// all agent domains.
pub fn estimate_constants<P: OnlineProblem + ?Sized>(
    problem: &P,
    geometries: &[BregmanGeometry],
    graphs: &CommGraphSequence,
) -> Result<TheoreticalConstants> {
    check_len(problem.agents(), geometries.len(), "geometries")?;
    let bounds = problem
        .function_bounds()
        .ok_or_else(|| Error::Unsupported("problem has no analytic bounds".into()))?;
    let mut k = 0.0f64;
    let mut diam_sq = 0.0;
    let mut sigma_min = f64::INFINITY;
    let mut scale_max = 0.0f64;
    for (i, geom) in geometries.iter().enumerate() {
        if geom.domain() != problem.domain(i) {
            return Err(Error::InvalidParameter(format!(
                "geometry domain of agent {i} differs from the problem domain"
            )));
        }
        let ki = geom.lipschitz_constant().ok_or_else(|| {
            Error::Unsupported(format!("divergence of agent {i} is not Lipschitz on its domain"))
        })?;
        k = k.max(ki);
        diam_sq += geom.domain().diameter().powi(2);
        sigma_min = sigma_min.min(geom.strong_convexity());
        scale_max = match geom.mirror() {
            Mirror::ScaledEuclidean { scale } => scale_max.max(scale),
            Mirror::Kl => f64::INFINITY,
        };
    }
    // f >= lin + c ||x - y||^2 = lin + (c / scale) D(x, y)
    let mu_min = bounds
        .euclidean_modulus
        .filter(|_| scale_max.is_finite())
        .map(|c| c / scale_max);
    TheoreticalConstants::new(
        bounds.value,
        bounds.gradient,
        k,
        diam_sq.sqrt(),
        sigma_min,
        mu_min,
        problem.agents(),
        problem.constraints(),
        graphs.weight_floor(),
        graphs.window(),
    )
}
