use serde::Serialize;

use super::constants::TheoreticalConstants;
use crate::algorithm::StepsizeSchedule;
use crate::error::{Error, Result};

/// Inputs of the bound formulas besides the constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub horizon: usize,
    /// Accumulated variation of the comparator under the mapping in use.
    pub variation: f64,
    /// Upper bound on the smallest accumulated variation of any feasible
    /// sequence, used by the violation bound.
    pub feasible_variation: f64,
    /// Slater margin; required by the `Slater` schedule.
    pub slater_margin: Option<f64>,
    /// The comparator is a single fixed point and the mapping is the
    /// identity. Selects the static bounds for strongly convex costs.
    pub static_comparator: bool,
}

impl BoundInputs {
    pub fn new(horizon: usize, variation: f64) -> Self {
        BoundInputs {
            horizon,
            variation,
            feasible_variation: variation,
            slater_margin: None,
            static_comparator: false,
        }
    }

    /// Inputs for the regret against a fixed point under the identity mapping.
    pub fn static_comparator(horizon: usize) -> Self {
        BoundInputs {
            static_comparator: true,
            ..BoundInputs::new(horizon, 0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub regret: f64,
    pub violation: f64,
}

fn general(
    k: &TheoreticalConstants,
    c: f64,
    kappa: f64,
    inputs: &BoundInputs,
) -> Result<Bounds> {
    let t = inputs.horizon as f64;
    let regret = k.c1(c, kappa)? * t.powf((1.0 - c).max(c).max(kappa))
        + 2.0 * k.k * t.powf(c) * inputs.variation;
    let violation = (k.c2(c, kappa)? * t.powf((2.0 - c).max(2.0 - kappa))
        + k.k * k.c21(c, kappa)? * t.powf(1f64.max(1.0 + c - kappa)) * inputs.feasible_variation)
        .sqrt();
    Ok(Bounds { regret, violation })
}

/// Right-hand sides of the regret and violation bounds for a schedule.
///
/// * `General { c, kappa }`: the general dynamic bounds.
/// * `Slater { kappa }`: the bounds under a Slater margin, which must be
///   supplied; they assume the identity mapping, so `variation` should be
///   the identity variation.
/// * `StronglyConvex { kappa }`: for a static comparator, the static bounds
///   for strongly convex costs; otherwise the general bounds at
///   `c = max(kappa, 1 - kappa)`.
pub fn theoretical_bounds(
    constants: &TheoreticalConstants,
    schedule: &StepsizeSchedule,
    inputs: &BoundInputs,
) -> Result<Bounds> {
    if inputs.horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    if !(inputs.variation >= 0.0 && inputs.feasible_variation >= 0.0) {
        return Err(Error::InvalidParameter("variations must be nonnegative".into()));
    }
    let t = inputs.horizon as f64;
    match *schedule {
        StepsizeSchedule::General { c, kappa } => general(constants, c, kappa, inputs),
        StepsizeSchedule::Slater { kappa } => {
            let eps = inputs.slater_margin.ok_or_else(|| {
                Error::RegimeMismatch("the Slater schedule needs a Slater margin".into())
            })?;
            let c = 1.0 - kappa;
            let rate = t.powf(kappa.max(1.0 - kappa));
            Ok(Bounds {
                regret: constants.c1(c, kappa)? * rate
                    + 2.0 * constants.k * t.powf(c) * inputs.variation,
                violation: constants.c3(kappa, eps)? * rate,
            })
        }
        StepsizeSchedule::StronglyConvex { kappa } => {
            let c = kappa.max(1.0 - kappa);
            if inputs.static_comparator {
                if inputs.variation != 0.0 {
                    return Err(Error::InvalidParameter(
                        "a static comparator has no variation".into(),
                    ));
                }
                if constants.mu_min.is_none() {
                    return Err(Error::RegimeMismatch(
                        "strongly convex bounds need strongly convex costs".into(),
                    ));
                }
                Ok(Bounds {
                    regret: constants.c1(c, kappa)?.max(constants.c4(kappa)?) * t.powf(kappa),
                    violation: constants.c2(c, kappa)?.sqrt() * t.powf(1.0 - kappa / 2.0),
                })
            } else {
                general(constants, c, kappa, inputs)
            }
        }
        StepsizeSchedule::Custom { .. } => Err(Error::RegimeMismatch(
            "no bound is known for custom step sizes".into(),
        )),
    }
}
