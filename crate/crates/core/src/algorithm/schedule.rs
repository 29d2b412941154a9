use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step sizes used in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stepsizes {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// The primal step `alpha`, dual regularization `beta` and dual step `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepsizeSchedule {
    /// `alpha = t^-c`, `beta = t^-kappa`, `gamma = t^-(1 - kappa)`.
    General { c: f64, kappa: f64 },
    /// `alpha = gamma = t^-(1 - kappa)`, `beta = t^-kappa`.
    Slater { kappa: f64 },
    /// `alpha = t^-max(1 - kappa, kappa)`, `beta = t^-kappa`, `gamma = t^-(1 - kappa)`.
    StronglyConvex { kappa: f64 },
    /// Explicit sequences indexed from round 1.
    Custom {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_sequence(name: &str, seq: &[f64]) -> Result<()> {
    if let Some(v) = seq.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "{name} sequence has non-positive entry {v}"
        )));
    }
    if let Some(k) = seq.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} sequence increases at round {}",
            k + 2
        )));
    }
    Ok(())
}

impl StepsizeSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepsizeSchedule::General { c, kappa } => {
                check_exponent("c", *c)?;
                check_exponent("kappa", *kappa)
            }
            StepsizeSchedule::Slater { kappa } | StepsizeSchedule::StronglyConvex { kappa } => {
                check_exponent("kappa", *kappa)
            }
            StepsizeSchedule::Custom { alpha, beta, gamma } => {
                if alpha.len() != beta.len() || beta.len() != gamma.len() {
                    return Err(Error::InvalidParameter(
                        "custom step sequences differ in length".into(),
                    ));
                }
                check_sequence("alpha", alpha)?;
                check_sequence("beta", beta)?;
                check_sequence("gamma", gamma)
            }
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            StepsizeSchedule::General { kappa, .. }
            | StepsizeSchedule::Slater { kappa }
            | StepsizeSchedule::StronglyConvex { kappa } => Some(*kappa),
            StepsizeSchedule::Custom { .. } => None,
        }
    }

    /// The exponent `c` in `alpha = t^-c`.
    pub fn primal_exponent(&self) -> Option<f64> {
        match self {
            StepsizeSchedule::General { c, .. } => Some(*c),
            StepsizeSchedule::Slater { kappa } => Some(1.0 - kappa),
            StepsizeSchedule::StronglyConvex { kappa } => Some(kappa.max(1.0 - kappa)),
            StepsizeSchedule::Custom { .. } => None,
        }
    }

    /// Step sizes of round `t >= 1`.
    pub fn at(&self, t: usize) -> Result<Stepsizes> {
        if t == 0 {
            return Err(Error::InvalidParameter("rounds start at 1".into()));
        }
        self.validate()?;
        let tf = t as f64;
        let steps = match self {
            StepsizeSchedule::General { c, kappa } => Stepsizes {
                alpha: tf.powf(-c),
                beta: tf.powf(-kappa),
                gamma: tf.powf(kappa - 1.0),
            },
            StepsizeSchedule::Slater { kappa } => Stepsizes {
                alpha: tf.powf(kappa - 1.0),
                beta: tf.powf(-kappa),
                gamma: tf.powf(kappa - 1.0),
            },
            StepsizeSchedule::StronglyConvex { kappa } => Stepsizes {
                alpha: tf.powf(-kappa.max(1.0 - kappa)),
                beta: tf.powf(-kappa),
                gamma: tf.powf(kappa - 1.0),
            },
            StepsizeSchedule::Custom { alpha, beta, gamma } => {
                if t > alpha.len() {
                    return Err(Error::InvalidParameter(format!(
                        "custom schedule covers {} rounds, asked for {t}",
                        alpha.len()
                    )));
                }
                Stepsizes {
                    alpha: alpha[t - 1],
                    beta: beta[t - 1],
                    gamma: gamma[t - 1],
                }
            }
        };
        Ok(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_round_is_all_ones() {
        let s = StepsizeSchedule::General { c: 0.3, kappa: 0.7 }.at(1).unwrap();
        assert_eq!((s.alpha, s.beta, s.gamma), (1.0, 1.0, 1.0));
    }

    #[test]
    fn square_root_schedule() {
        let s = StepsizeSchedule::General { c: 0.5, kappa: 0.5 }.at(16).unwrap();
        assert_eq!((s.alpha, s.beta, s.gamma), (0.25, 0.25, 0.25));
    }

    #[test]
    fn slater_schedule() {
        let s = StepsizeSchedule::Slater { kappa: 0.25 }.at(16).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(s.gamma, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(s.beta, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn strongly_convex_uses_the_larger_exponent() {
        let s = StepsizeSchedule::StronglyConvex { kappa: 0.25 }.at(16).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.125, epsilon = 1e-15);
        let s = StepsizeSchedule::StronglyConvex { kappa: 0.75 }.at(16).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(s.beta, 0.125, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(StepsizeSchedule::Slater { kappa: bad }.at(3).is_err());
            assert!(StepsizeSchedule::General { c: bad, kappa: 0.5 }.at(3).is_err());
        }
        assert!(StepsizeSchedule::General { c: 0.5, kappa: 0.5 }.at(0).is_err());
        let increasing = StepsizeSchedule::Custom {
            alpha: vec![0.5, 1.0],
            beta: vec![1.0, 1.0],
            gamma: vec![1.0, 1.0],
        };
        assert!(increasing.validate().is_err());
        let short = StepsizeSchedule::Custom {
            alpha: vec![1.0],
            beta: vec![1.0],
            gamma: vec![1.0],
        };
        assert!(short.at(2).is_err());
    }

    #[test]
    fn schedules_are_non_increasing() {
        let schedules = [
            StepsizeSchedule::General { c: 0.2, kappa: 0.9 },
            StepsizeSchedule::Slater { kappa: 0.4 },
            StepsizeSchedule::StronglyConvex { kappa: 0.6 },
        ];
        for s in &schedules {
            let mut prev = s.at(1).unwrap();
            for t in 2..500 {
                let cur = s.at(t).unwrap();
                assert!(cur.alpha <= prev.alpha && cur.beta <= prev.beta && cur.gamma <= prev.gamma);
                assert!(cur.beta * cur.gamma <= 1.0);
                prev = cur;
            }
        }
    }
}
