//! Penalty force laws for contact constraint regularization: the plain
//! linear law and a quadratically regularized law whose force decays smoothly
//! to zero at the regularization gap g_bar. Forces are repulsive magnitudes
//! (f >= 0); the sign convention f = -dPi/dg ties them to the potentials.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyVariant {
    Linear,
    QuadRegularized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyLaw {
    pub variant: PenaltyVariant,
    pub epsilon: f64,
    pub g_bar: f64,
}

impl PenaltyLaw {
    pub fn linear(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidPenaltyLaw(format!(
                "epsilon = {epsilon} must be positive"
            )));
        }
        Ok(Self {
            variant: PenaltyVariant::Linear,
            epsilon,
            g_bar: 0.0,
        })
    }

    pub fn quad_regularized(epsilon: f64, g_bar: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidPenaltyLaw(format!(
                "epsilon = {epsilon} must be positive"
            )));
        }
        if !(g_bar > 0.0) {
            return Err(Error::InvalidPenaltyLaw(format!(
                "g_bar = {g_bar} must be positive for the regularized law"
            )));
        }
        Ok(Self {
            variant: PenaltyVariant::QuadRegularized,
            epsilon,
            g_bar,
        })
    }

    pub fn new(variant: PenaltyVariant, epsilon: f64, g_bar: f64) -> Result<Self> {
        match variant {
            PenaltyVariant::Linear => {
                if g_bar != 0.0 {
                    return Err(Error::InvalidPenaltyLaw(
                        "linear law requires g_bar = 0".to_string(),
                    ));
                }
                Self::linear(epsilon)
            }
            PenaltyVariant::QuadRegularized => Self::quad_regularized(epsilon, g_bar),
        }
    }

    /// Force value at the regularization boundary g = 0.
    pub fn f_bar(&self) -> f64 {
        0.5 * self.epsilon * self.g_bar
    }

    /// Rescaled copy with a different penalty stiffness.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }

    /// Gap beyond which the force vanishes (support of the law).
    pub fn support_gap(&self) -> f64 {
        self.g_bar
    }

    /// Repulsive force magnitude, f >= 0, zero for g > g_bar.
    /// At breakpoints the left branch is used.
    pub fn force(&self, g: f64) -> f64 {
        match self.variant {
            PenaltyVariant::Linear => {
                if g <= 0.0 {
                    -self.epsilon * g
                } else {
                    0.0
                }
            }
            PenaltyVariant::QuadRegularized => {
                let (eps, gb, fb) = (self.epsilon, self.g_bar, self.f_bar());
                if g <= 0.0 {
                    fb - eps * g
                } else if g <= gb {
                    let c = (eps * gb - fb) / (gb * gb);
                    c * g * g - eps * g + fb
                } else {
                    0.0
                }
            }
        }
    }

    /// df/dg (non-positive).
    pub fn stiffness(&self, g: f64) -> f64 {
        match self.variant {
            PenaltyVariant::Linear => {
                if g <= 0.0 {
                    -self.epsilon
                } else {
                    0.0
                }
            }
            PenaltyVariant::QuadRegularized => {
                let (eps, gb, fb) = (self.epsilon, self.g_bar, self.f_bar());
                if g <= 0.0 {
                    -eps
                } else if g <= gb {
                    let c = (eps * gb - fb) / (gb * gb);
                    2.0 * c * g - eps
                } else {
                    0.0
                }
            }
        }
    }

    /// Potential with f = -dPi/dg and Pi(g_bar) = 0; Pi >= 0.
    pub fn potential(&self, g: f64) -> f64 {
        match self.variant {
            PenaltyVariant::Linear => {
                if g <= 0.0 {
                    0.5 * self.epsilon * g * g
                } else {
                    0.0
                }
            }
            PenaltyVariant::QuadRegularized => {
                let (eps, gb, fb) = (self.epsilon, self.g_bar, self.f_bar());
                // Integration constant chosen so the middle branch vanishes at g_bar.
                let c = (eps * gb - fb) / (gb * gb);
                let mid = |g: f64| -> f64 {
                    -c * g * g * g / 3.0 + 0.5 * eps * g * g - fb * g
                };
                let offset = -mid(gb);
                if g <= 0.0 {
                    0.5 * eps * g * g - fb * g + offset
                } else if g <= gb {
                    mid(g) + offset
                } else {
                    0.0
                }
            }
        }
    }

    /// Potential divided by epsilon; independent of epsilon since both laws
    /// are linear in it.
    pub fn normalized_potential(&self, g: f64) -> f64 {
        self.potential(g) / self.epsilon
    }
}
