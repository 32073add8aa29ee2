//! Certification of a measured umbrella witness against the classical and
//! real-qubit thresholds.

use serde::{Deserialize, Serialize};

use crate::bounds::{real_family_value, umbrella_classical};
use crate::error::{Error, Result};
use crate::sim::WitnessEstimate;

pub const DEFAULT_Z_MIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub w_class: f64,
    pub w_r2: f64,
    pub w_c2: f64,
}

impl Thresholds {
    /// Umbrella thresholds at `c`: the closed-form classical value, the real
    /// coplanar family value, and the complex maximum 2.
    pub fn umbrella(c: f64) -> Result<Self> {
        Ok(Thresholds {
            w_class: umbrella_classical(c)?,
            w_r2: real_family_value(c)?,
            w_c2: 2.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub beats_classical: bool,
    pub beats_real: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub w_hat: f64,
    pub sigma_hat: f64,
    pub thresholds: Thresholds,
    pub z_class: f64,
    pub z_real: f64,
    pub z_min: f64,
    pub verdicts: Verdicts,
}

impl Certificate {
    pub fn new(w_hat: f64, sigma_hat: f64, thresholds: Thresholds, z_min: f64) -> Result<Self> {
        if !(sigma_hat.is_finite() && sigma_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "standard deviation must be positive (got {sigma_hat}); z-scores are undefined"
            )));
        }
        if !z_min.is_finite() {
            return Err(Error::InvalidArgument(format!("z_min must be finite (got {z_min})")));
        }
        let z_class = (w_hat - thresholds.w_class) / sigma_hat;
        let z_real = (w_hat - thresholds.w_r2) / sigma_hat;
        Ok(Certificate {
            w_hat,
            sigma_hat,
            thresholds,
            z_class,
            z_real,
            z_min,
            verdicts: Verdicts {
                beats_classical: z_class >= z_min,
                beats_real: z_real >= z_min,
            },
        })
    }

    pub fn from_estimate(est: &WitnessEstimate, thresholds: Thresholds, z_min: f64) -> Result<Self> {
        Self::new(est.w_hat, est.sigma_hat, thresholds, z_min)
    }

    /// True when every requested separation holds.
    pub fn certified(&self) -> bool {
        self.verdicts.beats_classical && self.verdicts.beats_real
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_scores_and_verdicts() {
        let t = Thresholds {
            w_class: 1.5,
            w_r2: 1.9,
            w_c2: 2.0,
        };
        let c = Certificate::new(1.95, 0.01, t, 3.0).unwrap();
        assert!((c.z_class - 45.0).abs() < 1e-9 && (c.z_real - 5.0).abs() < 1e-9);
        assert!(c.certified());
        let c = Certificate::new(1.92, 0.01, t, 3.0).unwrap();
        assert!(c.verdicts.beats_classical && !c.verdicts.beats_real);
        assert!(Certificate::new(1.9, 0.0, t, 3.0).is_err());
    }

    #[test]
    fn verdict_at_exact_threshold() {
        let t = Thresholds {
            w_class: 1.0,
            w_r2: 1.0,
            w_c2: 2.0,
        };
        let c = Certificate::new(1.5, 0.25, t, 2.0).unwrap();
        assert_eq!(c.z_real, 2.0);
        assert!(c.verdicts.beats_real);
    }
}
