use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::epi::{Matrix, Vector};
use crate::error::{Error, Result};

/// Which attack-rate objective is paired with social burden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectivePair {
    #[serde(rename = "arh-sb")]
    HospitalizationsBurden,
    #[serde(rename = "ari-sb")]
    InfectionsBurden,
}

impl std::str::FromStr for ObjectivePair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arh-sb" => Ok(ObjectivePair::HospitalizationsBurden),
            "ari-sb" => Ok(ObjectivePair::InfectionsBurden),
            other => Err(Error::Config(format!("unknown objectives '{other}' (expected arh-sb|ari-sb)"))),
        }
    }
}

impl std::fmt::Display for ObjectivePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectivePair::HospitalizationsBurden => "arh-sb",
            ObjectivePair::InfectionsBurden => "ari-sb",
        })
    }
}

/// The three raw reward signals of one weekly transition, all `<= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rewards {
    /// Minus the loss of susceptibles.
    pub ari: f64,
    /// Minus the new hospital admissions.
    pub arh: f64,
    /// Missed contacts among susceptible and recovered people.
    pub sb: f64,
}

impl Rewards {
    pub fn pair(&self, objectives: ObjectivePair) -> [f64; 2] {
        match objectives {
            ObjectivePair::HospitalizationsBurden => [self.arh, self.sb],
            ObjectivePair::InfectionsBurden => [self.ari, self.sb],
        }
    }
}

/// Divisors bringing raw rewards to O(1) for learning.
///
/// The scaled social burden is `sb / (sb_prescale * sb_divisor)`; the
/// attack-rate objective is `attack / attack_divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardScaling {
    pub attack_divisor: f64,
    pub sb_divisor: f64,
    pub sb_prescale: f64,
    /// Evaluate social burden on per-group fractions `S_k / N_k` instead of
    /// head counts.
    pub per_capita: bool,
}

impl Default for RewardScaling {
    fn default() -> Self {
        Self { attack_divisor: 10_000.0, sb_divisor: 100.0, sb_prescale: 1e12, per_capita: false }
    }
}

impl RewardScaling {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("attack_divisor", self.attack_divisor),
            ("sb_divisor", self.sb_divisor),
            ("sb_prescale", self.sb_prescale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn divisors(&self) -> [f64; 2] {
        [self.attack_divisor, self.sb_prescale * self.sb_divisor]
    }

    pub fn scale(&self, raw: [f64; 2]) -> [f64; 2] {
        let d = self.divisors();
        [raw[0] / d[0], raw[1] / d[1]]
    }

    pub fn unscale(&self, scaled: [f64; 2]) -> [f64; 2] {
        let d = self.divisors();
        [scaled[0] * d[0], scaled[1] * d[1]]
    }
}

/// `sum_ij D_ij S_i S_j + sum_ij D_ij R_i R_j` for `D = C_hat - C`.
pub fn social_burden(diff: &Matrix, susceptible: &Vector, recovered: &Vector) -> f64 {
    let quad = |v: &Vector| -> f64 {
        let mut total = 0.0;
        Zip::indexed(diff).for_each(|(i, j), &d| total += d * v[i] * v[j]);
        total
    };
    quad(susceptible) + quad(recovered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hand_evaluated_social_burden() {
        let sb = social_burden(&array![[-2.0]], &array![100.0], &array![50.0]);
        assert_eq!(sb, -25_000.0);
    }

    #[test]
    fn zero_difference_costs_nothing() {
        let sb = social_burden(&Matrix::zeros((3, 3)), &array![1.0, 2.0, 3.0], &array![4.0, 5.0, 6.0]);
        assert_eq!(sb, 0.0);
    }

    #[test]
    fn scaling_round_trip() {
        let s = RewardScaling::default();
        let raw = [-12_345.0, -6.7e13];
        let back = s.unscale(s.scale(raw));
        assert!((back[0] - raw[0]).abs() < 1e-9 && (back[1] / raw[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.divisors(), [10_000.0, 1e14]);
    }

    #[test]
    fn objective_names() {
        assert_eq!("arh-sb".parse::<ObjectivePair>().unwrap(), ObjectivePair::HospitalizationsBurden);
        assert_eq!(ObjectivePair::InfectionsBurden.to_string(), "ari-sb");
        assert!("arh".parse::<ObjectivePair>().is_err());
    }
}
