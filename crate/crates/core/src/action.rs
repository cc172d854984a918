use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contact-reduction proportions: the fraction of work (incl. transport),
/// school and leisure (incl. other) contacts that remain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub p_w: f64,
    pub p_s: f64,
    pub p_l: f64,
}

impl Action {
    pub const OPEN: Action = Action { p_w: 1.0, p_s: 1.0, p_l: 1.0 };
    pub const CLOSED: Action = Action { p_w: 0.0, p_s: 0.0, p_l: 0.0 };

    pub fn new(p_w: f64, p_s: f64, p_l: f64) -> Self {
        Self { p_w, p_s, p_l }
    }

    /// The same proportion on every location.
    pub fn uniform(level: f64) -> Self {
        Self::new(level, level, level)
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [w, s, l] => Ok(Self::new(*w, *s, *l)),
            _ => Err(Error::InvalidAction(format!("expected 3 components, got {}", v.len()))),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p_w, self.p_s, self.p_l]
    }

    /// Rejects anything outside `[0, 1]^3` (including NaN).
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_w", self.p_w), ("p_s", self.p_s), ("p_l", self.p_l)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidAction(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn clamped(self) -> Self {
        Self::new(
            self.p_w.clamp(0.0, 1.0),
            self.p_s.clamp(0.0, 1.0),
            self.p_l.clamp(0.0, 1.0),
        )
    }

    pub fn with_school(self, p_s: f64) -> Self {
        Self { p_s, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Action::new(0.0, 1.0, 0.5).validate().is_ok());
        assert!(Action::new(-0.01, 1.0, 0.5).validate().is_err());
        assert!(Action::new(0.0, 1.01, 0.5).validate().is_err());
        assert!(Action::new(0.0, 1.0, f64::NAN).validate().is_err());
        assert!(Action::from_slice(&[0.1, 0.2]).is_err());
        assert_eq!(Action::new(-1.0, 2.0, 0.3).clamped(), Action::new(0.0, 1.0, 0.3));
    }
}
