use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Impact cost, horizon and initial holdings of the tracking problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub horizon: f64,
    pub initial_position: f64,
    /// Distance to maturity below which the constrained rate is reported as singular.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity_guard: Option<f64>,
}

impl ModelParams {
    pub fn new(kappa: f64, horizon: f64, initial_position: f64) -> Result<Self> {
        let p = Self {
            kappa,
            horizon,
            initial_position,
            maturity_guard: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_maturity_guard(mut self, guard: f64) -> Self {
        self.maturity_guard = Some(guard);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return domain(format!("kappa must be positive and finite, got {}", self.kappa));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !self.initial_position.is_finite() {
            return domain("initial position must be finite");
        }
        if let Some(g) = self.maturity_guard {
            if !(g.is_finite() && g >= 0.0) {
                return domain("maturity guard must be nonnegative");
            }
        }
        Ok(())
    }

    pub fn sqrt_kappa(&self) -> f64 {
        self.kappa.sqrt()
    }

    pub fn guard(&self) -> f64 {
        self.maturity_guard.unwrap_or(self.horizon * 1e-9)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.horizon) {
            return domain(format!("time {t} outside [0, {}]", self.horizon));
        }
        Ok(())
    }
}
