use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size rule `α_k` for a global iteration counter `k` (zero-based).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `α_k = base / (k + 1)^exponent`.
    Power { base: f64, exponent: f64 },
    /// `α_k = δ_l = scale / (l + 1)^exponent` for every `k` in epoch
    /// `l = ⌊k / r⌋`.
    EpochConstant { scale: f64, exponent: f64 },
    Constant { step: f64 },
}

impl StepSchedule {
    /// `0.01 / (k+1)^0.55`, the empirical default for VR³PM.
    pub fn empirical_default() -> Self {
        StepSchedule::Power {
            base: 0.01,
            exponent: 0.55,
        }
    }

    /// `α̃₀ / √(k+1)`.
    pub fn inverse_sqrt(base: f64) -> Self {
        StepSchedule::Power { base, exponent: 0.5 }
    }

    /// `α̃₀ = ρ / (16 L m κ²)`, the largest base for which the averaged
    /// iterate has the `O(1/√K)` / `O(log K / K)` guarantees.
    pub fn theoretical_base(lipschitz: f64, num_constraints: usize, kappa: f64, rho: f64) -> Result<f64> {
        if !(lipschitz > 0.0 && kappa > 0.0 && rho > 0.0) || num_constraints == 0 {
            return Err(Error::Config("L, κ, ρ must be positive and m ≥ 1".into()));
        }
        Ok(rho / (16.0 * lipschitz * num_constraints as f64 * kappa * kappa))
    }

    pub fn step(&self, k: usize, epoch_length: usize) -> f64 {
        match *self {
            StepSchedule::Power { base, exponent } => base / ((k + 1) as f64).powf(exponent),
            StepSchedule::EpochConstant { scale, exponent } => {
                let l = k / epoch_length.max(1);
                scale / ((l + 1) as f64).powf(exponent)
            }
            StepSchedule::Constant { step } => step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Power { base, exponent } => base > 0.0 && base.is_finite() && exponent.is_finite() && exponent >= 0.0,
            StepSchedule::EpochConstant { scale, exponent } => {
                scale > 0.0 && scale.is_finite() && exponent.is_finite() && exponent >= 0.0
            }
            StepSchedule::Constant { step } => step > 0.0 && step.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("step sizes must be positive and finite: {self:?}")))
        }
    }

    /// `Σδ_l = ∞` and `Σδ_l² < ∞`, decided from the exponent.
    pub fn is_square_summable_not_summable(&self) -> bool {
        match *self {
            StepSchedule::Power { exponent, .. } | StepSchedule::EpochConstant { exponent, .. } => {
                exponent > 0.5 && exponent <= 1.0
            }
            StepSchedule::Constant { .. } => false,
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            StepSchedule::Power { base, exponent } => format!("power({base}/(k+1)^{exponent})"),
            StepSchedule::EpochConstant { scale, exponent } => format!("epoch_constant({scale}/(l+1)^{exponent})"),
            StepSchedule::Constant { step } => format!("constant({step})"),
        }
    }
}
