use super::{EnergyModel, Evaluation};
use crate::error::{param, Error, Result};
use crate::matrix::Matrix;

/// `E(l) = E_struct(l) + lambda * E_prior(l)`.
pub struct CompositeEnergy {
    structural: Box<dyn EnergyModel>,
    prior: Box<dyn EnergyModel>,
    lambda: f64,
}

impl CompositeEnergy {
    pub fn new(structural: Box<dyn EnergyModel>, prior: Box<dyn EnergyModel>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(param("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        if prior.dims() != structural.dims() {
            return Err(Error::DimensionMismatch {
                component: format!("prior ({})", prior.label()),
                expected: structural.dims(),
                found: prior.dims(),
            });
        }
        Ok(Self {
            structural,
            prior,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn structural(&self) -> &dyn EnergyModel {
        self.structural.as_ref()
    }

    pub fn prior(&self) -> &dyn EnergyModel {
        self.prior.as_ref()
    }

    /// Shape-checked evaluation naming the offending component.
    pub fn evaluate_checked(&self, logits: &Matrix) -> Result<Evaluation> {
        logits.ensure_shape(
            &format!("structural ({})", self.structural.label()),
            self.structural.dims(),
        )?;
        Ok(self.evaluate(logits))
    }
}

impl EnergyModel for CompositeEnergy {
    fn dims(&self) -> (usize, usize) {
        self.structural.dims()
    }

    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        let mut total = self.structural.evaluate(logits);
        let prior = self.prior.evaluate(logits);
        total.energy += self.lambda * prior.energy;
        total.gradient.axpy(self.lambda, &prior.gradient);
        total
    }

    fn label(&self) -> &str {
        "composite"
    }
}
