use super::{EnergyModel, Evaluation};
use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{log_softmax_into, softmax_into};

/// `E(l) = sum_i H(t_i, softmax(l_i))`: pulls the marginals toward a fixed
/// per-site composition.
#[derive(Clone, Debug)]
pub struct TargetProfileEnergy {
    targets: Matrix,
}

impl TargetProfileEnergy {
    pub fn new(targets: Matrix) -> Result<Self> {
        for (i, row) in targets.row_iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("target row {i} is not a simplex")));
            }
        }
        Ok(Self { targets })
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }
}

impl EnergyModel for TargetProfileEnergy {
    fn dims(&self) -> (usize, usize) {
        self.targets.shape()
    }

    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        let (l, k) = self.dims();
        let mut gradient = Matrix::zeros(l, k);
        let mut log_q = vec![0.0; k];
        let mut energy = 0.0;
        for i in 0..l {
            let t = self.targets.row(i);
            log_softmax_into(logits.row(i), &mut log_q);
            energy -= t.iter().zip(&log_q).map(|(a, b)| a * b).sum::<f64>();
            let g = gradient.row_mut(i);
            softmax_into(logits.row(i), g);
            for (gk, tk) in g.iter_mut().zip(t) {
                *gk -= tk;
            }
        }
        Evaluation { energy, gradient }
    }

    fn label(&self) -> &str {
        "target_profile"
    }
}

/// `E(l) = |l - c|^2 / (2 s^2)`; the Boltzmann target is Gaussian with
/// per-coordinate variance `s^2 / beta`.
#[derive(Clone, Debug)]
pub struct GaussianEnergy {
    center: Matrix,
    scale: f64,
}

impl GaussianEnergy {
    pub fn new(center: Matrix, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(param("scale", format!("must be finite and > 0, got {scale}")));
        }
        center.ensure_finite()?;
        Ok(Self { center, scale })
    }

    pub fn center(&self) -> &Matrix {
        &self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl EnergyModel for GaussianEnergy {
    fn dims(&self) -> (usize, usize) {
        self.center.shape()
    }

    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        let inv = 1.0 / (self.scale * self.scale);
        let mut gradient = logits.clone();
        gradient.axpy(-1.0, &self.center);
        let energy = 0.5 * inv * gradient.squared_norm();
        gradient.scale(inv);
        Evaluation { energy, gradient }
    }

    fn label(&self) -> &str {
        "gaussian"
    }
}
