//! Differentiable energies over logit matrices.
//!
//! Every model returns its value and gradient together from a single
//! [`EnergyModel::evaluate`] call; samplers cache the pair.

mod composite;
mod pairwise;
mod planted;
mod simple;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

pub use composite::CompositeEnergy;
pub use pairwise::{Contact, PairwiseContactEnergy};
pub use planted::{
    enumerate_sequences, hamming, planted_landscape, sequence_count, PlantedLandscape, PlantedSpec, MAX_ENUMERATION,
};
pub use simple::{GaussianEnergy, TargetProfileEnergy};

use crate::error::Result;
use crate::matrix::Matrix;

/// Energy value and gradient at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub energy: f64,
    pub gradient: Matrix,
}

pub trait EnergyModel: Send + Sync {
    /// `(L, K)` of the logit matrices this energy accepts.
    fn dims(&self) -> (usize, usize);

    /// Value and gradient at `logits`. The shape must equal [`dims`](Self::dims).
    fn evaluate(&self, logits: &Matrix) -> Evaluation;

    fn label(&self) -> &str {
        "energy"
    }

    /// [`evaluate`](Self::evaluate) with a shape check.
    fn try_evaluate(&self, logits: &Matrix) -> Result<Evaluation> {
        logits.ensure_shape(self.label(), self.dims())?;
        Ok(self.evaluate(logits))
    }

    fn value(&self, logits: &Matrix) -> f64 {
        self.evaluate(logits).energy
    }
}

impl<T: EnergyModel + ?Sized> EnergyModel for &T {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        (**self).evaluate(logits)
    }
    fn label(&self) -> &str {
        (**self).label()
    }
}

impl<T: EnergyModel + ?Sized> EnergyModel for Box<T> {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        (**self).evaluate(logits)
    }
    fn label(&self) -> &str {
        (**self).label()
    }
}

impl<T: EnergyModel + ?Sized> EnergyModel for Arc<T> {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        (**self).evaluate(logits)
    }
    fn label(&self) -> &str {
        (**self).label()
    }
}

/// Wraps an energy and counts `evaluate` calls.
pub struct CountingEnergy<E> {
    inner: E,
    calls: AtomicU64,
}

impl<E: EnergyModel> CountingEnergy<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: EnergyModel> EnergyModel for CountingEnergy<E> {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }
    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(logits)
    }
    fn label(&self) -> &str {
        self.inner.label()
    }
}

/// Largest entry-wise mismatch between an analytic gradient and a
/// central-difference gradient, scored as `|a - f| / max(|a|, |f|)` with an
/// absolute floor: entries with `|a - f| <= abs_floor` count as exact.
pub fn gradient_mismatch(analytic: &Matrix, numeric: &Matrix, abs_floor: f64) -> f64 {
    analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .map(|(&a, &f)| {
            let diff = (a - f).abs();
            if diff <= abs_floor {
                0.0
            } else {
                diff / a.abs().max(f.abs())
            }
        })
        .fold(0.0, f64::max)
}
