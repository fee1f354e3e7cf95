//! Metropolis-adjusted Langevin walk.

use std::f64::consts::PI;

use crate::energy::{EnergyModel, Evaluation};
use crate::matrix::Matrix;
use crate::Rng;

/// `l - eta * g`, the mean of the Langevin proposal from `l`.
pub fn langevin_mean(logits: &Matrix, gradient: &Matrix, eta: f64) -> Matrix {
    let mut mean = logits.clone();
    mean.axpy(-eta, gradient);
    mean
}

/// Log density of `N(mean, variance * I)` at `x`.
pub fn gaussian_log_density(x: &Matrix, mean: &Matrix, variance: f64) -> f64 {
    let n = x.as_slice().len() as f64;
    -0.5 * x.squared_distance(mean) / variance - 0.5 * n * (2.0 * PI * variance).ln()
}

#[derive(Clone, Debug)]
pub struct WalkProposal {
    pub logits: Matrix,
    /// `None` when the proposal itself is non-finite and was never evaluated.
    pub evaluation: Option<Evaluation>,
    pub log_q_forward: f64,
    pub log_q_reverse: f64,
}

impl WalkProposal {
    pub fn is_finite(&self) -> bool {
        self.evaluation
            .as_ref()
            .is_some_and(|e| e.energy.is_finite() && e.gradient.is_finite())
            && self.log_q_forward.is_finite()
            && self.log_q_reverse.is_finite()
    }
}

/// Draws `l' = l - eta g + sqrt(2 eta / beta) xi` and evaluates the energy at
/// `l'` so the reverse density can use `g'`.
pub fn walk_propose(
    logits: &Matrix,
    gradient: &Matrix,
    eta: f64,
    beta: f64,
    energy: &dyn EnergyModel,
    rng: &mut Rng,
) -> WalkProposal {
    let variance = 2.0 * eta / beta;
    let noise = variance.sqrt();
    let forward_mean = langevin_mean(logits, gradient, eta);
    let mut proposal = forward_mean.clone();
    for v in proposal.as_mut_slice() {
        *v += noise * rng.normal();
    }
    if !proposal.is_finite() {
        return WalkProposal {
            logits: proposal,
            evaluation: None,
            log_q_forward: f64::NAN,
            log_q_reverse: f64::NAN,
        };
    }
    let evaluation = energy.evaluate(&proposal);
    let log_q_forward = gaussian_log_density(&proposal, &forward_mean, variance);
    let reverse_mean = langevin_mean(&proposal, &evaluation.gradient, eta);
    let log_q_reverse = gaussian_log_density(logits, &reverse_mean, variance);
    WalkProposal {
        logits: proposal,
        evaluation: Some(evaluation),
        log_q_forward,
        log_q_reverse,
    }
}

/// `min(0, -beta (E' - E) + ln q(l | l') - ln q(l' | l))`.
pub fn walk_log_acceptance(
    beta: f64,
    current_energy: f64,
    proposed_energy: f64,
    log_q_forward: f64,
    log_q_reverse: f64,
) -> f64 {
    let ratio = -beta * (proposed_energy - current_energy) + log_q_reverse - log_q_forward;
    if ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        ratio.min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::GaussianEnergy;

    struct Flat;
    impl EnergyModel for Flat {
        fn dims(&self) -> (usize, usize) {
            (2, 3)
        }
        fn evaluate(&self, _: &Matrix) -> Evaluation {
            Evaluation {
                energy: 0.0,
                gradient: Matrix::zeros(2, 3),
            }
        }
    }

    #[test]
    fn zero_gradient_is_pure_noise() {
        let x = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        let (eta, beta) = (0.3, 2.0);
        let mut a = Rng::seed_from(40);
        let mut b = Rng::seed_from(40);
        let p = walk_propose(&x, &Matrix::zeros(2, 3), eta, beta, &Flat, &mut a);
        let scale = (2.0f64 * eta / beta).sqrt();
        for k in 0..6 {
            assert_eq!(p.logits.as_slice()[k], x.as_slice()[k] + scale * b.normal());
        }
        assert_eq!(p.log_q_forward, p.log_q_reverse);
        assert_eq!(
            walk_log_acceptance(beta, 0.0, 0.0, p.log_q_forward, p.log_q_reverse),
            0.0
        );
    }

    #[test]
    fn forward_density_matches_direct_formula() {
        let mut rng = Rng::seed_from(41);
        let e = GaussianEnergy::new(Matrix::from_fn(2, 3, |_, _| rng.normal()), 1.5).unwrap();
        for _ in 0..20 {
            let x = Matrix::from_fn(2, 3, |_, _| rng.normal());
            let g = e.evaluate(&x).gradient;
            let (eta, beta) = (0.1 + rng.uniform(), 0.5 + rng.uniform());
            let p = walk_propose(&x, &g, eta, beta, &e, &mut rng);
            let var = 2.0 * eta / beta;
            let mut direct = 0.0;
            for k in 0..6 {
                let mu = x.as_slice()[k] - eta * g.as_slice()[k];
                let d = p.logits.as_slice()[k] - mu;
                direct += -d * d / (2.0 * var) - 0.5 * (2.0 * PI * var).ln();
            }
            assert!((p.log_q_forward - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn cold_limit_is_gradient_step() {
        let mut rng = Rng::seed_from(42);
        let e = GaussianEnergy::new(Matrix::zeros(2, 3), 1.0).unwrap();
        let x = Matrix::from_fn(2, 3, |_, _| rng.normal());
        let g = e.evaluate(&x).gradient;
        let p = walk_propose(&x, &g, 0.2, 1e30, &e, &mut rng);
        let step = langevin_mean(&x, &g, 0.2);
        assert!(p.logits.squared_distance(&step) < 1e-25);
    }

    #[test]
    fn small_steps_accept_almost_surely() {
        let mut rng = Rng::seed_from(43);
        let e = GaussianEnergy::new(Matrix::zeros(2, 3), 1.0).unwrap();
        let x = Matrix::from_fn(2, 3, |_, _| rng.normal());
        let ev = e.evaluate(&x);
        let mut previous = f64::NEG_INFINITY;
        for eta in [1e-1, 1e-3, 1e-5, 1e-7] {
            let mut mean = 0.0;
            for _ in 0..200 {
                let p = walk_propose(&x, &ev.gradient, eta, 1.0, &e, &mut rng);
                let energy = p.evaluation.as_ref().unwrap().energy;
                mean += walk_log_acceptance(1.0, ev.energy, energy, p.log_q_forward, p.log_q_reverse) / 200.0;
            }
            assert!(mean >= previous);
            previous = mean;
        }
        assert!(previous > -1e-3);
    }
}
