//! Pointwise and enumerated probability-flow checks.

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{floored_ln, log_sum_exp};
use crate::sampler::mask::{log_product_mass, log_truncation_normalizer, mask_probabilities};
use crate::sampler::{
    apply_swaps, gaussian_log_density, jump_log_acceptance, langevin_mean, walk_log_acceptance, JumpDraw, JumpEndpoint,
    MaskMode, SamplerConfig,
};
use crate::softplm::MaskedSequenceModel;

/// Log probability flows `ln pi(a) + ln q(b|a) + ln alpha(a, b)` in both
/// directions, with unnormalized `pi = exp(-beta E)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkFlows {
    pub forward: f64,
    pub reverse: f64,
}

impl WalkFlows {
    pub fn mismatch(&self) -> f64 {
        (self.forward - self.reverse).abs()
    }
}

pub fn walk_log_flows(energy: &dyn EnergyModel, beta: f64, eta: f64, from: &Matrix, to: &Matrix) -> Result<WalkFlows> {
    let a = energy.try_evaluate(from)?;
    let b = energy.try_evaluate(to)?;
    let variance = 2.0 * eta / beta;
    let q_ab = gaussian_log_density(to, &langevin_mean(from, &a.gradient, eta), variance);
    let q_ba = gaussian_log_density(from, &langevin_mean(to, &b.gradient, eta), variance);
    let alpha_ab = walk_log_acceptance(beta, a.energy, b.energy, q_ab, q_ba);
    let alpha_ba = walk_log_acceptance(beta, b.energy, a.energy, q_ba, q_ab);
    Ok(WalkFlows {
        forward: -beta * a.energy + q_ab + alpha_ab,
        reverse: -beta * b.energy + q_ba + alpha_ba,
    })
}

/// Total jump flow between two states, summed over every auxiliary draw
/// `(S, y+, y-)` that maps one onto the other.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpFlow {
    pub log_forward: f64,
    pub log_reverse: f64,
    /// Number of auxiliary draws mapping `from` onto `to`.
    pub paths: usize,
    pub reachable: bool,
    /// `ln Z` of the mask distribution at each endpoint.
    pub log_z_from: f64,
    pub log_z_to: f64,
}

impl JumpFlow {
    /// `ln reverse - ln forward`; zero when both flows vanish.
    pub fn log_mismatch(&self) -> f64 {
        if !self.reachable {
            0.0
        } else {
            self.log_reverse - self.log_forward
        }
    }

    /// `|reverse / forward - 1|`.
    pub fn relative_mismatch(&self) -> f64 {
        self.log_mismatch().exp_m1().abs()
    }
}

const MATCH_TOLERANCE: f64 = 1e-9;

struct Endpoint {
    energy: f64,
    gradient: Matrix,
    conditionals: Matrix,
    mask_probs: Vec<f64>,
    log_z: f64,
}

fn endpoint(
    energy: &dyn EnergyModel,
    model: &MaskedSequenceModel,
    config: &SamplerConfig,
    logits: &Matrix,
) -> Result<Endpoint> {
    let ev = energy.try_evaluate(logits)?;
    let conditionals = model.soft_conditionals(logits, config.tau)?;
    let mask_probs = mask_probabilities(&ev.gradient, config.kappa, config.epsilon).probs;
    let log_z = log_truncation_normalizer(&mask_probs, config.s_max);
    Ok(Endpoint {
        energy: ev.energy,
        gradient: ev.gradient,
        conditionals,
        mask_probs,
        log_z,
    })
}

fn for_each_mask(length: usize, s_max: usize, mut visit: impl FnMut(&[usize])) {
    for bits in 1u32..(1u32 << length) {
        if bits.count_ones() as usize > s_max {
            continue;
        }
        let sites: Vec<usize> = (0..length).filter(|i| bits & (1 << i) != 0).collect();
        visit(&sites);
    }
}

fn log_flows_along(config: &SamplerConfig, from: &Endpoint, to: &Endpoint, draw: &JumpDraw, vocab: usize) -> f64 {
    // Sampling law of the draw: truncated Bernoulli mask, y+ from the
    // conditionals, y- uniform. This does not depend on the mask mode.
    let mut log_q = log_product_mass(&from.mask_probs, &draw.sites) - from.log_z;
    for (&i, &y) in draw.sites.iter().zip(&draw.plus) {
        log_q += floored_ln(from.conditionals.get(i, y));
    }
    log_q -= draw.sites.len() as f64 * (vocab as f64).ln();
    let log_alpha = jump_log_acceptance(
        config,
        JumpEndpoint {
            energy: from.energy,
            gradient: &from.gradient,
            conditionals: &from.conditionals,
        },
        JumpEndpoint {
            energy: to.energy,
            gradient: &to.gradient,
            conditionals: &to.conditionals,
        },
        draw,
    );
    -config.beta * from.energy + log_q + log_alpha
}

/// Enumerates all masks with `1 <= |S| <= s_max` and all token pairs at the
/// masked sites. Intended for `L <= 4`, `K <= 4`, `s_max <= 2`.
pub fn enumerate_jump_flow(
    energy: &dyn EnergyModel,
    model: &MaskedSequenceModel,
    config: &SamplerConfig,
    from: &Matrix,
    to: &Matrix,
) -> Result<JumpFlow> {
    config.validate()?;
    let (l, k) = energy.dims();
    from.ensure_shape("source state", (l, k))?;
    to.ensure_shape("target state", (l, k))?;
    if l > 6 || k > 6 || config.s_max > 3 {
        return Err(Error::InvalidInput(format!(
            "jump flow enumeration is limited to L, K <= 6 and s_max <= 3 (got L={l}, K={k}, s_max={})",
            config.s_max
        )));
    }
    let a = endpoint(energy, model, config, from)?;
    let b = endpoint(energy, model, config, to)?;
    let mut forward = Vec::new();
    let mut reverse = Vec::new();
    let mut failure = None;
    for_each_mask(l, config.s_max.min(l), |sites| {
        let n = sites.len();
        let combos = (k * k).pow(n as u32);
        for code in 0..combos {
            let mut rest = code;
            let mut plus = Vec::with_capacity(n);
            let mut minus = Vec::with_capacity(n);
            for _ in 0..n {
                plus.push(rest % k);
                rest /= k;
                minus.push(rest % k);
                rest /= k;
            }
            let draw = JumpDraw {
                sites: sites.to_vec(),
                plus,
                minus,
                mask_fallback: false,
            };
            let landed = apply_swaps(from, &draw, config.gamma);
            if landed.squared_distance(to).sqrt() > MATCH_TOLERANCE {
                continue;
            }
            let f = log_flows_along(config, &a, &b, &draw, k);
            let r = log_flows_along(config, &b, &a, &draw.reversed(), k);
            if f.is_nan() || r.is_nan() {
                failure = Some(Error::InvalidInput("non-finite flow term".into()));
            }
            forward.push(f);
            reverse.push(r);
        }
    });
    if let Some(err) = failure {
        return Err(err);
    }
    let reachable = !forward.is_empty();
    Ok(JumpFlow {
        log_forward: if reachable {
            log_sum_exp(&forward)
        } else {
            f64::NEG_INFINITY
        },
        log_reverse: if reachable {
            log_sum_exp(&reverse)
        } else {
            f64::NEG_INFINITY
        },
        paths: forward.len(),
        reachable,
        log_z_from: a.log_z,
        log_z_to: b.log_z,
    })
}

/// Expected `ln reverse - ln forward` under `mode`: zero for the exact mask
/// law, `ln Z(from) - ln Z(to)` for the raw product mass.
pub fn expected_log_mismatch(flow: &JumpFlow, mode: MaskMode) -> f64 {
    match mode {
        MaskMode::Exact => 0.0,
        MaskMode::Paper => flow.log_z_from - flow.log_z_to,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{CompositeEnergy, Contact, GaussianEnergy, PairwiseContactEnergy};
    use crate::sampler::walk_propose;
    use crate::softplm::SoftPlmEnergy;
    use crate::Rng;
    use std::sync::Arc;

    fn fixture(l: usize, k: usize, seed: u64) -> (CompositeEnergy, Arc<MaskedSequenceModel>) {
        let mut rng = Rng::seed_from(seed);
        let fields = Matrix::from_fn(l, k, |_, _| rng.normal());
        let contacts = vec![Contact {
            i: 0,
            j: l - 1,
            coupling: Matrix::from_fn(k, k, |_, _| rng.normal()),
        }];
        let structural = PairwiseContactEnergy::new(fields, contacts).unwrap();
        let model = Arc::new(MaskedSequenceModel::random(l, k, 4, &mut rng).unwrap());
        let prior = SoftPlmEnergy::new(model.clone(), 1.0).unwrap();
        (
            CompositeEnergy::new(Box::new(structural), Box::new(prior), 0.5).unwrap(),
            model,
        )
    }

    #[test]
    fn walk_flows_balance_on_gaussian() {
        let mut rng = Rng::seed_from(1);
        let energy = GaussianEnergy::new(Matrix::from_fn(2, 3, |i, j| (i * j) as f64), 0.8).unwrap();
        for _ in 0..100 {
            let x = Matrix::from_fn(2, 3, |_, _| 2.0 * rng.normal());
            let g = energy.evaluate(&x).gradient;
            let p = walk_propose(&x, &g, 0.3, 1.5, &energy, &mut rng);
            let flows = walk_log_flows(&energy, 1.5, 0.3, &x, &p.logits).unwrap();
            assert!(flows.mismatch() < 1e-10, "{flows:?}");
        }
    }

    #[test]
    fn identity_pair_balances_trivially() {
        let (energy, model) = fixture(3, 3, 2);
        let x = Matrix::from_fn(3, 3, |i, j| 0.3 * i as f64 - 0.2 * j as f64);
        let flow = enumerate_jump_flow(&energy, &model, &SamplerConfig::new(1.0), &x, &x).unwrap();
        assert!(flow.reachable);
        assert_eq!(flow.log_forward, flow.log_reverse);
    }

    #[test]
    fn exact_mode_balances_and_paper_mode_is_off_by_normalizers() {
        let mut rng = Rng::seed_from(3);
        let (energy, model) = fixture(3, 3, 4);
        let mut exact = SamplerConfig::new(1.2);
        exact.s_max = 2;
        exact.kappa = 0.8;
        let mut paper = exact.clone();
        paper.mask_mode = MaskMode::Paper;
        for _ in 0..10 {
            let x = Matrix::from_fn(3, 3, |_, _| rng.normal());
            let draw = JumpDraw {
                sites: vec![0, 2],
                plus: vec![1, 0],
                minus: vec![2, 1],
                mask_fallback: false,
            };
            let y = apply_swaps(&x, &draw, exact.gamma);
            let e = enumerate_jump_flow(&energy, &model, &exact, &x, &y).unwrap();
            assert!(e.reachable);
            assert!(e.relative_mismatch() < 1e-10, "{e:?}");
            let p = enumerate_jump_flow(&energy, &model, &paper, &x, &y).unwrap();
            let expected = expected_log_mismatch(&p, MaskMode::Paper);
            assert!((p.log_mismatch() - expected).abs() < 1e-10);
            assert!(expected.abs() > 1e-6);
        }
    }

    #[test]
    fn unreachable_pair_is_flagged() {
        let (energy, model) = fixture(3, 3, 5);
        let x = Matrix::zeros(3, 3);
        let y = Matrix::filled(3, 3, 0.25);
        let flow = enumerate_jump_flow(&energy, &model, &SamplerConfig::new(1.0), &x, &y).unwrap();
        assert!(!flow.reachable);
        assert_eq!(flow.paths, 0);
        assert_eq!(flow.log_forward, f64::NEG_INFINITY);
    }
}
