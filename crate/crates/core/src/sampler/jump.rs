//! Masked-model-guided swap jumps.

use super::mask::{log_mask_mass, mask_probabilities, sample_mask};
use super::SamplerConfig;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::numeric::floored_ln;
use crate::Rng;

/// Auxiliary draw of one jump: sites, forward tokens `y+` and reference tokens
/// `y-` (aligned with `sites`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JumpDraw {
    pub sites: Vec<usize>,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
    pub mask_fallback: bool,
}

impl JumpDraw {
    /// The auxiliary draw that undoes this one.
    pub fn reversed(&self) -> JumpDraw {
        JumpDraw {
            sites: self.sites.clone(),
            plus: self.minus.clone(),
            minus: self.plus.clone(),
            mask_fallback: self.mask_fallback,
        }
    }
}

/// Samples the mask from gradient norms, then `y+ ~ p_i(. | l; tau)` and
/// `y- ~ Uniform(K)` at every masked site.
pub fn draw_jump(gradient: &Matrix, conditionals: &Matrix, config: &SamplerConfig, rng: &mut Rng) -> Result<JumpDraw> {
    let mp = mask_probabilities(gradient, config.kappa, config.epsilon);
    let sites = sample_mask(&mp.probs, config.s_max, rng)?;
    let vocab = conditionals.cols();
    let mut plus = Vec::with_capacity(sites.len());
    let mut minus = Vec::with_capacity(sites.len());
    for &i in &sites {
        plus.push(rng.categorical(conditionals.row(i)));
        minus.push(rng.index(vocab));
    }
    Ok(JumpDraw {
        sites,
        plus,
        minus,
        mask_fallback: mp.fallback,
    })
}

/// `l'_i = l_i + gamma (e_{y+} - e_{y-})` on masked sites.
pub fn apply_swaps(logits: &Matrix, draw: &JumpDraw, gamma: f64) -> Matrix {
    let mut out = logits.clone();
    for ((&i, &up), &down) in draw.sites.iter().zip(&draw.plus).zip(&draw.minus) {
        if up != down {
            out.add_at(i, up, gamma);
            out.add_at(i, down, -gamma);
        }
    }
    out
}

/// `ln q_S(S | l) + sum_{i in S} ln p_i(y+ | l)`; the uniform `y-` factor is
/// left out because it cancels in the acceptance ratio.
pub fn log_forward_proposal(gradient: &Matrix, conditionals: &Matrix, draw: &JumpDraw, config: &SamplerConfig) -> f64 {
    let mp = mask_probabilities(gradient, config.kappa, config.epsilon);
    let mask = log_mask_mass(&mp.probs, &draw.sites, config.s_max, config.mask_mode);
    mask + draw
        .sites
        .iter()
        .zip(&draw.plus)
        .map(|(&i, &y)| floored_ln(conditionals.get(i, y)))
        .sum::<f64>()
}

/// Energy, gradient and masked conditionals at one end of a jump.
#[derive(Clone, Copy, Debug)]
pub struct JumpEndpoint<'a> {
    pub energy: f64,
    pub gradient: &'a Matrix,
    pub conditionals: &'a Matrix,
}

/// `min(0, -beta (E' - E) + ln q_S(S | l') - ln q_S(S | l)
///   + sum_{i in S} [ln p_i(y- | l') - ln p_i(y+ | l)])`.
pub fn jump_log_acceptance(
    config: &SamplerConfig,
    current: JumpEndpoint<'_>,
    proposed: JumpEndpoint<'_>,
    draw: &JumpDraw,
) -> f64 {
    let forward = log_forward_proposal(current.gradient, current.conditionals, draw, config);
    let reverse = log_forward_proposal(proposed.gradient, proposed.conditionals, &draw.reversed(), config);
    let ratio = -config.beta * (proposed.energy - current.energy) + reverse - forward;
    if ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        ratio.min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_update() {
        let x = Matrix::from_fn(2, 3, |i, j| (i + j) as f64);
        let draw = JumpDraw {
            sites: vec![1],
            plus: vec![2],
            minus: vec![0],
            mask_fallback: false,
        };
        let y = apply_swaps(&x, &draw, 1.0);
        assert_eq!(y.get(1, 2), x.get(1, 2) + 1.0);
        assert_eq!(y.get(1, 0), x.get(1, 0) - 1.0);
        assert_eq!(y.row(0), x.row(0));
        assert_eq!(y.get(1, 1), x.get(1, 1));
        let identity = JumpDraw {
            sites: vec![0, 1],
            plus: vec![1, 2],
            minus: vec![1, 2],
            mask_fallback: false,
        };
        assert_eq!(apply_swaps(&x, &identity, 0.7), x);
    }

    #[test]
    fn identity_swap_accepts() {
        let mut rng = Rng::seed_from(50);
        let g = Matrix::from_fn(3, 4, |_, _| rng.normal());
        let c = crate::numeric::row_marginals(&Matrix::from_fn(3, 4, |_, _| rng.normal())).unwrap();
        let config = SamplerConfig::new(1.3);
        let draw = JumpDraw {
            sites: vec![0, 2],
            plus: vec![3, 1],
            minus: vec![3, 1],
            mask_fallback: false,
        };
        let end = JumpEndpoint {
            energy: 0.4,
            gradient: &g,
            conditionals: &c,
        };
        assert_eq!(jump_log_acceptance(&config, end, end, &draw), 0.0);
    }

    #[test]
    fn forward_token_frequencies() {
        let mut rng = Rng::seed_from(51);
        let g = Matrix::from_fn(3, 4, |_, _| rng.normal());
        let c = crate::numeric::row_marginals(&Matrix::from_fn(3, 4, |_, _| rng.normal())).unwrap();
        let config = SamplerConfig::new(1.0);
        let n = 100_000;
        let site = 1;
        let mut counts = [0usize; 4];
        let mut hits = 0usize;
        for _ in 0..n {
            let d = draw_jump(&g, &c, &config, &mut rng).unwrap();
            if let Some(pos) = d.sites.iter().position(|&s| s == site) {
                counts[d.plus[pos]] += 1;
                hits += 1;
            }
        }
        for (k, &count) in counts.iter().enumerate() {
            let p = c.get(site, k);
            let sigma = (hits as f64 * p * (1.0 - p)).sqrt();
            assert!((count as f64 - hits as f64 * p).abs() < 3.0 * sigma);
        }
    }
}
