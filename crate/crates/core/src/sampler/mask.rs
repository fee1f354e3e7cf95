//! Gradient-norm site masks for jump proposals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::Rng;

/// Cap on rejection rounds when drawing an admissible mask.
pub const MAX_MASK_ATTEMPTS: u64 = 1_000_000;

/// How the jump acceptance accounts for the mask proposal mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Raw Bernoulli product mass, ignoring the `1 <= |S| <= s_max`
    /// truncation.
    Paper,
    /// Product mass divided by `Z(p) = P(1 <= |S| <= s_max)`; exactly
    /// reversible.
    #[default]
    Exact,
}

/// Per-site inclusion probabilities and whether the zero-gradient fallback
/// was used.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskProbabilities {
    pub probs: Vec<f64>,
    pub fallback: bool,
}

/// `p_i = min(1, kappa * |g_i| / (max_j |g_j| + eps))`, or `kappa / L` at every
/// site when the gradient vanishes identically.
pub fn mask_probabilities(gradient: &Matrix, kappa: f64, epsilon: f64) -> MaskProbabilities {
    let norms: Vec<f64> = gradient
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        let l = norms.len() as f64;
        return MaskProbabilities {
            probs: vec![kappa / l; norms.len()],
            fallback: true,
        };
    }
    MaskProbabilities {
        probs: norms.iter().map(|n| (kappa * n / (max + epsilon)).min(1.0)).collect(),
        fallback: false,
    }
}

/// `ln P(1 <= |S| <= s_max)` under independent inclusion with `probs`,
/// by the Poisson-binomial size recursion truncated at `s_max`.
pub fn log_truncation_normalizer(probs: &[f64], s_max: usize) -> f64 {
    let mut dist = vec![0.0; s_max + 1];
    dist[0] = 1.0;
    for &p in probs {
        for size in (1..=s_max).rev() {
            dist[size] = dist[size] * (1.0 - p) + dist[size - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    dist[1..].iter().sum::<f64>().ln()
}

/// `ln prod_i p_i^[i in S] (1 - p_i)^[i not in S]`; `sites` must be sorted.
pub fn log_product_mass(probs: &[f64], sites: &[usize]) -> f64 {
    let mut next = sites.iter().peekable();
    let mut total = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            total += p.ln();
        } else {
            total += (1.0 - p).ln();
        }
    }
    total
}

/// Log proposal mass of the site set under `mode`.
pub fn log_mask_mass(probs: &[f64], sites: &[usize], s_max: usize, mode: MaskMode) -> f64 {
    let raw = log_product_mass(probs, sites);
    match mode {
        MaskMode::Paper => raw,
        MaskMode::Exact => raw - log_truncation_normalizer(probs, s_max),
    }
}

/// Independent Bernoulli draws, redrawn until `1 <= |S| <= s_max`. Returns the
/// sorted site list.
pub fn sample_mask(probs: &[f64], s_max: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let mut sites = Vec::with_capacity(s_max);
    for _ in 0..MAX_MASK_ATTEMPTS {
        sites.clear();
        for (i, &p) in probs.iter().enumerate() {
            if rng.bernoulli(p) {
                sites.push(i);
            }
        }
        if !sites.is_empty() && sites.len() <= s_max {
            return Ok(sites);
        }
    }
    Err(Error::MaskSampling(MAX_MASK_ATTEMPTS))
}
