//! Soft masked-model validation: one-hot fidelity, mixture consistency and
//! library ranking.

use rayon::prelude::*;

use super::spearman;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{argmax, floored_ln, js_unchecked, kl_unchecked, mean, median, one_hot};
use crate::softplm::MaskedSequenceModel;
use crate::Rng;

/// Fraction of positions blurred per sequence in the mixture test.
pub const BLUR_FRACTION: f64 = 0.3;
/// Option-list size per library site.
pub const LIBRARY_OPTIONS: usize = 3;

const MAX_EXACT_ASSIGNMENTS: usize = 1 << 20;

fn check_sequences(model: &MaskedSequenceModel, sequences: &[Vec<usize>]) -> Result<()> {
    let (l, k) = model.dims();
    if sequences.is_empty() {
        return Err(Error::InvalidInput("no sequences given".into()));
    }
    for (n, x) in sequences.iter().enumerate() {
        if x.len() != l {
            return Err(Error::InvalidInput(format!(
                "sequence {n} has length {}, expected {l}",
                x.len()
            )));
        }
        if let Some(t) = x.iter().find(|&&t| t >= k) {
            return Err(Error::InvalidInput(format!(
                "sequence {n} has token {t} outside vocabulary {k}"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Fidelity {
    /// Mean `KL(discrete || soft)` over sampled `(sequence, site)` pairs.
    pub mean_kl: f64,
    pub samples: usize,
    pub spearman_mean: Option<f64>,
    pub spearman_median: Option<f64>,
    /// Sites with a defined per-site correlation.
    pub spearman_sites: usize,
}

struct SiteFidelity {
    kl: f64,
    rho: Option<f64>,
}

/// Compares discrete and one-hot soft conditionals at `sites_per_sequence`
/// random sites of each sequence, and correlates substitution log-ratios
/// with gradient differences of the site's cross-entropy.
pub fn onehot_fidelity(
    model: &MaskedSequenceModel,
    sequences: &[Vec<usize>],
    sites_per_sequence: usize,
    tau: f64,
    seed: u64,
) -> Result<Fidelity> {
    check_sequences(model, sequences)?;
    let (l, k) = model.dims();
    if sites_per_sequence == 0 {
        return Err(Error::InvalidInput("at least one site per sequence is required".into()));
    }
    let per_sequence: Vec<Vec<SiteFidelity>> = sequences
        .par_iter()
        .enumerate()
        .map(|(n, x)| {
            let mut rng = Rng::with_stream(seed, n as u64);
            let mut sites = rng.distinct(l, sites_per_sequence.min(l));
            sites.sort_unstable();
            let q = one_hot(x, k)?;
            let discrete = model.discrete_conditionals(x, tau)?;
            let soft = model.conditionals_from_marginals(&q, tau)?;
            let mut out = Vec::with_capacity(sites.len());
            for &i in &sites {
                let kl = kl_unchecked(discrete.row(i), soft.row(i));
                let mut weights = vec![0.0; l];
                weights[i] = 1.0;
                let (_, grad) = model.cross_entropy_with_gradient(&q, tau, Some(&weights))?;
                let a = x[i];
                let mut swap = Vec::with_capacity(k - 1);
                let mut slope = Vec::with_capacity(k - 1);
                for b in (0..k).filter(|&b| b != a) {
                    swap.push(floored_ln(discrete.get(i, a)) - floored_ln(discrete.get(i, b)));
                    slope.push(grad.get(i, b) - grad.get(i, a));
                }
                let rho = if swap.len() >= 2 {
                    spearman(&swap, &slope)?
                } else {
                    None
                };
                out.push(SiteFidelity { kl, rho });
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let sites: Vec<&SiteFidelity> = per_sequence.iter().flatten().collect();
    let rhos: Vec<f64> = sites.iter().filter_map(|s| s.rho).collect();
    Ok(Fidelity {
        mean_kl: mean(&sites.iter().map(|s| s.kl).collect::<Vec<_>>()),
        samples: sites.len(),
        spearman_mean: (!rhos.is_empty()).then(|| mean(&rhos)),
        spearman_median: (!rhos.is_empty()).then(|| median(&rhos)),
        spearman_sites: rhos.len(),
    })
}

/// One-hot marginals with `(1 - eps) onehot + eps Uniform(K)` at `blurred`.
pub fn blur_marginals(tokens: &[usize], blurred: &[usize], epsilon: f64, vocab: usize) -> Result<Matrix> {
    let mut q = one_hot(tokens, vocab)?;
    for &s in blurred {
        if s >= tokens.len() {
            return Err(Error::InvalidInput(format!("blurred site {s} out of range")));
        }
        for (c, v) in q.row_mut(s).iter_mut().enumerate() {
            *v = (1.0 - epsilon) * f64::from(u8::from(c == tokens[s])) + epsilon / vocab as f64;
        }
    }
    Ok(q)
}

/// Number of blurred sites for a sequence of length `length`.
pub fn blur_count(length: usize) -> usize {
    ((BLUR_FRACTION * length as f64).round() as usize).clamp(1.min(length), length)
}

/// Monte Carlo average of discrete conditionals over contexts drawn from
/// the blurred marginals.
pub fn monte_carlo_mixture_reference(
    model: &MaskedSequenceModel,
    tokens: &[usize],
    blurred: &[usize],
    epsilon: f64,
    samples: usize,
    tau: f64,
    rng: &mut Rng,
) -> Result<Matrix> {
    let (l, k) = model.dims();
    let q = blur_marginals(tokens, blurred, epsilon, k)?;
    let mut sum = Matrix::zeros(l, k);
    let mut x = tokens.to_vec();
    for _ in 0..samples {
        for &s in blurred {
            x[s] = rng.categorical(q.row(s));
        }
        sum.axpy(1.0, &model.discrete_conditionals(&x, tau)?);
    }
    sum.scale(1.0 / samples as f64);
    Ok(sum)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureMoments {
    /// Exact expectation of the discrete conditionals.
    pub mean: Matrix,
    /// Exact per-entry variance of a single draw.
    pub variance: Matrix,
}

/// Exhaustive marginalization over every assignment of the blurred sites.
pub fn exact_mixture_reference(
    model: &MaskedSequenceModel,
    tokens: &[usize],
    blurred: &[usize],
    epsilon: f64,
    tau: f64,
) -> Result<MixtureMoments> {
    let (l, k) = model.dims();
    let q = blur_marginals(tokens, blurred, epsilon, k)?;
    let total = k
        .checked_pow(blurred.len() as u32)
        .filter(|&n| n <= MAX_EXACT_ASSIGNMENTS)
        .ok_or_else(|| {
            Error::InvalidInput(format!(
                "{k}^{} blurred assignments is too many to enumerate",
                blurred.len()
            ))
        })?;
    let mut first = Matrix::zeros(l, k);
    let mut second = Matrix::zeros(l, k);
    let mut x = tokens.to_vec();
    for code in 0..total {
        let mut rest = code;
        let mut weight = 1.0;
        for &s in blurred {
            x[s] = rest % k;
            rest /= k;
            weight *= q.get(s, x[s]);
        }
        if weight == 0.0 {
            continue;
        }
        let p = model.discrete_conditionals(&x, tau)?;
        first.axpy(weight, &p);
        second.axpy(weight, &p.map(|v| v * v));
    }
    let variance = Matrix::from_fn(l, k, |i, j| (second.get(i, j) - first.get(i, j).powi(2)).max(0.0));
    Ok(MixtureMoments { mean: first, variance })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MixtureRow {
    pub epsilon: f64,
    /// Mean JS divergence between soft and Monte Carlo conditionals, over all
    /// sites of all sequences.
    pub mean_js: f64,
    pub top1_agreement: f64,
    pub sites: usize,
}

/// Blurs `round(0.3 L)` sites per sequence (the same sites for every
/// `epsilon`) and compares soft conditionals of the blurred marginals to a
/// `kmc`-sample Monte Carlo reference.
pub fn mixture_consistency(
    model: &MaskedSequenceModel,
    sequences: &[Vec<usize>],
    epsilons: &[f64],
    kmc: usize,
    tau: f64,
    seed: u64,
) -> Result<Vec<MixtureRow>> {
    check_sequences(model, sequences)?;
    if let Some(e) = epsilons.iter().find(|e| !(0.0..1.0).contains(*e)) {
        return Err(Error::InvalidInput(format!("epsilon {e} outside [0, 1)")));
    }
    if kmc == 0 {
        return Err(Error::InvalidInput("kmc must be at least 1".into()));
    }
    let (l, k) = model.dims();
    let per_sequence: Vec<Vec<(f64, usize)>> = sequences
        .par_iter()
        .enumerate()
        .map(|(n, x)| {
            let mut rng = Rng::with_stream(seed, n as u64);
            let mut blurred = rng.distinct(l, blur_count(l));
            blurred.sort_unstable();
            epsilons
                .iter()
                .map(|&eps| {
                    let q = blur_marginals(x, &blurred, eps, k)?;
                    let soft = model.conditionals_from_marginals(&q, tau)?;
                    let reference = monte_carlo_mixture_reference(model, x, &blurred, eps, kmc, tau, &mut rng)?;
                    let mut js = 0.0;
                    let mut agree = 0;
                    for i in 0..l {
                        js += js_unchecked(soft.row(i), reference.row(i));
                        agree += (argmax(soft.row(i)) == argmax(reference.row(i))) as usize;
                    }
                    Ok((js, agree))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let sites = sequences.len() * l;
    Ok(epsilons
        .iter()
        .enumerate()
        .map(|(e, &epsilon)| {
            let (js, agree) = per_sequence
                .iter()
                .fold((0.0, 0), |acc, row| (acc.0 + row[e].0, acc.1 + row[e].1));
            MixtureRow {
                epsilon,
                mean_js: js / sites as f64,
                top1_agreement: agree as f64 / sites as f64,
                sites,
            }
        })
        .collect())
}

/// A combinatorial library: `base` with each site `sites[n]` free to take any
/// token of `options[n]`.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Library {
    pub base: Vec<usize>,
    pub sites: Vec<usize>,
    pub options: Vec<Vec<usize>>,
}

impl Library {
    fn validate(&self, length: usize, vocab: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.base.len() != length || self.base.iter().any(|&t| t >= vocab) {
            return bad("library base sequence does not match the model".into());
        }
        if self.sites.is_empty() || self.sites.len() != self.options.len() {
            return bad("library needs one option list per site".into());
        }
        let mut seen = vec![false; length];
        for &s in &self.sites {
            if s >= length || seen[s] {
                return bad(format!("library site {s} is out of range or repeated"));
            }
            seen[s] = true;
        }
        if self
            .options
            .iter()
            .any(|o| o.is_empty() || o.iter().any(|&t| t >= vocab))
        {
            return bad("library option lists must be non-empty and inside the vocabulary".into());
        }
        Ok(())
    }

    fn marginals(&self, vocab: usize) -> Result<Matrix> {
        let mut q = one_hot(&self.base, vocab)?;
        for (&s, opts) in self.sites.iter().zip(&self.options) {
            let row = q.row_mut(s);
            row.fill(0.0);
            for &t in opts {
                row[t] += 1.0 / opts.len() as f64;
            }
        }
        Ok(q)
    }
}

/// Random libraries with `sites` distinct edited positions and
/// `LIBRARY_OPTIONS` distinct tokens per position.
pub fn random_libraries(
    length: usize,
    vocab: usize,
    count: usize,
    sites: usize,
    rng: &mut Rng,
) -> Result<Vec<Library>> {
    if sites == 0 || sites > length || vocab < LIBRARY_OPTIONS {
        return Err(Error::InvalidInput(format!(
            "cannot build libraries with {sites} sites and {LIBRARY_OPTIONS} options on L={length}, K={vocab}"
        )));
    }
    Ok((0..count)
        .map(|_| {
            let base: Vec<usize> = (0..length).map(|_| rng.index(vocab)).collect();
            let mut chosen = rng.distinct(length, sites);
            chosen.sort_unstable();
            let options = chosen
                .iter()
                .map(|_| {
                    let mut o = rng.distinct(vocab, LIBRARY_OPTIONS);
                    o.sort_unstable();
                    o
                })
                .collect();
            Library {
                base,
                sites: chosen,
                options,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LibraryRanking {
    /// Soft library score `sum_{i in S} H(q_i, p_i)` per library.
    pub f_soft: Vec<f64>,
    /// Mean pseudo-NLL over sampled variants.
    pub nll_mean: Vec<f64>,
    /// Lowest pseudo-NLL over sampled variants.
    pub nll_best: Vec<f64>,
    pub spearman_mean: Option<f64>,
    pub spearman_best: Option<f64>,
    pub warnings: Vec<String>,
}

/// Ranks libraries by their soft score and by a sampled pseudo-NLL
/// baseline (mean and minimum over `kvariants` variants).
pub fn library_ranking(
    model: &MaskedSequenceModel,
    libraries: &[Library],
    kvariants: usize,
    tau: f64,
    seed: u64,
) -> Result<LibraryRanking> {
    let (l, k) = model.dims();
    if kvariants == 0 {
        return Err(Error::InvalidInput("kvariants must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    for (n, lib) in libraries.iter().enumerate() {
        lib.validate(l, k)?;
        if lib.options.iter().any(|o| o.len() != LIBRARY_OPTIONS) {
            warnings.push(format!("library {n} has option lists not of size {LIBRARY_OPTIONS}"));
        }
    }
    let scores: Vec<(f64, f64, f64)> = libraries
        .par_iter()
        .enumerate()
        .map(|(n, lib)| {
            let q = lib.marginals(k)?;
            let soft = model.conditionals_from_marginals(&q, tau)?;
            let f_soft: f64 = lib
                .sites
                .iter()
                .map(|&s| {
                    -q.row(s)
                        .iter()
                        .zip(soft.row(s))
                        .map(|(a, p)| a * floored_ln(*p))
                        .sum::<f64>()
                })
                .sum();
            let mut rng = Rng::with_stream(seed, n as u64);
            let mut x = lib.base.clone();
            let mut nlls = Vec::with_capacity(kvariants);
            for _ in 0..kvariants {
                for (&s, opts) in lib.sites.iter().zip(&lib.options) {
                    x[s] = opts[rng.index(opts.len())];
                }
                let p = model.discrete_conditionals(&x, tau)?;
                nlls.push(lib.sites.iter().map(|&s| -floored_ln(p.get(s, x[s]))).sum::<f64>());
            }
            let best = nlls.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((f_soft, mean(&nlls), best))
        })
        .collect::<Result<_>>()?;
    let f_soft: Vec<f64> = scores.iter().map(|s| s.0).collect();
    let nll_mean: Vec<f64> = scores.iter().map(|s| s.1).collect();
    let nll_best: Vec<f64> = scores.iter().map(|s| s.2).collect();
    let (spearman_mean, spearman_best) = if libraries.len() >= 2 {
        (spearman(&f_soft, &nll_mean)?, spearman(&f_soft, &nll_best)?)
    } else {
        warnings.push("fewer than two libraries: rank correlation undefined".into());
        (None, None)
    };
    Ok(LibraryRanking {
        f_soft,
        nll_mean,
        nll_best,
        spearman_mean,
        spearman_best,
        warnings,
    })
}
