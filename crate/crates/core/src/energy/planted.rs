//! Synthetic multimodal landscapes with known, enumeration-verified modes.

use serde::{Deserialize, Serialize};

use super::pairwise::{Contact, PairwiseContactEnergy};
use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::numeric::median;
use crate::textfmt::{Document, Section};
use crate::Rng;

/// Upper bound on `K^L` for exhaustive verification.
pub const MAX_ENUMERATION: u64 = 10_000_000;

const MAX_ATTEMPTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedSpec {
    pub length: usize,
    pub vocab: usize,
    pub modes: usize,
    pub depth: f64,
    /// Standard deviation of the random coupling and field background.
    #[serde(default)]
    pub noise: Option<f64>,
    /// Minimum pairwise Hamming distance between planted sequences.
    #[serde(default)]
    pub separation: Option<usize>,
}

impl PlantedSpec {
    pub fn new(length: usize, vocab: usize, modes: usize, depth: f64) -> Self {
        Self {
            length,
            vocab,
            modes,
            depth,
            noise: None,
            separation: None,
        }
    }

    pub fn noise(&self) -> f64 {
        self.noise.unwrap_or(0.05 * self.depth)
    }

    pub fn separation(&self) -> usize {
        self.separation
            .unwrap_or_else(|| 2.max(self.length.div_ceil(2)))
            .min(self.length)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedLandscape {
    pub energy: PairwiseContactEnergy,
    pub planted: Vec<Vec<usize>>,
    pub spec: PlantedSpec,
    pub seed: u64,
}

pub fn sequence_count(length: usize, vocab: usize) -> Option<u64> {
    (vocab as u64).checked_pow(length as u32)
}

/// Visits every sequence in `0..vocab` of the given length in lexicographic
/// order.
pub fn enumerate_sequences(length: usize, vocab: usize, mut visit: impl FnMut(&[usize])) {
    let mut tokens = vec![0usize; length];
    loop {
        visit(&tokens);
        let mut pos = length;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            tokens[pos] += 1;
            if tokens[pos] < vocab {
                break;
            }
            tokens[pos] = 0;
        }
    }
}

pub fn hamming(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Builds a pairwise landscape whose planted sequences are strict local minima
/// of the discrete energy, pairwise separated, and at least `depth` below the
/// median over all `K^L` sequences. Every property is checked by exhaustive
/// enumeration before returning.
pub fn planted_landscape(spec: &PlantedSpec, rng: &mut Rng) -> Result<PlantedLandscape> {
    let (l, k, m) = (spec.length, spec.vocab, spec.modes);
    if l < 1 || k < 2 {
        return Err(Error::InvalidInput(format!("need L >= 1 and K >= 2, got {l}x{k}")));
    }
    if !(spec.depth > 0.0) {
        return Err(param("depth", "must be positive"));
    }
    let total = sequence_count(l, k).filter(|&n| n <= MAX_ENUMERATION).ok_or_else(|| {
        param(
            "length",
            format!("{k}^{l} exceeds the enumeration limit {MAX_ENUMERATION}"),
        )
    })?;
    if m < 1 || m as u64 > total {
        return Err(param("modes", format!("must lie in 1..={total}")));
    }
    let seed = rng.seed();
    let mut last_reason = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let Some(planted) = draw_separated(spec, rng) else {
            last_reason = format!("could not place {m} sequences at separation {}", spec.separation());
            continue;
        };
        let energy = build_energy(spec, &planted, rng)?;
        match verify(&energy, &planted, spec) {
            Ok(()) => {
                return Ok(PlantedLandscape {
                    energy,
                    planted,
                    spec: spec.clone(),
                    seed,
                })
            }
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn draw_separated(spec: &PlantedSpec, rng: &mut Rng) -> Option<Vec<Vec<usize>>> {
    let sep = spec.separation();
    let mut planted: Vec<Vec<usize>> = Vec::with_capacity(spec.modes);
    let mut tries = 0;
    while planted.len() < spec.modes {
        tries += 1;
        if tries > 10_000 {
            return None;
        }
        let candidate: Vec<usize> = (0..spec.length).map(|_| rng.index(spec.vocab)).collect();
        if planted.iter().all(|p| hamming(p, &candidate) >= sep) {
            planted.push(candidate);
        }
    }
    Some(planted)
}

fn build_energy(spec: &PlantedSpec, planted: &[Vec<usize>], rng: &mut Rng) -> Result<PairwiseContactEnergy> {
    let (l, k) = (spec.length, spec.vocab);
    let noise = spec.noise();
    let mut fields = Matrix::from_fn(l, k, |_, _| noise * rng.normal());
    let mut contacts = Vec::new();
    if l == 1 {
        for p in planted {
            fields.add_at(0, p[0], -2.0 * spec.depth);
        }
    } else {
        // Each planted sequence collects `reward` on every one of its pairs,
        // for a total of -2 * depth.
        let reward = 4.0 * spec.depth / (l * (l - 1)) as f64;
        for i in 0..l {
            for j in i + 1..l {
                let mut coupling = Matrix::from_fn(k, k, |_, _| noise * rng.normal());
                for p in planted {
                    coupling.add_at(p[i], p[j], -reward);
                }
                contacts.push(Contact { i, j, coupling });
            }
        }
    }
    PairwiseContactEnergy::new(fields, contacts)
}

fn verify(
    energy: &PairwiseContactEnergy,
    planted: &[Vec<usize>],
    spec: &PlantedSpec,
) -> std::result::Result<(), String> {
    for (a, pa) in planted.iter().enumerate() {
        for pb in &planted[a + 1..] {
            if hamming(pa, pb) < 2 {
                return Err("planted sequences closer than Hamming 2".into());
            }
        }
    }
    let mut energies = Vec::new();
    enumerate_sequences(spec.length, spec.vocab, |x| energies.push(energy.discrete_energy(x)));
    let med = median(&energies);
    for p in planted {
        let e = energy.discrete_energy(p);
        if e > med - spec.depth {
            return Err(format!(
                "planted energy {e} is not {} below the median {med}",
                spec.depth
            ));
        }
        let mut neighbor = p.clone();
        for i in 0..spec.length {
            for t in 0..spec.vocab {
                if t == p[i] {
                    continue;
                }
                neighbor[i] = t;
                if energy.discrete_energy(&neighbor) <= e {
                    return Err("planted sequence is not a strict local minimum".into());
                }
            }
            neighbor[i] = p[i];
        }
    }
    Ok(())
}

impl PlantedLandscape {
    /// Discrete energies of all `K^L` sequences in lexicographic order.
    pub fn enumerate_energies(&self) -> Vec<f64> {
        let mut out = Vec::new();
        enumerate_sequences(self.spec.length, self.spec.vocab, |x| {
            out.push(self.energy.discrete_energy(x))
        });
        out
    }

    /// Index of the planted sequence within `radius` of `tokens` (closest
    /// first, lowest index on ties), if any.
    pub fn nearest_mode(&self, tokens: &[usize], radius: usize) -> Option<usize> {
        self.planted
            .iter()
            .enumerate()
            .map(|(m, p)| (hamming(p, tokens), m))
            .filter(|&(d, _)| d <= radius)
            .min()
            .map(|(_, m)| m)
    }

    pub fn to_document(&self) -> Document {
        let mut doc = self.energy.to_document(self.seed);
        let head = Section::new("planted_landscape")
            .entry("length", self.spec.length)
            .entry("vocab", self.spec.vocab)
            .entry("modes", self.spec.modes)
            .real("depth", self.spec.depth)
            .real("noise", self.spec.noise())
            .entry("separation", self.spec.separation())
            .entry("seed", self.seed);
        let mut planted = Section::new("planted");
        for p in &self.planted {
            planted = planted.tokens(p);
        }
        doc.sections.insert(0, head);
        doc.push(planted);
        doc
    }

    pub fn to_text(&self) -> String {
        self.to_document().render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let head = doc.section("planted_landscape")?;
        let spec = PlantedSpec {
            length: head.get("length")?,
            vocab: head.get("vocab")?,
            modes: head.get("modes")?,
            depth: head.get("depth")?,
            noise: Some(head.get("noise")?),
            separation: Some(head.get("separation")?),
        };
        let energy = PairwiseContactEnergy::from_document(&doc)?;
        let planted = doc.section("planted")?.to_token_rows()?;
        if planted.len() != spec.modes
            || planted
                .iter()
                .any(|p| p.len() != spec.length || p.iter().any(|&t| t >= spec.vocab))
        {
            return Err(Error::Parse {
                line: head.line(),
                message: "planted block does not match the header".into(),
            });
        }
        Ok(Self {
            energy,
            planted,
            spec,
            seed: head.get("seed")?,
        })
    }
}
