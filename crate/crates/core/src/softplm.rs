//! Toy masked sequence model and its relaxation to soft (mixture) inputs.
//!
//! Site `i` is predicted from the other sites only:
//!
//! ```text
//! z_j  = q_j^T W                                  expected token embedding
//! m_i  = mean_{j != i} (z_j + P_j)                 masked context
//! h_i  = tanh(A m_i + w_mask + P_i)
//! p_i  = softmax((b + U^T h_i) / tau)
//! ```
//!
//! Discrete inputs are one-hot rows of `q`, so the discrete and soft
//! conditionals come out of the same function.

use std::sync::Arc;

use crate::energy::{EnergyModel, Evaluation};
use crate::error::{param, Error, Result};
use crate::matrix::{mat_t_vec, mat_vec, Matrix};
use crate::numeric::{
    kl_unchecked, log_softmax_into, one_hot, row_marginals_unchecked, softmax_backward, softmax_into,
};
use crate::textfmt::{Document, Section};
use crate::Rng;

pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedSequenceModel {
    length: usize,
    vocab: usize,
    hidden: usize,
    seed: u64,
    embed: Matrix,
    mask: Vec<f64>,
    positional: Matrix,
    mix: Matrix,
    readout: Matrix,
    bias: Vec<f64>,
}

/// Intermediate activations of one forward pass.
struct Forward {
    hidden: Matrix,
    logits: Matrix,
}

impl MaskedSequenceModel {
    /// Random frozen weights, every entry `N(0, 1) / sqrt(d)`.
    pub fn random(length: usize, vocab: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        if length < 1 || vocab < 2 || hidden < 1 {
            return Err(Error::InvalidInput(format!(
                "model needs L >= 1, K >= 2, d >= 1; got {length}, {vocab}, {hidden}"
            )));
        }
        let s = 1.0 / (hidden as f64).sqrt();
        let mut draw = |r: usize, c: usize| Matrix::from_fn(r, c, |_, _| s * rng.normal());
        let embed = draw(vocab, hidden);
        let mask = draw(1, hidden).into_vec();
        let positional = draw(length, hidden);
        let mix = draw(hidden, hidden);
        let readout = draw(hidden, vocab);
        let bias = draw(1, vocab).into_vec();
        Ok(Self {
            length,
            vocab,
            hidden,
            seed: rng.seed(),
            embed,
            mask,
            positional,
            mix,
            readout,
            bias,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        embed: Matrix,
        mask: Vec<f64>,
        positional: Matrix,
        mix: Matrix,
        readout: Matrix,
        bias: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let (vocab, hidden) = embed.shape();
        let length = positional.rows();
        if length < 1 || vocab < 2 || hidden < 1 {
            return Err(Error::InvalidInput("model needs L >= 1, K >= 2, d >= 1".into()));
        }
        positional.ensure_shape("positional", (length, hidden))?;
        mix.ensure_shape("mix", (hidden, hidden))?;
        readout.ensure_shape("readout", (hidden, vocab))?;
        if mask.len() != hidden || bias.len() != vocab {
            return Err(Error::InvalidInput("mask/bias length mismatch".into()));
        }
        for m in [&embed, &positional, &mix, &readout] {
            m.ensure_finite()?;
        }
        Ok(Self {
            length,
            vocab,
            hidden,
            seed,
            embed,
            mask,
            positional,
            mix,
            readout,
            bias,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.length, self.vocab)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same model with every output logit multiplied by `factor`.
    pub fn with_logit_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.readout.scale(factor);
        out.bias.iter_mut().for_each(|b| *b *= factor);
        out
    }

    /// Same model with all positional rows replaced by `row`.
    pub fn with_shared_positional(&self, row: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..out.length {
            out.positional.row_mut(i).copy_from_slice(row);
        }
        out
    }

    fn check_marginals(&self, marginals: &Matrix) -> Result<()> {
        marginals.ensure_shape("masked sequence model", (self.length, self.vocab))?;
        marginals.ensure_finite()
    }

    /// `z_i = q_i^T W` for every site.
    pub fn expected_embeddings(&self, marginals: &Matrix) -> Result<Matrix> {
        self.check_marginals(marginals)?;
        Ok(self.embeddings(marginals))
    }

    fn embeddings(&self, q: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(self.length, self.hidden);
        for i in 0..self.length {
            mat_t_vec(&self.embed, q.row(i), z.row_mut(i));
        }
        z
    }

    fn forward(&self, q: &Matrix) -> Forward {
        let (l, d) = (self.length, self.hidden);
        let mut ctx = self.embeddings(q);
        ctx.axpy(1.0, &self.positional);
        let mut total = vec![0.0; d];
        for row in ctx.row_iter() {
            for (t, v) in total.iter_mut().zip(row) {
                *t += v;
            }
        }
        let norm = if l > 1 { 1.0 / (l - 1) as f64 } else { 0.0 };
        let mut hidden = Matrix::zeros(l, d);
        let mut logits = Matrix::zeros(l, self.vocab);
        let mut mean = vec![0.0; d];
        for i in 0..l {
            for ((m, t), c) in mean.iter_mut().zip(&total).zip(ctx.row(i)) {
                *m = (t - c) * norm;
            }
            let h = hidden.row_mut(i);
            mat_vec(&self.mix, &mean, h);
            for ((hk, wk), pk) in h.iter_mut().zip(&self.mask).zip(self.positional.row(i)) {
                *hk = (*hk + wk + pk).tanh();
            }
            let out = logits.row_mut(i);
            mat_t_vec(&self.readout, hidden.row(i), out);
            for (o, b) in out.iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Forward { hidden, logits }
    }

    /// Raw (temperature-free) output logits for marginals `q`.
    pub fn output_logits(&self, marginals: &Matrix) -> Result<Matrix> {
        self.check_marginals(marginals)?;
        Ok(self.forward(marginals).logits)
    }

    /// Masked conditionals `p_i(. | q; tau)` for all sites at once.
    pub fn conditionals_from_marginals(&self, marginals: &Matrix, tau: f64) -> Result<Matrix> {
        check_tau(tau)?;
        self.check_marginals(marginals)?;
        Ok(self.conditionals_unchecked(marginals, tau))
    }

    pub(crate) fn conditionals_unchecked(&self, marginals: &Matrix, tau: f64) -> Matrix {
        let mut logits = self.forward(marginals).logits;
        let mut out = Matrix::zeros(self.length, self.vocab);
        logits.scale(1.0 / tau);
        for i in 0..self.length {
            softmax_into(logits.row(i), out.row_mut(i));
        }
        out
    }

    /// Soft conditionals of the relaxed state `logits`.
    pub fn soft_conditionals(&self, logits: &Matrix, tau: f64) -> Result<Matrix> {
        logits.ensure_finite()?;
        self.conditionals_from_marginals(&row_marginals_unchecked(logits), tau)
    }

    /// Discrete masked conditionals `p_i(. | x_{-i}; tau)`.
    pub fn discrete_conditionals(&self, tokens: &[usize], tau: f64) -> Result<Matrix> {
        if tokens.len() != self.length {
            return Err(Error::InvalidInput(format!(
                "sequence length {} does not match model length {}",
                tokens.len(),
                self.length
            )));
        }
        self.conditionals_from_marginals(&one_hot(tokens, self.vocab)?, tau)
    }

    /// `sum_i w_i H(q_i, p_i(. | q; tau))` and its gradient with respect to
    /// `q`, treating every entry of `q` as free. `weights = None` means all
    /// ones. The gradient includes the path through the masked contexts.
    pub fn cross_entropy_with_gradient(
        &self,
        marginals: &Matrix,
        tau: f64,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Matrix)> {
        check_tau(tau)?;
        self.check_marginals(marginals)?;
        Ok(self.cross_entropy_unchecked(marginals, tau, weights))
    }

    fn cross_entropy_unchecked(&self, q: &Matrix, tau: f64, weights: Option<&[f64]>) -> (f64, Matrix) {
        let (l, k, d) = (self.length, self.vocab, self.hidden);
        let fwd = self.forward(q);
        let mut grad_q = Matrix::zeros(l, k);
        let mut value = 0.0;
        let mut scaled = vec![0.0; k];
        let mut log_p = vec![0.0; k];
        let mut d_logits = vec![0.0; k];
        let mut d_hidden = vec![0.0; d];
        let mut d_mean = Matrix::zeros(l, d);
        for i in 0..l {
            let w = weights.map_or(1.0, |w| w[i]);
            if w == 0.0 {
                continue;
            }
            for (s, v) in scaled.iter_mut().zip(fwd.logits.row(i)) {
                *s = v / tau;
            }
            log_softmax_into(&scaled, &mut log_p);
            let qi = q.row(i);
            let mass: f64 = qi.iter().sum();
            value -= w * qi.iter().zip(&log_p).map(|(a, b)| a * b).sum::<f64>();
            for (g, lp) in grad_q.row_mut(i).iter_mut().zip(&log_p) {
                *g -= w * lp;
            }
            for ((dl, lp), qk) in d_logits.iter_mut().zip(&log_p).zip(qi) {
                *dl = w * (lp.exp() * mass - qk) / tau;
            }
            mat_vec(&self.readout, &d_logits, &mut d_hidden);
            for (dh, h) in d_hidden.iter_mut().zip(fwd.hidden.row(i)) {
                *dh *= 1.0 - h * h;
            }
            mat_t_vec(&self.mix, &d_hidden, d_mean.row_mut(i));
        }
        if l > 1 {
            let norm = 1.0 / (l - 1) as f64;
            let mut total = vec![0.0; d];
            for row in d_mean.row_iter() {
                for (t, v) in total.iter_mut().zip(row) {
                    *t += v;
                }
            }
            let mut d_embed = vec![0.0; d];
            let mut d_q = vec![0.0; k];
            for j in 0..l {
                for ((de, t), dm) in d_embed.iter_mut().zip(&total).zip(d_mean.row(j)) {
                    *de = (t - dm) * norm;
                }
                mat_vec(&self.embed, &d_embed, &mut d_q);
                for (g, v) in grad_q.row_mut(j).iter_mut().zip(&d_q) {
                    *g += v;
                }
            }
        }
        (value, grad_q)
    }

    pub fn to_document(&self) -> Document {
        let (l, k, d) = (self.length, self.vocab, self.hidden);
        let mut doc = Document::new(self.seed);
        doc.push(
            Section::new("masked_model")
                .entry("length", l)
                .entry("vocab", k)
                .entry("hidden", d)
                .entry("seed", self.seed),
        );
        doc.push(Section::new("embed").arg(k).arg(d).matrix(&self.embed));
        doc.push(
            Section::new("mask")
                .arg(1)
                .arg(d)
                .matrix(&Matrix::from_vec(1, d, self.mask.clone()).expect("mask")),
        );
        doc.push(Section::new("positional").arg(l).arg(d).matrix(&self.positional));
        doc.push(Section::new("mix").arg(d).arg(d).matrix(&self.mix));
        doc.push(Section::new("readout").arg(d).arg(k).matrix(&self.readout));
        doc.push(
            Section::new("bias")
                .arg(1)
                .arg(k)
                .matrix(&Matrix::from_vec(1, k, self.bias.clone()).expect("bias")),
        );
        doc
    }

    pub fn to_text(&self) -> String {
        self.to_document().render()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let head = doc.section("masked_model")?;
        let (l, k, d): (usize, usize, usize) = (head.get("length")?, head.get("vocab")?, head.get("hidden")?);
        Self::from_parts(
            doc.section("embed")?.to_matrix(k, d)?,
            doc.section("mask")?.to_vector(d)?,
            doc.section("positional")?.to_matrix(l, d)?,
            doc.section("mix")?.to_matrix(d, d)?,
            doc.section("readout")?.to_matrix(d, k)?,
            doc.section("bias")?.to_vector(k)?,
            head.get("seed")?,
        )
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(param("tau", format!("must be finite and > 0, got {tau}")));
    }
    Ok(())
}

/// `L_PLM(l) = sum_i H(q_i, p_i(. | l; tau))`.
#[derive(Clone, Debug)]
pub struct SoftPlmEnergy {
    model: Arc<MaskedSequenceModel>,
    tau: f64,
}

impl SoftPlmEnergy {
    pub fn new(model: Arc<MaskedSequenceModel>, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(Self { model, tau })
    }

    pub fn model(&self) -> &MaskedSequenceModel {
        &self.model
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl EnergyModel for SoftPlmEnergy {
    fn dims(&self) -> (usize, usize) {
        self.model.dims()
    }

    fn evaluate(&self, logits: &Matrix) -> Evaluation {
        let q = row_marginals_unchecked(logits);
        let (energy, grad_q) = self.model.cross_entropy_unchecked(&q, self.tau, None);
        Evaluation {
            energy,
            gradient: softmax_backward(&q, &grad_q),
        }
    }

    fn label(&self) -> &str {
        "soft_plm"
    }
}

/// Golden-section search bounds and tolerance, all in `ln tau`.
pub const CALIBRATION_LOG_MIN: f64 = -2.995_732_273_553_991; // ln 0.05
pub const CALIBRATION_LOG_MAX: f64 = 2.995_732_273_553_991; // ln 20
pub const CALIBRATION_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Calibration {
    pub tau: f64,
    pub objective: f64,
    pub contexts: usize,
    pub iterations: usize,
}

/// Mean `KL(reference discrete conditional || model conditional at tau)` over
/// one-hot contexts `(sequence, site)`.
pub struct CalibrationObjective {
    reference: Vec<Vec<f64>>,
    logits: Vec<Vec<f64>>,
}

impl CalibrationObjective {
    pub fn new(
        model: &MaskedSequenceModel,
        reference: &MaskedSequenceModel,
        contexts: &[(Vec<usize>, usize)],
    ) -> Result<Self> {
        if contexts.is_empty() {
            return Err(Error::InvalidInput("calibration needs at least one context".into()));
        }
        if model.dims() != reference.dims() {
            return Err(Error::DimensionMismatch {
                component: "reference model".into(),
                expected: model.dims(),
                found: reference.dims(),
            });
        }
        let mut ref_rows = Vec::with_capacity(contexts.len());
        let mut logit_rows = Vec::with_capacity(contexts.len());
        for (x, site) in contexts {
            if *site >= model.length {
                return Err(Error::InvalidInput(format!("site {site} out of range")));
            }
            let q = one_hot(x, model.vocab)?;
            model.check_marginals(&q)?;
            ref_rows.push(reference.conditionals_unchecked(&q, 1.0).row(*site).to_vec());
            logit_rows.push(model.forward(&q).logits.row(*site).to_vec());
        }
        Ok(Self {
            reference: ref_rows,
            logits: logit_rows,
        })
    }

    pub fn value(&self, tau: f64) -> f64 {
        let mut scaled = Vec::new();
        let mut p = Vec::new();
        let total: f64 = self
            .reference
            .iter()
            .zip(&self.logits)
            .map(|(r, z)| {
                scaled.clear();
                scaled.extend(z.iter().map(|v| v / tau));
                p.resize(z.len(), 0.0);
                softmax_into(&scaled, &mut p);
                kl_unchecked(r, &p)
            })
            .sum();
        total / self.reference.len() as f64
    }
}

/// Single global temperature minimizing the calibration objective, by
/// golden-section search over `ln tau` in `[ln 0.05, ln 20]`.
pub fn calibrate_temperature(
    model: &MaskedSequenceModel,
    reference: &MaskedSequenceModel,
    contexts: &[(Vec<usize>, usize)],
) -> Result<Calibration> {
    let objective = CalibrationObjective::new(model, reference, contexts)?;
    let f = |log_tau: f64| objective.value(log_tau.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (CALIBRATION_LOG_MIN, CALIBRATION_LOG_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iterations = 0;
    while b - a > CALIBRATION_TOLERANCE {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let log_tau = 0.5 * (a + b);
    Ok(Calibration {
        tau: log_tau.exp(),
        objective: f(log_tau),
        contexts: contexts.len(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::gradient_mismatch;
    use crate::numeric::{entropy, finite_diff_gradient, row_marginals, softmax};

    fn model(l: usize, k: usize, seed: u64) -> MaskedSequenceModel {
        MaskedSequenceModel::random(l, k, 8, &mut Rng::seed_from(seed)).unwrap()
    }

    fn random_logits(rng: &mut Rng, l: usize, k: usize, scale: f64) -> Matrix {
        Matrix::from_fn(l, k, |_, _| scale * rng.normal())
    }

    /// Rebuilds every masked context from scratch, site by site.
    #[allow(clippy::needless_range_loop)]
    fn naive_conditionals(m: &MaskedSequenceModel, q: &Matrix, tau: f64) -> Matrix {
        let (l, k, d) = (m.length, m.vocab, m.hidden);
        let mut out = Matrix::zeros(l, k);
        for i in 0..l {
            let mut mean = vec![0.0; d];
            for j in 0..l {
                if j == i {
                    continue;
                }
                for t in 0..d {
                    let mut z = 0.0;
                    for a in 0..k {
                        z += q.get(j, a) * m.embed.get(a, t);
                    }
                    mean[t] += (z + m.positional.get(j, t)) / (l - 1) as f64;
                }
            }
            let mut h = vec![0.0; d];
            for r in 0..d {
                let mut acc = m.mask[r] + m.positional.get(i, r);
                for c in 0..d {
                    acc += m.mix.get(r, c) * mean[c];
                }
                h[r] = acc.tanh();
            }
            let logits: Vec<f64> = (0..k)
                .map(|a| (m.bias[a] + (0..d).map(|r| m.readout.get(r, a) * h[r]).sum::<f64>()) / tau)
                .collect();
            out.row_mut(i).copy_from_slice(&softmax(&logits));
        }
        out
    }

    #[test]
    fn expected_embedding_examples() {
        let m = model(3, 4, 1);
        let q = one_hot(&[2, 0, 3], 4).unwrap();
        let z = m.expected_embeddings(&q).unwrap();
        assert_eq!(z.row(0), m.embed.row(2));
        assert_eq!(z.row(2), m.embed.row(3));
        let uniform = Matrix::filled(3, 4, 0.25);
        let z = m.expected_embeddings(&uniform).unwrap();
        for t in 0..8 {
            let col_mean = (0..4).map(|a| m.embed.get(a, t)).sum::<f64>() / 4.0;
            assert!((z.get(1, t) - col_mean).abs() < 1e-15);
        }
        let mut rng = Rng::seed_from(2);
        let q = row_marginals(&random_logits(&mut rng, 3, 4, 1.0)).unwrap();
        let z = m.expected_embeddings(&q).unwrap();
        for i in 0..3 {
            for t in 0..8 {
                let direct: f64 = (0..4).map(|a| q.get(i, a) * m.embed.get(a, t)).sum();
                assert!((z.get(i, t) - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn soft_matches_naive_and_discrete() {
        let m = model(5, 4, 3);
        let mut rng = Rng::seed_from(4);
        for _ in 0..10 {
            let q = row_marginals(&random_logits(&mut rng, 5, 4, 1.5)).unwrap();
            let fast = m.conditionals_from_marginals(&q, 0.7).unwrap();
            let slow = naive_conditionals(&m, &q, 0.7);
            for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let x = [1, 3, 0, 0, 2];
        let soft = m.conditionals_from_marginals(&one_hot(&x, 4).unwrap(), 1.0).unwrap();
        let discrete = m.discrete_conditionals(&x, 1.0).unwrap();
        assert_eq!(soft, discrete);
        for row in discrete.row_iter() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        assert!(m.discrete_conditionals(&[0, 0, 0, 0, 4], 1.0).is_err());
        assert!(m.discrete_conditionals(&x, 0.0).is_err());
    }

    #[test]
    fn high_temperature_flattens() {
        let m = model(4, 5, 5);
        let p = m.discrete_conditionals(&[0, 1, 2, 3], 1e8).unwrap();
        assert!(p.as_slice().iter().all(|v| (v - 0.2).abs() < 1e-6));
    }

    #[test]
    fn swapping_equal_context_tokens_is_invariant() {
        let m = model(5, 4, 6);
        let shared = m.positional.row(0).to_vec();
        let m = m.with_shared_positional(&shared);
        let a = m.discrete_conditionals(&[0, 1, 2, 3, 1], 1.0).unwrap();
        let b = m.discrete_conditionals(&[0, 3, 2, 1, 1], 1.0).unwrap();
        // Site 0, 2 and 4 see the same multiset of context tokens.
        for i in [0, 2, 4] {
            for (x, y) in a.row(i).iter().zip(b.row(i)) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn energy_one_hot_value() {
        let m = Arc::new(model(4, 3, 7));
        let x = [2, 0, 1, 1];
        let p = m.discrete_conditionals(&x, 0.8).unwrap();
        let want: f64 = x.iter().enumerate().map(|(i, &t)| -p.get(i, t).ln()).sum();
        let (got, _) = m
            .cross_entropy_with_gradient(&one_hot(&x, 3).unwrap(), 0.8, None)
            .unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let m = Arc::new(model(5, 4, 8));
        let e = SoftPlmEnergy::new(m, 0.9).unwrap();
        let mut rng = Rng::seed_from(9);
        for _ in 0..50 {
            let x = random_logits(&mut rng, 5, 4, 1.5);
            let ev = e.evaluate(&x);
            let fd = finite_diff_gradient(|y| e.value(y), &x, 1e-5).unwrap();
            assert!(gradient_mismatch(&ev.gradient, &fd, 1e-8) < 1e-5);
        }
    }

    #[test]
    fn energy_shift_invariant_and_bounded_by_entropy() {
        let m = Arc::new(model(4, 5, 10));
        let e = SoftPlmEnergy::new(m, 1.0).unwrap();
        let mut rng = Rng::seed_from(11);
        for _ in 0..20 {
            let x = random_logits(&mut rng, 4, 5, 2.0);
            let shifted = x.map(|v| v + 3.7);
            assert!((e.value(&x) - e.value(&shifted)).abs() < 1e-10);
            let q = row_marginals(&x).unwrap();
            let h: f64 = q.row_iter().map(entropy).sum();
            assert!(e.value(&x) >= h - 1e-10);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = model(3, 4, 12);
        let text = m.to_text();
        let back = MaskedSequenceModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    fn contexts(m: &MaskedSequenceModel, n: usize, seed: u64) -> Vec<(Vec<usize>, usize)> {
        let mut rng = Rng::seed_from(seed);
        let (l, k) = m.dims();
        (0..n)
            .map(|_| ((0..l).map(|_| rng.index(k)).collect(), rng.index(l)))
            .collect()
    }

    #[test]
    fn calibration_identity_and_scaled() {
        let m = model(6, 5, 13);
        let ctx = contexts(&m, 40, 14);
        let cal = calibrate_temperature(&m, &m, &ctx).unwrap();
        assert!((cal.tau - 1.0).abs() < 1e-3, "{}", cal.tau);
        let obj = CalibrationObjective::new(&m, &m, &ctx).unwrap();
        assert!(cal.objective <= obj.value(1.1 * cal.tau));
        assert!(cal.objective <= obj.value(0.9 * cal.tau));

        let reference = m.with_logit_scale(0.5);
        let cal = calibrate_temperature(&m, &reference, &ctx).unwrap();
        let obj = CalibrationObjective::new(&m, &reference, &ctx).unwrap();
        // Grid oracle over ln tau.
        let best = (0..=6000)
            .map(|s| (-3.0 + s as f64 * 1e-3).exp())
            .min_by(|a, b| obj.value(*a).total_cmp(&obj.value(*b)))
            .unwrap();
        assert!((cal.tau - 2.0).abs() < 2e-2, "{}", cal.tau);
        assert!((cal.tau - best).abs() / best < 2e-3);
        assert!(calibrate_temperature(&m, &m, &[]).is_err());
    }
}
