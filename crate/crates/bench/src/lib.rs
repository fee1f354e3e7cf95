//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use rss_core::energy::Contact;
use rss_core::{CompositeEnergy, MaskedSequenceModel, Matrix, PairwiseContactEnergy, Rng, SoftPlmEnergy};

/// Random chain-contact landscape with a masked-model prior at the given size.
pub struct Fixture {
    pub energy: CompositeEnergy,
    pub model: Arc<MaskedSequenceModel>,
    pub logits: Matrix,
}

impl Fixture {
    pub fn new(length: usize, vocab: usize, seed: u64) -> Self {
        let mut rng = Rng::seed_from(seed);
        let fields = Matrix::from_fn(length, vocab, |_, _| rng.normal());
        let contacts = (0..length)
            .flat_map(|i| [(i, i + 1), (i, i + 3)])
            .filter(|&(_, j)| j < length)
            .map(|(i, j)| Contact {
                i,
                j,
                coupling: Matrix::from_fn(vocab, vocab, |_, _| 0.5 * rng.normal()),
            })
            .collect();
        let structural = PairwiseContactEnergy::new(fields, contacts).expect("valid landscape");
        let model = Arc::new(MaskedSequenceModel::random(length, vocab, 16, &mut rng).expect("valid model"));
        let prior = SoftPlmEnergy::new(model.clone(), 1.0).expect("valid prior");
        let energy = CompositeEnergy::new(Box::new(structural), Box::new(prior), 0.1).expect("matching dims");
        let logits = Matrix::from_fn(length, vocab, |_, _| rng.normal());
        Self { energy, model, logits }
    }
}
