//! Relaxed sequence sampling.
//!
//! A sequence of length `L` over a vocabulary of `K` tokens is represented by a
//! real logit matrix whose row-wise softmax gives per-site categorical
//! marginals. Samples are drawn from `pi(l) ∝ exp(-beta * E(l))` with a mixture
//! of two Metropolis–Hastings kernels:
//!
//! * a Metropolis-adjusted Langevin *walk* that follows the energy gradient, and
//! * a *jump* that picks a few sites (weighted by gradient norm) and swaps logit
//!   mass between a token drawn from a masked sequence model and a uniformly
//!   drawn reference token.
//!
//! The crate also ships the toy masked sequence model with its differentiable
//! relaxation ([`softplm`]), desk-scale energies ([`energy`]), exact
//! detailed-balance and relaxation checks ([`verify`]) and a mode-discovery
//! benchmark harness ([`campaign`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod energy;
pub mod error;
pub mod matrix;
pub mod numeric;
pub mod rng;
pub mod sampler;
pub mod softplm;
pub mod textfmt;
pub mod verify;

pub use energy::{
    CompositeEnergy, EnergyModel, Evaluation, GaussianEnergy, PairwiseContactEnergy, TargetProfileEnergy,
};
pub use error::{Error, Result};
pub use matrix::{LogitMatrix, Matrix};
pub use rng::Rng;
pub use sampler::{ChainState, ChainSummary, MaskMode, MoveKind, MoveRecord, Sampler, SamplerConfig};
pub use softplm::{MaskedSequenceModel, SoftPlmEnergy};

/// Tool name and version stamped into every output file.
pub const TOOL_NAME: &str = "rss";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Display alphabet for decoded tokens. Tokens past the alphabet print as `X`.
pub const DISPLAY_ALPHABET: &[u8; 20] = b"ACDEFGHIKLMNPQRSTVWY";

/// Renders a token sequence with [`DISPLAY_ALPHABET`].
pub fn display_sequence(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|&t| DISPLAY_ALPHABET.get(t).copied().unwrap_or(b'X') as char)
        .collect()
}
