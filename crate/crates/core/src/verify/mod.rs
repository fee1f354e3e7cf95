//! Independent oracles: gradient and detailed-balance checkers, and the
//! soft-model validation suite.

mod flow;
mod plm;
mod suite;

pub use flow::{enumerate_jump_flow, expected_log_mismatch, walk_log_flows, JumpFlow, WalkFlows};
pub use plm::{
    blur_count, blur_marginals, exact_mixture_reference, library_ranking, mixture_consistency,
    monte_carlo_mixture_reference, onehot_fidelity, random_libraries, Fidelity, Library, LibraryRanking,
    MixtureMoments, MixtureRow, BLUR_FRACTION, LIBRARY_OPTIONS,
};
pub use suite::{evaluation_sequences, run_validation, Metric, ValidationConfig, ValidationReport};

use crate::energy::{gradient_mismatch, EnergyModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{average_ranks, finite_diff_gradient};

/// Spearman rank correlation with average ranks on ties. `Ok(None)` when
/// either series is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("spearman needs at least two points".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("spearman input is not finite".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        let (dx, dy) = (x - mean, y - mean);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}

/// Largest relative error between the analytic gradient and central finite
/// differences over `points`.
pub fn gradient_check(energy: &dyn EnergyModel, points: &[Matrix], step: f64, abs_floor: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for at in points {
        let analytic = energy.try_evaluate(at)?.gradient;
        let numeric = finite_diff_gradient(|x| energy.value(x), at, step)?;
        worst = worst.max(gradient_mismatch(&analytic, &numeric, abs_floor));
    }
    Ok(worst)
}
