//! Effective sample size of a scalar chain.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EssEstimate {
    pub ess: f64,
    /// Integrated autocorrelation time `1 + 2 sum rho_k`.
    pub tau_int: f64,
    /// The series had zero variance; `ess` is then the sample count.
    pub degenerate: bool,
}

/// Geyer's initial positive sequence estimator. Sums autocorrelations in
/// adjacent pairs and stops at the first non-positive pair sum.
pub fn ess_and_autocorr(series: &[f64]) -> EssEstimate {
    let n = series.len();
    if n < 2 {
        return EssEstimate {
            ess: n as f64,
            tau_int: 1.0,
            degenerate: true,
        };
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > 1e-300) {
        return EssEstimate {
            ess: n as f64,
            tau_int: 1.0,
            degenerate: true,
        };
    }
    let rho = |k: usize| -> f64 {
        let s: f64 = centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
        s / n as f64 / c0
    };
    // Pair sums Gamma_m = rho_{2m} + rho_{2m+1}, with rho_0 = 1.
    let mut sum_pairs = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = if m == 0 {
            1.0 + rho(1)
        } else {
            rho(2 * m) + rho(2 * m + 1)
        };
        if gamma <= 0.0 {
            break;
        }
        sum_pairs += gamma;
        m += 1;
    }
    // tau = -1 + 2 sum Gamma_m = 1 + 2 sum_{k>=1} rho_k.
    let tau_int = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    EssEstimate {
        ess: n as f64 / tau_int,
        tau_int,
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    #[test]
    fn iid_series_has_ess_near_n() {
        let mut rng = Rng::seed_from(3);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.normal()).collect();
        let est = ess_and_autocorr(&xs);
        assert!((est.tau_int - 1.0).abs() < 0.15, "{est:?}");
    }

    #[test]
    fn constant_series_is_degenerate() {
        let est = ess_and_autocorr(&[2.0; 100]);
        assert!(est.degenerate);
        assert_eq!(est.ess, 100.0);
    }

    #[test]
    fn ar1_matches_closed_form() {
        // tau = (1 + rho) / (1 - rho) = 19 for rho = 0.9.
        let rho = 0.9f64;
        let mut rng = Rng::seed_from(11);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = rho * x + (1.0 - rho * rho).sqrt() * rng.normal();
                x
            })
            .collect();
        let est = ess_and_autocorr(&xs);
        assert!((est.tau_int - 19.0).abs() < 0.25 * 19.0, "{est:?}");
    }
}
