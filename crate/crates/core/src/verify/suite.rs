//! The validation suite and its flat JSON report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::plm::{
    library_ranking, mixture_consistency, onehot_fidelity, random_libraries, BLUR_FRACTION, LIBRARY_OPTIONS,
};
use crate::error::{param, Result};
use crate::softplm::MaskedSequenceModel;
use crate::textfmt::Generator;
use crate::Rng;

mod defaults {
    pub fn sequences() -> usize {
        100
    }
    pub fn tau() -> f64 {
        1.0
    }
    pub fn fidelity_sites() -> usize {
        4
    }
    pub fn epsilons() -> Vec<f64> {
        vec![0.0, 0.2, 0.4, 0.6, 0.8]
    }
    pub fn kmc() -> usize {
        8
    }
    pub fn libraries() -> usize {
        20
    }
    pub fn library_sites() -> usize {
        3
    }
    pub fn kvariants() -> usize {
        256
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    /// Number of random evaluation sequences.
    #[serde(default = "defaults::sequences")]
    pub sequences: usize,
    /// Temperature shared by the soft and discrete conditionals.
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::fidelity_sites")]
    pub fidelity_sites: usize,
    #[serde(default = "defaults::epsilons")]
    pub epsilons: Vec<f64>,
    /// Monte Carlo contexts per mixture reference.
    #[serde(default = "defaults::kmc")]
    pub kmc: usize,
    #[serde(default = "defaults::libraries")]
    pub libraries: usize,
    #[serde(default = "defaults::library_sites")]
    pub library_sites: usize,
    #[serde(default = "defaults::kvariants")]
    pub kvariants: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            sequences: defaults::sequences(),
            tau: defaults::tau(),
            fidelity_sites: defaults::fidelity_sites(),
            epsilons: defaults::epsilons(),
            kmc: defaults::kmc(),
            libraries: defaults::libraries(),
            library_sites: defaults::library_sites(),
            kvariants: defaults::kvariants(),
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequences == 0 {
            return Err(param("sequences", "must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(param("tau", "must be finite and > 0"));
        }
        if self.fidelity_sites == 0 {
            return Err(param("fidelity_sites", "must be at least 1"));
        }
        if self.epsilons.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(param("epsilons", "every value must lie in [0, 1)"));
        }
        if self.kmc == 0 {
            return Err(param("kmc", "must be at least 1"));
        }
        if self.kvariants == 0 {
            return Err(param("kvariants", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    /// `None` when undefined (for example a correlation of constant series).
    pub value: Option<f64>,
    pub n: usize,
    pub config: Value,
}

/// Flat map from metric name to `{value, n, config}`, keys sorted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub generator: Generator,
    #[serde(flatten)]
    pub metrics: BTreeMap<String, Metric>,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_text(&self) -> String {
        let mut out = format!("{}\n", crate::textfmt::header_line(self.generator.seed));
        for (name, m) in &self.metrics {
            let value = m.value.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
            out.push_str(&format!("{name:<52} {value:>12}  n={}\n", m.n));
        }
        out
    }
}

/// Random uniform evaluation sequences.
pub fn evaluation_sequences(length: usize, vocab: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = Rng::with_stream(seed, u64::MAX);
    (0..count)
        .map(|_| (0..length).map(|_| rng.index(vocab)).collect())
        .collect()
}

/// Runs one-hot fidelity, mixture consistency and library ranking on `model`.
pub fn run_validation(model: &MaskedSequenceModel, config: &ValidationConfig, seed: u64) -> Result<ValidationReport> {
    config.validate()?;
    let (l, k) = model.dims();
    let sequences = evaluation_sequences(l, k, config.sequences, seed);
    let base = json!({
        "seed": seed,
        "sequences": config.sequences,
        "length": l,
        "vocab": k,
        "tau": config.tau,
    });
    let with = |extra: Value| {
        let mut v = base.clone();
        if let (Value::Object(dst), Value::Object(src)) = (&mut v, extra) {
            dst.extend(src);
        }
        v
    };
    let mut metrics = BTreeMap::new();

    let fid = onehot_fidelity(
        model,
        &sequences,
        config.fidelity_sites,
        config.tau,
        seed.wrapping_add(1),
    )?;
    let fid_config = with(json!({ "sites_per_sequence": config.fidelity_sites }));
    metrics.insert(
        "onehot_fidelity.mean_kl".to_string(),
        Metric {
            value: Some(fid.mean_kl),
            n: fid.samples,
            config: fid_config.clone(),
        },
    );
    metrics.insert(
        "onehot_fidelity.grad_swap_spearman_mean".to_string(),
        Metric {
            value: fid.spearman_mean,
            n: fid.spearman_sites,
            config: fid_config.clone(),
        },
    );
    metrics.insert(
        "onehot_fidelity.grad_swap_spearman_median".to_string(),
        Metric {
            value: fid.spearman_median,
            n: fid.spearman_sites,
            config: fid_config,
        },
    );

    let rows = mixture_consistency(
        model,
        &sequences,
        &config.epsilons,
        config.kmc,
        config.tau,
        seed.wrapping_add(2),
    )?;
    for row in rows {
        let cfg = with(json!({
            "epsilon": row.epsilon,
            "epsilons": config.epsilons,
            "kmc": config.kmc,
            "blur_fraction": BLUR_FRACTION,
        }));
        let key = format!("mixture_consistency.eps={:?}", row.epsilon);
        metrics.insert(
            format!("{key}.mean_js"),
            Metric {
                value: Some(row.mean_js),
                n: row.sites,
                config: cfg.clone(),
            },
        );
        metrics.insert(
            format!("{key}.top1_agreement"),
            Metric {
                value: Some(row.top1_agreement),
                n: row.sites,
                config: cfg,
            },
        );
    }

    let libs = random_libraries(
        l,
        k,
        config.libraries,
        config.library_sites,
        &mut Rng::with_stream(seed, u64::MAX - 1),
    )?;
    let ranking = library_ranking(model, &libs, config.kvariants, config.tau, seed.wrapping_add(3))?;
    let lib_config = with(json!({
        "libraries": config.libraries,
        "sites_per_library": config.library_sites,
        "options_per_site": LIBRARY_OPTIONS,
        "kvariants": config.kvariants,
        "best": "minimum pseudo-NLL",
    }));
    metrics.insert(
        "library_ranking.spearman_mean".to_string(),
        Metric {
            value: ranking.spearman_mean,
            n: libs.len(),
            config: lib_config.clone(),
        },
    );
    metrics.insert(
        "library_ranking.spearman_best".to_string(),
        Metric {
            value: ranking.spearman_best,
            n: libs.len(),
            config: lib_config,
        },
    );
    Ok(ValidationReport {
        generator: crate::textfmt::Generator::new(seed),
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol_constants() {
        let c: ValidationConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ValidationConfig::default());
        assert_eq!(c.epsilons, vec![0.0, 0.2, 0.4, 0.6, 0.8]);
        assert_eq!(c.kvariants, 256);
        assert!(serde_json::from_str::<ValidationConfig>(r#"{"kmcc": 3}"#).is_err());
    }

    #[test]
    fn small_suite_is_reproducible() {
        let model = MaskedSequenceModel::random(8, 5, 6, &mut Rng::seed_from(1)).unwrap();
        let config = ValidationConfig {
            sequences: 6,
            kvariants: 16,
            libraries: 5,
            ..ValidationConfig::default()
        };
        let a = run_validation(&model, &config, 11).unwrap();
        let b = run_validation(&model, &config, 11).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.metrics.len(), 3 + 10 + 2);
        let json: Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["generator"]["seed"], 11);
        assert!(json["mixture_consistency.eps=0.4.mean_js"]["value"].as_f64().unwrap() > 0.0);
    }
}
