//! TOML configuration files for every subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rss_core::campaign::CampaignConfig;
use rss_core::energy::PlantedSpec;
use rss_core::verify::ValidationConfig;
use rss_core::SamplerConfig;

/// A configuration problem: unreadable file, syntax error, unknown or
/// missing key, or an out-of-range value. Maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn default_confinement() -> f64 {
    2.0
}

fn default_hidden() -> usize {
    16
}

/// Energy to sample. Paths are resolved against the config file directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnergySpec {
    /// A generated planted landscape plus a Gaussian confinement term.
    Planted {
        length: usize,
        vocab: usize,
        modes: usize,
        depth: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        noise: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        separation: Option<usize>,
        #[serde(default = "default_confinement")]
        confinement: f64,
    },
    /// A pairwise contact energy or planted landscape loaded from text.
    Pairwise {
        file: PathBuf,
        #[serde(default = "default_confinement")]
        confinement: f64,
    },
    /// `|l - c|^2 / (2 s^2)` around a zero center.
    Gaussian { length: usize, vocab: usize, scale: f64 },
}

impl EnergySpec {
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self {
            EnergySpec::Planted { length, vocab, .. } | EnergySpec::Gaussian { length, vocab, .. } => {
                Some((*length, *vocab))
            }
            EnergySpec::Pairwise { .. } => None,
        }
    }

    pub fn planted_spec(&self) -> Option<PlantedSpec> {
        match self {
            EnergySpec::Planted {
                length,
                vocab,
                modes,
                depth,
                noise,
                separation,
                ..
            } => Some(PlantedSpec {
                length: *length,
                vocab: *vocab,
                modes: *modes,
                depth: *depth,
                noise: *noise,
                separation: *separation,
            }),
            _ => None,
        }
    }
}

/// Masked sequence model: a weight file, or random weights from a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Defaults to the top-level seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            file: None,
            hidden: default_hidden(),
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Weight of the soft masked-model prior in the sampled energy.
    #[serde(default)]
    pub lambda: f64,
    /// Standard deviation of the random initial logits (0 starts at zero).
    #[serde(default)]
    pub init_scale: f64,
    pub sampler: SamplerConfig,
    pub energy: EnergySpec,
    #[serde(default)]
    pub model: ModelSpec,
}

/// Dimensions of a generated model when no energy fixes them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizedModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SizedModelSpec {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            file: self.file.clone(),
            hidden: self.hidden,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: SizedModelSpec,
    #[serde(default)]
    pub validation: ValidationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub campaign: CampaignConfig,
}

/// Reference conditionals for temperature calibration: a weight file, the
/// model itself with logits scaled, or (neither given) the model itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit_scale: Option<f64>,
}

fn default_contexts() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub model: SizedModelSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Number of random `(sequence, site)` contexts.
    #[serde(default = "default_contexts")]
    pub contexts: usize,
}

/// Fields every command config shares.
pub trait CommandConfig: Serialize + DeserializeOwned {
    fn seed_mut(&mut self) -> &mut u64;
    fn out_mut(&mut self) -> &mut Option<PathBuf>;
    /// Makes relative paths absolute with respect to `base`.
    fn resolve_paths(&mut self, base: &Path);
    fn check(&self) -> Result<(), ConfigError>;
}

fn resolve(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn core_check(r: rss_core::Result<()>) -> Result<(), ConfigError> {
    r.map_err(|e| ConfigError(e.to_string()))
}

fn check_model(spec: &SizedModelSpec) -> Result<(), ConfigError> {
    if spec.file.is_none() && (spec.length.is_none() || spec.vocab.is_none()) {
        return Err(ConfigError(
            "[model] needs either `file` or both `length` and `vocab`".into(),
        ));
    }
    if spec.hidden == 0 {
        return Err(ConfigError("[model] hidden must be at least 1".into()));
    }
    Ok(())
}

impl CommandConfig for RunConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }
    fn out_mut(&mut self) -> &mut Option<PathBuf> {
        &mut self.out
    }
    fn resolve_paths(&mut self, base: &Path) {
        if let EnergySpec::Pairwise { file, .. } = &mut self.energy {
            resolve(file, base);
        }
        if let Some(f) = &mut self.model.file {
            resolve(f, base);
        }
        if let Some(o) = &mut self.out {
            resolve(o, base);
        }
    }
    fn check(&self) -> Result<(), ConfigError> {
        core_check(self.sampler.validate())?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError("lambda must be finite and >= 0".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(ConfigError("init_scale must be finite and >= 0".into()));
        }
        if self.model.hidden == 0 {
            return Err(ConfigError("[model] hidden must be at least 1".into()));
        }
        Ok(())
    }
}

impl CommandConfig for ValidateConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }
    fn out_mut(&mut self) -> &mut Option<PathBuf> {
        &mut self.out
    }
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(f) = &mut self.model.file {
            resolve(f, base);
        }
        if let Some(o) = &mut self.out {
            resolve(o, base);
        }
    }
    fn check(&self) -> Result<(), ConfigError> {
        check_model(&self.model)?;
        core_check(self.validation.validate())
    }
}

impl CommandConfig for BenchConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }
    fn out_mut(&mut self) -> &mut Option<PathBuf> {
        &mut self.out
    }
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(o) = &mut self.out {
            resolve(o, base);
        }
    }
    fn check(&self) -> Result<(), ConfigError> {
        core_check(self.campaign.validate())
    }
}

impl CommandConfig for CalibrateConfig {
    fn seed_mut(&mut self) -> &mut u64 {
        &mut self.seed
    }
    fn out_mut(&mut self) -> &mut Option<PathBuf> {
        &mut self.out
    }
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(f) = &mut self.model.file {
            resolve(f, base);
        }
        if let Some(f) = &mut self.reference.file {
            resolve(f, base);
        }
        if let Some(o) = &mut self.out {
            resolve(o, base);
        }
    }
    fn check(&self) -> Result<(), ConfigError> {
        check_model(&self.model)?;
        if self.contexts == 0 {
            return Err(ConfigError("contexts must be at least 1".into()));
        }
        if self.reference.file.is_some() && self.reference.logit_scale.is_some() {
            return Err(ConfigError(
                "[reference] takes `file` or `logit_scale`, not both".into(),
            ));
        }
        if let Some(s) = self.reference.logit_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError("[reference] logit_scale must be finite and > 0".into()));
            }
        }
        Ok(())
    }
}

/// Parses `text`; `origin` names the source in diagnostics.
pub fn parse_config<C: CommandConfig>(text: &str, origin: &str) -> Result<C, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError(format!("{origin}: {e}")))
}

/// Reads, parses, applies the seed override, resolves paths and validates.
pub fn load_config<C: CommandConfig>(path: &Path, seed: Option<u64>) -> Result<C, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut config: C = parse_config(&text, &path.display().to_string())?;
    if let Some(s) = seed {
        *config.seed_mut() = s;
    }
    let base = path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let base = fs::canonicalize(base).unwrap_or_else(|_| base.to_path_buf());
    config.resolve_paths(&base);
    config.check()?;
    Ok(config)
}

/// Fully resolved config without the output directory, so that running the
/// echo reproduces every output byte for byte.
pub fn echo<C: CommandConfig + Clone>(config: &C) -> String {
    let mut c = config.clone();
    let seed = *c.seed_mut();
    *c.out_mut() = None;
    let body = toml::to_string(&c).expect("config serializes to TOML");
    format!("{}\n{body}", rss_core::textfmt::header_line(seed))
}
