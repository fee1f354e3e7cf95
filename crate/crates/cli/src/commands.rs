//! The four subcommands. Each writes its outputs into a fresh directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use rss_core::campaign::{run_campaign_on, CampaignSetup};
use rss_core::energy::{planted_landscape, PlantedLandscape};
use rss_core::numeric::argmax_decode;
use rss_core::sampler::{ess_and_autocorr, SnapshotMemory, SnapshotText, TraceCsv};
use rss_core::softplm::calibrate_temperature;
use rss_core::textfmt::{header_line, Document, Generator};
use rss_core::verify::run_validation;
use rss_core::{
    display_sequence, CompositeEnergy, EnergyModel, GaussianEnergy, MaskedSequenceModel, Matrix, PairwiseContactEnergy,
    Rng, Sampler, SoftPlmEnergy,
};

use crate::config::{
    echo, load_config, BenchConfig, CalibrateConfig, CommandConfig, ConfigError, EnergySpec, ModelSpec, RunConfig,
    SizedModelSpec, ValidateConfig,
};

/// Shared command-line arguments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub force: bool,
}

/// Destination directory for one command.
pub struct OutputDir {
    path: PathBuf,
}

impl OutputDir {
    /// Creates `path`, refusing a non-empty directory unless `force`.
    pub fn prepare(path: &Path, force: bool) -> Result<Self> {
        if path.exists() {
            let non_empty = fs::read_dir(path)
                .with_context(|| format!("cannot read output directory {}", path.display()))?
                .next()
                .is_some();
            if non_empty && !force {
                bail!(
                    "output directory {} is not empty (use --force to overwrite)",
                    path.display()
                );
            }
        }
        fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.file(name), contents).with_context(|| format!("cannot write {name}"))
    }

    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let f = File::create(self.file(name)).with_context(|| format!("cannot create {name}"))?;
        Ok(BufWriter::new(f))
    }
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn setup<C: CommandConfig + Clone>(inv: &Invocation) -> Result<(C, OutputDir)> {
    let mut config: C = load_config(&inv.config, inv.seed)?;
    if let Some(o) = &inv.out {
        *config.out_mut() = Some(o.clone());
    }
    let out = config
        .out_mut()
        .clone()
        .ok_or_else(|| ConfigError("no output directory: pass --out or set `out` in the config".into()))?;
    let dir = OutputDir::prepare(&out, inv.force)?;
    dir.write("config.toml", &echo(&config))?;
    Ok((config, dir))
}

fn load_model(spec: &ModelSpec, dims: Option<(usize, usize)>, seed: u64) -> Result<MaskedSequenceModel> {
    let model = match &spec.file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read model {}", path.display()))?;
            MaskedSequenceModel::from_text(&text).with_context(|| format!("invalid model file {}", path.display()))?
        }
        None => {
            let (l, k) = dims.context("model dimensions are unknown")?;
            let mut rng = Rng::with_stream(spec.seed.unwrap_or(seed), u64::MAX - 1);
            MaskedSequenceModel::random(l, k, spec.hidden, &mut rng)?
        }
    };
    if let Some(d) = dims {
        if model.dims() != d {
            bail!("model dimensions {:?} do not match {:?}", model.dims(), d);
        }
    }
    Ok(model)
}

fn sized_model(spec: &SizedModelSpec, seed: u64) -> Result<MaskedSequenceModel> {
    let dims = match (spec.length, spec.vocab) {
        (Some(l), Some(k)) => Some((l, k)),
        _ => None,
    };
    load_model(&spec.spec(), dims, seed)
}

struct BuiltEnergy {
    energy: Box<dyn EnergyModel>,
    structural: Option<PairwiseContactEnergy>,
    landscape: Option<PlantedLandscape>,
    dims: (usize, usize),
}

fn confine(e: PairwiseContactEnergy, scale: f64) -> Result<Box<dyn EnergyModel>> {
    let (l, k) = e.dims();
    let trap = GaussianEnergy::new(Matrix::zeros(l, k), scale)?;
    Ok(Box::new(CompositeEnergy::new(Box::new(e), Box::new(trap), 1.0)?))
}

fn build_energy(spec: &EnergySpec, seed: u64) -> Result<BuiltEnergy> {
    match spec {
        EnergySpec::Planted { confinement, .. } => {
            let planted = spec.planted_spec().expect("planted spec");
            let landscape = planted_landscape(&planted, &mut Rng::with_stream(seed, u64::MAX))?;
            Ok(BuiltEnergy {
                energy: confine(landscape.energy.clone(), *confinement)?,
                structural: Some(landscape.energy.clone()),
                dims: landscape.energy.dims(),
                landscape: Some(landscape),
            })
        }
        EnergySpec::Pairwise { file, confinement } => {
            let text = fs::read_to_string(file).with_context(|| format!("cannot read energy {}", file.display()))?;
            let (energy, landscape) = match PlantedLandscape::from_text(&text) {
                Ok(l) => (l.energy.clone(), Some(l)),
                Err(_) => {
                    let doc =
                        Document::parse(&text).with_context(|| format!("invalid energy file {}", file.display()))?;
                    (PairwiseContactEnergy::from_document(&doc)?, None)
                }
            };
            Ok(BuiltEnergy {
                energy: confine(energy.clone(), *confinement)?,
                dims: energy.dims(),
                structural: Some(energy),
                landscape,
            })
        }
        EnergySpec::Gaussian { length, vocab, scale } => Ok(BuiltEnergy {
            energy: Box::new(GaussianEnergy::new(Matrix::zeros(*length, *vocab), *scale)?),
            structural: None,
            landscape: None,
            dims: (*length, *vocab),
        }),
    }
}

/// `rss run`: one walk-jump chain.
pub fn cmd_run(inv: &Invocation) -> Result<()> {
    let (config, dir): (RunConfig, _) = setup(inv)?;
    let seed = config.seed;
    let built = build_energy(&config.energy, seed)?;
    let model = Arc::new(load_model(&config.model, Some(built.dims), seed)?);
    dir.write("model.txt", &model.to_text())?;
    if let Some(l) = &built.landscape {
        dir.write("landscape.txt", &l.to_text())?;
    }
    let energy: Box<dyn EnergyModel> = if config.lambda > 0.0 {
        let prior = SoftPlmEnergy::new(model.clone(), config.sampler.tau)?;
        Box::new(CompositeEnergy::new(built.energy, Box::new(prior), config.lambda)?)
    } else {
        built.energy
    };
    let (l, k) = built.dims;
    let mut init_rng = Rng::with_stream(seed, 0);
    let x0 = Matrix::from_fn(l, k, |_, _| config.init_scale * init_rng.normal());
    let model_ref = (config.sampler.p_jump > 0.0).then_some(&*model);
    let mut sampler = Sampler::new(config.sampler.clone(), &*energy, model_ref)?;
    let trace = TraceCsv::new(dir.create("trace.csv")?, seed)?;
    let snaps = SnapshotText::new(dir.create("snapshots.txt")?, seed)?;
    let mut sink = (trace, (snaps, SnapshotMemory::new()));
    let mut rng = Rng::with_stream(seed, 1);
    let summary = sampler.run(x0, &mut rng, &mut sink)?;
    let memory = sink.1 .1;

    let mut seqs = String::new();
    seqs.push_str(&header_line(seed));
    seqs.push('\n');
    for (step, logits) in &memory.snapshots {
        seqs.push_str(&format!("{step} {}\n", display_sequence(&argmax_decode(logits)?)));
    }
    dir.write("sequences.txt", &seqs)?;

    let burn = (config.sampler.burn_in as usize).min(memory.energies.len());
    let ess = ess_and_autocorr(&memory.energies[burn..]);
    let best = argmax_decode(&summary.min_state)?;
    let report = json!({
        "generator": Generator::new(seed),
        "summary": summary,
        "energy_ess": ess,
        "best_sequence": display_sequence(&best),
        "best_discrete_energy": built.structural.as_ref().map(|e| e.discrete_energy(&best)),
    });
    dir.write("summary.json", &json_text(&report))?;

    let rate = |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"));
    let text = format!(
        "{}\nsteps {}\nwalk acceptance {} ({} proposed)\njump acceptance {} ({} proposed)\nenergy initial {:.6} final {:.6} min {:.6} at step {}\nenergy mean {:.6} std {:.6}\nenergy ESS {:.1} (tau_int {:.2})\nfinal eta {:.6}\nbest sequence {}\n",
        header_line(seed),
        summary.steps,
        rate(summary.walk.rate),
        summary.walk.proposed,
        rate(summary.jump.rate),
        summary.jump.proposed,
        summary.initial_energy,
        summary.final_energy,
        summary.min_energy,
        summary.min_energy_step,
        summary.energy_mean,
        summary.energy_std,
        ess.ess,
        ess.tau_int,
        summary.final_eta,
        display_sequence(&best),
    );
    dir.write("summary.txt", &text)?;
    Ok(())
}

/// `rss validate`: the soft-model validation suite.
pub fn cmd_validate(inv: &Invocation) -> Result<()> {
    let (config, dir): (ValidateConfig, _) = setup(inv)?;
    let model = sized_model(&config.model, config.seed)?;
    dir.write("model.txt", &model.to_text())?;
    let report = run_validation(&model, &config.validation, config.seed)?;
    dir.write("validation.json", &report.to_json())?;
    dir.write("validation.txt", &report.summary_text())?;
    Ok(())
}

/// `rss bench`: the mode-discovery campaign. Fails after writing the report
/// when the methods did not spend equal evaluation budgets.
pub fn cmd_bench(inv: &Invocation) -> Result<()> {
    let (config, dir): (BenchConfig, _) = setup(inv)?;
    let setup = CampaignSetup::generate(&config.campaign, config.seed)?;
    dir.write("landscape.txt", &setup.landscape.to_text())?;
    dir.write("model.txt", &setup.model.to_text())?;
    let report = run_campaign_on(&config.campaign, &setup, config.seed)?;
    dir.write("campaign.json", &report.to_json())?;
    dir.write("campaign.csv", &report.curve_csv())?;
    dir.write("campaign.txt", &report.summary_text())?;
    if !report.compute_parity {
        bail!("compute parity violated: methods spent different evaluation budgets");
    }
    Ok(())
}

/// `rss calibrate`: fits the global temperature against a reference.
pub fn cmd_calibrate(inv: &Invocation) -> Result<()> {
    let (config, dir): (CalibrateConfig, _) = setup(inv)?;
    let seed = config.seed;
    let model = sized_model(&config.model, seed)?;
    let (reference, label) = match (&config.reference.file, config.reference.logit_scale) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read reference {}", path.display()))?;
            (
                MaskedSequenceModel::from_text(&text)?,
                format!("file {}", path.display()),
            )
        }
        (None, Some(s)) => (model.with_logit_scale(s), format!("model with logits scaled by {s}")),
        (None, None) => (model.clone(), "model itself".to_string()),
    };
    let (l, k) = model.dims();
    let mut rng = Rng::with_stream(seed, 2);
    let contexts: Vec<(Vec<usize>, usize)> = (0..config.contexts)
        .map(|_| ((0..l).map(|_| rng.index(k)).collect(), rng.index(l)))
        .collect();
    let calibration = calibrate_temperature(&model, &reference, &contexts)?;
    dir.write("model.txt", &model.to_text())?;
    let report = json!({
        "generator": Generator::new(seed),
        "reference": label,
        "calibration": calibration,
    });
    dir.write("calibration.json", &json_text(&report))?;
    let mut text = Vec::new();
    writeln!(text, "{}", header_line(seed))?;
    writeln!(text, "reference: {label}")?;
    writeln!(text, "tau* = {:.6}", calibration.tau)?;
    writeln!(
        text,
        "mean KL at tau* = {:.6e} over {} contexts",
        calibration.objective, calibration.contexts
    )?;
    dir.write("calibration.txt", &String::from_utf8(text)?)?;
    Ok(())
}
