//! Mode-discovery benchmark: walk-jump sampling against gradient-descent
//! optimization of relaxed sequences at an equal evaluation budget, scored
//! over enumeration-verified planted landscapes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    hamming, planted_landscape, CompositeEnergy, EnergyModel, GaussianEnergy, PairwiseContactEnergy, PlantedLandscape,
    PlantedSpec,
};
use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{argmax_decode, median, quantile};
use crate::sampler::{MoveKind, Sampler, SamplerConfig};
use crate::softplm::{MaskedSequenceModel, SoftPlmEnergy};
use crate::textfmt::{format_real, header_line, Generator};
use crate::Rng;

/// Consecutive energy increases after which descent is declared divergent.
pub const DIVERGENCE_RUN: usize = 100;

/// Quantile levels of the success-rate sweep.
pub const SWEEP_QUANTILES: [f64; 10] = [0.0005, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Walk-jump sampling on the full energy.
    #[serde(rename = "rss")]
    Rss,
    /// Gradient descent on the full energy.
    #[serde(rename = "rso")]
    Rso,
    /// Gradient descent without the masked-model prior.
    #[serde(rename = "rso-noplm")]
    RsoNoPlm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rss => "rss",
            Method::Rso => "rso",
            Method::RsoNoPlm => "rso-noplm",
        })
    }
}

/// Result of a descent run.
#[derive(Clone, Debug, PartialEq)]
pub struct RsoTrajectory {
    /// `l_0, l_1, ...`; shorter than `steps + 1` when divergent.
    pub states: Vec<Matrix>,
    pub energies: Vec<f64>,
    pub diverged: bool,
}

/// Plain gradient descent `l <- l - eta grad E(l)`, calling `visit(t, l_t, E_t)`
/// for every iterate including `l_0`. Returns the number of energy
/// evaluations and the divergence flag.
pub fn descend(
    initial: &Matrix,
    energy: &dyn EnergyModel,
    eta: f64,
    steps: u64,
    mut visit: impl FnMut(u64, &Matrix, f64),
) -> Result<(u64, bool)> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(param("rso_eta", "must be finite and > 0"));
    }
    initial.ensure_finite()?;
    let mut x = initial.clone();
    let mut ev = energy.try_evaluate(&x)?;
    let mut evals = 1;
    visit(0, &x, ev.energy);
    let mut rising = 0;
    for t in 1..=steps {
        x.axpy(-eta, &ev.gradient);
        let next = energy.evaluate(&x);
        evals += 1;
        if !next.energy.is_finite() || !next.gradient.is_finite() || !x.is_finite() {
            return Ok((evals, true));
        }
        rising = if next.energy > ev.energy { rising + 1 } else { 0 };
        ev = next;
        visit(t, &x, ev.energy);
        if rising >= DIVERGENCE_RUN {
            return Ok((evals, true));
        }
    }
    Ok((evals, false))
}

/// Descent trajectory kept in memory.
pub fn run_rso(initial: &Matrix, energy: &dyn EnergyModel, eta: f64, steps: u64) -> Result<RsoTrajectory> {
    let mut states = Vec::new();
    let mut energies = Vec::new();
    let (_, diverged) = descend(initial, energy, eta, steps, |_, x, e| {
        states.push(x.clone());
        energies.push(e);
    })?;
    Ok(RsoTrajectory {
        states,
        energies,
        diverged,
    })
}

/// Greedy leader clustering in input order: each sequence joins the first
/// cluster whose leader is within `radius`, otherwise it founds one.
pub fn cluster_sequences(sequences: &[Vec<usize>], radius: usize) -> Vec<usize> {
    let mut leaders: Vec<&[usize]> = Vec::new();
    sequences
        .iter()
        .map(|s| match leaders.iter().position(|l| hamming(l, s) <= radius) {
            Some(c) => c,
            None => {
                leaders.push(s);
                leaders.len() - 1
            }
        })
        .collect()
}

pub fn cluster_count(sequences: &[Vec<usize>], radius: usize) -> usize {
    cluster_sequences(sequences, radius)
        .into_iter()
        .max()
        .map_or(0, |m| m + 1)
}

/// Sorted, de-duplicated sequences.
pub fn unique_sorted(sequences: impl IntoIterator<Item = Vec<usize>>) -> Vec<Vec<usize>> {
    let mut v: Vec<Vec<usize>> = sequences.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Unique sequences whose discrete energy is at most `threshold`, sorted.
pub fn designable_surrogate(
    sequences: &[Vec<usize>],
    energy: &PairwiseContactEnergy,
    threshold: f64,
) -> Vec<Vec<usize>> {
    unique_sorted(
        sequences
            .iter()
            .filter(|s| energy.discrete_energy(s) <= threshold)
            .cloned(),
    )
}

/// Sorted discrete energies of every sequence of the landscape.
pub fn sorted_energies(landscape: &PlantedLandscape) -> Result<Vec<f64>> {
    let (l, k) = landscape.energy.dims();
    match crate::energy::sequence_count(l, k) {
        Some(n) if n <= crate::energy::MAX_ENUMERATION => {}
        _ => {
            return Err(Error::InvalidInput(format!(
                "K^L = {k}^{l} is too large to enumerate; give an explicit threshold"
            )))
        }
    }
    let mut e = landscape.enumerate_energies();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

mod defaults {
    pub fn methods() -> Vec<super::Method> {
        vec![super::Method::Rss, super::Method::Rso, super::Method::RsoNoPlm]
    }
    pub fn seeds() -> usize {
        20
    }
    pub fn budget() -> u64 {
        4000
    }
    pub fn lambda() -> f64 {
        0.1
    }
    pub fn confinement() -> f64 {
        2.0
    }
    pub fn rso_eta() -> f64 {
        0.05
    }
    pub fn quantile() -> f64 {
        0.05
    }
    pub fn init_scale() -> f64 {
        1.0
    }
    pub fn hidden() -> usize {
        16
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub landscape: PlantedSpec,
    pub sampler: SamplerConfig,
    #[serde(default = "defaults::methods")]
    pub methods: Vec<Method>,
    /// Independent runs per method; run `n` uses seed `seed + n`.
    #[serde(default = "defaults::seeds")]
    pub seeds: usize,
    /// Evaluations per run, counting energy calls and masked-model passes.
    #[serde(default = "defaults::budget")]
    pub budget: u64,
    /// Weight of the masked-model prior.
    #[serde(default = "defaults::lambda")]
    pub lambda: f64,
    /// Scale of the Gaussian confinement `|l|^2 / (2 s^2)` added to every
    /// method's energy.
    #[serde(default = "defaults::confinement")]
    pub confinement: f64,
    #[serde(default = "defaults::rso_eta")]
    pub rso_eta: f64,
    /// Hamming clustering radius; defaults to `floor(L / 4)`.
    #[serde(default)]
    pub radius: Option<usize>,
    /// Designability threshold as a quantile of all discrete energies.
    #[serde(default = "defaults::quantile")]
    pub quantile: f64,
    /// Standard deviation of the random initial logits.
    #[serde(default = "defaults::init_scale")]
    pub init_scale: f64,
    /// Hidden width of the generated masked model.
    #[serde(default = "defaults::hidden")]
    pub hidden: usize,
}

impl CampaignConfig {
    pub fn new(landscape: PlantedSpec, sampler: SamplerConfig) -> Self {
        Self {
            landscape,
            sampler,
            methods: defaults::methods(),
            seeds: defaults::seeds(),
            budget: defaults::budget(),
            lambda: defaults::lambda(),
            confinement: defaults::confinement(),
            rso_eta: defaults::rso_eta(),
            radius: None,
            quantile: defaults::quantile(),
            init_scale: defaults::init_scale(),
            hidden: defaults::hidden(),
        }
    }

    pub fn radius(&self) -> usize {
        self.radius.unwrap_or(self.landscape.length / 4)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.methods.is_empty() {
            return Err(param("methods", "at least one method is required"));
        }
        if self.seeds == 0 {
            return Err(param("seeds", "must be at least 1"));
        }
        if self.sampler.stride < 3 {
            return Err(param(
                "stride",
                "must be at least 3 so every move crosses at most one snapshot boundary",
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(param("lambda", "must be finite and >= 0"));
        }
        if !(self.confinement > 0.0 && self.confinement.is_finite()) {
            return Err(param("confinement", "must be finite and > 0"));
        }
        if !(self.rso_eta > 0.0 && self.rso_eta.is_finite()) {
            return Err(param("rso_eta", "must be finite and > 0"));
        }
        if !(0.0..=1.0).contains(&self.quantile) {
            return Err(param("quantile", "must lie in [0, 1]"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(param("init_scale", "must be finite and >= 0"));
        }
        if self.hidden == 0 {
            return Err(param("hidden", "must be at least 1"));
        }
        Ok(())
    }
}

/// Landscape, masked model and the two energies shared by all runs.
pub struct CampaignSetup {
    pub landscape: PlantedLandscape,
    pub model: Arc<MaskedSequenceModel>,
    /// Structural energy plus confinement plus weighted prior.
    pub full: CompositeEnergy,
    /// Structural energy plus confinement.
    pub structural: CompositeEnergy,
}

impl CampaignSetup {
    pub fn generate(config: &CampaignConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let landscape = planted_landscape(&config.landscape, &mut Rng::with_stream(seed, u64::MAX))?;
        let (l, k) = (config.landscape.length, config.landscape.vocab);
        let model = Arc::new(MaskedSequenceModel::random(
            l,
            k,
            config.hidden,
            &mut Rng::with_stream(seed, u64::MAX - 1),
        )?);
        Self::from_parts(config, landscape, model)
    }

    pub fn from_parts(
        config: &CampaignConfig,
        landscape: PlantedLandscape,
        model: Arc<MaskedSequenceModel>,
    ) -> Result<Self> {
        let dims = landscape.energy.dims();
        let confined = |e: PairwiseContactEnergy| -> Result<CompositeEnergy> {
            let trap = GaussianEnergy::new(Matrix::zeros(dims.0, dims.1), config.confinement)?;
            CompositeEnergy::new(Box::new(e), Box::new(trap), 1.0)
        };
        let prior = SoftPlmEnergy::new(model.clone(), config.sampler.tau)?;
        let full = CompositeEnergy::new(
            Box::new(confined(landscape.energy.clone())?),
            Box::new(prior),
            config.lambda,
        )?;
        let structural = confined(landscape.energy.clone())?;
        Ok(Self {
            landscape,
            model,
            full,
            structural,
        })
    }
}

/// Decoded snapshots of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub index: usize,
    /// Decoded initial state followed by one decoded state per snapshot.
    pub decoded: Vec<Vec<usize>>,
    pub evaluations: u64,
    pub snapshots: usize,
    pub diverged: bool,
    pub walk_acceptance: Option<f64>,
    pub jump_acceptance: Option<f64>,
}

fn initial_logits(config: &CampaignConfig, seed: u64, index: usize) -> Matrix {
    let mut rng = Rng::with_stream(seed.wrapping_add(index as u64), 0);
    let (l, k) = (config.landscape.length, config.landscape.vocab);
    Matrix::from_fn(l, k, |_, _| config.init_scale * rng.normal())
}

/// One walk-jump run spending exactly `budget` evaluations. A jump drawn
/// when fewer evaluations remain than it needs is replaced by a walk.
pub fn run_rss_budgeted(config: &CampaignConfig, setup: &CampaignSetup, seed: u64, index: usize) -> Result<RunOutput> {
    let x0 = initial_logits(config, seed, index);
    let mut out = RunOutput {
        index,
        decoded: vec![argmax_decode(&x0)?],
        evaluations: 0,
        snapshots: 0,
        diverged: false,
        walk_acceptance: None,
        jump_acceptance: None,
    };
    if config.budget == 0 {
        return Ok(out);
    }
    let stride = config.sampler.stride;
    let mut sampler = Sampler::new(config.sampler.clone(), &setup.full, Some(&setup.model))?;
    let mut rng = Rng::with_stream(seed.wrapping_add(index as u64), 1);
    let mut state = sampler.init(x0)?;
    let mut taken = sampler.counts().total() / stride;
    let (mut walks, mut walk_acc, mut jumps, mut jump_acc) = (0u64, 0u64, 0u64, 0u64);
    loop {
        let used = sampler.counts().total();
        let remaining = config.budget - used;
        if remaining == 0 {
            break;
        }
        let mut kind = if rng.uniform() < config.sampler.p_jump {
            MoveKind::Jump
        } else {
            MoveKind::Walk
        };
        if kind == MoveKind::Jump && sampler.jump_cost(&state) > remaining {
            kind = MoveKind::Walk;
        }
        let record = sampler.step_kind(&mut state, kind, &mut rng)?;
        match kind {
            MoveKind::Walk => {
                walks += 1;
                walk_acc += record.accepted as u64;
            }
            MoveKind::Jump => {
                jumps += 1;
                jump_acc += record.accepted as u64;
            }
        }
        let crossed = sampler.counts().total() / stride;
        if crossed > taken {
            taken = crossed;
            out.decoded.push(argmax_decode(&state.logits)?);
            out.snapshots += 1;
        }
    }
    out.evaluations = sampler.counts().total();
    out.walk_acceptance = (walks > 0).then(|| walk_acc as f64 / walks as f64);
    out.jump_acceptance = (jumps > 0).then(|| jump_acc as f64 / jumps as f64);
    Ok(out)
}

/// One descent run spending exactly `budget` evaluations, decoded at the
/// same snapshot boundaries as the sampler.
pub fn run_rso_budgeted(
    config: &CampaignConfig,
    energy: &dyn EnergyModel,
    seed: u64,
    index: usize,
) -> Result<RunOutput> {
    let x0 = initial_logits(config, seed, index);
    let mut out = RunOutput {
        index,
        decoded: vec![argmax_decode(&x0)?],
        evaluations: 0,
        snapshots: 0,
        diverged: false,
        walk_acceptance: None,
        jump_acceptance: None,
    };
    if config.budget == 0 {
        return Ok(out);
    }
    let stride = config.sampler.stride;
    let mut decoded = Vec::new();
    let (evals, diverged) = descend(&x0, energy, config.rso_eta, config.budget - 1, |t, x, _| {
        // Iterate t costs t + 1 evaluations in total.
        if t > 0 && (t + 1) % stride == 0 {
            decoded.push(x.clone());
        }
    })?;
    for x in &decoded {
        out.decoded.push(argmax_decode(x)?);
    }
    out.snapshots = decoded.len();
    out.evaluations = evals;
    out.diverged = diverged;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedStats {
    pub index: usize,
    pub unique: usize,
    pub designable: usize,
    pub clusters: usize,
    pub planted_found: usize,
    pub evaluations: u64,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub quantile: f64,
    pub threshold: f64,
    /// Unique pooled sequences at or below the threshold.
    pub designable: usize,
    pub unique: usize,
    /// Fraction of runs with at least one decoded sequence at or below it.
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub runs: usize,
    pub evaluations: u64,
    pub snapshots: usize,
    pub candidates: usize,
    pub unique: usize,
    pub designable: usize,
    pub clusters: usize,
    pub planted_found: usize,
    pub median_designable: f64,
    pub median_clusters: f64,
    pub median_planted_found: f64,
    pub mean_walk_acceptance: Option<f64>,
    pub mean_jump_acceptance: Option<f64>,
    pub diverged_runs: usize,
    pub per_seed: Vec<SeedStats>,
    pub success_curve: Vec<CurvePoint>,
    /// `(radius, clusters)` over the pooled designable set.
    pub radius_sweep: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapeSummary {
    pub length: usize,
    pub vocab: usize,
    pub modes: usize,
    pub planted_energies: Vec<f64>,
    pub global_minimum: f64,
    pub median_energy: f64,
    pub threshold: f64,
    pub quantile: f64,
    pub enumerated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignReport {
    pub generator: Generator,
    pub config: CampaignConfig,
    pub radius: usize,
    pub landscape: LandscapeSummary,
    pub methods: Vec<MethodReport>,
    /// Every method spent the same total number of evaluations.
    pub compute_parity: bool,
    /// Runs that failed, by method, with the error message.
    pub missing_seeds: BTreeMap<String, Vec<(usize, String)>>,
}

impl CampaignReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per `(method, quantile)` of the success-rate sweep.
    pub fn curve_csv(&self) -> String {
        let mut out = format!(
            "{}\nmethod,quantile,threshold,designable,unique,success_rate\n",
            header_line(self.generator.seed)
        );
        for m in &self.methods {
            for p in &m.success_curve {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    m.method,
                    p.quantile,
                    format_real(p.threshold),
                    p.designable,
                    p.unique,
                    format_real(p.success_rate)
                ));
            }
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = format!("{}\n", header_line(self.generator.seed));
        out.push_str(&format!(
            "landscape L={} K={} modes={} threshold={:.6} (q={}) radius={}\n",
            self.landscape.length,
            self.landscape.vocab,
            self.landscape.modes,
            self.landscape.threshold,
            self.landscape.quantile,
            self.radius
        ));
        out.push_str(&format!(
            "compute parity: {}\n",
            if self.compute_parity { "yes" } else { "NO" }
        ));
        out.push_str("method      evals  unique  designable  clusters  planted  med.designable  med.clusters\n");
        for m in &self.methods {
            out.push_str(&format!(
                "{:<10} {:>6} {:>7} {:>11} {:>9} {:>8} {:>15.1} {:>13.1}\n",
                m.method.to_string(),
                m.evaluations,
                m.unique,
                m.designable,
                m.clusters,
                m.planted_found,
                m.median_designable,
                m.median_clusters
            ));
        }
        for (method, missing) in &self.missing_seeds {
            for (index, message) in missing {
                out.push_str(&format!("missing {method} run {index}: {message}\n"));
            }
        }
        out
    }
}

fn summarize(
    method: Method,
    runs: &[RunOutput],
    setup: &CampaignSetup,
    threshold: f64,
    radius: usize,
    sorted: &[f64],
) -> MethodReport {
    let energy = &setup.landscape.energy;
    let planted = &setup.landscape.planted;
    let planted_in = |set: &[Vec<usize>]| planted.iter().filter(|p| set.binary_search(p).is_ok()).count();
    let per_seed: Vec<SeedStats> = runs
        .iter()
        .map(|r| {
            let unique = unique_sorted(r.decoded.iter().cloned());
            let designable = designable_surrogate(&unique, energy, threshold);
            SeedStats {
                index: r.index,
                unique: unique.len(),
                designable: designable.len(),
                clusters: cluster_count(&designable, radius),
                planted_found: planted_in(&unique),
                evaluations: r.evaluations,
                diverged: r.diverged,
            }
        })
        .collect();
    let pooled = unique_sorted(runs.iter().flat_map(|r| r.decoded.iter().cloned()));
    let pooled_energy: Vec<f64> = pooled.iter().map(|s| energy.discrete_energy(s)).collect();
    let run_minima: Vec<f64> = runs
        .iter()
        .map(|r| {
            r.decoded
                .iter()
                .map(|s| energy.discrete_energy(s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let designable = designable_surrogate(&pooled, energy, threshold);
    let success_curve = SWEEP_QUANTILES
        .iter()
        .map(|&q| {
            let t = quantile(sorted, q);
            CurvePoint {
                quantile: q,
                threshold: t,
                designable: pooled_energy.iter().filter(|&&e| e <= t).count(),
                unique: pooled.len(),
                success_rate: if runs.is_empty() {
                    0.0
                } else {
                    run_minima.iter().filter(|&&e| e <= t).count() as f64 / runs.len() as f64
                },
            }
        })
        .collect();
    let length = setup.landscape.spec.length;
    let radius_sweep = (0..=length / 2).map(|r| (r, cluster_count(&designable, r))).collect();
    let med = |f: fn(&SeedStats) -> usize| {
        if per_seed.is_empty() {
            0.0
        } else {
            median(&per_seed.iter().map(|s| f(s) as f64).collect::<Vec<_>>())
        }
    };
    let mean_of = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    MethodReport {
        method,
        runs: runs.len(),
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        snapshots: runs.iter().map(|r| r.snapshots).sum(),
        candidates: runs.iter().map(|r| r.decoded.len()).sum(),
        unique: pooled.len(),
        designable: designable.len(),
        clusters: cluster_count(&designable, radius),
        planted_found: planted_in(&pooled),
        median_designable: med(|s| s.designable),
        median_clusters: med(|s| s.clusters),
        median_planted_found: med(|s| s.planted_found),
        mean_walk_acceptance: mean_of(runs.iter().filter_map(|r| r.walk_acceptance).collect()),
        mean_jump_acceptance: mean_of(runs.iter().filter_map(|r| r.jump_acceptance).collect()),
        diverged_runs: runs.iter().filter(|r| r.diverged).count(),
        per_seed,
        success_curve,
        radius_sweep,
    }
}

/// Runs every method over `config.seeds` runs on a landscape generated from
/// `seed`. Failed runs are listed in `missing_seeds` and left out of the
/// statistics.
pub fn run_campaign(config: &CampaignConfig, seed: u64) -> Result<(CampaignReport, CampaignSetup)> {
    let setup = CampaignSetup::generate(config, seed)?;
    let report = run_campaign_on(config, &setup, seed)?;
    Ok((report, setup))
}

pub fn run_campaign_on(config: &CampaignConfig, setup: &CampaignSetup, seed: u64) -> Result<CampaignReport> {
    config.validate()?;
    let sorted = sorted_energies(&setup.landscape)?;
    let threshold = quantile(&sorted, config.quantile);
    let radius = config.radius();
    let mut methods = Vec::new();
    let mut missing = BTreeMap::new();
    for &method in &config.methods {
        let results: Vec<Result<RunOutput>> = (0..config.seeds)
            .into_par_iter()
            .map(|index| match method {
                Method::Rss => run_rss_budgeted(config, setup, seed, index),
                Method::Rso => run_rso_budgeted(config, &setup.full, seed, index),
                Method::RsoNoPlm => run_rso_budgeted(config, &setup.structural, seed, index),
            })
            .collect();
        let mut runs = Vec::new();
        let mut failed = Vec::new();
        for (index, r) in results.into_iter().enumerate() {
            match r {
                Ok(run) => runs.push(run),
                Err(e) => failed.push((index, e.to_string())),
            }
        }
        if !failed.is_empty() {
            missing.insert(method.to_string(), failed);
        }
        methods.push(summarize(method, &runs, setup, threshold, radius, &sorted));
    }
    let compute_parity = missing.is_empty() && methods.windows(2).all(|w| w[0].evaluations == w[1].evaluations);
    let energies: Vec<f64> = setup
        .landscape
        .planted
        .iter()
        .map(|p| setup.landscape.energy.discrete_energy(p))
        .collect();
    Ok(CampaignReport {
        generator: Generator::new(seed),
        config: config.clone(),
        radius,
        landscape: LandscapeSummary {
            length: config.landscape.length,
            vocab: config.landscape.vocab,
            modes: setup.landscape.planted.len(),
            planted_energies: energies,
            global_minimum: sorted[0],
            median_energy: quantile(&sorted, 0.5),
            threshold,
            quantile: config.quantile,
            enumerated: sorted.len(),
        },
        methods,
        compute_parity,
        missing_seeds: missing,
    })
}
