//! The walk–jump mixture kernel and chain driver.
//!
//! Each step draws `u ~ U(0, 1)` and runs a jump when `u < p_jump`, otherwise a
//! Langevin walk. Both moves evaluate energy and gradient at the proposal once;
//! the pair is cached on acceptance so every step costs one energy call.

pub mod diagnostics;
pub mod jump;
pub mod mask;
pub mod sink;
pub mod walk;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use diagnostics::{ess_and_autocorr, EssEstimate};
pub use jump::{apply_swaps, draw_jump, jump_log_acceptance, JumpDraw, JumpEndpoint};
pub use mask::{log_mask_mass, log_truncation_normalizer, mask_probabilities, sample_mask, MaskMode};
pub use sink::{ChainSink, SnapshotMemory, SnapshotText, TraceCsv};
pub use walk::{gaussian_log_density, langevin_mean, walk_log_acceptance, walk_propose};

use crate::energy::EnergyModel;
use crate::error::{param, Error, Result};
use crate::matrix::{validate_logits, Matrix};
use crate::softplm::MaskedSequenceModel;
use crate::Rng;

mod defaults {
    use super::MaskMode;
    pub fn eta() -> f64 {
        0.01
    }
    pub fn p_jump() -> f64 {
        0.2
    }
    pub fn kappa() -> f64 {
        0.5
    }
    pub fn gamma() -> f64 {
        1.0
    }
    pub fn tau() -> f64 {
        1.0
    }
    pub fn epsilon() -> f64 {
        1e-8
    }
    pub fn steps() -> u64 {
        1000
    }
    pub fn s_max() -> usize {
        3
    }
    pub fn mask_mode() -> MaskMode {
        MaskMode::Exact
    }
    pub fn adapt_eta() -> bool {
        true
    }
    pub fn burn_in() -> u64 {
        0
    }
    pub fn stride() -> u64 {
        50
    }
}

/// Scalar hyperparameters of the sampler. Only `beta` has no default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// Inverse temperature of the target `exp(-beta E)`.
    pub beta: f64,
    /// Langevin step size.
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::p_jump")]
    pub p_jump: f64,
    /// Mask scale in `(0, 1]`.
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    /// Swap magnitude.
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
    /// Temperature of the masked-model conditionals used by jumps.
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::steps")]
    pub steps: u64,
    /// Largest admissible mask size.
    #[serde(default = "defaults::s_max")]
    pub s_max: usize,
    #[serde(default = "defaults::mask_mode")]
    pub mask_mode: MaskMode,
    /// Multiplicative step-size adaptation, active during burn-in only.
    #[serde(default = "defaults::adapt_eta")]
    pub adapt_eta: bool,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: u64,
    /// Snapshot every `stride` steps.
    #[serde(default = "defaults::stride")]
    pub stride: u64,
}

impl SamplerConfig {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            eta: defaults::eta(),
            p_jump: defaults::p_jump(),
            kappa: defaults::kappa(),
            gamma: defaults::gamma(),
            tau: defaults::tau(),
            epsilon: defaults::epsilon(),
            steps: defaults::steps(),
            s_max: defaults::s_max(),
            mask_mode: defaults::mask_mode(),
            adapt_eta: defaults::adapt_eta(),
            burn_in: defaults::burn_in(),
            stride: defaults::stride(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("beta", self.beta)?;
        positive("eta", self.eta)?;
        positive("gamma", self.gamma)?;
        positive("tau", self.tau)?;
        positive("epsilon", self.epsilon)?;
        if !(0.0..=1.0).contains(&self.p_jump) {
            return Err(param("p_jump", format!("must lie in [0, 1], got {}", self.p_jump)));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(param("kappa", format!("must lie in (0, 1], got {}", self.kappa)));
        }
        if self.s_max < 1 {
            return Err(param("s_max", "must be at least 1"));
        }
        if self.stride < 1 {
            return Err(param("stride", "must be at least 1"));
        }
        Ok(())
    }
}

/// Current state with its cached energy and gradient.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub logits: Matrix,
    pub energy: f64,
    pub gradient: Matrix,
    pub step: u64,
    /// Masked-model conditionals at `logits`, kept after accepted jumps.
    conditionals: Option<Matrix>,
}

impl ChainState {
    pub fn cached_conditionals(&self) -> Option<&Matrix> {
        self.conditionals.as_ref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Walk,
    Jump,
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveKind::Walk => "walk",
            MoveKind::Jump => "jump",
        })
    }
}

/// Audit record of one step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MoveRecord {
    pub step: u64,
    pub kind: MoveKind,
    pub proposed_energy: f64,
    pub log_acceptance: f64,
    pub accepted: bool,
    pub mask: Option<Vec<usize>>,
    pub forward_tokens: Option<Vec<usize>>,
    pub reference_tokens: Option<Vec<usize>>,
    /// The gradient vanished and the mask used `kappa / L` at every site.
    pub mask_fallback: bool,
    /// The proposal was non-finite and rejected outright.
    pub non_finite: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvaluationCounts {
    /// Energy-and-gradient evaluations.
    pub energy: u64,
    /// Forward passes of the masked model for jump proposals.
    pub conditionals: u64,
}

impl EvaluationCounts {
    pub fn total(&self) -> u64 {
        self.energy + self.conditionals
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KernelStats {
    pub proposed: u64,
    pub accepted: u64,
    pub rate: Option<f64>,
}

impl KernelStats {
    fn push(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
        self.rate = Some(self.accepted as f64 / self.proposed as f64);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSummary {
    pub steps: u64,
    pub walk: KernelStats,
    pub jump: KernelStats,
    pub walk_after_burn_in: KernelStats,
    pub jump_after_burn_in: KernelStats,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub min_energy: f64,
    pub min_energy_step: u64,
    pub min_state: Matrix,
    /// Mean and standard deviation of `E_0 .. E_T`.
    pub energy_mean: f64,
    pub energy_std: f64,
    pub final_eta: f64,
    pub evaluations: EvaluationCounts,
    pub non_finite_rejections: u64,
    pub mask_fallbacks: u64,
    pub snapshots: u64,
}

/// Walk–jump sampler bound to one energy and (for jumps) one masked model.
pub struct Sampler<'a> {
    config: SamplerConfig,
    energy: &'a dyn EnergyModel,
    model: Option<&'a MaskedSequenceModel>,
    eta: f64,
    counts: EvaluationCounts,
}

impl<'a> Sampler<'a> {
    pub fn new(
        config: SamplerConfig,
        energy: &'a dyn EnergyModel,
        model: Option<&'a MaskedSequenceModel>,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(m) = model {
            if m.dims() != energy.dims() {
                return Err(Error::DimensionMismatch {
                    component: "masked model".into(),
                    expected: energy.dims(),
                    found: m.dims(),
                });
            }
        } else if config.p_jump > 0.0 {
            return Err(param("p_jump", "jumps need a masked sequence model"));
        }
        let eta = config.eta;
        Ok(Self {
            config,
            energy,
            model,
            eta,
            counts: EvaluationCounts::default(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Current step size (changes only during burn-in when adapting).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn counts(&self) -> EvaluationCounts {
        self.counts
    }

    /// Evaluations a jump from `state` would spend.
    pub fn jump_cost(&self, state: &ChainState) -> u64 {
        if state.conditionals.is_some() {
            2
        } else {
            3
        }
    }

    pub fn init(&mut self, logits: Matrix) -> Result<ChainState> {
        validate_logits(&logits)?;
        logits.ensure_shape(self.energy.label(), self.energy.dims())?;
        let ev = self.energy.evaluate(&logits);
        self.counts.energy += 1;
        if !ev.energy.is_finite() || !ev.gradient.is_finite() {
            return Err(Error::InvalidInput(
                "initial state has non-finite energy or gradient".into(),
            ));
        }
        Ok(ChainState {
            logits,
            energy: ev.energy,
            gradient: ev.gradient,
            step: 0,
            conditionals: None,
        })
    }

    /// One mixture-kernel step. On rejection the state is left untouched apart
    /// from its step counter.
    pub fn step(&mut self, state: &mut ChainState, rng: &mut Rng) -> Result<MoveRecord> {
        let kind = if rng.uniform() < self.config.p_jump {
            MoveKind::Jump
        } else {
            MoveKind::Walk
        };
        self.step_kind(state, kind, rng)
    }

    /// One step of a fixed kernel.
    pub fn step_kind(&mut self, state: &mut ChainState, kind: MoveKind, rng: &mut Rng) -> Result<MoveRecord> {
        let record = match kind {
            MoveKind::Walk => self.walk(state, rng),
            MoveKind::Jump => self.jump(state, rng)?,
        };
        state.step += 1;
        Ok(record)
    }

    fn walk(&mut self, state: &mut ChainState, rng: &mut Rng) -> MoveRecord {
        let beta = self.config.beta;
        let proposal = walk_propose(&state.logits, &state.gradient, self.eta, beta, self.energy, rng);
        let mut record = MoveRecord {
            step: state.step,
            kind: MoveKind::Walk,
            proposed_energy: f64::NAN,
            log_acceptance: f64::NEG_INFINITY,
            accepted: false,
            mask: None,
            forward_tokens: None,
            reference_tokens: None,
            mask_fallback: false,
            non_finite: false,
        };
        if proposal.evaluation.is_some() {
            self.counts.energy += 1;
        }
        if proposal.is_finite() {
            let ev = proposal.evaluation.expect("finite proposal is evaluated");
            record.proposed_energy = ev.energy;
            record.log_acceptance = walk_log_acceptance(
                beta,
                state.energy,
                ev.energy,
                proposal.log_q_forward,
                proposal.log_q_reverse,
            );
            record.accepted = rng.uniform().ln() < record.log_acceptance;
            if record.accepted {
                state.logits = proposal.logits;
                state.energy = ev.energy;
                state.gradient = ev.gradient;
                state.conditionals = None;
            }
        } else {
            record.non_finite = true;
            if let Some(ev) = &proposal.evaluation {
                record.proposed_energy = ev.energy;
            }
        }
        if self.config.adapt_eta && state.step < self.config.burn_in {
            self.eta *= if record.accepted { 1.02 } else { 0.98 };
        }
        record
    }

    fn jump(&mut self, state: &mut ChainState, rng: &mut Rng) -> Result<MoveRecord> {
        let model = self
            .model
            .ok_or_else(|| param("p_jump", "jumps need a masked sequence model"))?;
        let tau = self.config.tau;
        let current_cond = match state.conditionals.take() {
            Some(c) => c,
            None => {
                self.counts.conditionals += 1;
                model.soft_conditionals(&state.logits, tau)?
            }
        };
        let draw = draw_jump(&state.gradient, &current_cond, &self.config, rng)?;
        let proposal = apply_swaps(&state.logits, &draw, self.config.gamma);
        let ev = self.energy.evaluate(&proposal);
        self.counts.energy += 1;
        let mut record = MoveRecord {
            step: state.step,
            kind: MoveKind::Jump,
            proposed_energy: ev.energy,
            log_acceptance: f64::NEG_INFINITY,
            accepted: false,
            mask: Some(draw.sites.clone()),
            forward_tokens: Some(draw.plus.clone()),
            reference_tokens: Some(draw.minus.clone()),
            mask_fallback: draw.mask_fallback,
            non_finite: false,
        };
        if !proposal.is_finite() || !ev.energy.is_finite() || !ev.gradient.is_finite() {
            record.non_finite = true;
            state.conditionals = Some(current_cond);
            return Ok(record);
        }
        self.counts.conditionals += 1;
        let proposed_cond = model.soft_conditionals(&proposal, tau)?;
        record.log_acceptance = jump_log_acceptance(
            &self.config,
            JumpEndpoint {
                energy: state.energy,
                gradient: &state.gradient,
                conditionals: &current_cond,
            },
            JumpEndpoint {
                energy: ev.energy,
                gradient: &ev.gradient,
                conditionals: &proposed_cond,
            },
            &draw,
        );
        record.accepted = rng.uniform().ln() < record.log_acceptance;
        if record.accepted {
            state.logits = proposal;
            state.energy = ev.energy;
            state.gradient = ev.gradient;
            state.conditionals = Some(proposed_cond);
        } else {
            state.conditionals = Some(current_cond);
        }
        Ok(record)
    }

    /// Runs `config.steps` steps from `initial`, streaming records and
    /// snapshots (every `config.stride` steps) to `sink`.
    pub fn run(&mut self, initial: Matrix, rng: &mut Rng, sink: &mut dyn ChainSink) -> Result<ChainSummary> {
        let result = self.run_inner(initial, rng, sink);
        let flushed = sink.finish();
        let summary = result?;
        flushed?;
        Ok(summary)
    }

    fn run_inner(&mut self, initial: Matrix, rng: &mut Rng, sink: &mut dyn ChainSink) -> Result<ChainSummary> {
        let mut state = self.init(initial)?;
        let mut stats = SummaryBuilder::new(&state);
        for _ in 0..self.config.steps {
            let record = self.step(&mut state, rng)?;
            stats.push(&record, &state, self.config.burn_in);
            sink.record(&record, &state)?;
            if state.step % self.config.stride == 0 {
                sink.snapshot(state.step, &state.logits)?;
                stats.snapshots += 1;
            }
            #[cfg(debug_assertions)]
            if state.step % 1000 == 0 {
                let fresh = self.energy.evaluate(&state.logits);
                debug_assert_eq!(fresh.energy.to_bits(), state.energy.to_bits());
            }
        }
        Ok(stats.finish(state, self.eta, self.counts))
    }
}

struct SummaryBuilder {
    walk: KernelStats,
    jump: KernelStats,
    walk_late: KernelStats,
    jump_late: KernelStats,
    initial_energy: f64,
    min_energy: f64,
    min_step: u64,
    min_state: Matrix,
    sum: f64,
    sum_sq: f64,
    count: u64,
    non_finite: u64,
    fallbacks: u64,
    snapshots: u64,
}

impl SummaryBuilder {
    fn new(state: &ChainState) -> Self {
        Self {
            walk: KernelStats::default(),
            jump: KernelStats::default(),
            walk_late: KernelStats::default(),
            jump_late: KernelStats::default(),
            initial_energy: state.energy,
            min_energy: state.energy,
            min_step: 0,
            min_state: state.logits.clone(),
            sum: state.energy,
            sum_sq: state.energy * state.energy,
            count: 1,
            non_finite: 0,
            fallbacks: 0,
            snapshots: 0,
        }
    }

    fn push(&mut self, record: &MoveRecord, state: &ChainState, burn_in: u64) {
        let late = record.step >= burn_in;
        match record.kind {
            MoveKind::Walk => {
                self.walk.push(record.accepted);
                if late {
                    self.walk_late.push(record.accepted);
                }
            }
            MoveKind::Jump => {
                self.jump.push(record.accepted);
                if late {
                    self.jump_late.push(record.accepted);
                }
            }
        }
        self.non_finite += record.non_finite as u64;
        self.fallbacks += record.mask_fallback as u64;
        if state.energy < self.min_energy {
            self.min_energy = state.energy;
            self.min_step = state.step;
            self.min_state = state.logits.clone();
        }
        self.sum += state.energy;
        self.sum_sq += state.energy * state.energy;
        self.count += 1;
    }

    fn finish(self, state: ChainState, eta: f64, evaluations: EvaluationCounts) -> ChainSummary {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        ChainSummary {
            steps: state.step,
            walk: self.walk,
            jump: self.jump,
            walk_after_burn_in: self.walk_late,
            jump_after_burn_in: self.jump_late,
            initial_energy: self.initial_energy,
            final_energy: state.energy,
            min_energy: self.min_energy,
            min_energy_step: self.min_step,
            min_state: self.min_state,
            energy_mean: mean,
            energy_std: var.sqrt(),
            final_eta: eta,
            evaluations,
            non_finite_rejections: self.non_finite,
            mask_fallbacks: self.fallbacks,
            snapshots: self.snapshots,
        }
    }
}
