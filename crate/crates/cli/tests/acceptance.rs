//! Acceptance suite: one PASS/FAIL line per criterion. Every criterion also
//! returns a textual report of its measured values; the determinism
//! criterion reruns the others and compares those reports byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rss_cli::{cmd_validate, Invocation};
use rss_core::campaign::{run_campaign, CampaignConfig, Method};
use rss_core::energy::{planted_landscape, Contact, PlantedSpec};
use rss_core::numeric::{argmax_decode, finite_diff_gradient, js_divergence, row_marginals, DEFAULT_FD_STEP};
use rss_core::sampler::{ess_and_autocorr, walk_propose, ChainSink, ChainState, JumpDraw, MoveRecord};
use rss_core::verify::{
    blur_marginals, enumerate_jump_flow, exact_mixture_reference, expected_log_mismatch, gradient_check,
    mixture_consistency, monte_carlo_mixture_reference, onehot_fidelity, walk_log_flows, BLUR_FRACTION,
};
use rss_core::{
    CompositeEnergy, EnergyModel, GaussianEnergy, MaskMode, MaskedSequenceModel, Matrix, PairwiseContactEnergy, Rng,
    Sampler, SamplerConfig, SoftPlmEnergy, TargetProfileEnergy,
};

struct Outcome {
    pass: bool,
    detail: String,
    report: String,
}

fn outcome(pass: bool, detail: String, report: String) -> Outcome {
    Outcome { pass, detail, report }
}

fn random_pairwise(l: usize, k: usize, rng: &mut Rng) -> PairwiseContactEnergy {
    let fields = Matrix::from_fn(l, k, |_, _| rng.normal());
    let mut contacts = Vec::new();
    for i in 0..l {
        for j in i + 1..l {
            if (i + j) % 2 == 1 || j == i + 1 {
                contacts.push(Contact {
                    i,
                    j,
                    coupling: Matrix::from_fn(k, k, |_, _| 0.7 * rng.normal()),
                });
            }
        }
    }
    PairwiseContactEnergy::new(fields, contacts).unwrap()
}

fn random_logits(l: usize, k: usize, scale: f64, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(l, k, |_, _| scale * rng.normal())
}

fn criterion_1() -> Outcome {
    let (l, k) = (6, 5);
    let mut rng = Rng::seed_from(101);
    let targets = row_marginals(&random_logits(l, k, 1.0, &mut rng)).unwrap();
    let model = Arc::new(MaskedSequenceModel::random(l, k, 8, &mut rng).unwrap());
    let energies: Vec<(&str, Box<dyn EnergyModel>)> = vec![
        ("target_profile", Box::new(TargetProfileEnergy::new(targets).unwrap())),
        ("pairwise_contact", Box::new(random_pairwise(l, k, &mut rng))),
        (
            "gaussian",
            Box::new(GaussianEnergy::new(random_logits(l, k, 1.0, &mut rng), 0.7).unwrap()),
        ),
        ("soft_plm", Box::new(SoftPlmEnergy::new(model.clone(), 0.8).unwrap())),
        (
            "composite",
            Box::new(
                CompositeEnergy::new(
                    Box::new(random_pairwise(l, k, &mut rng)),
                    Box::new(SoftPlmEnergy::new(model, 1.0).unwrap()),
                    0.3,
                )
                .unwrap(),
            ),
        ),
    ];
    let points: Vec<Matrix> = (0..100).map(|_| random_logits(l, k, 1.5, &mut rng)).collect();
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut report = String::new();
    for (name, e) in &energies {
        let err = gradient_check(e.as_ref(), &points, DEFAULT_FD_STEP, 1e-8).unwrap();
        let abs = points
            .iter()
            .map(|x| {
                let fd = finite_diff_gradient(|y| e.value(y), x, DEFAULT_FD_STEP).unwrap();
                let g = e.evaluate(x).gradient;
                g.squared_distance(&fd).sqrt()
            })
            .fold(0.0, f64::max);
        writeln!(report, "{name} {err:e} {abs:e}").unwrap();
        worst = worst.max(err);
        worst_abs = worst_abs.max(abs);
    }
    outcome(
        worst < 1e-5,
        format!(
            "max relative gradient error {worst:.2e} (< 1e-5, entries within the 1e-8 absolute floor count as exact; largest gradient-vector error {worst_abs:.1e}) over 5 energies x 100 points"
        ),
        report,
    )
}

fn criterion_2() -> Outcome {
    let (l, k) = (4, 5);
    let mut rng = Rng::seed_from(202);
    let energy = GaussianEnergy::new(random_logits(l, k, 1.0, &mut rng), 1.3).unwrap();
    let (beta, eta) = (1.0, 0.4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = random_logits(l, k, 2.0, &mut rng);
        let g = energy.evaluate(&x).gradient;
        let y = walk_propose(&x, &g, eta, beta, &energy, &mut rng).logits;
        worst = worst.max(walk_log_flows(&energy, beta, eta, &x, &y).unwrap().mismatch());
    }
    outcome(
        worst < 1e-10,
        format!("max |log forward - log reverse| = {worst:.2e} over 1000 pairs (< 1e-10)"),
        format!("{worst:e}\n"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = Rng::seed_from(303);
    let mut worst_exact: f64 = 0.0;
    let mut worst_paper: f64 = 0.0;
    let mut unreachable = 0;
    for n in 0..50 {
        let l = 3 + n % 2;
        let k = 3 + (n / 2) % 2;
        let model = Arc::new(MaskedSequenceModel::random(l, k, 4, &mut rng).unwrap());
        let energy = CompositeEnergy::new(
            Box::new(random_pairwise(l, k, &mut rng)),
            Box::new(SoftPlmEnergy::new(model.clone(), 1.0).unwrap()),
            0.5,
        )
        .unwrap();
        let mut exact = SamplerConfig::new(0.5 + rng.uniform());
        exact.s_max = 2;
        exact.kappa = 0.3 + 0.7 * rng.uniform();
        exact.gamma = 0.5 + rng.uniform();
        let mut paper = exact.clone();
        paper.mask_mode = MaskMode::Paper;
        let x = random_logits(l, k, 1.0, &mut rng);
        let size = 1 + rng.index(2);
        let mut sites = rng.distinct(l, size);
        sites.sort_unstable();
        let plus: Vec<usize> = sites.iter().map(|_| rng.index(k)).collect();
        let minus: Vec<usize> = plus.iter().map(|&p| (p + 1 + rng.index(k - 1)) % k).collect();
        let draw = JumpDraw {
            sites,
            plus,
            minus,
            mask_fallback: false,
        };
        let y = rss_core::sampler::apply_swaps(&x, &draw, exact.gamma);
        let fe = enumerate_jump_flow(&energy, &model, &exact, &x, &y).unwrap();
        let fp = enumerate_jump_flow(&energy, &model, &paper, &x, &y).unwrap();
        if !fe.reachable || !fp.reachable {
            unreachable += 1;
            continue;
        }
        worst_exact = worst_exact.max(fe.relative_mismatch());
        worst_paper = worst_paper.max((fp.log_mismatch() - expected_log_mismatch(&fp, MaskMode::Paper)).abs());
    }
    outcome(
        worst_exact < 1e-10 && worst_paper < 1e-10 && unreachable == 0,
        format!(
            "exact mode max relative flow mismatch {worst_exact:.2e}; paper mode max deviation from log Z(l) - log Z(l') {worst_paper:.2e} (both < 1e-10, 50 pairs)"
        ),
        format!("{worst_exact:e} {worst_paper:e} {unreachable}\n"),
    )
}

/// Running sums of post-burn-in logits.
struct Moments {
    burn_in: u64,
    count: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl ChainSink for Moments {
    fn record(&mut self, record: &MoveRecord, state: &ChainState) -> rss_core::Result<()> {
        if record.step >= self.burn_in {
            self.count += 1;
            for (n, &v) in state.logits.as_slice().iter().enumerate() {
                self.sum[n] += v;
                self.sum_sq[n] += v * v;
            }
        }
        Ok(())
    }

    fn snapshot(&mut self, _: u64, _: &Matrix) -> rss_core::Result<()> {
        Ok(())
    }
}

fn criterion_4() -> Outcome {
    let (l, k) = (4, 5);
    let mut rng = Rng::seed_from(404);
    let center = random_logits(l, k, 1.0, &mut rng);
    let scale = 1.0;
    let energy = GaussianEnergy::new(center.clone(), scale).unwrap();
    let mut config = SamplerConfig::new(1.0);
    config.p_jump = 0.0;
    config.burn_in = 5_000;
    config.steps = config.burn_in + 100_000;
    config.stride = 1_000;
    let mut sink = Moments {
        burn_in: config.burn_in,
        count: 0,
        sum: vec![0.0; l * k],
        sum_sq: vec![0.0; l * k],
    };
    let mut sampler = Sampler::new(config, &energy, None).unwrap();
    let summary = sampler.run(Matrix::zeros(l, k), &mut rng, &mut sink).unwrap();
    let n = sink.count as f64;
    let mut worst_mean: f64 = 0.0;
    let mut worst_var: f64 = 0.0;
    for idx in 0..l * k {
        let m = sink.sum[idx] / n;
        let v = sink.sum_sq[idx] / n - m * m;
        worst_mean = worst_mean.max((m - center.as_slice()[idx]).abs());
        worst_var = worst_var.max((v / (scale * scale) - 1.0).abs());
    }
    let acc = summary.walk_after_burn_in.rate.unwrap_or(0.0);
    outcome(
        worst_mean < 0.05 && worst_var < 0.05 && (0.40..=0.60).contains(&acc),
        format!(
            "max mean error {worst_mean:.4} (< 0.05), max relative variance error {worst_var:.4} (< 0.05), walk acceptance {acc:.3} (in [0.40, 0.60]), eta {:.4}",
            summary.final_eta
        ),
        format!("{worst_mean:e} {worst_var:e} {acc:e} {:e}\n", summary.final_eta),
    )
}

/// Basin label of every thinned post-burn-in state.
struct Basins<'a> {
    landscape: &'a rss_core::energy::PlantedLandscape,
    radius: usize,
    burn_in: u64,
    labels: Vec<usize>,
}

impl ChainSink for Basins<'_> {
    fn record(&mut self, _: &MoveRecord, _: &ChainState) -> rss_core::Result<()> {
        Ok(())
    }

    fn snapshot(&mut self, step: u64, logits: &Matrix) -> rss_core::Result<()> {
        if step > self.burn_in {
            let x = argmax_decode(logits)?;
            let m = self.landscape.nearest_mode(&x, self.radius);
            self.labels.push(m.unwrap_or(self.landscape.planted.len()));
        }
        Ok(())
    }
}

fn criterion_5() -> Outcome {
    let spec = PlantedSpec::new(6, 4, 3, 2.0);
    let landscape = planted_landscape(&spec, &mut Rng::seed_from(505)).unwrap();
    let model = MaskedSequenceModel::random(6, 4, 8, &mut Rng::seed_from(506)).unwrap();
    let trap = GaussianEnergy::new(Matrix::zeros(6, 4), 2.0).unwrap();
    let energy = CompositeEnergy::new(Box::new(landscape.energy.clone()), Box::new(trap), 1.0).unwrap();
    let categories = landscape.planted.len() + 1;
    let radius = spec.length / 4;
    let run = |p_jump: f64, seed: u64| {
        let mut config = SamplerConfig::new(2.0);
        config.p_jump = p_jump;
        config.eta = 0.1;
        config.burn_in = 2_000;
        config.steps = 100_000 + config.burn_in;
        config.stride = 10;
        config.mask_mode = MaskMode::Exact;
        let mut sink = Basins {
            landscape: &landscape,
            radius,
            burn_in: config.burn_in,
            labels: Vec::new(),
        };
        let model_ref = (p_jump > 0.0).then_some(&model);
        let mut sampler = Sampler::new(config, &energy, model_ref).unwrap();
        let summary = sampler
            .run(Matrix::zeros(6, 4), &mut Rng::seed_from(seed), &mut sink)
            .unwrap();
        (sink.labels, summary)
    };
    let (walk, _) = run(0.0, 507);
    let (mixed, mixed_summary) = run(0.2, 508);
    let stats = |labels: &[usize], c: usize| {
        let ind: Vec<f64> = labels.iter().map(|&b| (b == c) as u8 as f64).collect();
        let p = ind.iter().sum::<f64>() / ind.len() as f64;
        let ess = ess_and_autocorr(&ind).ess.max(1.0);
        (p, p * (1.0 - p) / ess)
    };
    let mut worst_z: f64 = 0.0;
    let mut report = String::new();
    for c in 0..categories {
        let (pa, va) = stats(&walk, c);
        let (pb, vb) = stats(&mixed, c);
        let sd = (va + vb).sqrt();
        let z = if sd > 0.0 {
            (pa - pb).abs() / sd
        } else if pa == pb {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
        writeln!(report, "{c} {pa:e} {pb:e} {z:e}").unwrap();
    }
    outcome(
        worst_z <= 3.0,
        format!(
            "basin occupancy walk vs walk-jump: max |z| {worst_z:.2} over {categories} basins (<= 3), jump acceptance {:.3}",
            mixed_summary.jump.rate.unwrap_or(0.0)
        ),
        report,
    )
}

fn criterion_6() -> Outcome {
    let model = MaskedSequenceModel::random(32, 20, 16, &mut Rng::seed_from(606)).unwrap();
    let seqs = rss_core::verify::evaluation_sequences(32, 20, 20, 607);
    let fid = onehot_fidelity(&model, &seqs, 4, 1.0, 608).unwrap();
    let rows = mixture_consistency(&model, &seqs, &[0.0], 8, 1.0, 609).unwrap();
    let js = rows[0].mean_js;
    let top1 = rows[0].top1_agreement;
    outcome(
        fid.mean_kl.abs() < 1e-12 && js.abs() < 1e-12 && top1 == 1.0,
        format!(
            "one-hot KL {:.1e}, JS at eps=0 {js:.1e} (< 1e-12), top-1 agreement {top1}",
            fid.mean_kl
        ),
        format!("{:e} {js:e} {top1:e}\n", fid.mean_kl),
    )
}

fn criterion_7() -> Outcome {
    let (l, k) = (5, 4);
    let model = MaskedSequenceModel::random(l, k, 8, &mut Rng::seed_from(707)).unwrap();
    let mut rng = Rng::seed_from(708);
    let blurred_count = (BLUR_FRACTION * l as f64).round() as usize;
    let samples = 10_000;
    let mut worst_ratio: f64 = 0.0;
    let mut js_finite = true;
    let mut report = String::new();
    for _ in 0..5 {
        let x: Vec<usize> = (0..l).map(|_| rng.index(k)).collect();
        let mut blurred = rng.distinct(l, blurred_count);
        blurred.sort_unstable();
        for eps in [0.2, 0.4, 0.6, 0.8] {
            let q = blur_marginals(&x, &blurred, eps, k).unwrap();
            let soft = model.conditionals_from_marginals(&q, 1.0).unwrap();
            let exact = exact_mixture_reference(&model, &x, &blurred, eps, 1.0).unwrap();
            let mc = monte_carlo_mixture_reference(&model, &x, &blurred, eps, samples, 1.0, &mut rng).unwrap();
            let js: f64 = (0..l)
                .map(|i| js_divergence(soft.row(i), exact.mean.row(i)).unwrap())
                .sum::<f64>()
                / l as f64;
            js_finite &= js.is_finite();
            // Standard error of the Monte Carlo estimate, as a norm over entries.
            let sigma = (exact.variance.as_slice().iter().sum::<f64>() / samples as f64).sqrt();
            let err = mc.squared_distance(&exact.mean).sqrt();
            let ratio = if sigma > 0.0 {
                err / sigma
            } else if err == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_ratio = worst_ratio.max(ratio);
            writeln!(report, "{eps} {js:e} {err:e} {sigma:e}").unwrap();
        }
    }
    outcome(
        js_finite && worst_ratio <= 3.0,
        format!("soft-vs-exact JS finite: {js_finite}; Monte Carlo error at most {worst_ratio:.2} sigma (<= 3) over 20 cases, Kmc = 10^4"),
        report,
    )
}

const VALIDATE_CONFIG: &str = r#"
seed = 808

[model]
length = 32
vocab = 20
hidden = 16

[validation]
sequences = 100
tau = 1.0
fidelity_sites = 4
epsilons = [0.0, 0.2, 0.4, 0.6, 0.8]
kmc = 8
libraries = 20
library_sites = 3
kvariants = 256
"#;

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("validate.toml");
    fs::write(&config, VALIDATE_CONFIG).unwrap();
    let out = dir.path().join("out");
    cmd_validate(&Invocation {
        config,
        out: Some(out.clone()),
        seed: None,
        force: false,
    })
    .unwrap();
    let text = fs::read_to_string(out.join("validation.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut missing = Vec::new();
    let mut keys = vec![
        "onehot_fidelity.mean_kl".to_string(),
        "onehot_fidelity.grad_swap_spearman_mean".to_string(),
        "onehot_fidelity.grad_swap_spearman_median".to_string(),
        "library_ranking.spearman_mean".to_string(),
        "library_ranking.spearman_best".to_string(),
    ];
    for eps in ["0.0", "0.2", "0.4", "0.6", "0.8"] {
        keys.push(format!("mixture_consistency.eps={eps}.mean_js"));
        keys.push(format!("mixture_consistency.eps={eps}.top1_agreement"));
    }
    for key in &keys {
        if json.get(key).and_then(|m| m.get("value")).is_none() {
            missing.push(key.clone());
        }
    }
    let mix = &json["mixture_consistency.eps=0.4.mean_js"]["config"];
    let lib = &json["library_ranking.spearman_mean"]["config"];
    let constants = mix["blur_fraction"] == 0.3
        && mix["epsilons"] == serde_json::json!([0.0, 0.2, 0.4, 0.6, 0.8])
        && lib["options_per_site"] == 3
        && lib["kvariants"] == 256;
    outcome(
        missing.is_empty() && constants,
        format!(
            "{} metric families present, missing {:?}; protocol constants echoed: {constants}",
            keys.len() - missing.len(),
            missing
        ),
        text,
    )
}

/// Frozen medians `(rss designable, rss clusters, rso designable, rso
/// clusters)` from the first verified run of this configuration.
const FROZEN_MEDIANS: (f64, f64, f64, f64) = (123.0, 61.5, 6.0, 2.0);

fn criterion_9() -> Outcome {
    let mut sampler = SamplerConfig::new(4.0);
    sampler.eta = 0.05;
    sampler.p_jump = 0.2;
    sampler.stride = 20;
    sampler.burn_in = 500;
    let mut config = CampaignConfig::new(PlantedSpec::new(8, 5, 5, 4.0), sampler);
    config.seeds = 20;
    config.budget = 4000;
    config.hidden = 8;
    let (report, _) = run_campaign(&config, 1).unwrap();
    let rss = report.method(Method::Rss).unwrap();
    let rso = report.method(Method::Rso).unwrap();
    let measured = (
        rss.median_designable,
        rss.median_clusters,
        rso.median_designable,
        rso.median_clusters,
    );
    let ordered = rss.median_designable >= rso.median_designable && rss.median_clusters >= rso.median_clusters;
    outcome(
        report.compute_parity && ordered && measured == FROZEN_MEDIANS,
        format!(
            "median designable rss {} vs rso {}, median clusters rss {} vs rso {}, parity {} ({} evaluations each), frozen values match: {}",
            measured.0,
            measured.2,
            measured.1,
            measured.3,
            report.compute_parity,
            rss.evaluations,
            measured == FROZEN_MEDIANS
        ),
        report.to_json(),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    ("gradient correctness", criterion_1),
    ("walk detailed balance", criterion_2),
    ("jump detailed balance", criterion_3),
    ("MALA sampling correctness", criterion_4),
    ("mixture stationarity consistency", criterion_5),
    ("soft-model one-hot fidelity", criterion_6),
    ("mixture consistency oracle", criterion_7),
    ("validation suite shape", criterion_8),
    ("mode-discovery benchmark", criterion_9),
];

fn main() -> ExitCode {
    // Keep `cargo test -- <filter>` and `--list` usable: this target has no
    // named tests to filter, so it only runs when unfiltered.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return ExitCode::SUCCESS;
        }
    }
    let mut failed = 0;
    let mut first_reports = Vec::new();
    for (n, (name, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        println!(
            "criterion {}: {} {name}: {} [{:.1}s]",
            n + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
        first_reports.push(o.report);
    }
    let start = Instant::now();
    let differing: Vec<usize> = CRITERIA
        .iter()
        .zip(&first_reports)
        .enumerate()
        .filter(|(_, ((_, run), first))| run().report != **first)
        .map(|(n, _)| n + 1)
        .collect();
    println!(
        "criterion 10: {} determinism: reports of criteria 1-9 byte-identical on rerun (differing: {:?}) [{:.1}s]",
        if differing.is_empty() { "PASS" } else { "FAIL" },
        differing,
        start.elapsed().as_secs_f64()
    );
    failed += usize::from(!differing.is_empty());
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
