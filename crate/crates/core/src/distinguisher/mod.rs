//! The distinguisher: feed oracle examples to a learner, clip its hypothesis to
//! `[0, b̂]`, score it on fresh examples, and compare the loss with a threshold.
//!
//! The distinguisher never sees the challenge secret. It builds a public
//! template target (secret fixed to zeros, DNF biases at their worst case),
//! perturbs it, and hands the oracle only the interval branch, which does not
//! depend on the secret. A secret-holding learner that perturbs the true target
//! with the same noise stream recovers the full perturbed network.

mod learners;

pub use learners::{
    build_learner, ConstantLearner, NetworkHypothesis, OracleLearner, RandomFeaturesLearner,
};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OmegaPolicy, TauPolicy, ThresholdPolicy};
use crate::encoding::BitVector;
use crate::error::{invalid, Error, Result};
use crate::network::{
    assemble_depth2_target, assemble_depth3_target, n3_branch_network, target_regime, ReluNetwork,
    GROUP_DNF,
};
use crate::oracle::{
    estimate_hyperedge_prob, prob_good_input, CaseTag, LabeledExample, OracleMode, OracleState,
    PaddingMode,
};
use crate::prg::{sample_challenge, ChallengeKind, ChallengeSequence, Predicate};
use crate::rng::SeedStream;
use crate::smoothing::{perturb_network, smoothing_for_target};
use crate::stats::CompensatedSum;

/// Largest output change tolerated from dropping the padding coordinates.
pub const LAZY_PADDING_TOLERANCE: f64 = 1e-4;

const HOLDOUT_CHUNK: usize = 256;

pub trait Hypothesis {
    fn predict(&self, input: &[f64]) -> f64;

    /// `inputs` holds `batch` rows of `width` values.
    fn predict_batch(&self, inputs: &[f64], batch: usize, width: usize) -> Result<Vec<f64>> {
        if inputs.len() != batch * width {
            return Err(Error::DimensionMismatch {
                expected: batch * width,
                actual: inputs.len(),
            });
        }
        Ok(inputs
            .chunks(width.max(1))
            .take(batch)
            .map(|row| self.predict(row))
            .collect())
    }
}

/// Public information a learner may use besides its examples.
#[derive(Clone, Debug)]
pub struct LearnerContext {
    pub n: usize,
    pub k: usize,
    pub mode: OracleMode,
    pub predicate: Predicate,
    /// Full input dimension `n²`.
    pub input_dim: usize,
    /// Length of the example inputs actually delivered.
    pub width: usize,
    pub padding: PaddingMode,
    pub b_hat: f64,
    pub tau: f64,
    pub omega: f64,
    /// Stream the distinguisher used for the parameter noise.
    pub noise_stream: SeedStream,
}

impl LearnerContext {
    /// Perturbs `net` with the same parameter noise the distinguisher applied to its template.
    pub fn perturb_like_template(&self, net: &ReluNetwork) -> ReluNetwork {
        perturb_network(net, self.tau, &mut self.noise_stream.rng("params", 0)).0
    }
}

pub trait Learner {
    fn name(&self) -> String;

    fn sample_budget(&self) -> usize;

    fn requires_secret(&self) -> bool {
        false
    }

    /// Whether predictions ignore the padding coordinates, so examples may omit them.
    fn padding_independent(&self) -> bool {
        false
    }

    fn train(
        &self,
        examples: &[LabeledExample],
        ctx: &LearnerContext,
        seeds: &SeedStream,
    ) -> Result<Box<dyn Hypothesis>>;
}

/// `max{0, min{b̂, h(z)}}`.
pub struct ClippedHypothesis {
    inner: Box<dyn Hypothesis>,
    b_hat: f64,
}

impl Hypothesis for ClippedHypothesis {
    fn predict(&self, input: &[f64]) -> f64 {
        clip(self.inner.predict(input), self.b_hat)
    }

    fn predict_batch(&self, inputs: &[f64], batch: usize, width: usize) -> Result<Vec<f64>> {
        let mut out = self.inner.predict_batch(inputs, batch, width)?;
        out.iter_mut().for_each(|v| *v = clip(*v, self.b_hat));
        Ok(out)
    }
}

fn clip(v: f64, b_hat: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, b_hat)
    }
}

pub fn clip_hypothesis(h: Box<dyn Hypothesis>, b_hat: f64) -> Result<ClippedHypothesis> {
    if b_hat.is_nan() || b_hat < 0.0 {
        return Err(invalid(format!("clipping ceiling {b_hat} is negative")));
    }
    Ok(ClippedHypothesis { inner: h, b_hat })
}

/// Mean squared error over `holdout`, with compensated summation.
pub fn holdout_loss(h: &dyn Hypothesis, holdout: &[LabeledExample]) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyHoldout);
    }
    let mut acc = CompensatedSum::default();
    for ex in holdout {
        let d = h.predict(&ex.input) - ex.label;
        acc.add(d * d);
    }
    Ok(acc.value() / holdout.len() as f64)
}

/// Public template target: secret fixed to zeros and every DNF bias set to its
/// worst case `2 − 3kn`, so noise magnitudes derived from it hold for every secret.
/// The layout does not depend on the secret, so a perturbation drawn for the
/// template lines up with the true target position by position.
pub fn public_template(p: &Predicate, n: usize, mode: OracleMode) -> Result<ReluNetwork> {
    let zeros = BitVector::zeros(n);
    let mut net = match mode {
        OracleMode::Theorem1 => assemble_depth3_target(p, &zeros, n)?,
        OracleMode::Theorem2 => assemble_depth2_target(p, &zeros, n)?,
    };
    let g = net.group(GROUP_DNF)?.clone();
    let worst = 2.0 - 3.0 * (p.k() * n) as f64;
    for r in g.range() {
        net.layers_mut()[g.layer].set_bias(r, worst);
    }
    Ok(net)
}

/// `(τ, ω)` for a configuration, from the template's budgets or explicit values.
pub fn noise_levels(template: &ReluNetwork, cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let sm = smoothing_for_target(template)?;
    let tau = match cfg.tau_policy {
        TauPolicy::PaperFormula => sm.tau,
        TauPolicy::Explicit(t) => t,
    };
    let omega = match (cfg.mode, cfg.omega_policy) {
        (OracleMode::Theorem1, _) => 0.0,
        (OracleMode::Theorem2, OmegaPolicy::PaperFormula) => sm.omega,
        (OracleMode::Theorem2, OmegaPolicy::Explicit(w)) => w,
    };
    Ok((tau, omega))
}

/// Bound on the output change when the first layer ignores coordinates
/// `prefix..input_dim` whose joint norm is at most `pad_radius`. Each later
/// layer multiplies by its fan-in times its largest parameter magnitude.
pub fn lazy_padding_certificate(net: &ReluNetwork, prefix: usize, pad_radius: f64) -> f64 {
    let first = &net.layers()[0];
    let row_norm = (0..first.rows())
        .map(|r| {
            first.row(r)[prefix.min(first.cols())..]
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    net.layers()[1..]
        .iter()
        .fold(row_norm * pad_radius, |delta, l| {
            delta * l.max_abs() * l.cols() as f64
        })
}

/// Probability that an oracle example reaches a challenge label in the clean case.
pub fn good_probability(mode: OracleMode, n: usize, k: usize) -> Result<f64> {
    match mode {
        OracleMode::Theorem1 => prob_good_input(n, k),
        OracleMode::Theorem2 => Ok(estimate_hyperedge_prob(n, k)?.closed_form),
    }
}

/// `p·b̂²/2`: on a random challenge the secret-holding learner disagrees with
/// half of the clean labels, each costing `b̂²`.
pub fn expected_random_loss(p: f64, b_hat: f64) -> f64 {
    p * b_hat * b_hat / 2.0
}

/// Threshold value and the regime flags it raises.
pub fn select_threshold(policy: ThresholdPolicy, n: usize, random_loss: f64) -> (f64, Vec<String>) {
    let two_over_n = 2.0 / n as f64;
    let midpoint = random_loss / 2.0;
    match policy {
        ThresholdPolicy::Paper => {
            let mut flags = Vec::new();
            if two_over_n >= random_loss {
                flags.push(format!("threshold 2/n = {two_over_n:.6} is not below expected random loss {random_loss:.6}"));
            }
            (two_over_n, flags)
        }
        ThresholdPolicy::Midpoint => (midpoint, vec!["non-paper regime: midpoint threshold".into()]),
        ThresholdPolicy::Auto if two_over_n < random_loss => (two_over_n, Vec::new()),
        ThresholdPolicy::Auto => (
            midpoint,
            vec![format!(
                "non-paper regime: 2/n = {two_over_n:.6} is not below expected random loss {random_loss:.6}, using midpoint"
            )],
        ),
        ThresholdPolicy::Explicit(t) => (t, vec!["non-paper regime: explicit threshold".into()]),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseStats {
    pub count: usize,
    /// This case's share of the holdout loss; shares sum to `loss`.
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kind: Option<ChallengeKind>,
    /// 1 for pseudorandom, 0 for random.
    pub verdict: u8,
    pub loss: f64,
    pub threshold: f64,
    pub holdout_size: usize,
    pub training_size: usize,
    pub learner: String,
    pub b_hat: f64,
    pub tau: f64,
    pub omega: f64,
    pub good_probability: f64,
    pub expected_random_loss: f64,
    pub padding: PaddingMode,
    pub padding_certificate: Option<f64>,
    pub challenge_edges_used: usize,
    pub case_breakdown: BTreeMap<String, CaseStats>,
    pub regime_flags: Vec<String>,
}

impl Decision {
    pub fn regime_ok(&self) -> bool {
        self.regime_flags.is_empty()
    }
}

/// `1` iff the loss is at most the threshold.
pub fn verdict(loss: f64, threshold: f64) -> u8 {
    u8::from(loss <= threshold)
}

/// Runs the distinguisher on a challenge. `seeds` supplies the noise, oracle and learner streams.
pub fn run_distinguisher(
    challenge: &ChallengeSequence,
    learner: &dyn Learner,
    cfg: &ExperimentConfig,
    seeds: &SeedStream,
) -> Result<Decision> {
    cfg.validate()?;
    let (n, k) = (challenge.n(), challenge.k());
    if n != cfg.n || k != cfg.k {
        return Err(invalid(format!(
            "challenge has n = {n}, k = {k}; config has n = {}, k = {}",
            cfg.n, cfg.k
        )));
    }
    let p = cfg.predicate()?;
    let holdout_size = cfg.holdout_size();
    let training_size = learner.sample_budget();
    if challenge.m() < training_size + holdout_size {
        return Err(invalid(format!(
            "challenge has {} edges, the run may need {}",
            challenge.m(),
            training_size + holdout_size
        )));
    }

    let template = public_template(&p, n, cfg.mode)?;
    let mut flags = target_regime(&template)?.flags;
    let (tau, omega) = noise_levels(&template, cfg)?;
    let noise_stream = seeds.child("noise", 0);
    let perturbed = perturb_network(&template, tau, &mut noise_stream.rng("params", 0)).0;
    let b_hat = perturbed.output_bias();

    let d = n * n;
    let (padding, padding_certificate) = match cfg.padding {
        PaddingMode::Dense => (PaddingMode::Dense, None),
        PaddingMode::Lazy if !learner.padding_independent() => {
            flags.push("lazy padding requested but the learner reads padding; using dense".into());
            (PaddingMode::Dense, None)
        }
        PaddingMode::Lazy => {
            let cert = lazy_padding_certificate(&perturbed, k * n, 2.0 * n as f64);
            if cert <= LAZY_PADDING_TOLERANCE {
                (PaddingMode::Lazy, Some(cert))
            } else {
                flags.push(format!("lazy padding certificate {cert:e} exceeds {LAZY_PADDING_TOLERANCE:e}; using dense"));
                (PaddingMode::Dense, Some(cert))
            }
        }
    };
    let width = if padding == PaddingMode::Lazy {
        k * n
    } else {
        d
    };

    let public = challenge.public();
    let mut oracle = match cfg.mode {
        OracleMode::Theorem1 => {
            OracleState::theorem1(public, n3_branch_network(&perturbed)?, padding)?
        }
        OracleMode::Theorem2 => OracleState::theorem2(public, b_hat, omega, padding)?,
    };
    let mut oracle_rng = seeds.rng("oracle", 0);
    let train: Vec<LabeledExample> = (0..training_size)
        .map(|_| oracle.next_example(&mut oracle_rng))
        .collect::<Result<_>>()?;

    let ctx = LearnerContext {
        n,
        k,
        mode: cfg.mode,
        predicate: p,
        input_dim: d,
        width,
        padding,
        b_hat,
        tau,
        omega,
        noise_stream,
    };
    let h = clip_hypothesis(
        learner.train(&train, &ctx, &seeds.child("learner", 0))?,
        b_hat,
    )?;
    drop(train);

    let mut total = CompensatedSum::default();
    let mut per_case: BTreeMap<CaseTag, (usize, CompensatedSum)> = BTreeMap::new();
    let mut remaining = holdout_size;
    let mut inputs = Vec::with_capacity(HOLDOUT_CHUNK * width);
    let mut labels = Vec::with_capacity(HOLDOUT_CHUNK);
    while remaining > 0 {
        let batch = remaining.min(HOLDOUT_CHUNK);
        inputs.clear();
        labels.clear();
        for _ in 0..batch {
            let ex = oracle.next_example(&mut oracle_rng)?;
            inputs.extend_from_slice(&ex.input);
            labels.push((ex.label, ex.case_tag));
        }
        let preds = h.predict_batch(&inputs, batch, width)?;
        for (pred, (label, tag)) in preds.iter().zip(&labels) {
            let e = (pred - label) * (pred - label);
            total.add(e);
            let entry = per_case.entry(*tag).or_default();
            entry.0 += 1;
            entry.1.add(e);
        }
        remaining -= batch;
    }
    let loss = total.value() / holdout_size as f64;

    let good = good_probability(cfg.mode, n, k)?;
    let random_loss = expected_random_loss(good, b_hat);
    let (threshold, threshold_flags) = select_threshold(cfg.threshold_policy, n, random_loss);
    flags.extend(threshold_flags);
    if holdout_size < n.saturating_pow(3) {
        flags.push(format!("holdout capped at {holdout_size} below n^3"));
    }
    let case_breakdown = per_case
        .into_iter()
        .map(|(tag, (count, sum))| {
            (
                tag.to_string(),
                CaseStats {
                    count,
                    loss: sum.value() / holdout_size as f64,
                },
            )
        })
        .collect();

    Ok(Decision {
        trial: None,
        kind: None,
        verdict: verdict(loss, threshold),
        loss,
        threshold,
        holdout_size,
        training_size,
        learner: learner.name(),
        b_hat,
        tau,
        omega,
        good_probability: good,
        expected_random_loss: random_loss,
        padding,
        padding_certificate,
        challenge_edges_used: oracle.cursor(),
        case_breakdown,
        regime_flags: flags,
    })
}

/// Seeds for trial `index` of a given challenge kind.
pub fn trial_seeds(cfg: &ExperimentConfig, kind: ChallengeKind, index: usize) -> SeedStream {
    SeedStream::new(cfg.seed).child(kind.as_str(), index as u64)
}

/// One full trial: fresh challenge, learner from the config, distinguisher run.
/// Only the learner constructor sees the secret; the distinguisher gets the
/// challenge with the secret stripped.
pub fn run_trial(cfg: &ExperimentConfig, kind: ChallengeKind, index: usize) -> Result<Decision> {
    cfg.validate()?;
    let seeds = trial_seeds(cfg, kind, index);
    let p = cfg.predicate()?;
    let challenge = sample_challenge(
        &p,
        cfg.n,
        cfg.challenge_len(),
        kind,
        &mut seeds.rng("challenge", 0),
    )?;
    let learner = build_learner(&cfg.learner, cfg.m, challenge.secret())?;
    let mut d = run_distinguisher(&challenge.without_secret(), learner.as_ref(), cfg, &seeds)?;
    d.trial = Some(index);
    d.kind = Some(kind);
    Ok(d)
}

/// Runs trials `0..trials` on up to `jobs` threads; results come back in trial order.
pub fn run_trials(
    cfg: &ExperimentConfig,
    kind: ChallengeKind,
    trials: usize,
    jobs: usize,
) -> Vec<Result<Decision>> {
    let jobs = jobs.clamp(1, trials.max(1));
    if jobs == 1 {
        return (0..trials).map(|i| run_trial(cfg, kind, i)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Decision>>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= trials {
                    break;
                }
                let r = run_trial(cfg, kind, i);
                slots.lock().expect("slot lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|r| r.expect("every trial ran"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub pseudorandom_trials: usize,
    pub random_trials: usize,
    /// `Pr[A = 1 | pseudorandom]`.
    pub accept_pseudorandom: f64,
    /// `Pr[A = 1 | random]`.
    pub accept_random: f64,
    pub advantage: f64,
    pub mean_loss_pseudorandom: f64,
    pub mean_loss_random: f64,
    pub mean_expected_random_loss: f64,
}

pub fn summarize_advantage(pseudo: &[Decision], random: &[Decision]) -> AdvantageReport {
    let rate = |ds: &[Decision]| {
        if ds.is_empty() {
            0.0
        } else {
            ds.iter().filter(|d| d.verdict == 1).count() as f64 / ds.len() as f64
        }
    };
    let mean = |ds: &[Decision], f: fn(&Decision) -> f64| {
        if ds.is_empty() {
            0.0
        } else {
            ds.iter().map(f).sum::<f64>() / ds.len() as f64
        }
    };
    let accept_pseudorandom = rate(pseudo);
    let accept_random = rate(random);
    AdvantageReport {
        pseudorandom_trials: pseudo.len(),
        random_trials: random.len(),
        accept_pseudorandom,
        accept_random,
        advantage: accept_pseudorandom - accept_random,
        mean_loss_pseudorandom: mean(pseudo, |d| d.loss),
        mean_loss_random: mean(random, |d| d.loss),
        mean_expected_random_loss: mean(random, |d| d.expected_random_loss),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LearnerSpec;
    use crate::network::GROUP_INTERVAL;
    use crate::oracle::PaddingMode;
    use rand::Rng as _;

    struct Fixed(f64);

    impl Hypothesis for Fixed {
        fn predict(&self, _: &[f64]) -> f64 {
            self.0
        }
    }

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n: 10,
            k: 2,
            predicate: "xor2".into(),
            m: 50,
            holdout_cap: 500,
            trials: 1,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn clipping_examples() {
        let h = clip_hypothesis(Box::new(Fixed(-5.0)), 1.0).unwrap();
        assert_eq!(h.predict(&[0.0]), 0.0);
        let h = clip_hypothesis(Box::new(Fixed(0.5)), 1.0).unwrap();
        assert_eq!(h.predict(&[0.0]), 0.5);
        let h = clip_hypothesis(Box::new(Fixed(7.0)), 1.1).unwrap();
        assert_eq!(h.predict_batch(&[0.0; 6], 3, 2).unwrap(), vec![1.1; 3]);
        assert!(clip_hypothesis(Box::new(Fixed(0.0)), -1.0).is_err());
    }

    #[test]
    fn clipping_never_increases_loss() {
        let mut rng = SeedStream::new(1).rng("clip", 0);
        for _ in 0..10_000 {
            let b_hat = rng.random_range(0.5..1.5);
            let pred = rng.random_range(-3.0..3.0);
            let label = rng.random_range(0.0..b_hat);
            let clipped = clip(pred, b_hat);
            assert!((clipped - label).powi(2) <= (pred - label).powi(2));
        }
    }

    #[test]
    fn holdout_loss_examples() {
        let ex = |label: f64| LabeledExample {
            input: vec![0.0],
            padded_dim: 1,
            label,
            case_tag: CaseTag::CleanZero,
        };
        let holdout: Vec<_> = (0..10).map(|_| ex(1.0)).collect();
        assert_eq!(holdout_loss(&Fixed(0.0), &holdout).unwrap(), 1.0);
        assert_eq!(holdout_loss(&Fixed(1.0), &holdout).unwrap(), 0.0);
        assert!(matches!(
            holdout_loss(&Fixed(1.0), &[]),
            Err(Error::EmptyHoldout)
        ));
    }

    #[test]
    fn threshold_policies() {
        let (t, f) = select_threshold(ThresholdPolicy::Auto, 100, 0.5);
        assert_eq!((t, f.len()), (0.02, 0));
        let (t, f) = select_threshold(ThresholdPolicy::Auto, 10, 0.1);
        assert!((t - 0.05).abs() < 1e-15 && f[0].starts_with("non-paper regime"));
        assert_eq!(
            select_threshold(ThresholdPolicy::Explicit(0.3), 10, 0.1).0,
            0.3
        );
        assert_eq!(select_threshold(ThresholdPolicy::Paper, 10, 0.1).0, 0.2);
        assert_eq!(verdict(0.1, 0.1), 1);
        assert_eq!(verdict(0.1 + 1e-12, 0.1), 0);
    }

    #[test]
    fn template_layout_is_secret_independent() {
        let p = Predicate::parse("xor-maj(2,3)").unwrap();
        let n = 12;
        let template = public_template(&p, n, OracleMode::Theorem1).unwrap();
        let mut rng = SeedStream::new(2).rng("x", 0);
        for _ in 0..5 {
            let x = crate::prg::uniform_bits(n, &mut rng);
            let real = assemble_depth3_target(&p, &x, n).unwrap();
            let shapes = |net: &ReluNetwork| {
                net.layers()
                    .iter()
                    .map(|l| (l.rows(), l.cols()))
                    .collect::<Vec<_>>()
            };
            assert_eq!(shapes(&template), shapes(&real));
            assert!(template.layers()[1].max_abs() >= real.layers()[1].max_abs());
            let a = n3_branch_network(&template).unwrap();
            let b = n3_branch_network(&real).unwrap();
            assert_eq!(a, b);
            assert!(a.group(GROUP_INTERVAL).is_ok());
        }
    }

    #[test]
    fn oracle_learner_separates_small_instance() {
        let cfg = small_cfg();
        let pseudo = run_trial(&cfg, ChallengeKind::Pseudorandom, 0).unwrap();
        assert!(pseudo.loss < 1e-3, "{pseudo:?}");
        let cert = pseudo.padding_certificate.unwrap();
        assert_eq!(
            pseudo.padding == PaddingMode::Lazy,
            cert <= LAZY_PADDING_TOLERANCE
        );
        let random = run_trial(&cfg, ChallengeKind::Random, 0).unwrap();
        assert!(random.loss > pseudo.loss);
        let total: f64 = random.case_breakdown.values().map(|c| c.loss).sum();
        assert!((total - random.loss).abs() < 1e-12);
        assert_eq!(
            random
                .case_breakdown
                .values()
                .map(|c| c.count)
                .sum::<usize>(),
            500
        );
    }

    #[test]
    fn trials_are_reproducible_and_ordered() {
        let cfg = ExperimentConfig {
            learner: LearnerSpec::Constant { value: 0.0 },
            ..small_cfg()
        };
        let serial = run_trials(&cfg, ChallengeKind::Random, 4, 1);
        let parallel = run_trials(&cfg, ChallengeKind::Random, 4, 3);
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a.as_ref().unwrap(), b.as_ref().unwrap());
        }
        assert_eq!(parallel[2].as_ref().unwrap().trial, Some(2));
    }

    #[test]
    fn secret_is_never_read() {
        for spec in [
            LearnerSpec::Constant { value: 0.3 },
            LearnerSpec::RandomFeatures {
                width: 16,
                ridge: 1e-3,
            },
        ] {
            let cfg = ExperimentConfig {
                learner: spec.clone(),
                holdout_cap: 200,
                ..small_cfg()
            };
            let seeds = trial_seeds(&cfg, ChallengeKind::Pseudorandom, 0);
            let p = cfg.predicate().unwrap();
            let ch = sample_challenge(
                &p,
                cfg.n,
                cfg.challenge_len(),
                ChallengeKind::Pseudorandom,
                &mut seeds.rng("challenge", 0),
            )
            .unwrap();
            let learner = build_learner(&spec, cfg.m, None).unwrap();
            let with = run_distinguisher(&ch, learner.as_ref(), &cfg, &seeds).unwrap();
            let without =
                run_distinguisher(&ch.without_secret(), learner.as_ref(), &cfg, &seeds).unwrap();
            assert_eq!(
                serde_json::to_string(&with).unwrap(),
                serde_json::to_string(&without).unwrap()
            );
        }
        assert!(matches!(
            build_learner(&LearnerSpec::Oracle, 10, None),
            Err(Error::SecretUnavailable)
        ));
    }

    #[test]
    fn short_challenge_is_rejected() {
        let cfg = small_cfg();
        let p = cfg.predicate().unwrap();
        let mut rng = SeedStream::new(4).rng("c", 0);
        let ch = sample_challenge(&p, cfg.n, 100, ChallengeKind::Random, &mut rng).unwrap();
        let learner = build_learner(&LearnerSpec::Constant { value: 0.0 }, cfg.m, None).unwrap();
        assert!(matches!(
            run_distinguisher(&ch, learner.as_ref(), &cfg, &SeedStream::new(4)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn dense_and_lazy_oracle_runs_agree_on_labels_mechanism() {
        let cfg = ExperimentConfig {
            padding: PaddingMode::Dense,
            holdout_cap: 300,
            ..small_cfg()
        };
        let d = run_trial(&cfg, ChallengeKind::Pseudorandom, 1).unwrap();
        assert_eq!(d.padding, PaddingMode::Dense);
        assert!(d.loss < 1e-3);
    }

    #[test]
    fn depth2_runs() {
        let cfg = ExperimentConfig {
            mode: OracleMode::Theorem2,
            ..small_cfg()
        };
        let pseudo = run_trial(&cfg, ChallengeKind::Pseudorandom, 0).unwrap();
        assert!(pseudo.omega > 0.0);
        assert!(pseudo.loss < 1e-3, "{pseudo:?}");
        let random = run_trial(&cfg, ChallengeKind::Random, 0).unwrap();
        assert!(random.loss > 0.0);
    }

    #[test]
    fn advantage_summary() {
        let cfg = small_cfg();
        let mk = |v: u8, loss: f64| Decision {
            verdict: v,
            loss,
            ..run_trial(&cfg, ChallengeKind::Pseudorandom, 0).unwrap()
        };
        let r = summarize_advantage(&[mk(1, 0.0), mk(1, 0.0)], &[mk(0, 0.2), mk(1, 0.0)]);
        assert_eq!(r.accept_pseudorandom, 1.0);
        assert_eq!(r.accept_random, 0.5);
        assert_eq!(r.advantage, 0.5);
        assert!((r.mean_loss_random - 0.1).abs() < 1e-15);
        let empty = summarize_advantage(&[], &[]);
        assert_eq!(empty.advantage, 0.0);
    }
}
