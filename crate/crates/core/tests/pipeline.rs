use hardnet_core::config::{ExperimentConfig, LearnerSpec, ThresholdPolicy};
use hardnet_core::distinguisher::{run_trial, summarize_advantage};
use hardnet_core::encoding::{encode_hyperedge, BitVector, Hyperedge};
use hardnet_core::network::{assemble_depth2_target, assemble_depth3_target, ReluNetwork};
use hardnet_core::oracle::{CaseTag, OracleMode, OracleState, PaddingMode};
use hardnet_core::prg::{sample_challenge, uniform_bits, ChallengeKind, Predicate};
use hardnet_core::rng::SeedStream;
use hardnet_core::stats::threshold_c;
use hardnet_core::verify::{run_suite, SuiteOptions};
use proptest::prelude::*;

/// Dense depth-3 input whose prefix thresholds to `bits`, one unit clear of the dead zone.
fn clean_input(bits: &[u8], n: usize) -> Vec<f64> {
    let c = threshold_c(n);
    let mut z: Vec<f64> = bits
        .iter()
        .map(|&b| if b == 1 { c + 1.0 } else { c - 1.0 })
        .collect();
    z.resize(n * n, 0.0);
    z
}

fn predicate_value(p: &Predicate, x: &BitVector, e: &Hyperedge) -> u8 {
    let bits: Vec<u8> = e.members().iter().map(|&i| x.get(i)).collect();
    p.eval_bits(&bits).unwrap()
}

#[test]
fn small_target_round_trips_through_json() {
    let p = Predicate::default_for_arity(2).unwrap();
    let x = BitVector::parse("101").unwrap();
    for net in [
        assemble_depth3_target(&p, &x, 3).unwrap(),
        assemble_depth2_target(&p, &x, 3).unwrap(),
    ] {
        let json = net.to_json().unwrap();
        let back = ReluNetwork::from_json(&json).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json().unwrap(), json);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn depth3_target_computes_negated_predicate_on_encodings(n in 3usize..9, k in 2usize..4, seed in any::<u64>()) {
        let p = Predicate::default_for_arity(k).unwrap();
        let seeds = SeedStream::new(seed);
        let x = uniform_bits(n, &mut seeds.rng("x", 0));
        let net = assemble_depth3_target(&p, &x, n).unwrap();
        let g = hardnet_core::encoding::sample_hypergraph(n, 20, k, &mut seeds.rng("g", 0)).unwrap();
        for e in g.edges() {
            let z = clean_input(&encode_hyperedge(e, n).to_bits(), n);
            let want = 1.0 - f64::from(predicate_value(&p, &x, e));
            let got = net.forward_eval(&z).unwrap().output();
            prop_assert!((got - want).abs() < 1e-9, "edge {:?}: {} vs {}", e.members(), got, want);
        }
    }

    #[test]
    fn depth2_target_rejects_non_encodings(n in 3usize..8, seed in any::<u64>()) {
        let p = Predicate::default_for_arity(3).unwrap();
        let seeds = SeedStream::new(seed);
        let x = uniform_bits(n, &mut seeds.rng("x", 0));
        let net = assemble_depth2_target(&p, &x, n).unwrap();
        let bits = uniform_bits(3 * n, &mut seeds.rng("z", 0)).to_bits();
        let mut z: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
        z.resize(n * n, 0.0);
        let out = net.forward_eval(&z).unwrap().output();
        if hardnet_core::encoding::decode_bits(&bits, n, 3).is_none() {
            prop_assert!(out.abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_labels_are_bounded_and_tagged(seed in any::<u64>()) {
        let (n, k) = (8, 2);
        let p = Predicate::default_for_arity(k).unwrap();
        let seeds = SeedStream::new(seed);
        let ch = sample_challenge(&p, n, 200, ChallengeKind::Pseudorandom, &mut seeds.rng("c", 0)).unwrap();
        let mut oracle = OracleState::theorem2(ch.public(), 1.0, 0.01, PaddingMode::Dense).unwrap();
        let mut rng = seeds.rng("o", 0);
        for _ in 0..100 {
            let ex = oracle.next_example(&mut rng).unwrap();
            prop_assert_eq!(ex.input.len(), n * n);
            prop_assert!(ex.label == 0.0 || ex.label == 1.0);
            if ex.case_tag == CaseTag::NonEncoding {
                prop_assert_eq!(ex.label, 0.0);
            }
        }
    }
}

#[test]
fn oracle_learner_separates_and_baselines_run() {
    let base = ExperimentConfig {
        n: 10,
        k: 2,
        predicate: "xor2".into(),
        m: 200,
        holdout_cap: 600,
        threshold_policy: ThresholdPolicy::Midpoint,
        seed: 11,
        ..Default::default()
    };
    let pseudo: Vec<_> = (0..4)
        .map(|i| run_trial(&base, ChallengeKind::Pseudorandom, i).unwrap())
        .collect();
    let random: Vec<_> = (0..4)
        .map(|i| run_trial(&base, ChallengeKind::Random, i).unwrap())
        .collect();
    let adv = summarize_advantage(&pseudo, &random);
    assert!(adv.advantage >= 0.75, "{adv:?}");

    for learner in [
        LearnerSpec::Constant { value: 0.0 },
        LearnerSpec::RandomFeatures {
            width: 16,
            ridge: 1e-3,
        },
    ] {
        for mode in [OracleMode::Theorem1, OracleMode::Theorem2] {
            let cfg = ExperimentConfig {
                learner: learner.clone(),
                mode,
                ..base.clone()
            };
            let d = run_trial(&cfg, ChallengeKind::Pseudorandom, 0).unwrap();
            assert!(d.loss.is_finite() && d.loss >= 0.0);
            assert_eq!(d.training_size, 200);
        }
    }
}

#[test]
fn quick_suite_passes_at_n8() {
    let opts = SuiteOptions {
        n: 8,
        inputs: 30,
        draws: 10,
        examples: 500,
        samples: 5000,
        trials: 4,
        holdout_cap: 500,
        singular_trials: 100,
        ..Default::default()
    };
    let reports = run_suite(&opts).unwrap();
    for r in &reports {
        assert!(r.passed, "{}", r.to_json_line().unwrap());
    }
}
