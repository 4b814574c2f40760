use super::*;
use crate::attention::AttnConfig;
use crate::data::{make_benchmark, window, Benchmark};
use crate::phasor::LpmConfig;
use alloc::vec;

fn bowl(theta0: f64, lr: f64, steps: usize) -> f64 {
    let mut p = vec![vec![theta0]];
    let mut state = AdamState::new(&p);
    for _ in 0..steps {
        let g = vec![vec![2.0 * p[0][0]]];
        adam_step(&mut p, &g, &mut state, &AdamConfig::default(), lr).unwrap();
    }
    p[0][0]
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut p = vec![vec![0.3, -1.2]];
    let mut state = AdamState::new(&p);
    adam_step(&mut p, &[vec![0.0, 0.0]], &mut state, &AdamConfig::default(), 0.05).unwrap();
    assert_eq!(p, vec![vec![0.3, -1.2]]);
    assert_eq!(state.step, 1);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    for g in [-3.0, 0.01, 250.0] {
        let mut p = vec![vec![0.0]];
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &[vec![g]], &mut state, &AdamConfig::default(), 0.05).unwrap();
        assert!((p[0][0] + 0.05 * g.signum()).abs() < 1e-6, "g={g} p={}", p[0][0]);
    }
}

#[test]
fn adam_quadratic_bowl_converges() {
    assert!(bowl(1.0, 0.05, 200).abs() < 1e-3);
    assert!(bowl(-0.7, 0.05, 200).abs() < 1e-3);
}

#[test]
fn adam_rejects_bad_gradients() {
    let mut p = vec![vec![1.0, 2.0]];
    let mut state = AdamState::new(&p);
    let cfg = AdamConfig::default();
    assert!(matches!(
        adam_step(&mut p, &[vec![1.0]], &mut state, &cfg, 0.1),
        Err(Error::LengthMismatch { .. })
    ));
    assert!(matches!(
        adam_step(&mut p, &[vec![f64::NAN, 0.0]], &mut state, &cfg, 0.1),
        Err(Error::NonFinite { .. })
    ));
    assert_eq!(p, vec![vec![1.0, 2.0]]);
}

#[test]
fn metrics_examples() {
    let t = [0.5, -1.0, 2.0];
    let exact = Metrics::from_pairs(&t, &t).unwrap();
    assert_eq!((exact.mse, exact.mae), (0.0, 0.0));
    let m = Metrics::from_pairs(&[1.0, 1.0, 1.0], &t).unwrap();
    assert!(m.mse >= m.mae * m.mae);
    assert!(matches!(Metrics::from_pairs(&[], &[]), Err(Error::EmptySamples)));
}

#[test]
fn zero_predictor_mse_is_the_signal_power() {
    let data = make_benchmark(Benchmark::T10Single, 3).unwrap();
    let targets: Vec<f64> = data.test.iter().map(|s| s.target).collect();
    let m = Metrics::from_pairs(&vec![0.0; targets.len()], &targets).unwrap();
    let power = targets.iter().map(|v| v * v).sum::<f64>() / targets.len() as f64;
    assert!((m.mse - power).abs() < 1e-12);
}

#[test]
fn evaluate_rejects_empty_sets() {
    let model = Lpm::new(LpmConfig::new(4, 1, true)).unwrap();
    let params = LpmParams::zeros(model.config());
    assert!(matches!(evaluate(&model, &params, &[]), Err(Error::EmptySamples)));
}

fn small_split(seed: u64) -> DatasetSplit {
    let mut d = make_benchmark(Benchmark::T10Single, seed).unwrap();
    d.train.truncate(120);
    d.val.truncate(30);
    d.test.truncate(30);
    d
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let data = small_split(1);
    let model = Lpm::new(LpmConfig::new(10, 2, true)).unwrap();
    let cfg = TrainConfig { epochs: 0, seed: 4, ..TrainConfig::phasor() };
    let out = train(&model, &data, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    assert_eq!(out.params, LpmParams::uniform(model.config(), cfg.init_range, &mut rng));
    assert_eq!(out.metrics.train_loss.len(), 1);
    assert_eq!(out.audit.samples, 0);
}

#[test]
fn short_phasor_run_lowers_the_loss_and_is_deterministic() {
    let data = small_split(2);
    let model = Lpm::new(LpmConfig::new(10, 2, true)).unwrap();
    let cfg = TrainConfig { epochs: 15, seed: 8, ..TrainConfig::phasor() };
    let a = train(&model, &data, &cfg).unwrap();
    let b = train(&model, &data, &cfg).unwrap();
    assert!(a.metrics.final_loss() < a.metrics.initial_loss());
    assert_eq!(a.metrics.train_loss.len(), 16);
    assert_eq!(a.params, b.params);
    let bits = |m: &MetricsRecord| m.train_loss.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.metrics), bits(&b.metrics));
    assert_eq!(a.metrics.num_params, 50);
    assert!(a.metrics.val.is_some() && a.metrics.test.is_some());
}

#[test]
fn chunked_gradient_equals_single_tape_gradient() {
    let data = make_benchmark(Benchmark::T10Single, 6).unwrap();
    let model = Lpm::new(LpmConfig::new(10, 2, true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LpmParams::uniform(model.config(), 0.3, &mut rng);
    let samples: Vec<&SequenceSample> = data.train.iter().take(300).collect();
    let (loss, grads) = loss_and_grad(&model, &params, &samples, LossKind::Mse).unwrap();

    let mut tape = Tape::new();
    let windows: Vec<&[f64]> = samples.iter().map(|s| s.context.as_slice()).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let preds = model.record(&mut tape, &params, &windows).unwrap();
    let l = tape.mse(preds, &targets).unwrap();
    let g = tape.backward(l).unwrap();
    assert!((tape.scalar(l) - loss).abs() < 1e-12);
    for (a, b) in grads.iter().flatten().zip(g.flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mini_batches_and_mae_loss_train() {
    let data = small_split(3);
    let model = Lpm::new(LpmConfig::new(10, 1, true)).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: Some(32),
        loss: LossKind::Mae,
        ..TrainConfig::phasor()
    };
    let out = train(&model, &data, &cfg).unwrap();
    assert_eq!(out.audit.samples, 5 * 120);
    assert!(out.metrics.final_loss() < out.metrics.initial_loss());
}

#[test]
fn gradients_never_touch_test_series() {
    let data = small_split(4);
    let model = Lpm::new(LpmConfig::new(10, 1, true)).unwrap();
    let cfg = TrainConfig { epochs: 2, ..TrainConfig::phasor() };
    let out = train(&model, &data, &cfg).unwrap();
    let test_ids: BTreeSet<usize> = data.test.iter().map(|s| s.series_id).collect();
    assert!(out.audit.series.is_disjoint(&test_ids));

    let mut leaky = data.clone();
    leaky.train.push(data.test[0].clone());
    assert!(matches!(train(&model, &leaky, &cfg), Err(Error::TestSampleInTraining)));
}

#[test]
fn divergence_guard_fires() {
    let data = small_split(5);
    let model = Lpm::new(LpmConfig::new(10, 2, true)).unwrap();
    let cfg = TrainConfig {
        epochs: 30,
        learning_rate: 3.0,
        divergence_factor: 1.0 + 1e-9,
        ..TrainConfig::phasor()
    };
    match train(&model, &data, &cfg) {
        Err(Error::Diverged { loss, limit, .. }) => assert!(loss > limit),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_train_configs() {
    for cfg in [
        TrainConfig { learning_rate: 0.0, ..TrainConfig::phasor() },
        TrainConfig { batch_size: Some(0), ..TrainConfig::phasor() },
        TrainConfig { divergence_factor: 0.5, ..TrainConfig::phasor() },
    ] {
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
    let data = small_split(0);
    let model = Lpm::new(LpmConfig::new(16, 1, true)).unwrap();
    assert!(train(&model, &data, &TrainConfig::phasor()).is_err());
}

#[test]
fn one_step_rollout_is_one_prediction() {
    let model = Lpm::new(LpmConfig::new(16, 3, true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = LpmParams::uniform(model.config(), 0.3, &mut rng);
    let x: Vec<f64> = (0..16).map(|t| math::sin(0.4 * t as f64)).collect();
    let r = rollout(&model, &params, &x, 1).unwrap();
    assert_eq!(r.predictions, vec![model.forward(&x, &params).unwrap()]);
    assert!(matches!(rollout(&model, &params, &x, 0), Err(Error::InvalidConfig(_))));
}

#[test]
fn zero_phase_rollout_of_a_constant_stays_constant() {
    let model = Lpm::new(LpmConfig::new(8, 1, true)).unwrap();
    let params = LpmParams::zeros(model.config());
    for c in [0.4, 1.3] {
        let r = rollout(&model, &params, &[c; 8], 12).unwrap();
        assert!(r.predictions.iter().all(|p| (p - c).abs() < 1e-12), "{:?}", r.predictions);
    }
}

#[test]
fn rollout_recomputes_the_scale_per_window() {
    let model = Lpm::new(LpmConfig::new(6, 2, true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = LpmParams::uniform(model.config(), 0.3, &mut rng);
    let ctx = [3.0, 0.1, -0.2, 0.3, 0.2, -0.1];
    let r = rollout(&model, &params, &ctx, 8).unwrap();
    let mut series = ctx.to_vec();
    series.extend(&r.predictions);
    for (k, s) in r.scales.iter().enumerate() {
        let max = series[k..k + 6].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(*s, max);
    }
    assert!(r.scales[1] < 3.0);
}

#[test]
fn attention_training_runs_and_audits() {
    let mut data = small_split(7);
    data.train.truncate(40);
    let model = AttentionModel::new(AttnConfig::new(10)).unwrap();
    let cfg = TrainConfig { epochs: 5, learning_rate: 3e-3, ..TrainConfig::attention() };
    let out = train(&model, &data, &cfg).unwrap();
    assert_eq!(out.metrics.num_params, 3329);
    assert!(out.metrics.final_loss() < out.metrics.initial_loss());
}

#[test]
fn constant_mean_predictor() {
    let series: Vec<f64> = (0..20).map(|t| (t % 4) as f64).collect();
    let s = window(&series, None, 4, 1).unwrap();
    let m = constant_mean_baseline(&s, &s).unwrap();
    let mean = s.iter().map(|x| x.target).sum::<f64>() / s.len() as f64;
    let want = s.iter().map(|x| (x.target - mean).abs()).sum::<f64>() / s.len() as f64;
    assert!((m.mae - want).abs() < 1e-12);
}
