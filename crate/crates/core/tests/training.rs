use csdf::dataset::{generate_samples, SamplingConfig, SdfOracle, ShapeSamples, ShapeSource};
use csdf::geometry::AnalyticShape;
use csdf::model::{GradientScope, LatentCode, MlpNetwork, NetworkConfig};
use csdf::training::loss::{self, point_loss};
use csdf::training::{
    objective_batch, read_state, regularizer_weight, BatchGradients, BatchRow, CurriculumSchedule, LatentBank, LogRow, LossConfig,
    TrainConfig, Trainer,
};
use csdf::{rng, Point3, SdfError};
use proptest::prelude::*;
use rand::Rng;

fn tiny_net_config() -> NetworkConfig {
    NetworkConfig {
        latent_dim: 4,
        hidden_width: 16,
        max_depth: 8,
        skip_layer: 3,
    }
}

fn sphere_dataset(count: usize) -> Vec<ShapeSamples> {
    [0.35, 0.6]
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let shape = AnalyticShape::sphere(Point3::zeros(), r);
            let cfg = SamplingConfig {
                count,
                seed: i as u64,
                ..Default::default()
            };
            generate_samples(&format!("sphere_{i}"), &SdfOracle::Analytic(shape.clone()), ShapeSource::Analytic { shape }, &cfg).unwrap()
        })
        .collect()
}

fn tiny_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        shapes_per_step: 1,
        points_per_shape: 128,
        passes_per_epoch: 1,
        lr_network: 1e-3,
        chunk_rows: 48,
        seed,
        ..Default::default()
    }
}

#[test]
fn loss_grid_degenerates_to_clamped_l1() {
    let cfg = LossConfig {
        delta: 0.1,
        epsilon: 0.0,
        lambda: 0.0,
    };
    let lam = 0.3;
    for i in 0..=200 {
        for j in 0..=200 {
            let f = -0.2 + 0.4 * i as f64 / 200.0;
            let s = -0.2 + 0.4 * j as f64 / 200.0;
            assert_eq!(loss::loss_curriculum(f, s, &cfg), loss::loss_deepsdf(f, s, 0.1));
            let (fc, sc) = (loss::clamp(f, 0.1), loss::clamp(s, 0.1));
            if (fc - sc).abs() <= 0.02 {
                assert_eq!(loss::loss_tolerance(f, s, 0.1, 0.02), 0.0);
            } else {
                assert!(loss::loss_tolerance(f, s, 0.1, 0.02) > 0.0);
            }
            let w = loss::weight_factor(fc, sc, lam);
            assert!(w == 1.0 - lam || w == 1.0 + lam, "{w}");
        }
    }
}

#[test]
fn zero_codes_have_no_regulariser_and_reduce_to_mean_loss() {
    let net = MlpNetwork::new(tiny_net_config(), 5, 3).unwrap();
    let mut bank = LatentBank::new(vec!["a".into(), "b".into()], 4, 0.01, 1).unwrap();
    bank.set_code(0, LatentCode::zeros(4)).unwrap();
    bank.set_code(1, LatentCode::zeros(4)).unwrap();
    let rows = random_rows(&mut rng::seeded(4), 2, 10);
    let cfg = LossConfig::default();
    let (j, stats, _) = objective_batch(&net, &bank, &rows, &cfg, &[1e4, 1e4], GradientScope::Full, 4).unwrap();
    assert_eq!(stats.reg_sum, 0.0);
    let mean = rows
        .iter()
        .map(|r| loss::loss_deepsdf(net.forward(bank.code(r.shape).as_slice(), &r.x).unwrap().0, r.s, 0.1))
        .sum::<f64>()
        / rows.len() as f64;
    assert!((j - mean).abs() < 1e-15, "{j} vs {mean}");
    assert_eq!(stats.hard + stats.semi_hard + stats.easy, rows.len());
}

fn random_rows(rng: &mut rng::Rng, shapes: usize, per_shape: usize) -> Vec<BatchRow> {
    let mut rows = Vec::new();
    for shape in 0..shapes {
        for _ in 0..per_shape {
            rows.push(BatchRow {
                shape,
                x: Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                s: rng.random_range(-0.12..0.12),
            });
        }
    }
    rows
}

fn flatten(g: &BatchGradients) -> Vec<f64> {
    let mut out = Vec::new();
    for l in g.hidden.iter().chain(g.output.iter()) {
        out.extend_from_slice(&l.weight);
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Distance of every row to the nearest loss kink (|f̄ − s̄| = ε, |f| = δ,
/// f̄ = s̄), together with the ReLU pattern of every row.
fn branch_signature(net: &MlpNetwork, bank: &LatentBank, rows: &[BatchRow], cfg: &LossConfig) -> (f64, Vec<Vec<bool>>) {
    let mut margin = f64::INFINITY;
    let mut patterns = Vec::new();
    for r in rows {
        let (f, tape) = net.forward(bank.code(r.shape).as_slice(), &r.x).unwrap();
        let d = loss::clamp(f, cfg.delta) - loss::clamp(r.s, cfg.delta);
        margin = margin.min((d.abs() - cfg.epsilon).abs()).min((f.abs() - cfg.delta).abs()).min(d.abs());
        patterns.push(tape.relu_pattern());
    }
    (margin, patterns)
}

#[test]
fn batch_objective_matches_finite_differences() {
    const H: f64 = 1e-6;
    let cfg = LossConfig {
        delta: 0.1,
        epsilon: 0.01,
        lambda: 0.3,
    };
    let mut checked = 0;
    for trial in 0..6u64 {
        let mut r = rng::seeded(100 + trial);
        let mut net = MlpNetwork::new(tiny_net_config(), 6, trial).unwrap();
        net.grow(trial + 50).unwrap();
        net.set_alpha([0.0, 0.4, 0.75][trial as usize % 3]).unwrap();
        let mut bank = LatentBank::new(vec!["a".into(), "b".into()], 4, 0.3, trial).unwrap();
        let rows = random_rows(&mut r, 2, 8);
        let reg = [0.7, 1.3];
        let (margin, pattern) = branch_signature(&net, &bank, &rows, &cfg);
        if margin < 1e-4 {
            continue;
        }
        let (_, _, grads) = objective_batch(&net, &bank, &rows, &cfg, &reg, GradientScope::Full, 5).unwrap();
        let analytic = flatten(&grads);
        let j = |net: &MlpNetwork, bank: &LatentBank| objective_batch(net, bank, &rows, &cfg, &reg, GradientScope::LatentOnly, 5).unwrap().0;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);

        let params = net.parameters();
        let mut probe = net.clone();
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += H;
            probe.set_parameters(&p).unwrap();
            let (up, sig_p) = (j(&probe, &bank), branch_signature(&probe, &bank, &rows, &cfg).1);
            p[i] -= 2.0 * H;
            probe.set_parameters(&p).unwrap();
            let (down, sig_m) = (j(&probe, &bank), branch_signature(&probe, &bank, &rows, &cfg).1);
            if sig_p != pattern || sig_m != pattern {
                continue;
            }
            let numeric = (up - down) / (2.0 * H);
            assert!(rel(analytic[i], numeric) < 1e-4, "trial {trial} param {i}: {} vs {numeric}", analytic[i]);
            checked += 1;
        }
        for (shape, g) in &grads.latents {
            let base = bank.code(*shape).clone();
            for (k, &gk) in g.iter().enumerate() {
                let mut z = base.clone();
                z.0[k] += H;
                bank.set_code(*shape, z.clone()).unwrap();
                let up = j(&net, &bank);
                z.0[k] -= 2.0 * H;
                bank.set_code(*shape, z).unwrap();
                let down = j(&net, &bank);
                bank.set_code(*shape, base.clone()).unwrap();
                let numeric = (up - down) / (2.0 * H);
                assert!(rel(gk, numeric) < 1e-4, "trial {trial} z{shape}[{k}]: {gk} vs {numeric}");
                checked += 1;
            }
        }
    }
    assert!(checked > 3000, "only {checked} components compared");
}

#[test]
fn objective_is_independent_of_chunking() {
    let net = MlpNetwork::new(tiny_net_config(), 5, 9).unwrap();
    let bank = LatentBank::new(vec!["a".into(), "b".into(), "c".into()], 4, 0.1, 2).unwrap();
    let rows = random_rows(&mut rng::seeded(5), 3, 40);
    let cfg = LossConfig {
        delta: 0.1,
        epsilon: 0.0025,
        lambda: 0.2,
    };
    let reg = [1.0, 2.0, 3.0];
    let (j1, s1, _) = objective_batch(&net, &bank, &rows, &cfg, &reg, GradientScope::Full, 7).unwrap();
    let (j2, s2, _) = objective_batch(&net, &bank, &rows, &cfg, &reg, GradientScope::Full, 120).unwrap();
    assert!((j1 - j2).abs() < 1e-14);
    assert_eq!((s1.hard, s1.semi_hard, s1.easy), (s2.hard, s2.semi_hard, s2.easy));
}

#[test]
fn regularizer_weight_sums_to_inverse_sigma_squared() {
    let c = regularizer_weight(1e-2, 20_000);
    assert!((c * 20_000.0 - 1e4).abs() < 1e-9);
}

#[test]
fn objective_rejects_bad_inputs() {
    let net = MlpNetwork::new(tiny_net_config(), 5, 0).unwrap();
    let bank = LatentBank::new(vec!["a".into()], 4, 0.1, 0).unwrap();
    let cfg = LossConfig::default();
    assert!(objective_batch(&net, &bank, &[], &cfg, &[1.0], GradientScope::Full, 8).is_err());
    let rows = [BatchRow {
        shape: 3,
        x: Point3::zeros(),
        s: 0.0,
    }];
    assert!(matches!(
        objective_batch(&net, &bank, &rows, &cfg, &[1.0], GradientScope::Full, 8),
        Err(SdfError::UnknownShape(_))
    ));
}

fn train_log(dataset: &[ShapeSamples], epochs: usize, seed: u64) -> (Vec<LogRow>, Trainer) {
    let schedule = CurriculumSchedule::scaled(epochs).unwrap();
    let mut t = Trainer::new(dataset, tiny_net_config(), schedule, tiny_train_config(seed)).unwrap();
    let log = t.train().unwrap();
    (log, t)
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let data = sphere_dataset(600);
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (log_a, a) = pool(1).install(|| train_log(&data, 20, 7));
    let (log_b, b) = pool(3).install(|| train_log(&data, 20, 7));
    assert_eq!(log_a.len(), 20);
    assert!(log_a.iter().zip(&log_b).all(|(x, y)| x.same_training(y)));
    assert_eq!(a.network().parameters(), b.network().parameters());
    assert_eq!(a.bank().codes(), b.bank().codes());
    assert_eq!(a.network().growth().active_depth, 8);
    assert!(!a.network().growth().fading);

    let (log_c, _) = train_log(&data, 20, 8);
    assert!(log_a.iter().zip(&log_c).any(|(x, y)| !x.same_training(y)));
}

#[test]
fn log_rows_follow_the_schedule() {
    let data = sphere_dataset(400);
    let (log, _) = train_log(&data, 20, 1);
    let schedule = CurriculumSchedule::scaled(20).unwrap();
    for row in &log {
        let (idx, stage, alpha) = schedule.stage_for_epoch(row.epoch).unwrap();
        assert_eq!(row.stage_index, idx);
        assert_eq!((row.epsilon, row.lambda), (stage.epsilon, stage.lambda));
        assert_eq!(row.alpha, alpha);
        assert!((row.frac_hard + row.frac_semihard + row.frac_easy - 1.0).abs() < 1e-12);
    }
    assert_eq!(log.iter().map(|r| r.epoch).collect::<Vec<_>>(), (0..20).collect::<Vec<_>>());
}

#[test]
fn resume_from_checkpoint_is_bit_exact() {
    let data = sphere_dataset(500);
    let schedule = CurriculumSchedule::scaled(20).unwrap();
    let cfg = tiny_train_config(3);
    let mut full = Trainer::new(&data, tiny_net_config(), schedule.clone(), cfg.clone()).unwrap();
    full.set_tag("abc");
    // Stop inside a residual stage so the fading state is part of the checkpoint.
    full.train_until(3, |_, _| Ok(())).unwrap();
    assert!(full.network().growth().fading);
    let bytes = full.checkpoint_bytes();
    let tail = full.train_until(13, |_, _| Ok(())).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    std::fs::write(&path, &bytes).unwrap();
    let mut resumed = Trainer::load_checkpoint(&path, &data, schedule.clone(), cfg.clone()).unwrap();
    assert_eq!(resumed.epoch(), 3);
    assert_eq!(resumed.tag(), "abc");
    let tail2 = resumed.train_until(13, |_, _| Ok(())).unwrap();
    assert_eq!(tail.len(), 10);
    assert!(tail.iter().zip(&tail2).all(|(a, b)| a.same_training(b)));
    assert_eq!(full.network().parameters(), resumed.network().parameters());
    assert_eq!(full.bank().codes(), resumed.bank().codes());
    assert_eq!(full.checkpoint_bytes(), resumed.checkpoint_bytes());

    let state = read_state(&bytes).unwrap();
    assert_eq!((state.epoch, state.seed, state.tag.as_str()), (3, 3, "abc"));

    let mut bad = bytes.clone();
    bad[8] = 99;
    assert!(matches!(read_state(&bad), Err(SdfError::CheckpointVersion { found: 99, .. })));
    assert!(read_state(&bytes[..bytes.len() - 3]).is_err());
    assert!(read_state(b"not a checkpoint").is_err());
    let other_seed = TrainConfig { seed: 4, ..cfg };
    assert!(Trainer::from_checkpoint_bytes(&bytes, &data, schedule, other_seed).is_err());
}

#[test]
fn schedule_and_network_must_agree() {
    let data = sphere_dataset(200);
    let schedule = CurriculumSchedule::scaled(20).unwrap();
    let deep = MlpNetwork::new(tiny_net_config(), 6, 0).unwrap();
    let err = Trainer::with_network(&data, deep, schedule.clone(), tiny_train_config(0)).unwrap_err();
    assert!(matches!(err, SdfError::Schedule(_)), "{err}");
    let shallow_cfg = NetworkConfig {
        max_depth: 7,
        ..tiny_net_config()
    };
    let err = Trainer::new(&data, shallow_cfg, schedule, tiny_train_config(0)).unwrap_err();
    assert!(matches!(err, SdfError::Schedule(_)), "{err}");
}

#[test]
fn empty_shapes_are_rejected() {
    let mut data = sphere_dataset(100);
    data[1].samples.clear();
    let schedule = CurriculumSchedule::scaled(20).unwrap();
    assert!(Trainer::new(&data, tiny_net_config(), schedule, tiny_train_config(0)).is_err());
}

/// Kendall rank correlation against the epoch index.
fn kendall_tau(values: &[f64]) -> f64 {
    let mut score = 0.0;
    let n = values.len();
    for i in 0..n {
        for j in i + 1..n {
            score += (values[j] - values[i]).signum();
        }
    }
    score / (n * (n - 1) / 2) as f64
}

#[test]
fn hard_fraction_trends_down_on_spheres() {
    let data = sphere_dataset(2000);
    let net_cfg = NetworkConfig {
        latent_dim: 8,
        hidden_width: 32,
        ..tiny_net_config()
    };
    let cfg = TrainConfig {
        shapes_per_step: 2,
        points_per_shape: 256,
        passes_per_epoch: 2,
        lr_network: 1e-3,
        chunk_rows: 256,
        ..Default::default()
    };
    let mut t = Trainer::new(&data, net_cfg, CurriculumSchedule::scaled(60).unwrap(), cfg).unwrap();
    let log = t.train().unwrap();
    let hard: Vec<f64> = log.iter().map(|r| r.frac_hard).collect();
    let tau = kendall_tau(&hard);
    assert!(tau < -0.3, "tau = {tau}");
    let first: f64 = hard[..10].iter().sum::<f64>() / 10.0;
    let last: f64 = hard[50..].iter().sum::<f64>() / 10.0;
    assert!(last < first, "{first} -> {last}");
}

proptest! {
    #[test]
    fn tolerance_never_increases_the_loss(f in -0.3..0.3f64, s in -0.3..0.3f64, eps in 0.0..0.05f64, lam in 0.0..0.9f64) {
        let strict = LossConfig { delta: 0.1, epsilon: 0.0, lambda: lam };
        let tolerant = LossConfig { epsilon: eps, ..strict };
        let (a, b) = (loss::loss_curriculum(f, s, &tolerant), loss::loss_curriculum(f, s, &strict));
        prop_assert!(a >= 0.0);
        prop_assert!(a <= b);
        prop_assert!(loss::loss_tolerance(f, s, 0.1, eps) <= loss::loss_deepsdf(f, s, 0.1));
    }

    #[test]
    fn point_loss_matches_loss_and_classification(f in -0.3..0.3f64, s in -0.3..0.3f64, eps in 0.0..0.05f64, lam in 0.0..0.9f64) {
        let cfg = LossConfig { delta: 0.1, epsilon: eps, lambda: lam };
        let p = point_loss(f, s, &cfg);
        prop_assert_eq!(p.loss, loss::loss_curriculum(f, s, &cfg));
        prop_assert_eq!(p.difficulty, loss::classify_sample(loss::clamp(f, 0.1), loss::clamp(s, 0.1)));
        prop_assert!(p.dloss_df.abs() <= 1.0 + lam);
    }

    #[test]
    fn hard_samples_are_upweighted(f in -0.1..0.1f64, s in -0.1..0.1f64, lam in 0.0..0.9f64) {
        let w = loss::weight_factor(f, s, lam);
        if loss::classify_sample(f, s) != csdf::training::Difficulty::Easy {
            prop_assert_eq!(w, 1.0 + lam);
        }
    }
}
