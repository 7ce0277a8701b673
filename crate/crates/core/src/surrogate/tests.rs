use super::*;
use crate::geometry::PrimitiveKind;
use crate::meshing::canonical_mesh;
use crate::sampling::sample_surface;

fn clouds(n: usize, v: usize, s: u64) -> Vec<PointCloud> {
    let mut rng = seed::rng(s);
    PrimitiveKind::ALL
        .iter()
        .cycle()
        .take(n)
        .map(|&k| sample_surface(canonical_mesh(k), v, &mut rng).unwrap())
        .collect()
}

fn quick(iterations: usize) -> TrainConfig {
    TrainConfig {
        iterations,
        ..TrainConfig::default()
    }
}

#[test]
fn overfitting_one_cloud() {
    let data = clouds(1, 64, 1);
    let out = train_surrogate(&data, &quick(500)).unwrap();
    let first = out.losses[0];
    let last = *out.losses.last().unwrap();
    assert!(last < 0.1 * first, "{first} -> {last}");

    let init = AutoencoderParams::init(
        Architecture::default(),
        64,
        &mut seed::sub_rng(quick(500).seed, 0),
    )
    .unwrap();
    let before = evaluate_fitness(&init, &data).unwrap();
    let after = evaluate_fitness(&out.params, &data).unwrap();
    assert!(after <= before);
    assert!((before - first).abs() <= 1e-9 * first, "initial loss is the initial fitness");
}

#[test]
fn training_is_deterministic_for_any_thread_count() {
    let data = clouds(5, 32, 2);
    let cfg = quick(30);
    let a = train_surrogate(&data, &cfg).unwrap();
    assert_eq!(a.losses.len(), 30);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| train_surrogate(&data, &cfg).unwrap());
    assert_eq!(a.losses, b.losses);
    assert_eq!(a.params, b.params);
    let other = train_surrogate(&data, &TrainConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.losses, other.losses);
}

#[test]
fn config_validation() {
    let data = clouds(1, 16, 0);
    for bad in [
        TrainConfig { batch_size: 0, ..quick(1) },
        TrainConfig { learning_rate: 0.0, ..quick(1) },
        TrainConfig { learning_rate: f64::NAN, ..quick(1) },
        quick(0),
    ] {
        assert!(matches!(train_surrogate(&data, &bad), Err(Error::InvalidParameter(_))));
    }
    assert!(train_surrogate(&[], &quick(1)).is_err());
    let mixed = vec![clouds(1, 16, 0).remove(0), clouds(1, 17, 0).remove(0)];
    assert!(matches!(train_surrogate(&mixed, &quick(1)), Err(Error::ShapeMismatch(_))));
    assert_eq!(TrainConfig::paper().iterations, 20_000);
    assert_eq!(TrainConfig::default().batch_size, 8);
}

#[test]
fn runaway_learning_rate_is_reported() {
    let data = clouds(2, 16, 3);
    let cfg = TrainConfig {
        learning_rate: 1e300,
        ..quick(20)
    };
    assert!(matches!(train_surrogate(&data, &cfg), Err(Error::NonFinite(_))));
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let mut adam = Adam::new(3, 0.1);
    let mut p = vec![1.0, 2.0, 3.0];
    adam.update(&mut p, &[0.5, -2.0, 0.0]);
    assert!((p[0] - 0.9).abs() < 1e-6);
    assert!((p[1] - 2.1).abs() < 1e-6);
    assert_eq!(p[2], 3.0);
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut adam = Adam::new(2, 0.05);
    let mut p = vec![3.0, -2.0];
    for _ in 0..2000 {
        let g = vec![2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)];
        adam.update(&mut p, &g);
    }
    assert!((p[0] - 1.0).abs() < 1e-3 && (p[1] + 0.5).abs() < 1e-3);
}

#[test]
fn fitness_is_deterministic_and_checks_sizes() {
    let data = clouds(4, 32, 4);
    let p = AutoencoderParams::init(Architecture::default(), 32, &mut seed::rng(0)).unwrap();
    let f = evaluate_fitness(&p, &data).unwrap();
    assert!(f >= 0.0);
    assert_eq!(f, evaluate_fitness(&p, &data).unwrap());
    assert!(matches!(evaluate_fitness(&p, &clouds(1, 16, 0)), Err(Error::ShapeMismatch(_))));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let p = AutoencoderParams::init(Architecture::default(), 48, &mut seed::rng(9)).unwrap();
    p.save(&path).unwrap();
    assert_eq!(AutoencoderParams::load(&path).unwrap(), p);

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(AutoencoderParams::load(&path), Err(Error::Format { .. })));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(AutoencoderParams::load(&path), Err(Error::Format { .. })));
}

#[test]
fn loss_history_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    let losses = vec![0.5, 0.25, 1.0 / 3.0];
    write_loss_history(&losses, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("iteration,loss\n0,0.5\n"));
    assert_eq!(read_loss_history(&path).unwrap(), losses);
    std::fs::write(&path, "iteration,loss\n0,0.5\n2,0.1\n").unwrap();
    let err = read_loss_history(&path).unwrap_err().to_string();
    assert!(err.contains("row 3"), "{err}");
}
