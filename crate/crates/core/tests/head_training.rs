use myriad_al::data::{generate_synthetic, split, SplitSpec};
use myriad_al::engine::evaluate;
use myriad_al::{EmbeddingDataset, LinearHead, Rng, TrainConfig};

fn full_batch(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        epochs,
        ..TrainConfig::nct()
    }
}

fn all_labelled(ds: &EmbeddingDataset, idx: &[usize]) -> Vec<(usize, usize)> {
    idx.iter().map(|&i| (i, ds.label(i).unwrap())).collect()
}

#[test]
fn xavier_draws_have_uniform_variance() {
    let (d, k) = (300, 34);
    let bound = (6.0 / (d + k) as f64).sqrt();
    let mut rng = Rng::seed_from(5);
    let mut draws = Vec::new();
    while draws.len() < 100_000 {
        let head = LinearHead::init_xavier(d, k, &mut rng);
        assert!(head.bias().iter().all(|&b| b == 0.0));
        draws.extend_from_slice(head.weights());
    }
    assert!(draws.iter().all(|w| w.abs() <= bound));
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let want = (2.0 * bound).powi(2) / 12.0;
    assert!((var / want - 1.0).abs() < 0.05, "variance {var} vs {want}");
}

#[test]
fn full_batch_loss_mostly_decreases() {
    let ds = generate_synthetic(3, 8, 4, 3.0, &mut Rng::seed_from(1)).unwrap();
    let labelled = all_labelled(&ds, &(0..ds.len()).collect::<Vec<_>>());
    let mut rng = Rng::seed_from(2);
    let head = LinearHead::init_xavier(4, 3, &mut rng);
    let (_, report) = head.train(&ds, &labelled, &full_batch(100, 0.01), &mut rng).unwrap();
    let drops = report.epoch_losses.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(drops * 10 >= 9 * (report.epoch_losses.len() - 1), "{drops} decreasing epochs");
}

#[test]
fn full_batch_gradient_ignores_sample_order() {
    let ds = generate_synthetic(4, 10, 6, 2.0, &mut Rng::seed_from(3)).unwrap();
    let mut batch = all_labelled(&ds, &(0..ds.len()).collect::<Vec<_>>());
    let head = LinearHead::init_xavier(6, 4, &mut Rng::seed_from(4));
    let (l1, g1) = head.loss_and_gradient(&ds, &batch, 5e-4).unwrap();
    Rng::seed_from(9).shuffle(&mut batch);
    let (l2, g2) = head.loss_and_gradient(&ds, &batch, 5e-4).unwrap();
    assert!((l1 - l2).abs() < 1e-9);
    for (a, b) in g1.weights.iter().zip(&g2.weights).chain(g1.bias.iter().zip(&g2.bias)) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn retraining_is_bit_identical() {
    let ds = generate_synthetic(3, 100, 5, 4.0, &mut Rng::seed_from(6)).unwrap();
    let labelled = all_labelled(&ds, &(0..ds.len()).step_by(2).collect::<Vec<_>>());
    let config = TrainConfig {
        batch_size: 32,
        epochs: 20,
        ..TrainConfig::synthetic()
    };
    let fit = || {
        let mut rng = Rng::seed_from(11);
        let head = LinearHead::init_xavier(5, 3, &mut rng);
        head.train(&ds, &labelled, &config, &mut rng).unwrap().0
    };
    let (a, b) = (fit(), fit());
    assert_eq!(a.encode_weights(), b.encode_weights());
    assert!(a.weights().iter().zip(b.weights()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn full_labels_fit_the_synthetic_set() {
    let ds = generate_synthetic(9, 500, 32, 8.0, &mut Rng::seed_from(1)).unwrap();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let config = TrainConfig {
        epochs: 20,
        ..TrainConfig::synthetic()
    };
    let mut rng = Rng::seed_from(1);
    let head = LinearHead::init_xavier(32, 9, &mut rng);
    let (head, _) = head.train(&ds, &all_labelled(&ds, &idx), &config, &mut rng).unwrap();
    let acc = evaluate(&head, &ds, &idx).unwrap().accuracy;
    assert!(acc > 0.99, "train accuracy {acc}");
}

#[test]
fn inseparable_classes_stay_at_chance() {
    let mut accs = Vec::new();
    for seed in 0..10 {
        let ds = generate_synthetic(2, 400, 4, 0.0, &mut Rng::seed_from(seed)).unwrap();
        let s = split(&ds, &SplitSpec::new(0.5, seed)).unwrap();
        let mut rng = Rng::seed_from(seed);
        let head = LinearHead::init_xavier(4, 2, &mut rng);
        let (head, _) = head
            .train(&ds, &all_labelled(&ds, &s.train), &full_batch(50, 0.01), &mut rng)
            .unwrap();
        accs.push(evaluate(&head, &ds, &s.test).unwrap().accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.05, "mean accuracy {mean}");
}

#[test]
fn two_separable_points_are_fitted() {
    let ds = EmbeddingDataset::new(vec![-1.0, 0.5, 1.0, -0.5], 2, vec![Some(0), Some(1)], 2).unwrap();
    let mut rng = Rng::seed_from(3);
    let head = LinearHead::init_xavier(2, 2, &mut rng);
    let config = TrainConfig {
        epochs: 200,
        ..TrainConfig::synthetic()
    };
    let (head, report) = head.train(&ds, &[(0, 0), (1, 1)], &config, &mut rng).unwrap();
    assert_eq!(head.predict(ds.row(0)).unwrap(), 0);
    assert_eq!(head.predict(ds.row(1)).unwrap(), 1);
    assert!(report.epoch_losses.last().unwrap() < &0.05);
}

#[test]
fn probabilities_form_a_distribution() {
    let mut rng = Rng::seed_from(12);
    for _ in 0..200 {
        let d = 1 + rng.below(20);
        let k = 2 + rng.below(10);
        let head = LinearHead::init_xavier(d, k, &mut rng);
        let x: Vec<f32> = (0..d).map(|_| (rng.standard_normal() * 50.0) as f32).collect();
        let p = head.predict_proba(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn weight_file_round_trip() {
    let head = LinearHead::init_xavier(7, 3, &mut Rng::seed_from(1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("head.malw");
    head.write_weights(&path).unwrap();
    let back = LinearHead::read_weights(&path).unwrap();
    assert_eq!(back.encode_weights(), head.encode_weights());
    for (a, b) in back.weights().iter().zip(head.weights()) {
        assert!((a - b).abs() < 1e-7);
    }
}
