//! Trains the softmax head on a handful of labels, saves the weights and
//! checks the reloaded head predicts the same.

use myriad_al::engine::evaluate;
use myriad_al::{split, LinearHead, Rng, SplitSpec, TrainConfig};

fn main() -> myriad_al::Result<()> {
    let dataset = myriad_al::generate_synthetic(4, 150, 16, 5.0, &mut Rng::seed_from(2))?;
    let s = split(&dataset, &SplitSpec::new(0.8, 2))?;
    let labelled: Vec<(usize, usize)> = s
        .train
        .iter()
        .step_by(s.train.len() / 20)
        .take(20)
        .map(|&i| (i, dataset.label(i).unwrap()))
        .collect();

    let mut rng = Rng::seed_from(3);
    let head = LinearHead::init_xavier(dataset.dim(), dataset.k_classes(), &mut rng);
    println!("untrained: {:?}", evaluate(&head, &dataset, &s.test)?);
    let (head, report) = head.train(&dataset, &labelled, &TrainConfig::synthetic(), &mut rng)?;
    let losses = &report.epoch_losses;
    println!("loss {:.4} -> {:.4} over {} epochs", losses[0], losses[losses.len() - 1], losses.len());
    println!("trained on 20 labels: {:?}", evaluate(&head, &dataset, &s.test)?);

    let path = std::env::temp_dir().join("myriad-head.malw");
    head.write_weights(&path)?;
    let reloaded = LinearHead::read_weights(&path)?;
    let agree = s
        .test
        .iter()
        .filter(|&&i| head.predict(dataset.row(i)).ok() == reloaded.predict(dataset.row(i)).ok())
        .count();
    println!("reloaded head agrees on {agree}/{} test samples", s.test.len());
    Ok(())
}
