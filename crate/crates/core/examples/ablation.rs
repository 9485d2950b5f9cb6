//! Turns off one part of the selector at a time and reports the accuracy at
//! the last cycle, averaged over seeds.

use myriad_al::harness::{run_matrix, summarize, RunConfig};

fn main() -> myriad_al::Result<()> {
    let config = RunConfig {
        synthetic: Some("k=9,per_class=200,dim=32,sep=8".into()),
        preset: "synthetic".into(),
        seeds: vec![1, 2, 3],
        shots: 6,
        ..RunConfig::default()
    };
    config.validate()?;
    let dataset = config.load_dataset()?;
    let records = run_matrix(
        &dataset,
        &config.ablation_specs()?,
        &config.seeds,
        config.shots,
        config.train_fraction,
        1,
    )?;
    for s in summarize(&records).strategies {
        let last = s.cycles.last().unwrap();
        println!(
            "{:<22} accuracy {:.4} +/- {:.4}",
            s.strategy,
            last.accuracy_mean,
            last.accuracy_std.unwrap_or(0.0)
        );
    }
    Ok(())
}
