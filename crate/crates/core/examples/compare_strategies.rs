//! Every strategy over the same three seeds and splits, with per-cycle
//! means written to a temporary directory.

use myriad_al::harness::{run_matrix, summarize, write_outputs, RunSpec};
use myriad_al::{EngineConfig, Rng, StrategyKind, TrainConfig};

fn main() -> myriad_al::Result<()> {
    let dataset = myriad_al::generate_synthetic(9, 200, 32, 8.0, &mut Rng::seed_from(0))?;
    let engine = EngineConfig {
        train: TrainConfig::synthetic(),
        ..EngineConfig::default()
    };
    let specs: Vec<RunSpec> = StrategyKind::ALL
        .into_iter()
        .map(|kind| RunSpec {
            label: kind.name().to_string(),
            strategy: kind.into(),
            engine,
        })
        .collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let records = run_matrix(&dataset, &specs, &[1, 2, 3], 6, 0.8, jobs)?;

    let summary = summarize(&records);
    print!("{:<10}", "cycle");
    for c in &summary.strategies[0].cycles {
        print!("{:>8}", c.cycle);
    }
    println!();
    for s in &summary.strategies {
        print!("{:<10}", s.strategy);
        for c in &s.cycles {
            print!("{:>8.3}", c.accuracy_mean);
        }
        println!();
    }
    let out = std::env::temp_dir().join("myriad-compare");
    let written = write_outputs(&records, &out)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}
