//! Ten-shot margin-entropy run on a synthetic 9-class embedding set.
//!
//! ```text
//! cargo run --release --example quickstart
//! ```

use myriad_al::{run_al, split, EngineConfig, Rng, Split, SplitSpec, Strategy, StrategyKind, TrainConfig};

fn main() -> myriad_al::Result<()> {
    let dataset = myriad_al::generate_synthetic(9, 200, 32, 8.0, &mut Rng::seed_from(0))?;
    let Split { train, test } = split(&dataset, &SplitSpec::new(0.8, 1))?;
    println!("{} samples, {} in the pool, {} held out", dataset.len(), train.len(), test.len());

    let config = EngineConfig {
        train: TrainConfig::synthetic(),
        ..EngineConfig::default()
    };
    let split = Split { train, test };
    let record = run_al(&dataset, &split, Strategy::from(StrategyKind::Mal), 10, &config, 1)?;
    for c in &record.cycles {
        println!(
            "cycle {:>2}  labels {:>3}  accuracy {:.4}  macro-F1 {:.4}{}",
            c.cycle,
            c.labels_used,
            c.accuracy,
            c.macro_f1,
            if c.fallback { "  (guard reset)" } else { "" }
        );
    }
    Ok(())
}
