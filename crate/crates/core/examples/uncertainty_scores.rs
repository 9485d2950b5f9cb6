//! Scores a few class distributions with every uncertainty measure.

use myriad_al::uncertainty::Measure;

fn main() -> myriad_al::Result<()> {
    let cases: [&[f64]; 4] = [
        &[0.98, 0.01, 0.01],
        &[0.5, 0.3, 0.2],
        &[0.45, 0.44, 0.11],
        &[0.25, 0.25, 0.25, 0.25],
    ];
    let measures = [Measure::Margin, Measure::Entropy, Measure::VarRatio, Measure::MarginEntropy];
    println!("{:<26} {:>10} {:>10} {:>10} {:>14}", "p", "margin", "entropy", "varratio", "margin-entropy");
    for p in cases {
        let scores = measures
            .iter()
            .map(|m| m.score(p).map(|s| s.value))
            .collect::<myriad_al::Result<Vec<f64>>>()?;
        println!(
            "{:<26} {:>10.4} {:>10.4} {:>10.4} {:>14.4e}",
            format!("{p:?}"),
            scores[0],
            scores[1],
            scores[2],
            scores[3]
        );
    }
    Ok(())
}
