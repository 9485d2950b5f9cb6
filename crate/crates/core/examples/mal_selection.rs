//! Walks through one margin-entropy selection: rank, split into sub-arrays,
//! then pick round-robin while avoiding repeated pseudo-labels.

use myriad_al::strategy::{mal_select, rank_scores};

fn main() -> myriad_al::Result<()> {
    // twelve pool samples, three classes
    let alpha = vec![9.0, 1.5, 7.2, 3.3, 8.8, 0.4, 5.1, 6.6, 2.2, 4.0, 7.9, 1.1];
    let pseudo = vec![0, 1, 0, 2, 0, 1, 2, 1, 0, 2, 0, 1];
    let k = 3;

    let ranked = rank_scores(alpha.clone(), k);
    for n in 0..ranked.num_subarrays() {
        let items: Vec<String> = ranked
            .subarray(n)
            .iter()
            .map(|&i| format!("#{i}(a={:.1},y={})", alpha[i], pseudo[i]))
            .collect();
        println!("sub-array {n}: {}", items.join(" "));
    }

    let plan = mal_select(&ranked, &pseudo, k, true)?;
    for ((q, src), y) in plan.query.iter().zip(&plan.sources).zip(&plan.guard) {
        println!("picked #{q} from sub-array {src} with pseudo-label {y}");
    }
    println!("guard reset: {}", plan.fallback_triggered);

    let greedy = mal_select(&ranked, &pseudo, k, false)?;
    println!("without the guard: {:?}", greedy.query);
    Ok(())
}
