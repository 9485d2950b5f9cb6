//! The first query, before any model exists: cluster the pool into K groups
//! and label the sample nearest each centroid.

use myriad_al::kmeans::{cold_start_query, kmeans, DEFAULT_MAX_ITER, DEFAULT_TOL};
use myriad_al::Rng;

fn main() -> myriad_al::Result<()> {
    let dataset = myriad_al::generate_synthetic(5, 100, 8, 6.0, &mut Rng::seed_from(4))?;
    let k = dataset.k_classes();
    let result = kmeans(dataset.features(), dataset.dim(), k, &mut Rng::seed_from(1), DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    println!("converged after {} iterations", result.iterations);
    println!("inertia per iteration: {:?}", result.inertia_history.iter().map(|v| v.round()).collect::<Vec<_>>());
    println!("cluster sizes: {:?}", result.cluster_sizes());

    let picks = cold_start_query(&result, dataset.features())?;
    for (c, &i) in picks.iter().enumerate() {
        println!("cluster {c}: sample {i}, true class {:?}", dataset.label(i).unwrap());
    }
    Ok(())
}
