//! Lloyd's k-means with k-means++ seeding, plus the prototype-per-cluster
//! cold-start query.

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k: usize,
    pub dim: usize,
    /// `k x dim`, row-major.
    pub centroids: Vec<f64>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, seeding included.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

pub(crate) fn sq_dist(x: &[f32], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(&a, &b)| {
            let d = a as f64 - b;
            d * d
        })
        .sum()
}

fn assign_step(points: &[f32], dim: usize, centroids: &[f64]) -> (Vec<usize>, Vec<f64>, f64) {
    let mut assignment = Vec::with_capacity(points.len() / dim);
    let mut dists = Vec::with_capacity(points.len() / dim);
    for x in points.chunks_exact(dim) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
            let d = sq_dist(x, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment.push(best);
        dists.push(best_d);
    }
    let inertia = dists.iter().sum();
    (assignment, dists, inertia)
}

/// Means of each cluster. An empty cluster is re-seeded at the point that is
/// farthest from its nearest centroid (each such point used at most once).
fn update_step(
    points: &[f32],
    dim: usize,
    k: usize,
    assignment: &[usize],
    dists: &[f64],
) -> Vec<f64> {
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (x, &a) in points.chunks_exact(dim).zip(assignment) {
        counts[a] += 1;
        for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(x) {
            *s += v as f64;
        }
    }
    let mut spare = dists.to_vec();
    for c in 0..k {
        let row = &mut sums[c * dim..(c + 1) * dim];
        if counts[c] > 0 {
            let n = counts[c] as f64;
            row.iter_mut().for_each(|s| *s /= n);
        } else {
            let mut far = 0;
            for (i, &d) in spare.iter().enumerate() {
                if d > spare[far] {
                    far = i;
                }
            }
            spare[far] = f64::NEG_INFINITY;
            for (s, &v) in row.iter_mut().zip(&points[far * dim..(far + 1) * dim]) {
                *s = v as f64;
            }
        }
    }
    sums
}

fn plus_plus_seed(points: &[f32], dim: usize, k: usize, rng: &mut Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids: Vec<f64> = Vec::with_capacity(k * dim);
    let first = rng.below(n);
    centroids.extend(row(first).iter().map(|&v| v as f64));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim])).collect();
    for c in 1..k {
        let pick = rng.weighted_index(&nearest);
        centroids.extend(row(pick).iter().map(|&v| v as f64));
        let new_c = &centroids[c * dim..(c + 1) * dim];
        for (i, d) in nearest.iter_mut().enumerate() {
            let dn = sq_dist(row(i), new_c);
            if dn < *d {
                *d = dn;
            }
        }
    }
    centroids
}

/// Clusters the rows of a row-major `points` matrix with `dim` columns.
///
/// Stops after `max_iter` Lloyd iterations, when an iteration leaves the
/// assignment unchanged, or when the relative inertia improvement falls to
/// `tol` or below.
pub fn kmeans(
    points: &[f32],
    dim: usize,
    k: usize,
    rng: &mut Rng,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(Error::input("points must be a non-empty row-major matrix"));
    }
    let n = points.len() / dim;
    if k == 0 || n < k {
        return Err(Error::config(format!(
            "k-means needs 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    let mut centroids = plus_plus_seed(points, dim, k, rng);
    let (mut assignment, mut dists, mut inertia) = assign_step(points, dim, &centroids);
    let mut history = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let next = update_step(points, dim, k, &assignment, &dists);
        let (a, d, i) = assign_step(points, dim, &next);
        let changed = a != assignment;
        let improvement = inertia - i;
        let previous = inertia;
        centroids = next;
        assignment = a;
        dists = d;
        inertia = i;
        history.push(inertia);
        if !changed || improvement <= tol * previous {
            break;
        }
    }
    Ok(KMeansResult {
        k,
        dim,
        centroids,
        assignment,
        inertia,
        inertia_history: history,
        iterations,
    })
}

/// Gathers the rows at `indices` into a dense row-major matrix.
pub fn gather_rows(features: &[f32], dim: usize, indices: &[usize]) -> Vec<f32> {
    let mut out = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        out.extend_from_slice(&features[i * dim..(i + 1) * dim]);
    }
    out
}

/// One prototype per cluster: the member nearest its centroid, lowest
/// position on ties. Returned positions index the rows of `points`, in
/// cluster order. A cluster left empty (only possible with duplicate points)
/// takes the nearest not-yet-chosen row instead.
pub fn cold_start_query(result: &KMeansResult, points: &[f32]) -> Result<Vec<usize>> {
    let dim = result.dim;
    let n = points.len() / dim;
    if n != result.assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: result.assignment.len(),
            got: n,
        });
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut picks: Vec<Option<usize>> = vec![None; result.k];
    let mut best_d = vec![f64::INFINITY; result.k];
    for (i, &c) in result.assignment.iter().enumerate() {
        let d = sq_dist(row(i), result.centroid(c));
        if d < best_d[c] {
            best_d[c] = d;
            picks[c] = Some(i);
        }
    }
    let mut taken = vec![false; n];
    for p in picks.iter().flatten() {
        taken[*p] = true;
    }
    for c in 0..result.k {
        if picks[c].is_none() {
            let mut best: Option<(usize, f64)> = None;
            for i in (0..n).filter(|&i| !taken[i]) {
                let d = sq_dist(row(i), result.centroid(c));
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            let (i, _) = best.ok_or(Error::EmptyPool)?;
            taken[i] = true;
            picks[c] = Some(i);
        }
    }
    Ok(picks.into_iter().map(Option::unwrap).collect())
}
