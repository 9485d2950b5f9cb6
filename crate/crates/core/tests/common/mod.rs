//! Independent reference evaluators used as test oracles. Nothing here calls
//! into the library code paths it is used to check.

#![allow(dead_code)]

use myriad_al::Rng;

pub const MARGIN_CLAMP: f64 = 1e-12;

pub fn oracle_margin(p: &[f64]) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted[0] - sorted[1]
}

pub fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x != 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

pub fn oracle_varratio(p: &[f64]) -> f64 {
    let mut best = p[0];
    for &x in p {
        if x > best {
            best = x;
        }
    }
    1.0 - best
}

pub fn oracle_margin_entropy(p: &[f64]) -> f64 {
    let m = oracle_margin(p);
    let m = if m < MARGIN_CLAMP { MARGIN_CLAMP } else { m };
    1.0 / m + oracle_entropy(p)
}

/// Uniform draw from the probability simplex (flat Dirichlet).
pub fn random_simplex(rng: &mut Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Regularised mean cross-entropy evaluated straight from its definition,
/// with `W` given as `k` rows of length `d`.
pub fn oracle_loss(w: &[Vec<f64>], b: &[f64], xs: &[Vec<f64>], ys: &[usize], wd: f64) -> f64 {
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[y];
    }
    let l2: f64 = w.iter().flatten().map(|v| v * v).sum();
    total / xs.len() as f64 + wd * l2
}

/// Literal transcription of the sub-array selection pseudocode, including
/// the guard-reset termination rule: after a full round over every
/// sub-array with no acceptance, the used-label list is emptied.
/// Returns the selected positions and whether the reset fired.
pub fn reference_mal(alpha: &[f64], pseudo: &[usize], k: usize, parts: usize) -> (Vec<usize>, bool) {
    let n_items = alpha.len();
    // argsort descending; lowest index wins ties
    let mut beta: Vec<usize> = Vec::new();
    let mut used = vec![false; n_items];
    for _ in 0..n_items {
        let mut best: Option<usize> = None;
        for i in 0..n_items {
            if used[i] {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(j) if alpha[i] > alpha[j] => best = Some(i),
                _ => {}
            }
        }
        let j = best.unwrap();
        used[j] = true;
        beta.push(j);
    }
    // split into `parts` approximately equal sub-arrays, longer ones first
    let mut subarrays: Vec<Vec<usize>> = Vec::new();
    let mut start = 0;
    for p in 0..parts {
        let len = n_items / parts + if p < n_items % parts { 1 } else { 0 };
        subarrays.push(beta[start..start + len].to_vec());
        start += len;
    }

    let quota = k.min(n_items);
    let mut q: Vec<usize> = Vec::new();
    let mut s: Vec<usize> = Vec::new();
    let mut n = 0;
    let mut misses = 0;
    let mut reset = false;
    while q.len() < quota {
        let mut accepted = false;
        for &i in &subarrays[n] {
            if !q.contains(&i) && !s.contains(&pseudo[i]) {
                q.push(i);
                s.push(pseudo[i]);
                accepted = true;
                break;
            }
        }
        if accepted {
            misses = 0;
        } else {
            misses += 1;
            if misses == parts {
                s.clear();
                reset = true;
                misses = 0;
            }
        }
        if n >= parts - 1 {
            n = 0;
        } else {
            n += 1;
        }
    }
    (q, reset)
}
