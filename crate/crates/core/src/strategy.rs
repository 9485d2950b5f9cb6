//! Query selection: the margin-entropy sub-array selector with pseudo-label
//! diversity, and the baseline strategies it is compared against.
//!
//! Every strategy implements the same contract through [`Strategy::select`]:
//! given the unlabelled pool, the current model outputs and a quota `k`, it
//! returns a [`QueryPlan`] of distinct pool members.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::head::argmax;
use crate::kmeans::{self, gather_rows};
use crate::rng::Rng;
use crate::uncertainty::{self, Measure};

/// Outcome of one selection round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryPlan {
    /// Selected samples, in selection order. Positions into the ranked pool
    /// for [`mal_select`], dataset indices for [`Strategy::select`].
    pub query: Vec<usize>,
    /// Pseudo-labels consumed by the diversity guard, in order.
    pub guard: Vec<usize>,
    /// The guard set had to be cleared to reach the quota.
    pub fallback_triggered: bool,
    /// Sub-array each selected sample came from.
    pub sources: Vec<usize>,
    /// High-confidence `(dataset index, predicted class)` pairs offered for
    /// temporary training (CEAL only).
    pub pseudo_labelled: Vec<(usize, usize)>,
}

/// Pool positions ranked by descending uncertainty and cut into contiguous
/// sub-arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPool {
    pub alpha: Vec<f64>,
    pub beta: Vec<usize>,
    /// Sub-array sizes; the first `N mod K` are one longer than the rest.
    pub sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl RankedPool {
    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn num_subarrays(&self) -> usize {
        self.sizes.len()
    }

    pub fn subarray(&self, n: usize) -> &[usize] {
        &self.beta[self.offsets[n]..self.offsets[n] + self.sizes[n]]
    }
}

/// Sizes of `parts` near-equal contiguous slices of `n` items.
pub fn subarray_sizes(n: usize, parts: usize) -> Vec<usize> {
    let base = n / parts;
    let extra = n % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Scores by margin-entropy and splits into `k` sub-arrays.
pub fn rank_pool(probas: &[Vec<f64>], k: usize) -> Result<RankedPool> {
    rank_pool_by(probas, k, Measure::MarginEntropy)
}

/// Stable descending argsort of `measure` scores (lower position wins
/// ties), split into `parts` sub-arrays.
pub fn rank_pool_by(probas: &[Vec<f64>], parts: usize, measure: Measure) -> Result<RankedPool> {
    if probas.is_empty() {
        return Err(Error::EmptyPool);
    }
    if parts == 0 {
        return Err(Error::config("number of sub-arrays must be at least 1"));
    }
    let alpha = probas
        .iter()
        .map(|p| measure.ranking_key(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(rank_scores(alpha, parts))
}

/// Ranks precomputed scores (larger = more uncertain).
pub fn rank_scores(alpha: Vec<f64>, parts: usize) -> RankedPool {
    let mut beta: Vec<usize> = (0..alpha.len()).collect();
    beta.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]));
    let sizes = subarray_sizes(alpha.len(), parts);
    let offsets = sizes
        .iter()
        .scan(0, |acc, &s| {
            let start = *acc;
            *acc += s;
            Some(start)
        })
        .collect();
    RankedPool {
        alpha,
        beta,
        sizes,
        offsets,
    }
}

/// Round-robin over the sub-arrays, taking from each the most uncertain
/// unselected sample whose pseudo-label has not been used yet this round.
///
/// `pseudo` is indexed by pool position. When a full pass over every
/// sub-array accepts nothing, the used-label set is cleared and
/// `fallback_triggered` is set. With `use_guard == false` pseudo-labels are
/// ignored. Returns pool positions; the quota is `min(k, N)`.
pub fn mal_select(ranked: &RankedPool, pseudo: &[usize], k: usize, use_guard: bool) -> Result<QueryPlan> {
    let n = ranked.len();
    if pseudo.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: pseudo.len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyPool);
    }
    let parts = ranked.num_subarrays();
    let target = k.min(n);
    let label_space = pseudo.iter().copied().max().unwrap_or(0) + 1;
    let mut used = vec![false; label_space];
    let mut taken = vec![false; n];
    // first slot in each sub-array that might still be free
    let mut cursors = vec![0usize; parts];
    let mut plan = QueryPlan::default();
    let mut cursor_n = 0;
    let mut misses = 0;
    while plan.query.len() < target {
        let sub = ranked.subarray(cursor_n);
        let start = &mut cursors[cursor_n];
        while *start < sub.len() && taken[sub[*start]] {
            *start += 1;
        }
        let found = sub[*start..]
            .iter()
            .copied()
            .find(|&i| !taken[i] && !(use_guard && used[pseudo[i]]));
        match found {
            Some(i) => {
                taken[i] = true;
                plan.query.push(i);
                plan.sources.push(cursor_n);
                if use_guard {
                    used[pseudo[i]] = true;
                    plan.guard.push(pseudo[i]);
                }
                misses = 0;
            }
            None => {
                misses += 1;
                if misses >= parts {
                    used.iter_mut().for_each(|u| *u = false);
                    plan.fallback_triggered = true;
                    misses = 0;
                }
            }
        }
        cursor_n = if cursor_n + 1 >= parts { 0 } else { cursor_n + 1 };
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Mal,
    Random,
    Margin,
    Entropy,
    VarRatio,
    Ceal,
    KMeans,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Mal,
        StrategyKind::Random,
        StrategyKind::Margin,
        StrategyKind::Entropy,
        StrategyKind::VarRatio,
        StrategyKind::Ceal,
        StrategyKind::KMeans,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Mal => "mal",
            StrategyKind::Random => "random",
            StrategyKind::Margin => "margin",
            StrategyKind::Entropy => "entropy",
            StrategyKind::VarRatio => "varratio",
            StrategyKind::Ceal => "ceal",
            StrategyKind::KMeans => "kmeans",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// Component switches for the margin-entropy selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MalOptions {
    pub pseudo_guard: bool,
    pub subarrays: bool,
    pub measure: Measure,
}

impl Default for MalOptions {
    fn default() -> Self {
        Self {
            pseudo_guard: true,
            subarrays: true,
            measure: Measure::MarginEntropy,
        }
    }
}

/// Confidence threshold schedule `delta_t = (delta0 - t * step) * ln K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CealOptions {
    pub delta0: f64,
    pub delta_step: f64,
}

impl Default for CealOptions {
    fn default() -> Self {
        Self {
            delta0: 0.05,
            delta_step: 0.0033,
        }
    }
}

impl CealOptions {
    pub fn threshold(&self, cycle: usize, k_classes: usize) -> f64 {
        (self.delta0 - cycle as f64 * self.delta_step) * (k_classes as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    Mal(MalOptions),
    Random,
    Margin,
    Entropy,
    VarRatio,
    Ceal(CealOptions),
    KMeans,
}

impl From<StrategyKind> for Strategy {
    fn from(kind: StrategyKind) -> Self {
        match kind {
            StrategyKind::Mal => Strategy::Mal(MalOptions::default()),
            StrategyKind::Random => Strategy::Random,
            StrategyKind::Margin => Strategy::Margin,
            StrategyKind::Entropy => Strategy::Entropy,
            StrategyKind::VarRatio => Strategy::VarRatio,
            StrategyKind::Ceal => Strategy::Ceal(CealOptions::default()),
            StrategyKind::KMeans => Strategy::KMeans,
        }
    }
}

/// What a strategy may look at when choosing queries.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInput<'a> {
    pub dataset: &'a EmbeddingDataset,
    /// Unlabelled dataset indices.
    pub pool: &'a [usize],
    /// Class probabilities aligned with `pool`, absent before the first fit.
    pub probas: Option<&'a [Vec<f64>]>,
    /// Pseudo-labels aligned with `pool`.
    pub pseudo: Option<&'a [usize]>,
    /// Index of the cycle being selected (1-based).
    pub cycle: usize,
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Mal(_) => StrategyKind::Mal,
            Strategy::Random => StrategyKind::Random,
            Strategy::Margin => StrategyKind::Margin,
            Strategy::Entropy => StrategyKind::Entropy,
            Strategy::VarRatio => StrategyKind::VarRatio,
            Strategy::Ceal(_) => StrategyKind::Ceal,
            Strategy::KMeans => StrategyKind::KMeans,
        }
    }

    /// Whether the strategy reads model outputs.
    pub fn needs_model(&self) -> bool {
        !matches!(self, Strategy::Random | Strategy::KMeans)
    }

    pub fn select(&self, input: &SelectionInput<'_>, k: usize, rng: &mut Rng) -> Result<QueryPlan> {
        let pool = input.pool;
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let k = k.min(pool.len());
        let probas = || -> Result<&[Vec<f64>]> {
            let p = input.probas.ok_or(Error::ColdStartRequired)?;
            if p.len() != pool.len() {
                return Err(Error::DimensionMismatch {
                    expected: pool.len(),
                    got: p.len(),
                });
            }
            Ok(p)
        };
        let mut plan = match self {
            Strategy::Mal(opts) => {
                let probas = probas()?;
                let owned;
                let pseudo = match input.pseudo {
                    Some(p) => p,
                    None => {
                        owned = probas.iter().map(|p| argmax(p)).collect::<Vec<_>>();
                        &owned
                    }
                };
                let parts = if opts.subarrays { k.max(1) } else { 1 };
                let ranked = rank_pool_by(probas, parts, opts.measure)?;
                mal_select(&ranked, pseudo, k, opts.pseudo_guard)?
            }
            Strategy::Random => QueryPlan {
                query: rng.sample_indices(pool.len(), k),
                ..QueryPlan::default()
            },
            Strategy::Margin => top_k(probas()?, k, Measure::Margin)?,
            Strategy::Entropy => top_k(probas()?, k, Measure::Entropy)?,
            Strategy::VarRatio => top_k(probas()?, k, Measure::VarRatio)?,
            Strategy::Ceal(opts) => {
                let probas = probas()?;
                let mut plan = top_k(probas, k, Measure::Entropy)?;
                let threshold = opts.threshold(input.cycle, input.dataset.k_classes());
                let mut chosen = vec![false; pool.len()];
                plan.query.iter().for_each(|&q| chosen[q] = true);
                for (pos, p) in probas.iter().enumerate() {
                    if !chosen[pos] && uncertainty::entropy(p)? < threshold {
                        plan.pseudo_labelled.push((pool[pos], argmax(p)));
                    }
                }
                plan
            }
            Strategy::KMeans => kmeans_pick(input, k, rng)?,
        };
        plan.query.iter_mut().for_each(|q| *q = pool[*q]);
        Ok(plan)
    }
}

/// `k` highest-ranked pool positions under `measure`, stable on ties.
fn top_k(probas: &[Vec<f64>], k: usize, measure: Measure) -> Result<QueryPlan> {
    let ranked = rank_pool_by(probas, 1, measure)?;
    Ok(QueryPlan {
        query: ranked.beta[..k].to_vec(),
        ..QueryPlan::default()
    })
}

/// Clusters the pool into `k` groups and draws one random member of each.
fn kmeans_pick(input: &SelectionInput<'_>, k: usize, rng: &mut Rng) -> Result<QueryPlan> {
    let dim = input.dataset.dim();
    let points = gather_rows(input.dataset.features(), dim, input.pool);
    let result = kmeans::kmeans(&points, dim, k, rng, kmeans::DEFAULT_MAX_ITER, kmeans::DEFAULT_TOL)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (pos, &c) in result.assignment.iter().enumerate() {
        members[c].push(pos);
    }
    let mut taken = vec![false; input.pool.len()];
    let mut plan = QueryPlan::default();
    for (c, group) in members.iter().enumerate() {
        let pos = if group.is_empty() {
            let free: Vec<usize> = (0..taken.len()).filter(|&i| !taken[i]).collect();
            free[rng.below(free.len())]
        } else {
            group[rng.below(group.len())]
        };
        taken[pos] = true;
        plan.query.push(pos);
        plan.sources.push(c);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descending(n: usize) -> RankedPool {
        rank_scores((0..n).map(|i| (n - i) as f64).collect(), 2)
    }

    #[test]
    fn split_sizes() {
        assert_eq!(subarray_sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(subarray_sizes(2, 4), vec![1, 1, 0, 0]);
    }

    #[test]
    fn argsort_descending_and_stable() {
        assert_eq!(rank_scores(vec![1.0, 3.0, 2.0], 1).beta, vec![1, 2, 0]);
        assert_eq!(rank_scores(vec![2.0; 4], 2).beta, vec![0, 1, 2, 3]);
    }

    #[test]
    fn guard_skips_repeated_label() {
        let ranked = descending(6);
        let (a, b) = (0, 1);
        let plan = mal_select(&ranked, &[a, a, b, a, b, b], 2, true).unwrap();
        assert_eq!(plan.query, vec![0, 4]);
        assert_eq!(plan.guard, vec![a, b]);
        assert!(!plan.fallback_triggered);
        assert_eq!(plan.sources, vec![0, 1]);
    }

    #[test]
    fn identical_labels_trigger_fallback() {
        let ranked = rank_scores((0..9).map(|i| (9 - i) as f64).collect(), 3);
        let plan = mal_select(&ranked, &[7; 9], 3, true).unwrap();
        assert_eq!(plan.query, vec![0, 3, 6]);
        assert!(plan.fallback_triggered);
    }

    #[test]
    fn single_slot_takes_global_top() {
        let ranked = rank_scores(vec![0.3, 0.9, 0.1], 1);
        let plan = mal_select(&ranked, &[0, 1, 2], 1, true).unwrap();
        assert_eq!(plan.query, vec![1]);
    }

    #[test]
    fn margin_baseline_picks_smallest_margin() {
        let ds = EmbeddingDataset::new(vec![0.0, 0.0], 1, vec![None, None], 2).unwrap();
        let probas = vec![vec![0.9, 0.1], vec![0.6, 0.4]];
        let input = SelectionInput {
            dataset: &ds,
            pool: &[0, 1],
            probas: Some(&probas),
            pseudo: None,
            cycle: 2,
        };
        let plan = Strategy::Margin.select(&input, 1, &mut Rng::seed_from(0)).unwrap();
        assert_eq!(plan.query, vec![1]);
    }

    #[test]
    fn ceal_huge_threshold_takes_everything_else() {
        let ds = EmbeddingDataset::new(vec![0.0; 4], 1, vec![None; 4], 2).unwrap();
        let probas = vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.2, 0.8], vec![0.5, 0.5]];
        let pool = [0, 1, 2, 3];
        let input = SelectionInput {
            dataset: &ds,
            pool: &pool,
            probas: Some(&probas),
            pseudo: None,
            cycle: 2,
        };
        let ceal = Strategy::Ceal(CealOptions {
            delta0: 1e9,
            delta_step: 0.0,
        });
        let plan = ceal.select(&input, 1, &mut Rng::seed_from(0)).unwrap();
        assert_eq!(plan.query, vec![3]);
        assert_eq!(plan.pseudo_labelled, vec![(0, 0), (1, 0), (2, 1)]);
    }

    #[test]
    fn random_is_reproducible() {
        let ds = EmbeddingDataset::new(vec![0.0; 20], 1, vec![None; 20], 2).unwrap();
        let pool: Vec<usize> = (0..20).collect();
        let input = SelectionInput {
            dataset: &ds,
            pool: &pool,
            probas: None,
            pseudo: None,
            cycle: 1,
        };
        let a = Strategy::Random.select(&input, 5, &mut Rng::seed_from(9)).unwrap();
        let b = Strategy::Random.select(&input, 5, &mut Rng::seed_from(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_strategies_need_probas() {
        let ds = EmbeddingDataset::new(vec![0.0; 3], 1, vec![None; 3], 2).unwrap();
        let input = SelectionInput {
            dataset: &ds,
            pool: &[0, 1, 2],
            probas: None,
            pseudo: None,
            cycle: 1,
        };
        assert!(matches!(
            Strategy::Entropy.select(&input, 1, &mut Rng::seed_from(0)),
            Err(Error::ColdStartRequired)
        ));
    }

    #[test]
    fn parse_kinds() {
        for kind in StrategyKind::ALL {
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        assert!(matches!("vaal".parse::<StrategyKind>(), Err(Error::UnknownStrategy(_))));
    }
}
