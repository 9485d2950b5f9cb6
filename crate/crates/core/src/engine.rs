//! The closed active-learning loop: cold start, query, oracle labelling,
//! head refit, evaluation and pseudo-label refresh, one cycle at a time.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{EmbeddingDataset, Split};
use crate::error::{Error, Result};
use crate::head::{LinearHead, TrainConfig};
use crate::kmeans::{self, gather_rows};
use crate::metrics::ConfusionMatrix;
use crate::rng::Rng;
use crate::strategy::{QueryPlan, SelectionInput, Strategy, StrategyKind};

/// Settings shared by every strategy in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub train: TrainConfig,
    /// Model-driven baselines start from `K` random labels instead of the
    /// k-means prototypes. The margin-entropy selector always uses k-means.
    pub baseline_seed: bool,
    /// Gaussian noise added to every feature before the run (ablation).
    pub feature_noise: Option<f64>,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::nct(),
            baseline_seed: false,
            feature_noise: None,
            kmeans_max_iter: kmeans::DEFAULT_MAX_ITER,
            kmeans_tol: kmeans::DEFAULT_TOL,
        }
    }
}

/// How the first, model-free query is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColdStart {
    KMeans,
    Random,
}

impl ColdStart {
    pub fn for_strategy(strategy: &Strategy, config: &EngineConfig) -> Self {
        match strategy.kind() {
            StrategyKind::Mal => ColdStart::KMeans,
            StrategyKind::Random => ColdStart::Random,
            _ if config.baseline_seed => ColdStart::Random,
            _ => ColdStart::KMeans,
        }
    }
}

/// Ground-truth label source with a hard call budget.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    labels: &'a [Option<usize>],
    budget_remaining: usize,
    calls: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(dataset: &'a EmbeddingDataset, budget: usize) -> Self {
        Self {
            labels: dataset.labels(),
            budget_remaining: budget,
            calls: 0,
        }
    }

    pub fn answer(&mut self, index: usize) -> Result<usize> {
        if self.budget_remaining == 0 {
            return Err(Error::config("annotation budget exhausted"));
        }
        let label = self
            .labels
            .get(index)
            .copied()
            .flatten()
            .ok_or_else(|| Error::input(format!("sample {index} has no ground-truth label")))?;
        self.budget_remaining -= 1;
        self.calls += 1;
        Ok(label)
    }

    pub fn budget_remaining(&self) -> usize {
        self.budget_remaining
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

/// Unlabelled pool, labelled set and pseudo-labels after `cycle` cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    /// Sorted ascending.
    pub unlabelled: Vec<usize>,
    /// `(index, oracle label)` in labelling order.
    pub labelled: Vec<(usize, usize)>,
    /// Pseudo-label of each `unlabelled[i]`; empty before the first fit.
    pub pseudo: Vec<usize>,
    pub cycle: usize,
}

impl PoolState {
    pub fn new(train: &[usize]) -> Self {
        let mut unlabelled = train.to_vec();
        unlabelled.sort_unstable();
        Self {
            unlabelled,
            labelled: Vec::new(),
            pseudo: Vec::new(),
            cycle: 0,
        }
    }

    pub fn pseudo_of(&self, index: usize) -> Option<usize> {
        let pos = self.unlabelled.binary_search(&index).ok()?;
        self.pseudo.get(pos).copied()
    }

    fn move_to_labelled(&mut self, query: &[usize], oracle: &mut Oracle<'_>) -> Result<()> {
        for &i in query {
            let pos = self
                .unlabelled
                .binary_search(&i)
                .map_err(|_| Error::input(format!("queried sample {i} is not unlabelled")))?;
            let label = oracle.answer(i)?;
            self.unlabelled.remove(pos);
            self.labelled.push((i, label));
        }
        self.pseudo.clear();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Oracle,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingExample {
    pub index: usize,
    pub label: usize,
    pub source: LabelSource,
}

/// Labelled set plus temporary pseudo-labelled samples for one fit.
pub fn ceal_augment(labelled: &[(usize, usize)], high_confidence: &[(usize, usize)]) -> Vec<TrainingExample> {
    labelled
        .iter()
        .map(|&(index, label)| TrainingExample {
            index,
            label,
            source: LabelSource::Oracle,
        })
        .chain(high_confidence.iter().map(|&(index, label)| TrainingExample {
            index,
            label,
            source: LabelSource::Pseudo,
        }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
}

pub fn evaluate(head: &LinearHead, dataset: &EmbeddingDataset, test: &[usize]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut confusion = ConfusionMatrix::new(dataset.k_classes());
    for &i in test {
        let truth = dataset
            .label(i)
            .ok_or_else(|| Error::input(format!("test sample {i} has no label")))?;
        confusion.record(truth, head.predict(dataset.row(i))?)?;
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        macro_f1: confusion.macro_f1(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub labels_used: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub fallback: bool,
    /// Temporary pseudo-labelled samples used in this cycle's fit.
    pub pseudo_labelled: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub seed: u64,
    pub config_hash: String,
    pub cycles: Vec<CycleRecord>,
}

impl RunRecord {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.cycles.last().map(|c| c.accuracy)
    }
}

/// Short SHA-256 digest of everything that determines a run.
pub fn config_hash(label: &str, strategy: &Strategy, shots: usize, config: &EngineConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update(format!("{strategy:?}").as_bytes());
    hasher.update(shots.to_le_bytes());
    hasher.update(serde_json::to_vec(config).unwrap_or_default());
    hex::encode(&hasher.finalize()[..8])
}

/// Everything one cycle produced, for callers that step the loop manually.
#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub record: CycleRecord,
    pub plan: QueryPlan,
}

/// Drives one run cycle by cycle.
///
/// Draw order from the run generator: feature noise (if any) once up front,
/// then per cycle the selection draws followed by the Xavier init and batch
/// shuffles of the refit.
pub struct ActiveLearner<'a> {
    dataset: Cow<'a, EmbeddingDataset>,
    test: Vec<usize>,
    strategy: Strategy,
    config: EngineConfig,
    k: usize,
    shots: usize,
    state: PoolState,
    oracle: Oracle<'a>,
    head: Option<LinearHead>,
    probas: Vec<Vec<f64>>,
    rng: Rng,
}

impl<'a> ActiveLearner<'a> {
    pub fn new(
        dataset: &'a EmbeddingDataset,
        split: &Split,
        strategy: Strategy,
        shots: usize,
        config: EngineConfig,
        seed: u64,
    ) -> Result<Self> {
        config.train.validate()?;
        if shots == 0 {
            return Err(Error::config("shots must be at least 1"));
        }
        let k = dataset.k_classes();
        let budget = shots
            .checked_mul(k)
            .ok_or_else(|| Error::config("budget overflows"))?;
        if split.train.len() < budget {
            return Err(Error::config(format!(
                "budget of {budget} labels exceeds the {} training samples",
                split.train.len()
            )));
        }
        if split.test.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let n = dataset.len();
        if split.train.iter().chain(&split.test).any(|&i| i >= n) {
            return Err(Error::input("split refers to samples outside the dataset"));
        }
        let mut rng = Rng::seed_from(seed);
        let features = match config.feature_noise {
            Some(sigma) if sigma > 0.0 => Cow::Owned(dataset.with_feature_noise(sigma, &mut rng)),
            _ => Cow::Borrowed(dataset),
        };
        Ok(Self {
            dataset: features,
            test: split.test.clone(),
            strategy,
            config,
            k,
            shots,
            state: PoolState::new(&split.train),
            oracle: Oracle::new(dataset, budget),
            head: None,
            probas: Vec::new(),
            rng,
        })
    }

    pub fn state(&self) -> &PoolState {
        &self.state
    }

    pub fn oracle(&self) -> &Oracle<'a> {
        &self.oracle
    }

    pub fn head(&self) -> Option<&LinearHead> {
        self.head.as_ref()
    }

    /// Features the run actually sees (noisy when feature noise is on).
    pub fn dataset(&self) -> &EmbeddingDataset {
        self.dataset.as_ref()
    }

    /// Class probabilities of the current head, aligned with the pool.
    pub fn probas(&self) -> &[Vec<f64>] {
        &self.probas
    }

    pub fn is_done(&self) -> bool {
        self.state.cycle >= self.shots
    }

    fn select(&mut self) -> Result<QueryPlan> {
        let pool = &self.state.unlabelled;
        let dataset = self.dataset.as_ref();
        if self.head.is_none() {
            return match ColdStart::for_strategy(&self.strategy, &self.config) {
                ColdStart::KMeans => {
                    let dim = dataset.dim();
                    let points = gather_rows(dataset.features(), dim, pool);
                    let clusters = kmeans::kmeans(
                        &points,
                        dim,
                        self.k,
                        &mut self.rng,
                        self.config.kmeans_max_iter,
                        self.config.kmeans_tol,
                    )?;
                    let picks = kmeans::cold_start_query(&clusters, &points)?;
                    Ok(QueryPlan {
                        query: picks.iter().map(|&p| pool[p]).collect(),
                        sources: (0..self.k).collect(),
                        ..QueryPlan::default()
                    })
                }
                ColdStart::Random => Ok(QueryPlan {
                    query: self
                        .rng
                        .sample_indices(pool.len(), self.k)
                        .into_iter()
                        .map(|p| pool[p])
                        .collect(),
                    ..QueryPlan::default()
                }),
            };
        }
        let input = SelectionInput {
            dataset,
            pool,
            probas: Some(&self.probas),
            pseudo: Some(&self.state.pseudo),
            cycle: self.state.cycle + 1,
        };
        self.strategy.select(&input, self.k, &mut self.rng)
    }

    /// Runs one cycle: select `K` samples, label them, refit the head from a
    /// fresh Xavier draw, evaluate, and refresh pseudo-labels.
    pub fn step(&mut self) -> Result<CycleOutcome> {
        if self.is_done() {
            return Err(Error::config("annotation budget exhausted"));
        }
        let started = Instant::now();
        let plan = self.select()?;
        self.state.move_to_labelled(&plan.query, &mut self.oracle)?;
        self.state.cycle += 1;

        let training: Vec<(usize, usize)> = ceal_augment(&self.state.labelled, &plan.pseudo_labelled)
            .into_iter()
            .map(|e| (e.index, e.label))
            .collect();
        let dataset = self.dataset.as_ref();
        let head = LinearHead::init_xavier(dataset.dim(), self.k, &mut self.rng);
        let (head, _) = head.train(dataset, &training, &self.config.train, &mut self.rng)?;
        let eval = evaluate(&head, dataset, &self.test)?;

        self.probas = head.predict_proba_rows(dataset, &self.state.unlabelled)?;
        self.state.pseudo = self.probas.iter().map(|p| crate::head::argmax(p)).collect();
        self.head = Some(head);

        let record = CycleRecord {
            cycle: self.state.cycle,
            labels_used: self.state.labelled.len(),
            accuracy: eval.accuracy,
            macro_f1: eval.macro_f1,
            fallback: plan.fallback_triggered,
            pseudo_labelled: plan.pseudo_labelled.len(),
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        };
        Ok(CycleOutcome { record, plan })
    }
}

/// Runs `shots` cycles of `K` queries each and records per-cycle test
/// metrics. `label` names the run in the record (usually the strategy).
pub fn run_al(
    dataset: &EmbeddingDataset,
    split: &Split,
    strategy: Strategy,
    shots: usize,
    config: &EngineConfig,
    seed: u64,
) -> Result<RunRecord> {
    run_al_labelled(dataset, split, strategy, strategy.kind().name(), shots, config, seed)
}

pub fn run_al_labelled(
    dataset: &EmbeddingDataset,
    split: &Split,
    strategy: Strategy,
    label: &str,
    shots: usize,
    config: &EngineConfig,
    seed: u64,
) -> Result<RunRecord> {
    let mut learner = ActiveLearner::new(dataset, split, strategy, shots, *config, seed)?;
    let mut cycles = Vec::with_capacity(shots);
    while !learner.is_done() {
        cycles.push(learner.step()?.record);
    }
    Ok(RunRecord {
        strategy: label.to_string(),
        seed,
        config_hash: config_hash(label, &strategy, shots, config),
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split, SplitSpec};

    fn fixture() -> (EmbeddingDataset, Split) {
        let ds = generate_synthetic(3, 30, 4, 6.0, &mut Rng::seed_from(2)).unwrap();
        let s = split(&ds, &SplitSpec::new(0.8, 2)).unwrap();
        (ds, s)
    }

    fn quick() -> EngineConfig {
        EngineConfig {
            train: TrainConfig {
                learning_rate: 0.01,
                epochs: 30,
                ..TrainConfig::nct()
            },
            ..EngineConfig::default()
        }
    }

    #[test]
    fn two_shots_three_classes() {
        let (ds, s) = fixture();
        let r = run_al(&ds, &s, StrategyKind::Mal.into(), 2, &quick(), 1).unwrap();
        assert_eq!(r.cycles.len(), 2);
        assert_eq!(r.cycles.last().unwrap().labels_used, 6);
    }

    #[test]
    fn budget_larger_than_pool_is_rejected() {
        let (ds, s) = fixture();
        assert!(matches!(
            run_al(&ds, &s, StrategyKind::Random.into(), 100, &quick(), 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn oracle_budget_is_hard() {
        let (ds, _) = fixture();
        let mut oracle = Oracle::new(&ds, 1);
        assert_eq!(oracle.answer(0).unwrap(), 0);
        assert!(oracle.answer(1).is_err());
        assert_eq!(oracle.calls(), 1);
    }

    #[test]
    fn augment_marks_provenance() {
        assert!(ceal_augment(&[(1, 0)], &[]).iter().all(|e| e.source == LabelSource::Oracle));
        let aug = ceal_augment(&[(1, 0), (2, 1)], &[(5, 1)]);
        assert_eq!(aug.len(), 3);
        assert_eq!(aug[2].source, LabelSource::Pseudo);
    }

    #[test]
    fn evaluate_rejects_empty_test() {
        let (ds, _) = fixture();
        assert!(matches!(
            evaluate(&LinearHead::zeros(4, 3), &ds, &[]),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn cold_start_modes() {
        let cfg = EngineConfig::default();
        assert_eq!(ColdStart::for_strategy(&StrategyKind::Mal.into(), &cfg), ColdStart::KMeans);
        assert_eq!(ColdStart::for_strategy(&StrategyKind::Random.into(), &cfg), ColdStart::Random);
        assert_eq!(ColdStart::for_strategy(&StrategyKind::Entropy.into(), &cfg), ColdStart::KMeans);
        let seeded = EngineConfig {
            baseline_seed: true,
            ..cfg
        };
        assert_eq!(ColdStart::for_strategy(&StrategyKind::Entropy.into(), &seeded), ColdStart::Random);
        assert_eq!(ColdStart::for_strategy(&StrategyKind::Mal.into(), &seeded), ColdStart::KMeans);
    }
}
