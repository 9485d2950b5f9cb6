//! Embedding datasets, random train/test splitting and synthetic data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// `N` feature vectors of dimension `d`, stored row-major as `f32`, with
/// optional ground-truth labels in `[0, k_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    features: Vec<f32>,
    dim: usize,
    labels: Vec<Option<usize>>,
    k_classes: usize,
    ids: Vec<u64>,
}

impl EmbeddingDataset {
    /// Builds a dataset with sequential ids `0..N`.
    pub fn new(
        features: Vec<f32>,
        dim: usize,
        labels: Vec<Option<usize>>,
        k_classes: usize,
    ) -> Result<Self> {
        let ids = (0..labels.len() as u64).collect();
        Self::with_ids(features, dim, labels, k_classes, ids)
    }

    pub fn with_ids(
        features: Vec<f32>,
        dim: usize,
        labels: Vec<Option<usize>>,
        k_classes: usize,
        ids: Vec<u64>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::input("dataset must contain at least one sample"));
        }
        if dim == 0 {
            return Err(Error::input("feature dimension must be at least 1"));
        }
        if k_classes == 0 {
            return Err(Error::input("k_classes must be at least 1"));
        }
        if features.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: features.len(),
            });
        }
        if ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ids.len(),
            });
        }
        if let Some((i, l)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= k_classes).map(|c| (i, c)))
        {
            return Err(Error::input(format!(
                "label {l} of sample {i} is not below k_classes = {k_classes}"
            )));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("sample ids must be unique"));
        }
        Ok(Self {
            features,
            dim,
            labels,
            k_classes,
            ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// Same samples with i.i.d. Gaussian noise of standard deviation `sigma`
    /// added to every coordinate. Used to degrade feature quality in
    /// ablations.
    pub fn with_feature_noise(&self, sigma: f64, rng: &mut Rng) -> Self {
        let features = self
            .features
            .iter()
            .map(|&x| (x as f64 + sigma * rng.standard_normal()) as f32)
            .collect();
        Self {
            features,
            ..self.clone()
        }
    }
}

/// Random train/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
        }
    }
}

/// Train/test index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Label-blind random split: `round(train_fraction * N)` samples go to
/// train. The partition depends only on `N` and the seed.
pub fn split(dataset: &EmbeddingDataset, spec: &SplitSpec) -> Result<Split> {
    split_n(dataset.len(), spec)
}

pub fn split_n(n: usize, spec: &SplitSpec) -> Result<Split> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::config(format!(
            "train_fraction must lie in (0, 1], got {f}"
        )));
    }
    if n == 0 {
        return Err(Error::input("cannot split an empty dataset"));
    }
    let n_train = ((f * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    Rng::seed_from(spec.seed).shuffle(&mut order);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Parameters of the Gaussian-cluster stand-in for frozen encoder features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    /// Parses `k=9,per_class=200,dim=32,sep=8[,seed=0]`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut k = None;
        let mut per_class = None;
        let mut dim = None;
        let mut sep = None;
        let mut seed = 0u64;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::config(format!("expected key=value, got `{part}`")))?;
            let bad = |_| Error::config(format!("bad value for `{key}`: `{value}`"));
            match key.trim() {
                "k" | "k_classes" => k = Some(value.trim().parse().map_err(bad)?),
                "per_class" | "n" => per_class = Some(value.trim().parse().map_err(bad)?),
                "dim" | "d" => dim = Some(value.trim().parse().map_err(bad)?),
                "sep" | "separation" => {
                    sep = Some(value.trim().parse().map_err(|_| {
                        Error::config(format!("bad value for `{key}`: `{value}`"))
                    })?)
                }
                "seed" => seed = value.trim().parse().map_err(bad)?,
                other => return Err(Error::config(format!("unknown synthetic key `{other}`"))),
            }
        }
        let missing = |name: &str| Error::config(format!("synthetic spec is missing `{name}`"));
        Ok(Self {
            k_classes: k.ok_or_else(|| missing("k"))?,
            per_class: per_class.ok_or_else(|| missing("per_class"))?,
            dim: dim.ok_or_else(|| missing("dim"))?,
            separation: sep.ok_or_else(|| missing("sep"))?,
            seed,
        })
    }

    pub fn generate(&self) -> Result<EmbeddingDataset> {
        generate_synthetic(
            self.k_classes,
            self.per_class,
            self.dim,
            self.separation,
            &mut Rng::seed_from(self.seed),
        )
    }
}

/// Class `c` is drawn from a unit-variance isotropic Gaussian centred at
/// `separation / sqrt(2) * e_c`, so every pair of centres is exactly
/// `separation` apart. Samples are grouped by class; ids are sequential.
pub fn generate_synthetic(
    k_classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    rng: &mut Rng,
) -> Result<EmbeddingDataset> {
    if k_classes < 2 || per_class < 1 || dim < 1 {
        return Err(Error::config(
            "synthetic data needs k_classes >= 2, per_class >= 1 and dim >= 1",
        ));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::config("separation must be finite and non-negative"));
    }
    if separation > 0.0 && dim < k_classes {
        return Err(Error::config(format!(
            "axis-aligned centres need dim >= k_classes ({dim} < {k_classes})"
        )));
    }
    let scale = separation / std::f64::consts::SQRT_2;
    let n = k_classes * per_class;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..k_classes {
        for _ in 0..per_class {
            for j in 0..dim {
                let centre = if j == c { scale } else { 0.0 };
                features.push((centre + rng.standard_normal()) as f32);
            }
            labels.push(Some(c));
        }
    }
    EmbeddingDataset::new(features, dim, labels, k_classes)
}
