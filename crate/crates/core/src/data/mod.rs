//! Labeled datasets and the operations that shape them into low-data
//! training sets: synthetic mixtures, per-class subsampling, stratified
//! splits, hand-crafted augmentation and file ingestion.

mod augment;
mod csv;
mod idx;
mod synthetic;

pub use self::augment::{traditional_augment, AugmentOp};
pub use self::csv::{load_csv, load_csv_with_scaling, ColumnScaling};
pub use self::idx::{load_idx, save_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use self::synthetic::{circle_means, gen_gaussian_mixture, MixtureSpec};

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::rng::seeded;
use crate::tensor::Tensor;

/// Shape of one sample's features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Vector { dim: usize },
    /// Row-major `h x w` grid with `c` interleaved channels.
    Grid { h: usize, w: usize, c: usize },
}

impl Layout {
    pub fn dim(self) -> usize {
        match self {
            Layout::Vector { dim } => dim,
            Layout::Grid { h, w, c } => h * w * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    /// 1-based class label.
    pub y: usize,
}

/// Immutable, validated collection of samples with values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    k: usize,
    layout: Layout,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, k: usize, layout: Layout) -> Result<Self> {
        if samples.is_empty() {
            return Err(DadaError::Config("empty dataset".into()));
        }
        if k == 0 {
            return Err(DadaError::Config("dataset needs at least one class".into()));
        }
        let dim = layout.dim();
        for (i, s) in samples.iter().enumerate() {
            if s.y == 0 || s.y > k {
                return Err(DadaError::Domain(format!("sample {i} has label {} outside 1..={k}", s.y)));
            }
            if s.x.len() != dim {
                return Err(DadaError::Dimension(format!(
                    "sample {i} has {} features, layout needs {dim}",
                    s.x.len()
                )));
            }
            if let Some(v) = s.x.iter().find(|v| !(v.abs() <= 1.0)) {
                return Err(DadaError::Domain(format!("sample {i} has value {v} outside [-1, 1]")));
            }
        }
        Ok(Dataset { samples, k, layout })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.y).collect()
    }

    /// Indices of the samples of each class; entry `c - 1` belongs to class `c`.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.k];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.y - 1].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.class_indices().iter().map(Vec::len).collect()
    }

    /// Features of the selected samples as an `[n, dim]` tensor.
    pub fn features(&self, indices: &[usize]) -> Tensor {
        let values = indices.iter().flat_map(|&i| self.samples[i].x.iter().copied()).collect();
        Tensor::new(vec![indices.len(), self.dim()], values).expect("validated layout")
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.samples[i].y).collect()
    }

    /// All features as one tensor, in sample order.
    pub fn all_features(&self) -> Tensor {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.features(&idx)
    }

    fn with_samples(&self, samples: Vec<LabeledSample>) -> Result<Self> {
        Dataset::new(samples, self.k, self.layout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub n_per_class: usize,
    pub seed: u64,
}

/// Draws exactly `n_per_class` samples of every class without replacement.
pub fn subsample(d: &Dataset, spec: SubsampleSpec) -> Result<Dataset> {
    if spec.n_per_class == 0 {
        return Err(DadaError::Config("n_per_class must be positive".into()));
    }
    let mut rng = seeded(spec.seed);
    let mut out = Vec::with_capacity(spec.n_per_class * d.k());
    for (c, idx) in d.class_indices().into_iter().enumerate() {
        if idx.len() < spec.n_per_class {
            return Err(DadaError::Config(format!(
                "class {} has {} samples, cannot draw {}",
                c + 1,
                idx.len(),
                spec.n_per_class
            )));
        }
        out.extend(idx.choose_multiple(&mut rng, spec.n_per_class).map(|&i| d.samples[i].clone()));
    }
    d.with_samples(out)
}

/// Stratified split: every class contributes `round(n_c * test_fraction)`
/// samples to the test side, but at least one to each side.
pub fn split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DadaError::Config(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = seeded(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (c, mut idx) in d.class_indices().into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(DadaError::Config(format!("class {} has {} samples, need 2 to split", c + 1, idx.len())));
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        test.extend(idx[..n_test].iter().map(|&i| d.samples[i].clone()));
        train.extend(idx[n_test..].iter().map(|&i| d.samples[i].clone()));
    }
    Ok((d.with_samples(train)?, d.with_samples(test)?))
}
