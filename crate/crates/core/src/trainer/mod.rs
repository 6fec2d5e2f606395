//! Two-phase training: adversarial generation training, then classifier
//! training with the frozen generator as a data provider.

mod adam;
mod sampler;

pub use self::adam::{adam_step, Adam, AdamConfig, AdamState};
pub use self::sampler::BalancedSampler;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DadaError, Result};
use crate::losses::{
    loss_baseline, loss_baseline_generator, loss_c_phase1, loss_c_phase2, loss_data, loss_feature_matching,
    loss_g_phase1, loss_g_total, loss_kplus1_phase2, predict_batch, BaselineMode,
};
use crate::models::{sample_latent, AugmenterNet, ClassifierNet, HeadMode, DEFAULT_INPUT_NOISE, DEFAULT_LATENT_DIM};
use crate::rng::{stream, stream_rng, Rng};
use crate::tensor::{Graph, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Phase-I epochs.
    pub k_g: usize,
    /// Phase-II epochs.
    pub k_c: usize,
    pub batch_size: usize,
    /// Generator updates per classifier update in phase I.
    pub g_inner: usize,
    /// Feature-matching weight.
    pub lambda: f64,
    pub adam: AdamConfig,
    pub latent_dim: usize,
    pub seed: u64,
    pub input_noise: f64,
    /// Generated samples drawn per phase-II epoch, as a multiple of `|D|`.
    pub augmentation_ratio: usize,
    /// Draw one generated set at the start of phase II instead of fresh
    /// samples every epoch.
    pub phase2_fixed_set: bool,
    /// Test accuracy every this many epochs; the last epoch of every phase
    /// is always evaluated. 0 evaluates only the last epoch.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_g: 200,
            k_c: 600,
            batch_size: 32,
            g_inner: 1,
            lambda: 1.0,
            adam: AdamConfig::default(),
            latent_dim: DEFAULT_LATENT_DIM,
            seed: 0,
            input_noise: DEFAULT_INPUT_NOISE,
            augmentation_ratio: 10,
            phase2_fixed_set: false,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.batch_size < k.max(1) {
            return Err(DadaError::Config(format!(
                "batch size {} cannot hold one sample of each of {k} classes",
                self.batch_size
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(DadaError::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.input_noise >= 0.0) {
            return Err(DadaError::Config(format!("input noise must be >= 0, got {}", self.input_noise)));
        }
        if self.latent_dim == 0 {
            return Err(DadaError::Config("latent dimension must be positive".into()));
        }
        if self.augmentation_ratio == 0 {
            return Err(DadaError::Config("augmentation ratio must be >= 1".into()));
        }
        self.adam.validate()
    }
}

/// Objective used by a classifier update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTag {
    /// Real to real class, generated to fake class (`2k` head).
    CPhase1,
    /// Folded real plus folded generated (`2k` head).
    CPhase2,
    /// Folded real only (`2k` head).
    Data,
    /// `k+1` discriminator.
    KPlusOnePhase1,
    /// `k+1` head, real and generated both to the real class.
    KPlusOnePhase2,
    /// `k+1` head, real samples only.
    KPlusOneData,
    /// Real versus fake.
    Vanilla,
}

pub const PHASE_GENERATION: u8 = 1;
pub const PHASE_CLASSIFICATION: u8 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: u8,
    /// 1-based within the phase.
    pub epoch: usize,
    pub loss_c: f64,
    pub loss_g: Option<f64>,
    pub loss_tag: LossTag,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

/// Per-epoch records in `(phase, epoch)` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    records: Vec<EpochRecord>,
}

impl RunLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn push(&mut self, r: EpochRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if (r.phase, r.epoch) <= (last.phase, last.epoch) {
                return Err(DadaError::Usage(format!(
                    "log record (phase {}, epoch {}) does not follow (phase {}, epoch {})",
                    r.phase, r.epoch, last.phase, last.epoch
                )));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn extend(&mut self, other: RunLog) -> Result<()> {
        other.records.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut log = RunLog::new();
        for line in fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
            log.push(serde_json::from_str(line)?)?;
        }
        Ok(log)
    }
}

/// Source of labeled synthetic samples for phase II. Implementors are used
/// through a shared reference and must not change while sampling.
pub trait SampleProvider {
    fn k(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn is_frozen(&self) -> bool;
    fn checksum(&self) -> u64;
    /// One sample per label.
    fn generate(&self, labels: &[usize], rng: &mut Rng) -> Result<Tensor>;
}

impl SampleProvider for AugmenterNet {
    fn k(&self) -> usize {
        AugmenterNet::k(self)
    }

    fn output_dim(&self) -> usize {
        self.config().output_dim
    }

    fn is_frozen(&self) -> bool {
        !self.is_trainable()
    }

    fn checksum(&self) -> u64 {
        AugmenterNet::checksum(self)
    }

    fn generate(&self, labels: &[usize], rng: &mut Rng) -> Result<Tensor> {
        let z = sample_latent(labels.len(), self.latent_dim(), rng);
        self.augment(&z, labels)
    }
}

/// Number of updates made so far, per phase and objective.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateCounts {
    pub classifier: BTreeMap<(u8, LossTag), u64>,
    pub generator: u64,
    /// Real batches drawn, and how many of them missed some class.
    pub batches: u64,
    pub unbalanced_batches: u64,
}

impl UpdateCounts {
    pub fn classifier_in_phase(&self, phase: u8) -> u64 {
        self.classifier.iter().filter(|((p, _), _)| *p == phase).map(|(_, n)| n).sum()
    }

    pub fn tags_in_phase(&self, phase: u8) -> Vec<LossTag> {
        self.classifier.keys().filter(|(p, _)| *p == phase).map(|(_, t)| *t).collect()
    }
}

/// Fraction of `labels` matched by the eval-mode prediction on `x`.
pub fn accuracy(clf: &ClassifierNet, x: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(DadaError::Usage("accuracy of an empty set".into()));
    }
    if x.shape().first() != Some(&labels.len()) {
        return Err(DadaError::Dimension(format!("{:?} inputs for {} labels", x.shape(), labels.len())));
    }
    let head = clf.head();
    let width = head.logit_width(clf.k());
    let logits = clf.classify(x, None)?;
    let pred = predict_batch(logits.values(), width, head, clf.k());
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Eval-mode accuracy on a labeled set.
pub fn evaluate(clf: &ClassifierNet, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(DadaError::Usage("empty test set".into()));
    }
    accuracy(clf, &test.all_features(), &test.labels())
}

fn steps(total: usize, batch: usize) -> usize {
    total.div_ceil(batch)
}

fn uniform_labels(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(1..=k)).collect()
}

fn baseline_mode(head: HeadMode) -> Option<BaselineMode> {
    match head {
        HeadMode::TwoK => None,
        HeadMode::KPlusOne => Some(BaselineMode::KPlusOne),
        HeadMode::Binary => Some(BaselineMode::Vanilla2Class),
    }
}

/// Owns the optimizer states and the training RNG of one run. Classifier
/// optimizer state carries over between phases.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    rng: Rng,
    test: Option<&'a Dataset>,
    clf_opt: Option<Adam>,
    gen_opt: Option<Adam>,
    epochs_done: [usize; 2],
    counts: UpdateCounts,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig) -> Self {
        let rng = stream_rng(cfg.seed, stream::TRAIN);
        Trainer { cfg, rng, test: None, clf_opt: None, gen_opt: None, epochs_done: [0, 0], counts: UpdateCounts::default() }
    }

    /// Evaluates on `test` according to `eval_every`.
    pub fn with_test_set(mut self, test: &'a Dataset) -> Self {
        self.test = Some(test);
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn counts(&self) -> &UpdateCounts {
        &self.counts
    }

    pub fn classifier_adam(&self) -> Option<&Adam> {
        self.clf_opt.as_ref()
    }

    pub fn generator_adam(&self) -> Option<&Adam> {
        self.gen_opt.as_ref()
    }

    fn audit(&mut self, labels: &[usize], k: usize) {
        let mut seen = vec![false; k];
        labels.iter().for_each(|&y| seen[y - 1] = true);
        self.counts.batches += 1;
        if seen.contains(&false) {
            self.counts.unbalanced_batches += 1;
        }
    }

    fn check_data(&self, clf: &ClassifierNet, data: &Dataset) -> Result<BalancedSampler> {
        if clf.k() != data.k() {
            return Err(DadaError::Config(format!("classifier has k={}, data has k={}", clf.k(), data.k())));
        }
        if clf.config().input_dim != data.dim() {
            return Err(DadaError::Dimension(format!(
                "classifier input {} but samples have {} features",
                clf.config().input_dim,
                data.dim()
            )));
        }
        self.cfg.validate(data.k())?;
        BalancedSampler::new(data)
    }

    fn step_classifier(&mut self, clf: &mut ClassifierNet, g: &mut Graph, bound: &crate::models::Bound, loss: Var) -> Result<f64> {
        let value = g.item(loss);
        g.backward(loss)?;
        clf.accumulate_grads(g, bound)?;
        let names = clf.param_names();
        let opt = self.clf_opt.get_or_insert_with(|| Adam::new(self.cfg.adam, clf.params(), names));
        let res = opt.step(clf.params_mut());
        clf.zero_grad();
        res?;
        if !value.is_finite() {
            return Err(DadaError::NonFinite(format!("classifier loss {value}")));
        }
        Ok(value)
    }

    fn record(
        &mut self,
        log: &mut RunLog,
        phase: u8,
        last: bool,
        clf: &ClassifierNet,
        data: &Dataset,
        loss_c: f64,
        loss_g: Option<f64>,
        tag: LossTag,
    ) -> Result<()> {
        let slot = usize::from(phase - 1);
        self.epochs_done[slot] += 1;
        let epoch = self.epochs_done[slot];
        let due = last || (self.cfg.eval_every > 0 && epoch.is_multiple_of(self.cfg.eval_every));
        let test_acc = match self.test {
            Some(t) if due => Some(evaluate(clf, t)?),
            _ => None,
        };
        let train_acc = evaluate(clf, data)?;
        log.push(EpochRecord { phase, epoch, loss_c, loss_g, loss_tag: tag, train_acc, test_acc })
    }

    /// Adversarial phase: per step one classifier update on real plus
    /// generated samples (uniform labels), then `g_inner` generator updates
    /// whose labels repeat those of a fresh real batch.
    pub fn train_phase1(&mut self, aug: &mut AugmenterNet, clf: &mut ClassifierNet, data: &Dataset) -> Result<RunLog> {
        let mut sampler = self.check_data(clf, data)?;
        if !aug.is_trainable() {
            return Err(DadaError::Usage("phase I needs a trainable augmenter".into()));
        }
        if aug.k() != data.k() || aug.config().output_dim != data.dim() {
            return Err(DadaError::Config(format!(
                "augmenter (k={}, out={}) does not match data (k={}, dim={})",
                aug.k(),
                aug.config().output_dim,
                data.k(),
                data.dim()
            )));
        }
        if aug.latent_dim() != self.cfg.latent_dim {
            return Err(DadaError::Config(format!(
                "augmenter latent width {} but config says {}",
                aug.latent_dim(),
                self.cfg.latent_dim
            )));
        }
        let use_fm = self.cfg.lambda > 0.0;
        if use_fm && clf.config().feature_tap.is_none() {
            return Err(DadaError::Config("feature matching needs a classifier feature tap".into()));
        }
        let k = data.k();
        let b = self.cfg.batch_size;
        let head = clf.head();
        let tag = match head {
            HeadMode::TwoK => LossTag::CPhase1,
            HeadMode::KPlusOne => LossTag::KPlusOnePhase1,
            HeadMode::Binary => LossTag::Vanilla,
        };
        let n_steps = steps(data.len(), b);
        let mut log = RunLog::new();
        for epoch in 0..self.cfg.k_g {
            let (mut sum_c, mut sum_g, mut n_g) = (0.0, 0.0, 0usize);
            for _ in 0..n_steps {
                // classifier update
                let idx = sampler.next_batch(b, &mut self.rng);
                let y_real = data.labels_of(&idx);
                self.audit(&y_real, k);
                let y_fake = uniform_labels(b, k, &mut self.rng);
                let z = sample_latent(b, self.cfg.latent_dim, &mut self.rng);
                let mut g = Graph::new();
                let ab = aug.bind(&mut g, false);
                let cb = clf.bind(&mut g, true);
                let zv = g.constant(&z);
                let fake = aug.forward(&mut g, &ab, zv, &y_fake)?;
                let xr = g.constant(&data.features(&idx));
                let lr = clf.forward(&mut g, &cb, xr, Some(&mut self.rng))?.logits;
                let lf = clf.forward(&mut g, &cb, fake, Some(&mut self.rng))?.logits;
                let loss = match baseline_mode(head) {
                    None => loss_c_phase1(&mut g, lr, &y_real, lf, &y_fake, k)?,
                    Some(mode) => {
                        let both = g.concat(lr, lf, 0)?;
                        let labels: Vec<usize> = y_real.iter().chain(&y_fake).copied().collect();
                        let is_real: Vec<bool> = (0..2 * b).map(|i| i < b).collect();
                        loss_baseline(&mut g, mode, both, &labels, &is_real, k)?
                    }
                };
                sum_c += self.step_classifier(clf, &mut g, &cb, loss)?;
                *self.counts.classifier.entry((PHASE_GENERATION, tag)).or_default() += 1;

                for _ in 0..self.cfg.g_inner {
                    sum_g += self.step_generator(aug, clf, data, &mut sampler, use_fm)?;
                    n_g += 1;
                }
            }
            let loss_g = (n_g > 0).then(|| sum_g / n_g as f64);
            let last = epoch + 1 == self.cfg.k_g;
            self.record(&mut log, PHASE_GENERATION, last, clf, data, sum_c / n_steps as f64, loss_g, tag)?;
        }
        Ok(log)
    }

    fn step_generator(
        &mut self,
        aug: &mut AugmenterNet,
        clf: &ClassifierNet,
        data: &Dataset,
        sampler: &mut BalancedSampler,
        use_fm: bool,
    ) -> Result<f64> {
        let k = data.k();
        let b = self.cfg.batch_size;
        let idx = sampler.next_batch(b, &mut self.rng);
        let y = data.labels_of(&idx);
        self.audit(&y, k);
        let z = sample_latent(b, self.cfg.latent_dim, &mut self.rng);
        let mut g = Graph::new();
        let ab = aug.bind(&mut g, true);
        let cb = clf.bind(&mut g, false);
        let zv = g.constant(&z);
        let fake = aug.forward(&mut g, &ab, zv, &y)?;
        let out_f = clf.forward(&mut g, &cb, fake, Some(&mut self.rng))?;
        let adv = match baseline_mode(clf.head()) {
            None => loss_g_phase1(&mut g, out_f.logits, &y, k)?,
            Some(mode) => loss_baseline_generator(&mut g, mode, out_f.logits, &y, k)?,
        };
        let loss = if use_fm {
            let xr = g.constant(&data.features(&idx));
            let out_r = clf.forward(&mut g, &cb, xr, Some(&mut self.rng))?;
            let (fr, ff) = (out_r.features.expect("tap checked"), out_f.features.expect("tap checked"));
            let fm = loss_feature_matching(&mut g, fr, &y, ff, &y)?;
            loss_g_total(&mut g, adv, fm, self.cfg.lambda)?
        } else {
            adv
        };
        let value = g.item(loss);
        g.backward(loss)?;
        aug.accumulate_grads(&g, &ab)?;
        let names = aug.param_names();
        let opt = self.gen_opt.get_or_insert_with(|| Adam::new(self.cfg.adam, aug.params(), names));
        let res = opt.step(aug.params_mut());
        aug.zero_grad();
        res?;
        self.counts.generator += 1;
        if !value.is_finite() {
            return Err(DadaError::NonFinite(format!("generator loss {value}")));
        }
        Ok(value)
    }

    /// Classification phase: per step a real batch plus an equally sized
    /// generated batch with uniform labels, `ceil(ratio * |D| / B)` steps per
    /// epoch. The provider must be frozen and is verified unchanged at exit.
    pub fn train_phase2(&mut self, provider: &dyn SampleProvider, clf: &mut ClassifierNet, data: &Dataset) -> Result<RunLog> {
        let mut sampler = self.check_data(clf, data)?;
        if !provider.is_frozen() {
            return Err(DadaError::Usage("phase II needs a frozen augmenter".into()));
        }
        if provider.k() != data.k() || provider.output_dim() != data.dim() {
            return Err(DadaError::Config(format!(
                "provider (k={}, out={}) does not match data (k={}, dim={})",
                provider.k(),
                provider.output_dim(),
                data.k(),
                data.dim()
            )));
        }
        let (k, b) = (data.k(), self.cfg.batch_size);
        let head = clf.head();
        let tag = match head {
            HeadMode::TwoK => LossTag::CPhase2,
            HeadMode::KPlusOne => LossTag::KPlusOnePhase2,
            HeadMode::Binary => return Err(DadaError::Usage("phase II needs a class-level head".into())),
        };
        let before = provider.checksum();
        let per_epoch = self.cfg.augmentation_ratio * data.len();
        let n_steps = steps(per_epoch, b);
        let fixed = if self.cfg.phase2_fixed_set && self.cfg.k_c > 0 {
            let labels = uniform_labels(per_epoch, k, &mut self.rng);
            Some((provider.generate(&labels, &mut self.rng)?, labels))
        } else {
            None
        };
        let mut order: Vec<usize> = (0..per_epoch).collect();
        let mut log = RunLog::new();
        for epoch in 0..self.cfg.k_c {
            order.shuffle(&mut self.rng);
            let mut sum_c = 0.0;
            for s in 0..n_steps {
                let idx = sampler.next_batch(b, &mut self.rng);
                let y_real = data.labels_of(&idx);
                self.audit(&y_real, k);
                let (x_fake, y_fake) = match &fixed {
                    Some((x, labels)) => {
                        let rows: Vec<usize> = (0..b).map(|j| order[(s * b + j) % per_epoch]).collect();
                        (select(x, &rows), rows.iter().map(|&r| labels[r]).collect())
                    }
                    None => {
                        let labels = uniform_labels(b, k, &mut self.rng);
                        (provider.generate(&labels, &mut self.rng)?, labels)
                    }
                };
                let mut g = Graph::new();
                let cb = clf.bind(&mut g, true);
                let xr = g.constant(&data.features(&idx));
                let xf = g.constant(&x_fake);
                let lr = clf.forward(&mut g, &cb, xr, Some(&mut self.rng))?.logits;
                let lf = clf.forward(&mut g, &cb, xf, Some(&mut self.rng))?.logits;
                let loss = match head {
                    HeadMode::TwoK => loss_c_phase2(&mut g, lr, &y_real, lf, &y_fake, k)?,
                    _ => loss_kplus1_phase2(&mut g, lr, &y_real, lf, &y_fake, k)?,
                };
                sum_c += self.step_classifier(clf, &mut g, &cb, loss)?;
                *self.counts.classifier.entry((PHASE_CLASSIFICATION, tag)).or_default() += 1;
            }
            let last = epoch + 1 == self.cfg.k_c;
            self.record(&mut log, PHASE_CLASSIFICATION, last, clf, data, sum_c / n_steps as f64, None, tag)?;
        }
        if provider.checksum() != before {
            return Err(DadaError::Usage("augmenter parameters changed during phase II".into()));
        }
        Ok(log)
    }

    /// Real-data-only classifier training for `epochs` epochs, logged as
    /// classification-phase epochs.
    pub fn train_supervised(&mut self, clf: &mut ClassifierNet, data: &Dataset, epochs: usize) -> Result<RunLog> {
        let mut sampler = self.check_data(clf, data)?;
        let (k, b) = (data.k(), self.cfg.batch_size);
        let head = clf.head();
        let tag = match head {
            HeadMode::TwoK => LossTag::Data,
            HeadMode::KPlusOne => LossTag::KPlusOneData,
            HeadMode::Binary => return Err(DadaError::Usage("supervised training needs a class-level head".into())),
        };
        let n_steps = steps(data.len(), b);
        let mut log = RunLog::new();
        for epoch in 0..epochs {
            let mut sum_c = 0.0;
            for _ in 0..n_steps {
                let idx = sampler.next_batch(b, &mut self.rng);
                let y = data.labels_of(&idx);
                self.audit(&y, k);
                let mut g = Graph::new();
                let cb = clf.bind(&mut g, true);
                let x = g.constant(&data.features(&idx));
                let logits = clf.forward(&mut g, &cb, x, Some(&mut self.rng))?.logits;
                let loss = match head {
                    HeadMode::TwoK => loss_data(&mut g, logits, &y, k)?,
                    _ => loss_baseline(&mut g, BaselineMode::KPlusOne, logits, &y, &vec![true; b], k)?,
                };
                sum_c += self.step_classifier(clf, &mut g, &cb, loss)?;
                *self.counts.classifier.entry((PHASE_CLASSIFICATION, tag)).or_default() += 1;
            }
            let last = epoch + 1 == epochs;
            self.record(&mut log, PHASE_CLASSIFICATION, last, clf, data, sum_c / n_steps as f64, None, tag)?;
        }
        Ok(log)
    }
}

fn select(x: &Tensor, rows: &[usize]) -> Tensor {
    let d = x.shape()[1];
    let v = rows.iter().flat_map(|&r| x.values()[r * d..(r + 1) * d].iter().copied()).collect();
    Tensor::new(vec![rows.len(), d], v).expect("row selection")
}

/// Runs phase I with a fresh trainer.
pub fn train_phase1(aug: &mut AugmenterNet, clf: &mut ClassifierNet, data: &Dataset, cfg: &TrainConfig) -> Result<RunLog> {
    Trainer::new(cfg.clone()).train_phase1(aug, clf, data)
}

/// Runs phase II with a fresh trainer.
pub fn train_phase2(provider: &dyn SampleProvider, clf: &mut ClassifierNet, data: &Dataset, cfg: &TrainConfig) -> Result<RunLog> {
    Trainer::new(cfg.clone()).train_phase2(provider, clf, data)
}
