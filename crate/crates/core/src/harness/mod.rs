//! Experiment matrix runner: modes x training-set sizes x seeds, with
//! per-cell persistence, aggregate curves and generated-sample dumps.

mod config;
mod gradsuite;

pub use self::config::{parse_config, parse_op, parse_overrides, render_config, render_op, ConfigMap, FeatureTap};
pub use self::gradsuite::{gradient_suite, SuiteEntry, SUITE_TOL};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    gen_gaussian_mixture, load_csv, load_csv_with_scaling, load_idx, split, subsample, traditional_augment, AugmentOp,
    Dataset, LabeledSample, Layout, MixtureSpec, SubsampleSpec,
};
use crate::error::{DadaError, Result};
use crate::models::{sample_latent, AugmenterConfig, AugmenterNet, ClassifierConfig, ClassifierNet, HeadMode};
use crate::rng::{derive_seed, seeded, stream, Rng};
use crate::tensor::Tensor;
use crate::trainer::{evaluate, RunLog, SampleProvider, TrainConfig, Trainer};

/// Noise level of the default synthetic benchmark, picked so that the plain
/// classifier lands between 0.70 and 0.85 test accuracy at 5 samples per class.
pub const DEFAULT_SYNTHETIC_SIGMA: f64 = 1.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Classifier on the real samples only.
    C,
    /// Hand-crafted augmentation, then `C`.
    CAug,
    /// Adversarial generation training, then classification with the frozen generator.
    Dada,
    /// Hand-crafted augmentation, then `Dada`.
    DadaAug,
    /// One unconditional generator per class against a real/fake discriminator.
    VanillaGan,
    /// `Dada` with a `k+1` head.
    KPlusOne,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::C => "c",
            Mode::CAug => "c_aug",
            Mode::Dada => "dada",
            Mode::DadaAug => "dada_aug",
            Mode::VanillaGan => "vanilla_gan",
            Mode::KPlusOne => "k_plus_one",
        }
    }

    pub fn uses_traditional_augmentation(self) -> bool {
        matches!(self, Mode::CAug | Mode::DadaAug)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    /// Gaussian mixture with means on a circle. The training pool and the
    /// test set are independent draws from the same distribution.
    Synthetic { k: usize, radius: f64, sigma: f64, pool_per_class: usize, test_per_class: usize, seed: u64 },
    /// Without test files a stratified split of the training files is used.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: Option<PathBuf>,
        test_labels: Option<PathBuf>,
        test_fraction: f64,
    },
    Csv { train: PathBuf, test: Option<PathBuf>, test_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub augmenter_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub feature_tap: FeatureTap,
}

/// Hand-crafted augmentation for the `*_aug` modes. Empty `ops` picks
/// rotation and translation for grids and jitter for vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub ops: Vec<AugmentOp>,
    pub multiplier: usize,
}

impl AugmentSpec {
    pub fn ops_for(&self, layout: Layout) -> Vec<AugmentOp> {
        if !self.ops.is_empty() {
            return self.ops.clone();
        }
        match layout {
            Layout::Grid { .. } => vec![AugmentOp::Rotate { max_degrees: 15.0 }, AugmentOp::Translate { max_shift: 2 }],
            Layout::Vector { .. } => vec![AugmentOp::Jitter { sigma: 0.05 }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub modes: Vec<Mode>,
    pub source: DataSource,
    pub n_per_class: Vec<usize>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub model: ModelSpec,
    pub augment: AugmentSpec,
    pub workers: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            modes: vec![Mode::C, Mode::Dada],
            source: DataSource::Synthetic {
                k: 3,
                radius: 2.0,
                sigma: DEFAULT_SYNTHETIC_SIGMA,
                pool_per_class: 1000,
                test_per_class: 500,
                seed: 0,
            },
            n_per_class: vec![5],
            seeds: (0..5).collect(),
            train: TrainConfig::default(),
            model: ModelSpec { augmenter_hidden: vec![128, 128], classifier_hidden: vec![128, 64], feature_tap: FeatureTap::Last },
            augment: AugmentSpec { ops: Vec::new(), multiplier: 10 },
            workers: 1,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.n_per_class.is_empty() || self.seeds.is_empty() {
            return Err(DadaError::Config("modes, n_per_class and seeds must all be non-empty".into()));
        }
        if self.n_per_class.contains(&0) {
            return Err(DadaError::Config("n_per_class entries must be positive".into()));
        }
        if self.workers == 0 {
            return Err(DadaError::Config("workers must be >= 1".into()));
        }
        if self.augment.multiplier == 0 {
            return Err(DadaError::Config("augment.multiplier must be >= 1".into()));
        }
        if let FeatureTap::Layer(l) = self.model.feature_tap {
            if l >= self.model.classifier_hidden.len() {
                return Err(DadaError::Config(format!("feature tap {l} outside the classifier's hidden layers")));
            }
        }
        match &self.source {
            DataSource::Synthetic { k, sigma, pool_per_class, test_per_class, .. } => {
                if *k == 0 || !(*sigma > 0.0) || *pool_per_class == 0 || *test_per_class == 0 {
                    return Err(DadaError::Config("synthetic data needs k, sigma and set sizes > 0".into()));
                }
            }
            DataSource::Idx { train_images, train_labels, test_images, test_labels, .. } => {
                if train_images.as_os_str().is_empty() || train_labels.as_os_str().is_empty() {
                    return Err(DadaError::Config("idx source needs data.train_images and data.train_labels".into()));
                }
                if test_images.is_some() != test_labels.is_some() {
                    return Err(DadaError::Config("give both data.test_images and data.test_labels or neither".into()));
                }
            }
            DataSource::Csv { train, .. } => {
                if train.as_os_str().is_empty() {
                    return Err(DadaError::Config("csv source needs data.train".into()));
                }
            }
        }
        Ok(())
    }

    /// Files the data source reads.
    pub fn source_paths(&self) -> Vec<PathBuf> {
        match &self.source {
            DataSource::Synthetic { .. } => Vec::new(),
            DataSource::Idx { train_images, train_labels, test_images, test_labels, .. } => {
                let mut v = vec![train_images.clone(), train_labels.clone()];
                v.extend(test_images.iter().chain(test_labels).cloned());
                v
            }
            DataSource::Csv { train, test, .. } => std::iter::once(train.clone()).chain(test.clone()).collect(),
        }
    }

    fn classifier_config(&self, input_dim: usize, k: usize, head: HeadMode) -> ClassifierConfig {
        let mut c = ClassifierConfig::new(input_dim, k, self.model.classifier_hidden.clone(), head);
        c.input_noise = self.train.input_noise;
        c.feature_tap = match self.model.feature_tap {
            FeatureTap::Last => self.model.classifier_hidden.len().checked_sub(1),
            FeatureTap::None => None,
            FeatureTap::Layer(l) => Some(l),
        };
        c
    }

    /// Hash of everything that affects a single cell's outcome.
    fn fingerprint(&self) -> String {
        let mut m = self.to_map();
        for k in ["modes", "n_per_class", "seeds", "workers"] {
            m.remove(k);
        }
        let text = render_config(&m);
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Reads a config file, applies `key=value` overrides and resolves defaults.
pub fn load_spec(path: &Path, overrides: &ConfigMap) -> Result<ExperimentSpec> {
    let mut map = parse_config(&fs::read_to_string(path)?)?;
    map.extend(overrides.clone());
    ExperimentSpec::from_map(&map, path.parent())
}

/// Training pool and held-out test set.
pub fn load_source(source: &DataSource, out: Option<&Path>) -> Result<(Dataset, Dataset)> {
    match source {
        DataSource::Synthetic { k, radius, sigma, pool_per_class, test_per_class, seed } => {
            let spec = MixtureSpec::on_circle(*k, *radius, *sigma);
            let pool = gen_gaussian_mixture(*k, *pool_per_class, &spec, derive_seed(*seed, stream::DATA_POOL))?;
            let test = gen_gaussian_mixture(*k, *test_per_class, &spec, derive_seed(*seed, stream::DATA_TEST))?;
            Ok((pool, test))
        }
        DataSource::Idx { train_images, train_labels, test_images, test_labels, test_fraction } => {
            let pool = load_idx(train_images, train_labels)?;
            match (test_images, test_labels) {
                (Some(i), Some(l)) => {
                    let test = load_idx(i, l)?;
                    if test.layout() != pool.layout() || test.k() > pool.k() {
                        return Err(DadaError::Config("IDX test files do not match the training files".into()));
                    }
                    let test = Dataset::new(test.samples().to_vec(), pool.k(), pool.layout())?;
                    Ok((pool, test))
                }
                _ => split(&pool, *test_fraction, derive_seed(0, stream::SPLIT)),
            }
        }
        DataSource::Csv { train, test, test_fraction } => {
            let (pool, scaling) = load_csv(train)?;
            if let Some(dir) = out {
                scaling.save(&dir.join("scaling.json"))?;
            }
            match test {
                Some(t) => {
                    let test = load_csv_with_scaling(t, &scaling)?;
                    Ok((pool.clone(), Dataset::new(test.samples().to_vec(), pool.k().max(test.k()), pool.layout())?))
                }
                None => split(&pool, *test_fraction, derive_seed(0, stream::SPLIT)),
            }
        }
    }
}

/// Outcome of one `(mode, n, seed)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub mode: Mode,
    pub n_per_class: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
    pub augmenters_built: usize,
    /// Paths relative to the output directory.
    pub logs: Vec<String>,
    pub params: Vec<String>,
    pub fingerprint: String,
}

impl CellResult {
    pub fn id(&self) -> String {
        cell_id(self.mode, self.n_per_class, self.seed)
    }
}

fn cell_id(mode: Mode, n: usize, seed: u64) -> String {
    format!("{}_n{n}_s{seed}", mode.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mode: Mode,
    pub n_per_class: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    /// Resolved configuration, defaults included.
    pub config: ConfigMap,
    pub cells: Vec<CellResult>,
    pub curves: Vec<CurvePoint>,
}

impl ExperimentResult {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn curve(&self, mode: Mode, n: usize) -> Option<&CurvePoint> {
        self.curves.iter().find(|p| p.mode == mode && p.n_per_class == n)
    }
}

/// Mean and sample standard deviation of the successful seeds of every
/// `(mode, n)` pair, in first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<CurvePoint> {
    let mut keys: Vec<(Mode, usize)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.mode, c.n_per_class)) {
            keys.push((c.mode, c.n_per_class));
        }
    }
    keys.into_iter()
        .map(|(mode, n)| {
            let accs: Vec<f64> =
                cells.iter().filter(|c| c.mode == mode && c.n_per_class == n).filter_map(|c| c.accuracy).collect();
            let m = accs.len();
            let mean = if m > 0 { accs.iter().sum::<f64>() / m as f64 } else { f64::NAN };
            let std = if m > 1 {
                (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
            } else if m == 1 {
                0.0
            } else {
                f64::NAN
            };
            CurvePoint { mode, n_per_class: n, mean_acc: mean, std_acc: std, n_seeds: m }
        })
        .collect()
}

/// Several per-class generators acting as one class-conditional provider.
pub struct PerClassGenerators {
    gens: Vec<AugmenterNet>,
}

impl PerClassGenerators {
    pub fn new(gens: Vec<AugmenterNet>) -> Result<Self> {
        if gens.is_empty() || gens.iter().any(|g| g.k() != 1) {
            return Err(DadaError::Config("per-class generators need one single-class generator per class".into()));
        }
        let (dim, latent) = (gens[0].config().output_dim, gens[0].latent_dim());
        if gens.iter().any(|g| g.config().output_dim != dim || g.latent_dim() != latent) {
            return Err(DadaError::Config("per-class generators disagree on widths".into()));
        }
        Ok(PerClassGenerators { gens })
    }
}

impl SampleProvider for PerClassGenerators {
    fn k(&self) -> usize {
        self.gens.len()
    }

    fn output_dim(&self) -> usize {
        self.gens[0].config().output_dim
    }

    fn is_frozen(&self) -> bool {
        self.gens.iter().all(|g| !g.is_trainable())
    }

    fn checksum(&self) -> u64 {
        self.gens.iter().fold(0u64, |h, g| h.rotate_left(7) ^ g.checksum())
    }

    fn generate(&self, labels: &[usize], rng: &mut Rng) -> Result<Tensor> {
        let latent = self.gens[0].latent_dim();
        let dim = self.output_dim();
        let z = sample_latent(labels.len(), latent, rng);
        let mut out = vec![0.0; labels.len() * dim];
        for (c, gen) in self.gens.iter().enumerate() {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c + 1).collect();
            if rows.is_empty() {
                continue;
            }
            let zv = rows.iter().flat_map(|&r| z.values()[r * latent..(r + 1) * latent].iter().copied()).collect();
            let x = gen.augment(&Tensor::new(vec![rows.len(), latent], zv)?, &vec![1; rows.len()])?;
            for (j, &r) in rows.iter().enumerate() {
                out[r * dim..(r + 1) * dim].copy_from_slice(&x.values()[j * dim..(j + 1) * dim]);
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| y == 0 || y > self.gens.len()) {
            return Err(DadaError::Domain(format!("label {bad} outside 1..={}", self.gens.len())));
        }
        Tensor::new(vec![labels.len(), dim], out)
    }
}

struct CellRun {
    accuracy: f64,
    augmenters_built: usize,
    logs: Vec<String>,
    params: Vec<String>,
}

/// Trains and evaluates one cell, writing logs and generator parameters under `out`.
fn run_cell(spec: &ExperimentSpec, mode: Mode, n: usize, seed: u64, pool: &Dataset, test: &Dataset, out: &Path) -> Result<CellRun> {
    let id = cell_id(mode, n, seed);
    let mut d = subsample(pool, SubsampleSpec { n_per_class: n, seed: derive_seed(seed, stream::SUBSAMPLE) })?;
    if mode.uses_traditional_augmentation() {
        let ops = spec.augment.ops_for(d.layout());
        d = traditional_augment(&d, &ops, spec.augment.multiplier, derive_seed(seed, stream::AUGMENT))?;
    }
    let (k, dim) = (d.k(), d.dim());
    let cfg = TrainConfig { seed, ..spec.train.clone() };
    let head = if mode == Mode::KPlusOne { HeadMode::KPlusOne } else { HeadMode::TwoK };
    let mut clf = ClassifierNet::new(spec.classifier_config(dim, k, head), derive_seed(seed, stream::CLASSIFIER_INIT))?;
    let mut trainer = Trainer::new(cfg.clone()).with_test_set(test);
    let mut built = 0;
    let mut logs = Vec::new();
    let mut params = Vec::new();
    let mut log = RunLog::new();
    let new_augmenter = |k: usize, salt: u64, built: &mut usize| {
        *built += 1;
        let c = AugmenterConfig { latent_dim: cfg.latent_dim, k, hidden: spec.model.augmenter_hidden.clone(), output_dim: dim };
        AugmenterNet::new(c, derive_seed(seed, stream::AUGMENTER_INIT) ^ salt)
    };
    match mode {
        Mode::C | Mode::CAug => {
            log = trainer.train_supervised(&mut clf, &d, cfg.k_g + cfg.k_c)?;
        }
        Mode::Dada | Mode::DadaAug | Mode::KPlusOne => {
            let mut aug = new_augmenter(k, 0, &mut built)?;
            log.extend(trainer.train_phase1(&mut aug, &mut clf, &d)?)?;
            aug.set_trainable(false);
            log.extend(trainer.train_phase2(&aug, &mut clf, &d)?)?;
            let p = format!("params/{id}.augmenter.bin");
            aug.save(&out.join(&p))?;
            params.push(p);
        }
        Mode::VanillaGan => {
            let gan_cfg = TrainConfig { lambda: 0.0, ..cfg.clone() };
            let mut gens = Vec::with_capacity(k);
            for (c, idx) in d.class_indices().into_iter().enumerate() {
                let samples = idx.iter().map(|&i| LabeledSample { x: d.samples()[i].x.clone(), y: 1 }).collect();
                let dc = Dataset::new(samples, 1, d.layout())?;
                let salt = c as u64 + 1;
                let mut gen = new_augmenter(1, salt, &mut built)?;
                let mut disc_cfg = spec.classifier_config(dim, 1, HeadMode::Binary);
                disc_cfg.feature_tap = None;
                let mut disc = ClassifierNet::new(disc_cfg, derive_seed(seed, stream::CLASSIFIER_INIT) ^ salt)?;
                let mut t = Trainer::new(TrainConfig { seed: derive_seed(seed, salt), ..gan_cfg.clone() });
                let gan_log = t.train_phase1(&mut gen, &mut disc, &dc)?;
                let lp = format!("logs/{id}.gan{}.jsonl", c + 1);
                gan_log.write_jsonl(&out.join(&lp))?;
                logs.push(lp);
                gen.set_trainable(false);
                let p = format!("params/{id}.class{}.bin", c + 1);
                gen.save(&out.join(&p))?;
                params.push(p);
                gens.push(gen);
            }
            let provider = PerClassGenerators::new(gens)?;
            log.extend(trainer.train_supervised(&mut clf, &d, cfg.k_g)?)?;
            log.extend(trainer.train_phase2(&provider, &mut clf, &d)?)?;
        }
    }
    let lp = format!("logs/{id}.jsonl");
    log.write_jsonl(&out.join(&lp))?;
    logs.insert(0, lp);
    Ok(CellRun { accuracy: evaluate(&clf, test)?, augmenters_built: built, logs, params })
}

/// Timing kept apart from the result so that result files stay reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    pub cells: Vec<(String, f64)>,
}

/// Runs every `(mode, n, seed)` cell and writes `result.json`, `timing.json`,
/// `config.resolved` and per-cell files under `out`. Cells whose file exists
/// with a matching fingerprint are loaded instead of rerun. A failing cell is
/// recorded and does not stop the matrix.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ExperimentResult> {
    spec.validate()?;
    let start = Instant::now();
    for sub in ["cells", "logs", "params"] {
        fs::create_dir_all(out.join(sub))?;
    }
    let config = spec.to_map();
    fs::write(out.join("config.resolved"), render_config(&config))?;
    let (pool, test) = load_source(&spec.source, Some(out))?;
    spec.train.validate(pool.k())?;
    let fingerprint = spec.fingerprint();

    let mut jobs = Vec::new();
    for &mode in &spec.modes {
        for &n in &spec.n_per_class {
            for &seed in &spec.seeds {
                jobs.push((mode, n, seed));
            }
        }
    }
    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| DadaError::Config(format!("cannot start {} workers: {e}", spec.workers)))?;
    let outcomes: Vec<Result<(CellResult, Option<f64>)>> = workers.install(|| {
        jobs.par_iter()
            .map(|&(mode, n, seed)| {
                let path = out.join("cells").join(format!("{}.json", cell_id(mode, n, seed)));
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(prev) = serde_json::from_str::<CellResult>(&text) {
                        if prev.fingerprint == fingerprint {
                            return Ok((prev, None));
                        }
                    }
                }
                let t0 = Instant::now();
                let cell = match run_cell(spec, mode, n, seed, &pool, &test, out) {
                    Ok(r) => CellResult {
                        mode,
                        n_per_class: n,
                        seed,
                        accuracy: Some(r.accuracy),
                        error: None,
                        augmenters_built: r.augmenters_built,
                        logs: r.logs,
                        params: r.params,
                        fingerprint: fingerprint.clone(),
                    },
                    Err(e) => CellResult {
                        mode,
                        n_per_class: n,
                        seed,
                        accuracy: None,
                        error: Some(e.to_string()),
                        augmenters_built: 0,
                        logs: Vec::new(),
                        params: Vec::new(),
                        fingerprint: fingerprint.clone(),
                    },
                };
                fs::write(&path, serde_json::to_string_pretty(&cell)? + "\n")?;
                Ok((cell, Some(t0.elapsed().as_secs_f64())))
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(outcomes.len());
    let mut timing = Timing { total_secs: 0.0, cells: Vec::new() };
    for o in outcomes {
        let (cell, secs) = o?;
        if let Some(s) = secs {
            timing.cells.push((cell.id(), s));
        }
        cells.push(cell);
    }
    let result = ExperimentResult { config, curves: aggregate(&cells), cells };
    result.save(&out.join("result.json"))?;
    timing.total_secs = start.elapsed().as_secs_f64();
    fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(result)
}

/// Writes `mode,n_per_class,mean_acc,std_acc,n_seeds`, one row per `(mode, n)`,
/// recomputed from the per-seed entries.
pub fn emit_curves(result: &ExperimentResult, out: &Path) -> Result<()> {
    if result.cells.is_empty() {
        return Err(DadaError::Usage("result has no cells".into()));
    }
    let mut w = ::csv::Writer::from_path(out)?;
    w.write_record(["mode", "n_per_class", "mean_acc", "std_acc", "n_seeds"])?;
    for p in aggregate(&result.cells) {
        w.write_record([
            p.mode.name().to_string(),
            p.n_per_class.to_string(),
            p.mean_acc.to_string(),
            p.std_acc.to_string(),
            p.n_seeds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

/// Writes `count_per_class` generated samples of every class. Grid samples
/// become one PGM (1 channel) or PPM (3 channels) file each; vector samples
/// become rows of `generated.csv`. Returns the number of samples written.
pub fn dump_generated(
    aug: &AugmenterNet,
    k: usize,
    count_per_class: usize,
    out: &Path,
    seed: u64,
    grid: Option<(usize, usize, usize)>,
) -> Result<usize> {
    if k != aug.k() {
        return Err(DadaError::Config(format!("augmenter serves {} classes, asked for {k}", aug.k())));
    }
    let dim = aug.config().output_dim;
    if let Some((h, w, c)) = grid {
        if h * w * c != dim || !(c == 1 || c == 3) {
            return Err(DadaError::Config(format!("grid {h}x{w}x{c} does not fit {dim} outputs as PGM/PPM")));
        }
    }
    fs::create_dir_all(out)?;
    let labels: Vec<usize> = (1..=k).flat_map(|y| std::iter::repeat_n(y, count_per_class)).collect();
    let mut rng = seeded(seed);
    let x = aug.generate(&labels, &mut rng)?;
    match grid {
        Some((h, w, c)) => {
            for (i, (row, y)) in x.values().chunks(dim).zip(&labels).enumerate() {
                let idx = i % count_per_class.max(1);
                let (magic, ext) = if c == 1 { ("P5", "pgm") } else { ("P6", "ppm") };
                let mut bytes = format!("{magic}\n{w} {h}\n255\n").into_bytes();
                bytes.extend(row.iter().map(|&v| to_byte(v)));
                fs::write(out.join(format!("class{y}_{idx:04}.{ext}")), bytes)?;
            }
        }
        None => {
            let mut wr = ::csv::Writer::from_path(out.join("generated.csv"))?;
            let header: Vec<String> = std::iter::once("y".to_string()).chain((1..=dim).map(|j| format!("x{j}"))).collect();
            wr.write_record(&header)?;
            for (row, y) in x.values().chunks(dim).zip(&labels) {
                wr.write_record(std::iter::once(y.to_string()).chain(row.iter().map(f64::to_string)))?;
            }
            wr.flush()?;
        }
    }
    Ok(labels.len())
}

#[cfg(test)]
mod tests;
