//! Flat `key = value` configuration with dotted keys.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Later assignments override earlier ones, which is how command
//! line overrides are applied.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{AugmentSpec, DataSource, ExperimentSpec, ModelSpec, Mode};
use crate::data::AugmentOp;
use crate::error::{DadaError, Result};
use crate::trainer::TrainConfig;

pub type ConfigMap = BTreeMap<String, String>;

pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DadaError::Config(format!("line {}: expected key = value, got {line:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(DadaError::Config(format!("line {}: empty key", i + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Parses `key=value` override arguments.
pub fn parse_overrides<S: AsRef<str>>(args: &[S]) -> Result<ConfigMap> {
    parse_config(&args.iter().map(AsRef::as_ref).collect::<Vec<_>>().join("\n"))
}

pub fn render_config(map: &ConfigMap) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse().map_err(|e| DadaError::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| value(key, s.trim())).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn path(base: Option<&Path>, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

impl FromStr for Mode {
    type Err = DadaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "c" => Mode::C,
            "c_aug" => Mode::CAug,
            "dada" => Mode::Dada,
            "dada_aug" => Mode::DadaAug,
            "vanilla_gan" => Mode::VanillaGan,
            "k_plus_one" => Mode::KPlusOne,
            other => return Err(DadaError::Config(format!("unknown mode {other:?}"))),
        })
    }
}

impl Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn parse_op(s: &str) -> Result<AugmentOp> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
    let need = |what: &str| arg.ok_or_else(|| DadaError::Config(format!("augment op {name} needs :{what}")));
    Ok(match name.trim() {
        "rotate" => AugmentOp::Rotate { max_degrees: value("augment.ops", need("degrees")?)? },
        "translate" => AugmentOp::Translate { max_shift: value("augment.ops", need("cells")?)? },
        "flip_h" => AugmentOp::FlipH,
        "jitter" => AugmentOp::Jitter { sigma: value("augment.ops", need("sigma")?)? },
        other => return Err(DadaError::Config(format!("unknown augment op {other:?}"))),
    })
}

pub fn render_op(op: &AugmentOp) -> String {
    match op {
        AugmentOp::Rotate { max_degrees } => format!("rotate:{max_degrees}"),
        AugmentOp::Translate { max_shift } => format!("translate:{max_shift}"),
        AugmentOp::FlipH => "flip_h".into(),
        AugmentOp::Jitter { sigma } => format!("jitter:{sigma}"),
    }
}

impl ExperimentSpec {
    /// Builds a spec from defaults plus `map`. Relative data paths are taken
    /// relative to `base`. Unknown keys are rejected.
    pub fn from_map(map: &ConfigMap, base: Option<&Path>) -> Result<Self> {
        let mut s = ExperimentSpec::default();
        let source = map.get("data.source").map_or("synthetic", String::as_str);
        s.source = match source {
            "synthetic" => s.source,
            "idx" => DataSource::Idx {
                train_images: PathBuf::new(),
                train_labels: PathBuf::new(),
                test_images: None,
                test_labels: None,
                test_fraction: 0.2,
            },
            "csv" => DataSource::Csv { train: PathBuf::new(), test: None, test_fraction: 0.2 },
            other => return Err(DadaError::Config(format!("unknown data.source {other:?}"))),
        };
        for (k, v) in map {
            s.set(k, v, base)?;
        }
        s.validate()?;
        Ok(s)
    }

    fn set(&mut self, key: &str, v: &str, base: Option<&Path>) -> Result<()> {
        let t: &mut TrainConfig = &mut self.train;
        let m: &mut ModelSpec = &mut self.model;
        let a: &mut AugmentSpec = &mut self.augment;
        match key {
            "modes" => self.modes = list(key, v)?,
            "n_per_class" => self.n_per_class = list(key, v)?,
            "seeds" => self.seeds = list(key, v)?,
            "workers" => self.workers = value(key, v)?,
            "data.source" => {}
            "train.k_g" => t.k_g = value(key, v)?,
            "train.k_c" => t.k_c = value(key, v)?,
            "train.batch_size" => t.batch_size = value(key, v)?,
            "train.g_inner" => t.g_inner = value(key, v)?,
            "train.lambda" => t.lambda = value(key, v)?,
            "train.latent_dim" => t.latent_dim = value(key, v)?,
            "train.input_noise" => t.input_noise = value(key, v)?,
            "train.augmentation_ratio" => t.augmentation_ratio = value(key, v)?,
            "train.phase2_fixed_set" => t.phase2_fixed_set = value(key, v)?,
            "train.eval_every" => t.eval_every = value(key, v)?,
            "adam.lr" => t.adam.lr = value(key, v)?,
            "adam.beta1" => t.adam.beta1 = value(key, v)?,
            "adam.beta2" => t.adam.beta2 = value(key, v)?,
            "adam.eps" => t.adam.eps = value(key, v)?,
            "model.augmenter_hidden" => m.augmenter_hidden = list(key, v)?,
            "model.classifier_hidden" => m.classifier_hidden = list(key, v)?,
            "model.feature_tap" => {
                m.feature_tap = match v {
                    "last" => FeatureTap::Last,
                    "none" => FeatureTap::None,
                    n => FeatureTap::Layer(value(key, n)?),
                }
            }
            "augment.ops" => a.ops = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(parse_op).collect::<Result<_>>()?,
            "augment.multiplier" => a.multiplier = value(key, v)?,
            _ => self.set_source(key, v, base)?,
        }
        Ok(())
    }

    fn set_source(&mut self, key: &str, v: &str, base: Option<&Path>) -> Result<()> {
        let unknown = || DadaError::Config(format!("unknown config key {key:?} for this data source"));
        match &mut self.source {
            DataSource::Synthetic { k, radius, sigma, pool_per_class, test_per_class, seed } => match key {
                "data.k" => *k = value(key, v)?,
                "data.radius" => *radius = value(key, v)?,
                "data.sigma" => *sigma = value(key, v)?,
                "data.pool_per_class" => *pool_per_class = value(key, v)?,
                "data.test_per_class" => *test_per_class = value(key, v)?,
                "data.seed" => *seed = value(key, v)?,
                _ => return Err(unknown()),
            },
            DataSource::Idx { train_images, train_labels, test_images, test_labels, test_fraction } => match key {
                "data.train_images" => *train_images = path(base, v),
                "data.train_labels" => *train_labels = path(base, v),
                "data.test_images" => *test_images = Some(path(base, v)),
                "data.test_labels" => *test_labels = Some(path(base, v)),
                "data.test_fraction" => *test_fraction = value(key, v)?,
                _ => return Err(unknown()),
            },
            DataSource::Csv { train, test, test_fraction } => match key {
                "data.train" => *train = path(base, v),
                "data.test" => *test = Some(path(base, v)),
                "data.test_fraction" => *test_fraction = value(key, v)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }

    /// The complete resolved configuration, defaults included.
    pub fn to_map(&self) -> ConfigMap {
        let mut m = ConfigMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("modes", join(&self.modes));
        put("n_per_class", join(&self.n_per_class));
        put("seeds", join(&self.seeds));
        put("workers", self.workers.to_string());
        let t = &self.train;
        put("train.k_g", t.k_g.to_string());
        put("train.k_c", t.k_c.to_string());
        put("train.batch_size", t.batch_size.to_string());
        put("train.g_inner", t.g_inner.to_string());
        put("train.lambda", t.lambda.to_string());
        put("train.latent_dim", t.latent_dim.to_string());
        put("train.input_noise", t.input_noise.to_string());
        put("train.augmentation_ratio", t.augmentation_ratio.to_string());
        put("train.phase2_fixed_set", t.phase2_fixed_set.to_string());
        put("train.eval_every", t.eval_every.to_string());
        put("adam.lr", t.adam.lr.to_string());
        put("adam.beta1", t.adam.beta1.to_string());
        put("adam.beta2", t.adam.beta2.to_string());
        put("adam.eps", t.adam.eps.to_string());
        put("model.augmenter_hidden", join(&self.model.augmenter_hidden));
        put("model.classifier_hidden", join(&self.model.classifier_hidden));
        put(
            "model.feature_tap",
            match self.model.feature_tap {
                FeatureTap::Last => "last".into(),
                FeatureTap::None => "none".into(),
                FeatureTap::Layer(n) => n.to_string(),
            },
        );
        put("augment.ops", self.augment.ops.iter().map(render_op).collect::<Vec<_>>().join(","));
        put("augment.multiplier", self.augment.multiplier.to_string());
        let show = |p: &Path| p.display().to_string();
        match &self.source {
            DataSource::Synthetic { k, radius, sigma, pool_per_class, test_per_class, seed } => {
                put("data.source", "synthetic".into());
                put("data.k", k.to_string());
                put("data.radius", radius.to_string());
                put("data.sigma", sigma.to_string());
                put("data.pool_per_class", pool_per_class.to_string());
                put("data.test_per_class", test_per_class.to_string());
                put("data.seed", seed.to_string());
            }
            DataSource::Idx { train_images, train_labels, test_images, test_labels, test_fraction } => {
                put("data.source", "idx".into());
                put("data.train_images", show(train_images));
                put("data.train_labels", show(train_labels));
                if let (Some(i), Some(l)) = (test_images, test_labels) {
                    put("data.test_images", show(i));
                    put("data.test_labels", show(l));
                }
                put("data.test_fraction", test_fraction.to_string());
            }
            DataSource::Csv { train, test, test_fraction } => {
                put("data.source", "csv".into());
                put("data.train", show(train));
                if let Some(t) = test {
                    put("data.test", show(t));
                }
                put("data.test_fraction", test_fraction.to_string());
            }
        }
        m
    }
}

/// Which classifier hidden layer feeds feature matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTap {
    Last,
    None,
    Layer(usize),
}
