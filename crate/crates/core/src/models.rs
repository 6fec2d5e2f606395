//! The class-conditional augmenter and the multi-head classifier.
//!
//! Both are stacks of fully connected layers. Parameters are kept as plain
//! [`Tensor`]s (weight `[fan_in, fan_out]`, bias `[1, fan_out]`, alternating)
//! so optimizers and serialization can treat a network as a flat list.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::rng::{seeded, Rng};
use crate::tensor::{Graph, Tensor, Var, DEFAULT_LEAKY_SLOPE};

pub const DEFAULT_LATENT_DIM: usize = 100;
pub const DEFAULT_INPUT_NOISE: f64 = 0.05;

const PARAMS_MAGIC: &[u8; 4] = b"DADA";
const PARAMS_VERSION: u32 = 1;

/// He-normal initialization: weights ~ N(0, 2 / fan_in), biases zero.
///
/// Returns `[w0, b0, w1, b1, ...]` for the given `(fan_in, fan_out)` pairs.
pub fn init_params(shapes: &[(usize, usize)], seed: u64) -> Result<Vec<Tensor>> {
    if shapes.is_empty() {
        return Err(DadaError::Config("network needs at least one layer".into()));
    }
    let mut rng = seeded(seed);
    let mut params = Vec::with_capacity(2 * shapes.len());
    for (i, &(fan_in, fan_out)) in shapes.iter().enumerate() {
        if fan_in == 0 || fan_out == 0 {
            return Err(DadaError::Config(format!("layer {i} has zero width ({fan_in} -> {fan_out})")));
        }
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let w = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
        params.push(Tensor::new(vec![fan_in, fan_out], w)?.with_grad());
        params.push(Tensor::zeros(vec![1, fan_out]).with_grad());
    }
    Ok(params)
}

/// One-hot rows for 1-based labels.
pub fn one_hot(labels: &[usize], k: usize) -> Result<Tensor> {
    let mut v = vec![0.0; labels.len() * k];
    for (i, &y) in labels.iter().enumerate() {
        if y == 0 || y > k {
            return Err(DadaError::Domain(format!("label {y} outside 1..={k}")));
        }
        v[i * k + y - 1] = 1.0;
    }
    Tensor::new(vec![labels.len(), k], v)
}

/// Standard-normal latent codes, one row per sample.
pub fn sample_latent(n: usize, dim: usize, rng: &mut Rng) -> Tensor {
    let v = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(vec![n, dim], v).expect("consistent shape")
}

/// Graph handles for a network's parameters, in parameter order.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

fn bind(params: &[Tensor], g: &mut Graph, trainable: bool) -> Bound {
    Bound(params.iter().map(|p| if trainable { g.leaf(p) } else { g.constant(p) }).collect())
}

fn accumulate(params: &mut [Tensor], g: &Graph, bound: &Bound) -> Result<()> {
    for (p, v) in params.iter_mut().zip(&bound.0) {
        if let Some(grad) = g.grad(*v) {
            p.accumulate_grad(grad)?;
        }
    }
    Ok(())
}

fn dense(g: &mut Graph, x: Var, bound: &Bound, layer: usize) -> Result<Var> {
    let h = g.matmul(x, bound.0[2 * layer])?;
    g.add_bias(h, bound.0[2 * layer + 1])
}

/// FNV-1a over the bit patterns of every parameter value.
pub fn checksum(params: &[Tensor]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in params.iter().flat_map(|p| p.values()) {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn layer_shapes(params: &[Tensor]) -> Vec<(usize, usize)> {
    params.chunks(2).map(|wb| (wb[0].shape()[0], wb[0].shape()[1])).collect()
}

/// Packs `[w, b]` pairs into per-layer matrices of `fan_in + 1` rows, the
/// last row holding the bias.
pub fn to_layer_matrices(params: &[Tensor]) -> Vec<Tensor> {
    params
        .chunks(2)
        .map(|wb| {
            let (rows, cols) = (wb[0].shape()[0], wb[0].shape()[1]);
            let mut v = wb[0].values().to_vec();
            v.extend_from_slice(wb[1].values());
            Tensor::new(vec![rows + 1, cols], v).expect("consistent shape")
        })
        .collect()
}

/// Inverse of [`to_layer_matrices`].
pub fn from_layer_matrices(layers: &[Tensor]) -> Result<Vec<Tensor>> {
    let mut params = Vec::with_capacity(layers.len() * 2);
    for (i, l) in layers.iter().enumerate() {
        let [rows, cols] = l.shape()[..] else {
            return Err(DadaError::Format(format!("layer {i} is not a matrix")));
        };
        if rows < 2 || cols == 0 {
            return Err(DadaError::Format(format!("layer {i} has shape {rows}x{cols}")));
        }
        let split = (rows - 1) * cols;
        params.push(Tensor::new(vec![rows - 1, cols], l.values()[..split].to_vec())?.with_grad());
        params.push(Tensor::new(vec![1, cols], l.values()[split..].to_vec())?.with_grad());
    }
    Ok(params)
}

/// Writes layer matrices: magic `DADA`, version, layer count, then per layer
/// rows, cols and the row-major values. All fields little-endian.
pub fn save_layers(path: &Path, layers: &[Tensor]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in layers {
        let [rows, cols] = l.shape()[..] else {
            return Err(DadaError::Dimension(format!("cannot save tensor of shape {:?}", l.shape())));
        };
        buf.extend_from_slice(&(rows as u32).to_le_bytes());
        buf.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in l.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_layers(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = fs::read(path)?;
    let mut r = Cursor::new(bytes.as_slice());
    let truncated = |what: &str| DadaError::Format(format!("parameter file truncated in {what}"));
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| truncated("magic"))?;
    if &word != PARAMS_MAGIC {
        return Err(DadaError::Format(format!("bad parameter magic {word:?}")));
    }
    let mut read_u32 = |r: &mut Cursor<&[u8]>, what: &str| -> Result<u32> {
        r.read_exact(&mut word).map_err(|_| truncated(what))?;
        Ok(u32::from_le_bytes(word))
    };
    let version = read_u32(&mut r, "version")?;
    if version != PARAMS_VERSION {
        return Err(DadaError::Format(format!("unsupported parameter file version {version}")));
    }
    let count = read_u32(&mut r, "layer count")? as usize;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let rows = read_u32(&mut r, "layer header")? as usize;
        let cols = read_u32(&mut r, "layer header")? as usize;
        let mut values = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b).map_err(|_| truncated(&format!("layer {i}")))?;
            values.push(f64::from_le_bytes(b));
        }
        layers.push(Tensor::new(vec![rows, cols], values)?);
    }
    if (r.position() as usize) != r.get_ref().len() {
        return Err(DadaError::Format("trailing bytes after last layer".into()));
    }
    Ok(layers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmenterConfig {
    pub latent_dim: usize,
    pub k: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

/// Class-conditional generator `G(z, y)`.
///
/// The one-hot label is concatenated to the latent code and again to the
/// input of every later layer; the output goes through `tanh`.
#[derive(Debug, Clone)]
pub struct AugmenterNet {
    config: AugmenterConfig,
    params: Vec<Tensor>,
    trainable: bool,
}

impl AugmenterNet {
    pub fn new(config: AugmenterConfig, seed: u64) -> Result<Self> {
        if config.k == 0 || config.latent_dim == 0 || config.output_dim == 0 {
            return Err(DadaError::Config(format!("augmenter needs k, latent and output widths > 0: {config:?}")));
        }
        let mut shapes = Vec::new();
        let mut fan_in = config.latent_dim + config.k;
        for &w in &config.hidden {
            shapes.push((fan_in, w));
            fan_in = w + config.k;
        }
        shapes.push((fan_in, config.output_dim));
        let params = init_params(&shapes, seed)?;
        Ok(AugmenterNet { config, params, trainable: true })
    }

    /// Rebuilds a network from layer matrices. `k` is inferred when there is
    /// at least one hidden layer.
    pub fn from_layers(layers: &[Tensor], k: Option<usize>) -> Result<Self> {
        let params = from_layer_matrices(layers)?;
        let shapes = layer_shapes(&params);
        let inferred = (shapes.len() >= 2).then(|| shapes[1].0.checked_sub(shapes[0].1)).flatten();
        let k = match (k, inferred) {
            (Some(k), Some(i)) if k != i => {
                return Err(DadaError::Config(format!("k={k} does not match layer shapes (k={i})")))
            }
            (Some(k), _) | (None, Some(k)) => k,
            (None, None) => return Err(DadaError::Config("cannot infer k from a single-layer augmenter".into())),
        };
        let latent_dim = shapes[0].0.checked_sub(k).filter(|d| *d > 0);
        let latent_dim = latent_dim.ok_or_else(|| DadaError::Config("first layer narrower than k".into()))?;
        for w in shapes.windows(2) {
            if w[1].0 != w[0].1 + k {
                return Err(DadaError::Config(format!("inconsistent augmenter layers {shapes:?}")));
            }
        }
        let config = AugmenterConfig {
            latent_dim,
            k,
            hidden: shapes[..shapes.len() - 1].iter().map(|s| s.1).collect(),
            output_dim: shapes[shapes.len() - 1].1,
        };
        Ok(AugmenterNet { config, params, trainable: true })
    }

    pub fn config(&self) -> &AugmenterConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        param_names("augmenter", self.params.len())
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// Freezing also drops any accumulated gradients.
    pub fn set_trainable(&mut self, on: bool) {
        self.trainable = on;
        self.params.iter_mut().for_each(|p| p.set_requires_grad(on));
    }

    pub fn checksum(&self) -> u64 {
        checksum(&self.params)
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        bind(&self.params, g, trainable && self.trainable)
    }

    pub fn accumulate_grads(&mut self, g: &Graph, bound: &Bound) -> Result<()> {
        accumulate(&mut self.params, g, bound)
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Records `G(z, y)` on `g`. `z` must be `[n, latent_dim]` and `labels` of length `n`.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, z: Var, labels: &[usize]) -> Result<Var> {
        let zs = g.shape(z).to_vec();
        if zs.len() != 2 || zs[0] != labels.len() || zs[1] != self.config.latent_dim {
            return Err(DadaError::Dimension(format!(
                "latent batch {zs:?} does not match {} labels of dimension {}",
                labels.len(),
                self.config.latent_dim
            )));
        }
        let cond = one_hot(labels, self.config.k)?;
        let cond = g.constant(&cond);
        let mut h = g.concat(z, cond, 1)?;
        let n_layers = self.params.len() / 2;
        for layer in 0..n_layers {
            let a = dense(g, h, bound, layer)?;
            if layer + 1 == n_layers {
                return Ok(g.tanh(a));
            }
            let a = g.relu(a);
            h = g.concat(a, cond, 1)?;
        }
        unreachable!("augmenter has at least one layer")
    }

    /// One synthetic sample per `(z, y)` row, outside of any training graph.
    pub fn augment(&self, z: &Tensor, labels: &[usize]) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let zv = g.constant(z);
        let out = self.forward(&mut g, &bound, zv, labels)?;
        Ok(g.tensor(out))
    }

    pub fn to_layers(&self) -> Vec<Tensor> {
        to_layer_matrices(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_layers(path, &self.to_layers())
    }

    pub fn load(path: &Path, k: Option<usize>) -> Result<Self> {
        Self::from_layers(&load_layers(path)?, k)
    }
}

fn param_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("{prefix}.layer{}.{}", i / 2, if i % 2 == 0 { "weight" } else { "bias" }))
        .collect()
}

/// Output layout of the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    /// Real classes `1..=k` followed by fake classes `1..=k`.
    TwoK,
    /// Real classes `1..=k` followed by a single fake class.
    KPlusOne,
    /// Real versus fake.
    Binary,
}

impl HeadMode {
    pub fn logit_width(self, k: usize) -> usize {
        match self {
            HeadMode::TwoK => 2 * k,
            HeadMode::KPlusOne => k + 1,
            HeadMode::Binary => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub input_dim: usize,
    pub k: usize,
    pub hidden: Vec<usize>,
    pub head: HeadMode,
    /// Std of the Gaussian noise added to inputs in training mode.
    pub input_noise: f64,
    /// Hidden layer whose activations serve as matching features.
    pub feature_tap: Option<usize>,
    pub leaky_slope: f64,
}

impl ClassifierConfig {
    pub fn new(input_dim: usize, k: usize, hidden: Vec<usize>, head: HeadMode) -> Self {
        let feature_tap = hidden.len().checked_sub(1);
        ClassifierConfig {
            input_dim,
            k,
            hidden,
            head,
            input_noise: DEFAULT_INPUT_NOISE,
            feature_tap,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

/// Logits plus the activations at the feature tap.
#[derive(Debug, Clone, Copy)]
pub struct ClassifierOutput {
    pub logits: Var,
    pub features: Option<Var>,
}

/// Leaky-ReLU network with a configurable output head.
#[derive(Debug, Clone)]
pub struct ClassifierNet {
    config: ClassifierConfig,
    params: Vec<Tensor>,
}

impl ClassifierNet {
    pub fn new(config: ClassifierConfig, seed: u64) -> Result<Self> {
        Self::validate(&config)?;
        let mut shapes = Vec::new();
        let mut fan_in = config.input_dim;
        for &w in &config.hidden {
            shapes.push((fan_in, w));
            fan_in = w;
        }
        shapes.push((fan_in, config.head.logit_width(config.k)));
        let params = init_params(&shapes, seed)?;
        Ok(ClassifierNet { config, params })
    }

    fn validate(config: &ClassifierConfig) -> Result<()> {
        if config.k == 0 || config.input_dim == 0 {
            return Err(DadaError::Config(format!("classifier needs k and input width > 0: {config:?}")));
        }
        if config.head == HeadMode::Binary && config.k != 1 {
            return Err(DadaError::Config(format!("binary head serves a single class, got k={}", config.k)));
        }
        if !(config.input_noise >= 0.0) {
            return Err(DadaError::Config(format!("input noise must be >= 0, got {}", config.input_noise)));
        }
        if let Some(t) = config.feature_tap {
            if t >= config.hidden.len() {
                return Err(DadaError::Config(format!(
                    "feature tap {t} but only {} hidden layers",
                    config.hidden.len()
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds a classifier from layer matrices and a config whose widths must agree.
    pub fn from_layers(layers: &[Tensor], config: ClassifierConfig) -> Result<Self> {
        Self::validate(&config)?;
        let params = from_layer_matrices(layers)?;
        let expected = Self::new(config.clone(), 0)?;
        if layer_shapes(&params) != layer_shapes(&expected.params) {
            return Err(DadaError::Config("layer shapes do not match classifier config".into()));
        }
        Ok(ClassifierNet { config, params })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn head(&self) -> HeadMode {
        self.config.head
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        param_names("classifier", self.params.len())
    }

    pub fn checksum(&self) -> u64 {
        checksum(&self.params)
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Bound {
        bind(&self.params, g, trainable)
    }

    pub fn accumulate_grads(&mut self, g: &Graph, bound: &Bound) -> Result<()> {
        accumulate(&mut self.params, g, bound)
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Records the classifier on `g`. Passing `noise` selects training mode,
    /// which perturbs the input with N(0, input_noise^2) when the std is positive.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, x: Var, noise: Option<&mut Rng>) -> Result<ClassifierOutput> {
        let xs = g.shape(x).to_vec();
        if xs.len() != 2 || xs[1] != self.config.input_dim {
            return Err(DadaError::Dimension(format!(
                "classifier expects [n, {}] inputs, got {xs:?}",
                self.config.input_dim
            )));
        }
        let mut h = x;
        if let Some(rng) = noise {
            if self.config.input_noise > 0.0 {
                let normal = Normal::new(0.0, self.config.input_noise).expect("finite std");
                let eps = (0..xs[0] * xs[1]).map(|_| normal.sample(rng)).collect();
                let eps = g.constant_from(xs.clone(), eps)?;
                h = g.add(h, eps)?;
            }
        }
        let mut features = None;
        let n_hidden = self.config.hidden.len();
        for layer in 0..n_hidden {
            let a = dense(g, h, bound, layer)?;
            h = g.leaky_relu(a, self.config.leaky_slope);
            if self.config.feature_tap == Some(layer) {
                features = Some(h);
            }
        }
        let logits = dense(g, h, bound, n_hidden)?;
        Ok(ClassifierOutput { logits, features })
    }

    /// Logits for a batch. `noise` selects training mode as in [`forward`](Self::forward).
    pub fn classify(&self, x: &Tensor, noise: Option<&mut Rng>) -> Result<Tensor> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x);
        let out = self.forward(&mut g, &bound, xv, noise)?;
        Ok(g.tensor(out.logits))
    }

    /// Eval-mode activations at the feature tap.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        if self.config.feature_tap.is_none() {
            return Err(DadaError::Config("classifier has no feature tap".into()));
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let xv = g.constant(x);
        let out = self.forward(&mut g, &bound, xv, None)?;
        Ok(g.tensor(out.features.expect("tap validated")))
    }

    pub fn to_layers(&self) -> Vec<Tensor> {
        to_layer_matrices(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_layers(path, &self.to_layers())
    }
}
