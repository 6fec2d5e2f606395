use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample, Layout};
use crate::error::{DadaError, Result};
use crate::rng::seeded;

/// Label-preserving hand-crafted transforms. Each synthetic sample draws its
/// parameters uniformly from the given ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    /// Rotation by an angle in `[-max_degrees, max_degrees]` (grids only).
    Rotate { max_degrees: f64 },
    /// Integer shift in `[-max_shift, max_shift]` along both axes (grids only).
    Translate { max_shift: usize },
    /// Mirror left to right (grids only).
    FlipH,
    /// Additive Gaussian noise.
    Jitter { sigma: f64 },
}

impl AugmentOp {
    fn needs_grid(self) -> bool {
        !matches!(self, AugmentOp::Jitter { .. })
    }
}

/// Rotates a channel-last grid about its center; nearest-neighbor sampling
/// with edge clamping.
pub(crate) fn rotate(x: &[f64], h: usize, w: usize, c: usize, degrees: f64) -> Vec<f64> {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut out = vec![0.0; x.len()];
    for r in 0..h {
        for col in 0..w {
            let (dy, dx) = (r as f64 - cy, col as f64 - cx);
            let sy = (cy + dy * cos - dx * sin).round().clamp(0.0, h as f64 - 1.0) as usize;
            let sx = (cx + dy * sin + dx * cos).round().clamp(0.0, w as f64 - 1.0) as usize;
            let (dst, src) = ((r * w + col) * c, (sy * w + sx) * c);
            out[dst..dst + c].copy_from_slice(&x[src..src + c]);
        }
    }
    out
}

/// Shifts a grid by `(dy, dx)` cells; vacated cells become -1.
pub(crate) fn translate(x: &[f64], h: usize, w: usize, c: usize, dy: i64, dx: i64) -> Vec<f64> {
    let mut out = vec![-1.0; x.len()];
    for r in 0..h as i64 {
        for col in 0..w as i64 {
            let (sr, sc) = (r - dy, col - dx);
            if sr < 0 || sc < 0 || sr >= h as i64 || sc >= w as i64 {
                continue;
            }
            let dst = ((r as usize) * w + col as usize) * c;
            let src = ((sr as usize) * w + sc as usize) * c;
            out[dst..dst + c].copy_from_slice(&x[src..src + c]);
        }
    }
    out
}

pub(crate) fn flip_h(x: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for r in 0..h {
        for col in 0..w {
            let (dst, src) = ((r * w + col) * c, (r * w + (w - 1 - col)) * c);
            out[dst..dst + c].copy_from_slice(&x[src..src + c]);
        }
    }
    out
}

/// Returns the original samples followed by `(multiplier - 1) * |d|`
/// transformed copies. Source samples are visited round-robin; each copy
/// applies one op picked uniformly from `ops`. Outputs are clipped to `[-1, 1]`.
pub fn traditional_augment(d: &Dataset, ops: &[AugmentOp], multiplier: usize, seed: u64) -> Result<Dataset> {
    if multiplier == 0 {
        return Err(DadaError::Config("augmentation multiplier must be >= 1".into()));
    }
    if multiplier > 1 && ops.is_empty() {
        return Err(DadaError::Config("augmentation multiplier > 1 needs at least one op".into()));
    }
    let grid = match d.layout() {
        Layout::Grid { h, w, c } => Some((h, w, c)),
        Layout::Vector { .. } => None,
    };
    if grid.is_none() {
        if let Some(op) = ops.iter().find(|op| op.needs_grid()) {
            return Err(DadaError::Config(format!("{op:?} needs grid data; use jitter for vectors")));
        }
    }
    for op in ops {
        match *op {
            AugmentOp::Jitter { sigma } if !(sigma >= 0.0) => {
                return Err(DadaError::Config(format!("jitter sigma must be >= 0, got {sigma}")))
            }
            AugmentOp::Rotate { max_degrees } if !(max_degrees >= 0.0) => {
                return Err(DadaError::Config(format!("rotation range must be >= 0, got {max_degrees}")))
            }
            _ => {}
        }
    }
    let mut rng = seeded(seed);
    let mut out: Vec<LabeledSample> = d.samples().to_vec();
    for i in 0..(multiplier - 1) * d.len() {
        let src = &d.samples()[i % d.len()];
        let op = ops[rng.random_range(0..ops.len())];
        let mut x = match (op, grid) {
            (AugmentOp::Jitter { sigma }, _) => {
                if sigma > 0.0 {
                    let n = Normal::new(0.0, sigma).expect("positive sigma");
                    src.x.iter().map(|v| v + n.sample(&mut rng)).collect()
                } else {
                    src.x.clone()
                }
            }
            (AugmentOp::Rotate { max_degrees }, Some((h, w, c))) => {
                let a = if max_degrees > 0.0 { rng.random_range(-max_degrees..=max_degrees) } else { 0.0 };
                rotate(&src.x, h, w, c, a)
            }
            (AugmentOp::Translate { max_shift }, Some((h, w, c))) => {
                let t = max_shift as i64;
                let (dy, dx) = (rng.random_range(-t..=t), rng.random_range(-t..=t));
                translate(&src.x, h, w, c, dy, dx)
            }
            (AugmentOp::FlipH, Some((h, w, c))) => flip_h(&src.x, h, w, c),
            (_, None) => unreachable!("grid ops rejected above"),
        };
        x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
        out.push(LabeledSample { x, y: src.y });
    }
    Dataset::new(out, d.k(), d.layout())
}
