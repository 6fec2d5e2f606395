use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample, Layout};
use crate::error::{DadaError, Result};
use crate::rng::seeded;

/// Isotropic Gaussian mixture with one component per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl MixtureSpec {
    /// `k` means evenly spaced on a circle of the given radius, starting on the x axis.
    pub fn on_circle(k: usize, radius: f64, sigma: f64) -> Self {
        MixtureSpec { means: circle_means(k, radius), sigma }
    }

    /// Half-width of the box raw draws are clipped to before rescaling:
    /// the largest mean coordinate plus four standard deviations.
    pub fn bound(&self) -> f64 {
        let m = self.means.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        m + 4.0 * self.sigma
    }

    /// Means expressed in the rescaled `[-1, 1]` coordinates.
    pub fn scaled_means(&self) -> Vec<Vec<f64>> {
        let b = self.bound();
        self.means.iter().map(|m| m.iter().map(|v| v / b).collect()).collect()
    }
}

pub fn circle_means(k: usize, radius: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// `n_per_class` draws from `N(mean_c, sigma^2 I)` for each class, clipped to
/// `[-bound, bound]` and divided by `bound` (see [`MixtureSpec::bound`]).
pub fn gen_gaussian_mixture(k: usize, n_per_class: usize, spec: &MixtureSpec, seed: u64) -> Result<Dataset> {
    if spec.means.len() < k {
        return Err(DadaError::Config(format!("{} means for {k} classes", spec.means.len())));
    }
    if !(spec.sigma > 0.0) {
        return Err(DadaError::Config(format!("sigma must be positive, got {}", spec.sigma)));
    }
    if n_per_class == 0 {
        return Err(DadaError::Config("empty dataset: n_per_class is 0".into()));
    }
    let dim = spec.means.first().map_or(0, Vec::len);
    if dim == 0 || spec.means.iter().any(|m| m.len() != dim) {
        return Err(DadaError::Config("means must share one positive dimension".into()));
    }
    let bound = spec.bound();
    let noise = Normal::new(0.0, spec.sigma).expect("positive sigma");
    let mut rng = seeded(seed);
    let mut samples = Vec::with_capacity(k * n_per_class);
    for (c, mean) in spec.means.iter().take(k).enumerate() {
        for _ in 0..n_per_class {
            let x = mean.iter().map(|m| (m + noise.sample(&mut rng)).clamp(-bound, bound) / bound).collect();
            samples.push(LabeledSample { x, y: c + 1 });
        }
    }
    Dataset::new(samples, k, Layout::Vector { dim })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nearest_mean(x: &[f64], means: &[Vec<f64>]) -> usize {
        let d2 = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        (0..means.len()).min_by(|&a, &b| d2(&means[a]).total_cmp(&d2(&means[b]))).unwrap() + 1
    }

    #[test]
    fn separated_pair_is_nearly_perfectly_separable() {
        let spec = MixtureSpec { means: vec![vec![2.0, 2.0], vec![-2.0, -2.0]], sigma: 0.3 };
        let d = gen_gaussian_mixture(2, 5000, &spec, 17).unwrap();
        let means = spec.scaled_means();
        let correct = d.samples().iter().filter(|s| nearest_mean(&s.x, &means) == s.y).count();
        assert!(correct as f64 / d.len() as f64 >= 0.999);
    }

    #[test]
    fn degenerate_inputs() {
        let spec = MixtureSpec::on_circle(3, 2.0, 0.5);
        assert!(matches!(gen_gaussian_mixture(3, 0, &spec, 0), Err(DadaError::Config(_))));
        assert!(matches!(gen_gaussian_mixture(4, 5, &spec, 0), Err(DadaError::Config(_))));
        let bad = MixtureSpec { sigma: 0.0, ..spec.clone() };
        assert!(gen_gaussian_mixture(3, 5, &bad, 0).is_err());
    }

    #[test]
    fn deterministic_and_in_range() {
        let spec = MixtureSpec::on_circle(3, 2.0, 0.8);
        let a = gen_gaussian_mixture(3, 50, &spec, 3).unwrap();
        assert_eq!(a, gen_gaussian_mixture(3, 50, &spec, 3).unwrap());
        assert_ne!(a, gen_gaussian_mixture(3, 50, &spec, 4).unwrap());
        assert!(a.samples().iter().all(|s| s.x.iter().all(|v| v.abs() <= 1.0)));
        assert_eq!(a.class_counts(), vec![50, 50, 50]);
    }

    #[test]
    fn circle_means_spacing() {
        let m = circle_means(3, 2.0);
        for (i, p) in m.iter().enumerate() {
            assert!(((p[0].powi(2) + p[1].powi(2)).sqrt() - 2.0).abs() < 1e-12);
            let q = &m[(i + 1) % 3];
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            assert!((d - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        }
    }
}
