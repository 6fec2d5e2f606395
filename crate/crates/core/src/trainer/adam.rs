use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(DadaError::Config(format!("adam.lr must be > 0, got {}", self.lr)));
        }
        for (name, b) in [("adam.beta1", self.beta1), ("adam.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(DadaError::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.eps >= 0.0) {
            return Err(DadaError::Config(format!("adam.eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// First and second moments per parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
///
/// Gradients are validated before anything is modified, so a non-finite
/// gradient leaves both parameters and state untouched.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &AdamConfig,
    names: &[String],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(DadaError::Dimension(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let name = names.get(i).map_or_else(|| format!("param{i}"), Clone::clone);
        if p.numel() != g.len() || state.m[i].len() != g.len() {
            return Err(DadaError::Dimension(format!("gradient of {name} has length {}", g.len())));
        }
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            return Err(DadaError::NonFinite(format!("gradient {bad} in {name}")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, w) in p.values_mut().iter_mut().enumerate() {
            let g = grads[i][j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Adam bound to one network: reads each tensor's accumulated gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    state: AdamState,
    names: Vec<String>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor], names: Vec<String>) -> Self {
        Adam { config, state: AdamState::new(params), names }
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.state.t
    }

    /// Applies one step using `grad()` of every tensor; a tensor without an
    /// accumulated gradient is treated as having a zero gradient.
    pub fn step(&mut self, params: &mut [Tensor]) -> Result<()> {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let grads: Vec<Vec<f64>> = params
            .iter()
            .zip(&zeros)
            .map(|(p, z)| p.grad().unwrap_or(z).to_vec())
            .collect();
        let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        adam_step(params, &refs, &mut self.state, &self.config, &self.names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_adam(w0: f64, steps: usize, cfg: &AdamConfig) -> Vec<f64> {
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        let mut out = Vec::new();
        for t in 1..=steps {
            let g = 2.0 * w;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let mh = m / (1.0 - cfg.beta1.powi(t as i32));
            let vh = v / (1.0 - cfg.beta2.powi(t as i32));
            w -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
            out.push(w);
        }
        out
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        for g in [1.0, -3.5, 0.25] {
            let mut p = vec![Tensor::vector(vec![0.7, -0.2])];
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &[&[g, g]], &mut st, &cfg, &[]).unwrap();
            for (new, old) in p[0].values().iter().zip([0.7, -0.2]) {
                assert!(((new - old).abs() - cfg.lr).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_gradient_never_moves() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::vector(vec![0.7, -0.2])];
        let mut st = AdamState::new(&p);
        for _ in 0..50 {
            adam_step(&mut p, &[&[0.0, 0.0]], &mut st, &cfg, &[]).unwrap();
        }
        assert_eq!(p[0].values(), &[0.7, -0.2]);
        assert_eq!(st.t, 50);
    }

    #[test]
    fn three_steps_match_scalar_reference() {
        let cfg = AdamConfig::default();
        let expected = scalar_adam(1.0, 3, &cfg);
        let mut p = vec![Tensor::vector(vec![1.0])];
        let mut st = AdamState::new(&p);
        for want in expected {
            let g = 2.0 * p[0].values()[0];
            adam_step(&mut p, &[&[g]], &mut st, &cfg, &[]).unwrap();
            assert!((p[0].values()[0] - want).abs() < 1e-12);
        }
        assert!(st.v[0].iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn nan_gradient_aborts_and_names_parameter() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::vector(vec![1.0]), Tensor::vector(vec![2.0])];
        let mut st = AdamState::new(&p);
        let names = vec!["a.weight".to_string(), "a.bias".to_string()];
        let err = adam_step(&mut p, &[&[0.1], &[f64::NAN]], &mut st, &cfg, &names).unwrap_err();
        assert!(matches!(&err, DadaError::NonFinite(m) if m.contains("a.bias")), "{err}");
        assert_eq!(st.t, 0);
        assert_eq!(p[0].values(), &[1.0]);
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
    }
}
