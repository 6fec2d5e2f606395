use super::{Graph, Tensor, Var};
use crate::error::{DadaError, Result};

/// Per-coordinate comparison of an analytic gradient with central differences.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|a - n| / max(|a|, |n|, 1e-8)` per coordinate.
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    /// Index of the worst coordinate.
    pub fn worst(&self) -> Option<usize> {
        self.rel_errors
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares `analytic` against the central difference of `value` at `at`.
pub fn check_gradient<F>(value: F, analytic: &[f64], at: &[f64], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(DadaError::Usage(format!("finite-difference step must be positive, got {h}")));
    }
    if analytic.len() != at.len() {
        return Err(DadaError::Dimension(format!(
            "{} analytic partials for {} coordinates",
            analytic.len(),
            at.len()
        )));
    }
    let (first, second) = (value(at)?, value(at)?);
    if first.to_bits() != second.to_bits() {
        return Err(DadaError::Usage(format!(
            "function is not deterministic: {first} then {second} at the same point"
        )));
    }
    let mut point = at.to_vec();
    let mut numeric = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = value(&point)?;
        point[i] = orig - h;
        let minus = value(&point)?;
        point[i] = orig;
        numeric.push((plus - minus) / (2.0 * h));
    }
    let rel_errors: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| rel_error(*a, *n)).collect();
    let max_rel_error = rel_errors.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        analytic: analytic.to_vec(),
        numeric,
        passed: max_rel_error < tol && max_rel_error.is_finite(),
        rel_errors,
        max_rel_error,
        tol,
    })
}

/// Checks the gradient of the scalar built by `f` with respect to every
/// coordinate of `params` (flattened in order).
///
/// `f` receives a fresh graph plus one variable per parameter tensor and
/// returns the scalar output.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.leaf(&p.clone().with_grad())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<f64> = vars
        .iter()
        .zip(params)
        .flat_map(|(v, p)| g.grad(*v).map_or_else(|| vec![0.0; p.numel()], <[f64]>::to_vec))
        .collect();
    let at: Vec<f64> = params.iter().flat_map(|p| p.values().iter().copied()).collect();
    let value = |x: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let mut offset = 0;
        let mut vars = Vec::with_capacity(params.len());
        for p in params {
            let n = p.numel();
            vars.push(g.constant_from(p.shape().to_vec(), x[offset..offset + n].to_vec())?);
            offset += n;
        }
        let out = f(&mut g, &vars)?;
        if g.value(out).len() != 1 {
            return Err(DadaError::Usage("grad_check needs a scalar function".into()));
        }
        Ok(g.item(out))
    };
    check_gradient(value, &analytic, &at, h, tol)
}
