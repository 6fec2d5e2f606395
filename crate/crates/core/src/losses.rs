//! Training objectives over `2k`, `k+1` and 2-way classifier heads.
//!
//! Labels are 1-based throughout. For a `2k` head, logit `y` (1-based) is
//! "real class y" and logit `k + y` is "fake class y". Every probability is
//! read off the full softmax over the head; nothing is renormalized over a
//! subset of outputs.
//!
//! All cross-entropies are computed as `logsumexp(row) - logit[target]` so
//! that saturated logits never take the log of an underflowed probability.

use serde::{Deserialize, Serialize};

use crate::error::{DadaError, Result};
use crate::models::HeadMode;
use crate::tensor::{softmax, Graph, Var};

/// Probability vector over real classes `1..=k` then fake classes `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoKDistribution {
    p: Vec<f64>,
}

impl TwoKDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || !p.len().is_multiple_of(2) {
            return Err(DadaError::Dimension(format!("2k distribution needs an even length, got {}", p.len())));
        }
        if p.iter().any(|v| !(*v >= 0.0)) {
            return Err(DadaError::Domain("2k distribution has a negative entry".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DadaError::Domain(format!("2k distribution sums to {total}")));
        }
        Ok(TwoKDistribution { p })
    }

    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        Self::new(softmax(logits))
    }

    pub fn k(&self) -> usize {
        self.p.len() / 2
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn fold(&self) -> Vec<f64> {
        fold(&self.p).expect("even length by construction")
    }
}

/// 0-based column of the `2k` output that a sample of class `y` targets.
pub fn target_index(y: usize, is_real: bool, k: usize) -> Result<usize> {
    check_label(y, k)?;
    Ok(if is_real { y - 1 } else { k + y - 1 })
}

/// One-hot ground truth of length `2k`: position `y` for a real sample,
/// `k + y` for a sample generated for class `y`.
pub fn build_2k_target(y: usize, is_real: bool, k: usize) -> Result<Vec<f64>> {
    let idx = target_index(y, is_real, k)?;
    let mut t = vec![0.0; 2 * k];
    t[idx] = 1.0;
    Ok(t)
}

/// Collapses `2k` probabilities to `k` by adding each real/fake pair.
pub fn fold(p: &[f64]) -> Result<Vec<f64>> {
    if !p.len().is_multiple_of(2) {
        return Err(DadaError::Dimension(format!("cannot fold an odd length {}", p.len())));
    }
    let k = p.len() / 2;
    Ok((0..k).map(|i| p[i] + p[k + i]).collect())
}

fn check_label(y: usize, k: usize) -> Result<()> {
    if y == 0 || y > k {
        return Err(DadaError::Domain(format!("label {y} outside 1..={k}")));
    }
    Ok(())
}

fn check_batch(g: &Graph, logits: Var, labels: &[usize], width: usize, k: usize, what: &str) -> Result<()> {
    let shape = g.shape(logits);
    if shape.len() != 2 || shape[1] != width {
        return Err(DadaError::Dimension(format!("{what}: expected logits of width {width}, got {shape:?}")));
    }
    if shape[0] != labels.len() {
        return Err(DadaError::Dimension(format!("{what}: {} logit rows for {} labels", shape[0], labels.len())));
    }
    if labels.is_empty() {
        return Err(DadaError::Usage(format!("{what}: empty batch")));
    }
    labels.iter().try_for_each(|&y| check_label(y, k))
}

/// Mean over rows of `-log softmax(row)[target]`, `targets` 0-based.
fn cross_entropy(g: &mut Graph, logits: Var, targets: &[usize]) -> Result<Var> {
    let picked = g.gather_cols(logits, targets, 1)?;
    let lse = g.logsumexp_rows(logits)?;
    let a = g.mean(lse)?;
    let b = g.mean(picked)?;
    g.sub(a, b)
}

/// Mean over rows of `-log(sum of softmax(row) over that row's targets)`.
fn grouped_cross_entropy(g: &mut Graph, logits: Var, targets: &[usize], per_row: usize) -> Result<Var> {
    let picked = g.gather_cols(logits, targets, per_row)?;
    let lse_pick = g.logsumexp_rows(picked)?;
    let lse = g.logsumexp_rows(logits)?;
    let a = g.mean(lse)?;
    let b = g.mean(lse_pick)?;
    g.sub(a, b)
}

/// Phase-I classifier objective: real samples target their real class,
/// generated samples target the fake copy of their conditioning class.
pub fn loss_c_phase1(
    g: &mut Graph,
    logits_real: Var,
    y_real: &[usize],
    logits_fake: Var,
    y_fake: &[usize],
    k: usize,
) -> Result<Var> {
    check_batch(g, logits_real, y_real, 2 * k, k, "real batch")?;
    check_batch(g, logits_fake, y_fake, 2 * k, k, "fake batch")?;
    let real_t: Vec<usize> = y_real.iter().map(|&y| y - 1).collect();
    let fake_t: Vec<usize> = y_fake.iter().map(|&y| k + y - 1).collect();
    let a = cross_entropy(g, logits_real, &real_t)?;
    let b = cross_entropy(g, logits_fake, &fake_t)?;
    g.add(a, b)
}

/// Phase-I generator objective: generated samples should be taken for the
/// real copy of their conditioning class.
pub fn loss_g_phase1(g: &mut Graph, logits_fake: Var, y_fake: &[usize], k: usize) -> Result<Var> {
    check_batch(g, logits_fake, y_fake, 2 * k, k, "fake batch")?;
    let t: Vec<usize> = y_fake.iter().map(|&y| y - 1).collect();
    cross_entropy(g, logits_fake, &t)
}

/// Class-conditional feature matching: the mean over classes of the L2
/// distance between the real and generated feature means of that class.
///
/// The real side is detached, so gradients reach only the generated features.
pub fn loss_feature_matching(
    g: &mut Graph,
    f_real: Var,
    y_real: &[usize],
    f_fake: Var,
    y_fake: &[usize],
) -> Result<Var> {
    let (sr, sf) = (g.shape(f_real).to_vec(), g.shape(f_fake).to_vec());
    if sr.len() != 2 || sf.len() != 2 || sr[1] != sf[1] {
        return Err(DadaError::Dimension(format!("feature batches {sr:?} and {sf:?} differ in width")));
    }
    if sr[0] != y_real.len() || sf[0] != y_fake.len() {
        return Err(DadaError::Dimension("feature rows do not match label counts".into()));
    }
    if y_real.is_empty() || y_fake.is_empty() {
        return Err(DadaError::Usage("feature matching on an empty batch".into()));
    }
    let mut classes: Vec<usize> = y_real.iter().chain(y_fake).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    let real = g.detach(f_real);
    let mut total: Option<Var> = None;
    for &c in &classes {
        let rows = |ys: &[usize]| -> Vec<usize> { (0..ys.len()).filter(|&i| ys[i] == c).collect() };
        let (rr, rf) = (rows(y_real), rows(y_fake));
        if rr.is_empty() || rf.is_empty() {
            return Err(DadaError::Usage(format!("class {c} appears in only one feature batch")));
        }
        let mr = g.select_rows(real, &rr)?;
        let mr = g.mean_rows(mr)?;
        let mf = g.select_rows(f_fake, &rf)?;
        let mf = g.mean_rows(mf)?;
        let d = g.sub(mr, mf)?;
        let n = g.l2_norm(d);
        total = Some(match total {
            Some(t) => g.add(t, n)?,
            None => n,
        });
    }
    let total = total.expect("at least one class");
    Ok(g.scale(total, 1.0 / classes.len() as f64))
}

/// Generator objective with feature matching weighted by `lambda`.
pub fn loss_g_total(g: &mut Graph, loss_g: Var, loss_fm: Var, lambda: f64) -> Result<Var> {
    if !(lambda >= 0.0) {
        return Err(DadaError::Config(format!("feature matching weight must be >= 0, got {lambda}")));
    }
    let w = g.scale(loss_fm, lambda);
    g.add(loss_g, w)
}

fn folded_targets(labels: &[usize], k: usize) -> Vec<usize> {
    labels.iter().flat_map(|&y| [y - 1, k + y - 1]).collect()
}

/// Folded cross-entropy of real samples: `-log(p[y] + p[k+y])`.
pub fn loss_data(g: &mut Graph, logits_real: Var, y_real: &[usize], k: usize) -> Result<Var> {
    check_batch(g, logits_real, y_real, 2 * k, k, "real batch")?;
    grouped_cross_entropy(g, logits_real, &folded_targets(y_real, k), 2)
}

/// Folded cross-entropy of generated samples: `-log(p[k+y] + p[y])`.
pub fn loss_gen(g: &mut Graph, logits_fake: Var, y_fake: &[usize], k: usize) -> Result<Var> {
    check_batch(g, logits_fake, y_fake, 2 * k, k, "fake batch")?;
    let t: Vec<usize> = y_fake.iter().flat_map(|&y| [k + y - 1, y - 1]).collect();
    grouped_cross_entropy(g, logits_fake, &t, 2)
}

/// Phase-II classifier objective, the sum of [`loss_data`] and [`loss_gen`].
pub fn loss_c_phase2(
    g: &mut Graph,
    logits_real: Var,
    y_real: &[usize],
    logits_fake: Var,
    y_fake: &[usize],
    k: usize,
) -> Result<Var> {
    let a = loss_data(g, logits_real, y_real, k)?;
    let b = loss_gen(g, logits_fake, y_fake, k)?;
    g.add(a, b)
}

/// Discriminator losses the `2k` head is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Two outputs: real, fake.
    Vanilla2Class,
    /// `k` real classes plus one fake class.
    KPlusOne,
}

impl BaselineMode {
    pub fn width(self, k: usize) -> usize {
        match self {
            BaselineMode::Vanilla2Class => 2,
            BaselineMode::KPlusOne => k + 1,
        }
    }

    fn target(self, y: usize, is_real: bool, k: usize) -> usize {
        match (self, is_real) {
            (BaselineMode::Vanilla2Class, true) => 0,
            (BaselineMode::Vanilla2Class, false) => 1,
            (BaselineMode::KPlusOne, true) => y - 1,
            (BaselineMode::KPlusOne, false) => k,
        }
    }
}

/// Baseline discriminator loss over one mixed batch: the mean cross-entropy
/// of the real rows plus that of the fake rows (an absent group adds nothing).
///
/// Vanilla targets real/fake; `k+1` sends real rows to their class and every
/// fake row to the single fake output.
pub fn loss_baseline(
    g: &mut Graph,
    mode: BaselineMode,
    logits: Var,
    labels: &[usize],
    is_real: &[bool],
    k: usize,
) -> Result<Var> {
    check_batch(g, logits, labels, mode.width(k), k, "baseline batch")?;
    if is_real.len() != labels.len() {
        return Err(DadaError::Dimension("real/fake flags do not match labels".into()));
    }
    let mut total: Option<Var> = None;
    for side in [true, false] {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| is_real[i] == side).collect();
        if rows.is_empty() {
            continue;
        }
        let targets: Vec<usize> = rows.iter().map(|&i| mode.target(labels[i], side, k)).collect();
        let sub = g.select_rows(logits, &rows)?;
        let ce = cross_entropy(g, sub, &targets)?;
        total = Some(match total {
            Some(t) => g.add(t, ce)?,
            None => ce,
        });
    }
    Ok(total.expect("non-empty batch"))
}

/// Baseline generator loss: generated rows target "real" (vanilla) or the
/// real output of their conditioning class (`k+1`).
pub fn loss_baseline_generator(
    g: &mut Graph,
    mode: BaselineMode,
    logits_fake: Var,
    y_fake: &[usize],
    k: usize,
) -> Result<Var> {
    check_batch(g, logits_fake, y_fake, mode.width(k), k, "fake batch")?;
    let t: Vec<usize> = y_fake.iter().map(|&y| mode.target(y, true, k)).collect();
    cross_entropy(g, logits_fake, &t)
}

/// Second-phase objective for a `k+1` head: real and generated samples both
/// target the real output of their class.
pub fn loss_kplus1_phase2(
    g: &mut Graph,
    logits_real: Var,
    y_real: &[usize],
    logits_fake: Var,
    y_fake: &[usize],
    k: usize,
) -> Result<Var> {
    check_batch(g, logits_real, y_real, k + 1, k, "real batch")?;
    check_batch(g, logits_fake, y_fake, k + 1, k, "fake batch")?;
    let rt: Vec<usize> = y_real.iter().map(|&y| y - 1).collect();
    let ft: Vec<usize> = y_fake.iter().map(|&y| y - 1).collect();
    let a = cross_entropy(g, logits_real, &rt)?;
    let b = cross_entropy(g, logits_fake, &ft)?;
    g.add(a, b)
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Predicted 1-based class for one row of eval-mode logits. Ties go to the
/// lowest class index.
pub fn predict(logits: &[f64], head: HeadMode, k: usize) -> usize {
    match head {
        HeadMode::TwoK => {
            let q = fold(&softmax(logits)).expect("2k head has even width");
            argmax_first(&q) + 1
        }
        HeadMode::KPlusOne => argmax_first(&logits[..k]) + 1,
        HeadMode::Binary => 1,
    }
}

/// [`predict`] for every row of a `[n, width]` logit matrix.
pub fn predict_batch(logits: &[f64], width: usize, head: HeadMode, k: usize) -> Vec<usize> {
    logits.chunks(width).map(|row| predict(row, head, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, Tensor};

    const LN4: f64 = 1.386_294_361_119_890_6;

    fn logits(g: &mut Graph, rows: &[Vec<f64>]) -> Var {
        g.constant(&Tensor::from_rows(rows).unwrap())
    }

    #[test]
    fn two_k_targets() {
        assert_eq!(build_2k_target(1, true, 2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(build_2k_target(1, false, 2).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(build_2k_target(3, false, 3).unwrap(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(build_2k_target(0, true, 2), Err(DadaError::Domain(_))));
        assert!(matches!(build_2k_target(3, true, 2), Err(DadaError::Domain(_))));
    }

    #[test]
    fn fold_examples() {
        let q = fold(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!((q[0] - 0.4).abs() < 1e-15 && (q[1] - 0.6).abs() < 1e-15);
        assert_eq!(fold(&[0.125; 8]).unwrap(), vec![0.25; 4]);
        assert!(matches!(fold(&[0.5, 0.25, 0.25]), Err(DadaError::Dimension(_))));
        let d = TwoKDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(d.k(), 2);
        assert!(TwoKDistribution::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn phase1_classifier_uniform() {
        let mut g = Graph::new();
        let r = logits(&mut g, &[vec![0.0; 4]]);
        let f = logits(&mut g, &[vec![0.0; 4]]);
        let l = loss_c_phase1(&mut g, r, &[1], f, &[1], 2).unwrap();
        assert!((g.item(l) - 2.0 * LN4).abs() < 1e-12);
    }

    #[test]
    fn phase1_classifier_limit() {
        let mut g = Graph::new();
        let r = logits(&mut g, &[vec![50.0, 0.0, 0.0, 0.0]]);
        let f = logits(&mut g, &[vec![0.0, 0.0, 50.0, 0.0]]);
        let l = loss_c_phase1(&mut g, r, &[1], f, &[1], 2).unwrap();
        assert!(g.item(l) >= 0.0 && g.item(l) < 1e-20);
    }

    #[test]
    fn empty_batch_is_usage_error() {
        let mut g = Graph::new();
        let e = g.constant(&Tensor::zeros(vec![0, 4]));
        let r = logits(&mut g, &[vec![0.0; 4]]);
        assert!(matches!(loss_c_phase1(&mut g, e, &[], r, &[1], 2), Err(DadaError::Usage(_))));
        assert!(matches!(loss_g_phase1(&mut g, e, &[], 2), Err(DadaError::Usage(_))));
        assert!(matches!(loss_c_phase2(&mut g, r, &[1], e, &[], 2), Err(DadaError::Usage(_))));
    }

    #[test]
    fn generator_uniform_and_monotone() {
        let mut g = Graph::new();
        let f = logits(&mut g, &[vec![0.0; 4]]);
        let l = loss_g_phase1(&mut g, f, &[1], 2).unwrap();
        assert!((g.item(l) - LN4).abs() < 1e-12);
        let f2 = logits(&mut g, &[vec![0.5, 0.0, 0.0, 0.0]]);
        let l2 = loss_g_phase1(&mut g, f2, &[1], 2).unwrap();
        assert!(g.item(l2) < g.item(l));
    }

    #[test]
    fn feature_matching_closed_forms() {
        let mut g = Graph::new();
        let a = logits(&mut g, &[vec![1.0, 0.0], vec![3.0, 2.0]]);
        let b = logits(&mut g, &[vec![2.0, 1.0]]);
        let l = loss_feature_matching(&mut g, a, &[1, 1], b, &[1]).unwrap();
        assert_eq!(g.item(l), 0.0);

        let r = logits(&mut g, &[vec![1.0, 0.0]]);
        let f = logits(&mut g, &[vec![0.0, 1.0]]);
        let l = loss_feature_matching(&mut g, r, &[1], f, &[1]).unwrap();
        assert!((g.item(l) - 2f64.sqrt()).abs() < 1e-15);

        assert!(matches!(loss_feature_matching(&mut g, r, &[1], f, &[2]), Err(DadaError::Usage(_))));
    }

    #[test]
    fn feature_matching_gradient_only_reaches_fake_side() {
        let fr = Tensor::from_rows(&[vec![0.3, -1.0, 0.2], vec![1.1, 0.4, -0.7], vec![0.0, 0.5, 0.9]]).unwrap();
        let ff = Tensor::from_rows(&[vec![-0.3, 0.8, 0.1], vec![0.6, -0.2, 0.4], vec![0.2, 0.2, -1.2]]).unwrap();
        let report = grad_check(
            |g, v| {
                let r = g.constant(&fr);
                loss_feature_matching(g, r, &[1, 2, 1], v[0], &[2, 1, 1])
            },
            std::slice::from_ref(&ff),
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");

        let mut g = Graph::new();
        let r = g.leaf(&fr.clone().with_grad());
        let f = g.leaf(&ff.with_grad());
        let l = loss_feature_matching(&mut g, r, &[1, 2, 1], f, &[2, 1, 1]).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(r).is_none());
        assert!(g.grad(f).is_some());
    }

    #[test]
    fn generator_total() {
        let mut g = Graph::new();
        let a = g.constant(&Tensor::scalar(1.0));
        let b = g.constant(&Tensor::scalar(0.5));
        let t = loss_g_total(&mut g, a, b, 1.0).unwrap();
        assert_eq!(g.item(t), 1.5);
        let t0 = loss_g_total(&mut g, a, b, 0.0).unwrap();
        assert_eq!(g.item(t0), 1.0);
        assert!(matches!(loss_g_total(&mut g, a, b, -0.1), Err(DadaError::Config(_))));
    }

    #[test]
    fn phase2_uniform_and_symmetric() {
        let mut g = Graph::new();
        let r = logits(&mut g, &[vec![0.0; 4]]);
        let f = logits(&mut g, &[vec![0.0; 4]]);
        let l = loss_c_phase2(&mut g, r, &[1], f, &[1], 2).unwrap();
        assert!((g.item(l) - 2.0 * 2f64.ln()).abs() < 1e-12);

        let row = vec![vec![0.3, -1.2, 2.0, 0.7, -0.1, 0.4]];
        let a = logits(&mut g, &row);
        let ld = loss_data(&mut g, a, &[2], 3).unwrap();
        let lg = loss_gen(&mut g, a, &[2], 3).unwrap();
        assert_eq!(g.item(ld), g.item(lg));
    }

    #[test]
    fn baseline_uniform_values() {
        let mut g = Graph::new();
        let v = logits(&mut g, &[vec![0.0, 0.0]]);
        let l = loss_baseline(&mut g, BaselineMode::Vanilla2Class, v, &[1], &[true], 1).unwrap();
        assert!((g.item(l) - 2f64.ln()).abs() < 1e-12);
        let kp = logits(&mut g, &[vec![0.0; 3]]);
        let l = loss_baseline(&mut g, BaselineMode::KPlusOne, kp, &[2], &[false], 2).unwrap();
        assert!((g.item(l) - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(
            loss_baseline(&mut g, BaselineMode::KPlusOne, v, &[1], &[true], 2),
            Err(DadaError::Dimension(_))
        ));
    }

    #[test]
    fn predict_examples() {
        let p: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
        let l: Vec<f64> = p.iter().map(|v| v.ln()).collect();
        assert_eq!(predict(&l, HeadMode::TwoK, 2), 2);
        assert_eq!(predict(&[0.0; 4], HeadMode::TwoK, 2), 1);
        let shifted: Vec<f64> = l.iter().map(|v| v + 17.0).collect();
        assert_eq!(predict(&shifted, HeadMode::TwoK, 2), 2);
        assert_eq!(predict(&[0.1, 0.5, 9.0], HeadMode::KPlusOne, 2), 2);
    }
}
