//! Finite-difference checks of every training objective on random inputs.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::Result;
use crate::losses::{
    loss_baseline, loss_baseline_generator, loss_c_phase1, loss_c_phase2, loss_data, loss_feature_matching,
    loss_g_phase1, loss_g_total, loss_gen, loss_kplus1_phase2, BaselineMode,
};
use crate::rng::{seeded, Rng};
use crate::tensor::{grad_check, Graph, Tensor, Var};

pub const SUITE_TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;
const KS: [usize; 4] = [1, 2, 3, 5];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    pub max_rel_error: f64,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn matrix(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let n = Normal::new(0.0, 1.5).expect("valid std");
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| n.sample(rng)).collect()).expect("shape")
}

fn labels(n: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(1..=k)).collect()
}

type Case = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

/// One random instance of objective `name`: the closure and its inputs.
fn instance(name: &str, k: usize, rng: &mut Rng) -> (Case, Vec<Tensor>) {
    let (b1, b2) = (rng.random_range(1..=8), rng.random_range(1..=8));
    let (y1, y2) = (labels(b1, k, rng), labels(b2, k, rng));
    match name {
        "c_phase1" => {
            let p = vec![matrix(b1, 2 * k, rng), matrix(b2, 2 * k, rng)];
            (Box::new(move |g, v| loss_c_phase1(g, v[0], &y1, v[1], &y2, k)), p)
        }
        "g_phase1" => (Box::new(move |g, v| loss_g_phase1(g, v[0], &y1, k)), vec![matrix(b1, 2 * k, rng)]),
        "feature_matching" | "g_total" => {
            // generated labels are a permutation of the real ones, so every class is on both sides
            let mut yf = y1.clone();
            yf.reverse();
            let width = rng.random_range(1..=6);
            let real = matrix(b1, width, rng);
            if name == "feature_matching" {
                let p = vec![matrix(b1, width, rng)];
                (
                    Box::new(move |g, v| {
                        let r = g.constant(&real);
                        loss_feature_matching(g, r, &y1, v[0], &yf)
                    }),
                    p,
                )
            } else {
                let lambda = rng.random_range(0.0..2.0);
                let p = vec![matrix(b1, 2 * k, rng), matrix(b1, width, rng)];
                (
                    Box::new(move |g, v| {
                        let r = g.constant(&real);
                        let adv = loss_g_phase1(g, v[0], &yf, k)?;
                        let fm = loss_feature_matching(g, r, &y1, v[1], &yf)?;
                        loss_g_total(g, adv, fm, lambda)
                    }),
                    p,
                )
            }
        }
        "c_phase2" => {
            let p = vec![matrix(b1, 2 * k, rng), matrix(b2, 2 * k, rng)];
            (Box::new(move |g, v| loss_c_phase2(g, v[0], &y1, v[1], &y2, k)), p)
        }
        "data" => (Box::new(move |g, v| loss_data(g, v[0], &y1, k)), vec![matrix(b1, 2 * k, rng)]),
        "gen" => (Box::new(move |g, v| loss_gen(g, v[0], &y1, k)), vec![matrix(b1, 2 * k, rng)]),
        "vanilla" | "k_plus_one" => {
            let mode = if name == "vanilla" { BaselineMode::Vanilla2Class } else { BaselineMode::KPlusOne };
            let is_real: Vec<bool> = (0..b1).map(|_| rng.random_bool(0.5)).collect();
            let p = vec![matrix(b1, mode.width(k), rng)];
            (Box::new(move |g, v| loss_baseline(g, mode, v[0], &y1, &is_real, k)), p)
        }
        "vanilla_generator" | "k_plus_one_generator" => {
            let mode = if name == "vanilla_generator" { BaselineMode::Vanilla2Class } else { BaselineMode::KPlusOne };
            let p = vec![matrix(b1, mode.width(k), rng)];
            (Box::new(move |g, v| loss_baseline_generator(g, mode, v[0], &y1, k)), p)
        }
        "k_plus_one_phase2" => {
            let p = vec![matrix(b1, k + 1, rng), matrix(b2, k + 1, rng)];
            (Box::new(move |g, v| loss_kplus1_phase2(g, v[0], &y1, v[1], &y2, k)), p)
        }
        other => unreachable!("unknown suite entry {other}"),
    }
}

pub const SUITE: [&str; 12] = [
    "c_phase1",
    "g_phase1",
    "feature_matching",
    "g_total",
    "c_phase2",
    "data",
    "gen",
    "vanilla",
    "k_plus_one",
    "vanilla_generator",
    "k_plus_one_generator",
    "k_plus_one_phase2",
];

/// Runs `trials` random instances of every objective, cycling `k` through
/// 1, 2, 3 and 5 with batches of 1 to 8 rows.
pub fn gradient_suite(trials: usize, seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    for (e, name) in SUITE.into_iter().enumerate() {
        let mut rng = seeded(seed ^ ((e as u64 + 1) << 32));
        let mut entry = SuiteEntry { name, trials, failures: 0, max_rel_error: 0.0 };
        for t in 0..trials {
            let k = KS[t % KS.len()];
            let (f, params) = instance(name, k, &mut rng);
            let report = grad_check(f, &params, STEP, SUITE_TOL)?;
            entry.max_rel_error = entry.max_rel_error.max(report.max_rel_error);
            if !report.passed {
                entry.failures += 1;
            }
        }
        out.push(entry);
    }
    Ok(out)
}
