use proptest::prelude::*;
use rand::Rng as _;

use dada::data::{gen_gaussian_mixture, split, subsample, traditional_augment, AugmentOp, Dataset, LabeledSample, Layout, MixtureSpec, SubsampleSpec};
use dada::losses::{build_2k_target, fold, loss_c_phase1, predict};
use dada::models::{sample_latent, AugmenterConfig, AugmenterNet, ClassifierConfig, ClassifierNet, HeadMode};
use dada::rng::{seeded, Rng};
use dada::tensor::{grad_check, softmax, Graph, Tensor, Var};
use dada::trainer::{adam_step, AdamConfig, AdamState, BalancedSampler};
use dada::Result;

fn uniform(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values in [-2, 2] kept at least 0.05 away from zero (for kinked ops).
fn off_kink(shape: Vec<usize>, rng: &mut Rng) -> Tensor {
    let mut t = uniform(shape, 0.05, 2.0, rng);
    t.values_mut().iter_mut().for_each(|v| {
        if rng.random_bool(0.5) {
            *v = -*v
        }
    });
    t
}

/// Contracts `v` against fixed random weights so every output element gets
/// a distinct upstream gradient.
fn reduce(g: &mut Graph, v: Var, seed: u64) -> Result<Var> {
    let mut rng = seeded(seed);
    let w = uniform(g.shape(v).to_vec(), -1.0, 1.0, &mut rng);
    let w = g.constant(&w);
    let p = g.mul(v, w)?;
    Ok(g.sum(p))
}

type Case = Box<dyn Fn(&mut Graph, &[Var]) -> Result<Var>>;

const OPS: [&str; 20] = [
    "matmul", "add", "sub", "mul", "scale", "relu", "leaky_relu", "tanh", "exp", "log", "add_bias", "concat0",
    "concat1", "softmax", "logsumexp_rows", "gather_cols", "select_rows", "mean_rows", "sum_mean", "l2_norm",
];

fn op_case(op: &str, rng: &mut Rng) -> (Case, Vec<Tensor>) {
    let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=4));
    let s = rng.random::<u64>();
    let m = |rng: &mut Rng| uniform(vec![r, c], -2.0, 2.0, rng);
    match op {
        "matmul" => {
            let k = rng.random_range(1..=4);
            let p = vec![m(rng), uniform(vec![c, k], -2.0, 2.0, rng)];
            (Box::new(move |g, v| { let o = g.matmul(v[0], v[1])?; reduce(g, o, s) }), p)
        }
        "add" => (Box::new(move |g, v| { let o = g.add(v[0], v[1])?; reduce(g, o, s) }), vec![m(rng), m(rng)]),
        "sub" => (Box::new(move |g, v| { let o = g.sub(v[0], v[1])?; reduce(g, o, s) }), vec![m(rng), m(rng)]),
        "mul" => (Box::new(move |g, v| { let o = g.mul(v[0], v[1])?; reduce(g, o, s) }), vec![m(rng), m(rng)]),
        "scale" => {
            let k = rng.random_range(-3.0..3.0);
            (Box::new(move |g, v| { let o = g.scale(v[0], k); reduce(g, o, s) }), vec![m(rng)])
        }
        "relu" => (Box::new(move |g, v| { let o = g.relu(v[0]); reduce(g, o, s) }), vec![off_kink(vec![r, c], rng)]),
        "leaky_relu" => {
            (Box::new(move |g, v| { let o = g.leaky_relu(v[0], 0.2); reduce(g, o, s) }), vec![off_kink(vec![r, c], rng)])
        }
        "tanh" => (Box::new(move |g, v| { let o = g.tanh(v[0]); reduce(g, o, s) }), vec![m(rng)]),
        "exp" => (Box::new(move |g, v| { let o = g.exp(v[0]); reduce(g, o, s) }), vec![m(rng)]),
        "log" => {
            (Box::new(move |g, v| { let o = g.log(v[0])?; reduce(g, o, s) }), vec![uniform(vec![r, c], 0.1, 2.0, rng)])
        }
        "add_bias" => {
            let p = vec![m(rng), uniform(vec![c], -2.0, 2.0, rng)];
            (Box::new(move |g, v| { let o = g.add_bias(v[0], v[1])?; reduce(g, o, s) }), p)
        }
        "concat0" => {
            let p = vec![m(rng), uniform(vec![rng.random_range(1..=3), c], -2.0, 2.0, rng)];
            (Box::new(move |g, v| { let o = g.concat(v[0], v[1], 0)?; reduce(g, o, s) }), p)
        }
        "concat1" => {
            let p = vec![m(rng), uniform(vec![r, rng.random_range(1..=3)], -2.0, 2.0, rng)];
            (Box::new(move |g, v| { let o = g.concat(v[0], v[1], 1)?; reduce(g, o, s) }), p)
        }
        "softmax" => (Box::new(move |g, v| { let o = g.softmax(v[0])?; reduce(g, o, s) }), vec![m(rng)]),
        "logsumexp_rows" => (Box::new(move |g, v| { let o = g.logsumexp_rows(v[0])?; reduce(g, o, s) }), vec![m(rng)]),
        "gather_cols" => {
            let per = rng.random_range(1..=3);
            let idx: Vec<usize> = (0..r * per).map(|_| rng.random_range(0..c)).collect();
            (Box::new(move |g, v| { let o = g.gather_cols(v[0], &idx, per)?; reduce(g, o, s) }), vec![m(rng)])
        }
        "select_rows" => {
            let rows: Vec<usize> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(0..r)).collect();
            (Box::new(move |g, v| { let o = g.select_rows(v[0], &rows)?; reduce(g, o, s) }), vec![m(rng)])
        }
        "mean_rows" => (Box::new(move |g, v| { let o = g.mean_rows(v[0])?; reduce(g, o, s) }), vec![m(rng)]),
        "sum_mean" => (
            Box::new(move |g, v| {
                let a = g.sum(v[0]);
                let b = g.mean(v[0])?;
                let b = g.scale(b, 3.0);
                let o = g.mul(a, b)?;
                Ok(o)
            }),
            vec![m(rng)],
        ),
        "l2_norm" => (Box::new(move |g, v| { let o = g.l2_norm(v[0]); reduce(g, o, s) }), vec![off_kink(vec![r, c], rng)]),
        other => unreachable!("{other}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_op_matches_central_differences(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        for op in OPS {
            let (f, params) = op_case(op, &mut rng);
            let report = grad_check(f, &params, 1e-5, 1e-4).unwrap();
            prop_assert!(report.passed, "{op}: max rel error {:e}", report.max_rel_error);
        }
    }

    #[test]
    fn backward_twice_doubles_gradient(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let x = uniform(vec![3, 4], -2.0, 2.0, &mut rng).with_grad();
        let w = uniform(vec![4, 2], -2.0, 2.0, &mut rng).with_grad();
        let mut g = Graph::new();
        let (xv, wv) = (g.leaf(&x), g.leaf(&w));
        let h = g.matmul(xv, wv).unwrap();
        let h = g.tanh(h);
        let loss = g.logsumexp_rows(h).unwrap();
        let loss = g.sum(loss);
        g.backward(loss).unwrap();
        let once = g.grad(wv).unwrap().to_vec();
        g.backward(loss).unwrap();
        let twice = g.grad(wv).unwrap();
        for (a, b) in once.iter().zip(twice) {
            prop_assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn softmax_normalized_and_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 1..12),
        c in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fold_properties(k in 1usize..8, logits in prop::collection::vec(-20.0f64..20.0, 16), swap in 0usize..8) {
        let p = softmax(&logits[..2 * k]);
        let q = fold(&p).unwrap();
        prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for i in 0..k {
            prop_assert!(q[i] >= p[i].max(p[k + i]));
        }
        let i = swap % k;
        let mut s = p.clone();
        s.swap(i, k + i);
        prop_assert_eq!(fold(&s).unwrap(), q);
    }

    #[test]
    fn folded_target_is_class_one_hot(k in 1usize..10, y in 1usize..10, real in any::<bool>()) {
        let y = (y - 1) % k + 1;
        let t = build_2k_target(y, real, k).unwrap();
        prop_assert_eq!(t.iter().filter(|v| **v == 1.0).count(), 1);
        let q = fold(&t).unwrap();
        let expected: Vec<f64> = (1..=k).map(|c| if c == y { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(q, expected);
    }

    #[test]
    fn predict_ignores_uniform_shift(k in 1usize..6, seed in any::<u64>(), c in -30.0f64..30.0) {
        let mut rng = seeded(seed);
        let logits: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let shifted: Vec<f64> = logits.iter().map(|v| v + c).collect();
        prop_assert_eq!(predict(&logits, HeadMode::TwoK, k), predict(&shifted, HeadMode::TwoK, k));
    }

    #[test]
    fn classifier_phase1_loss_nonnegative(k in 1usize..5, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let (br, bf) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let (yr, yf): (Vec<usize>, Vec<usize>) =
            ((0..br).map(|_| rng.random_range(1..=k)).collect(), (0..bf).map(|_| rng.random_range(1..=k)).collect());
        let mut g = Graph::new();
        let r = g.constant(&uniform(vec![br, 2 * k], -10.0, 10.0, &mut rng));
        let f = g.constant(&uniform(vec![bf, 2 * k], -10.0, 10.0, &mut rng));
        let l = loss_c_phase1(&mut g, r, &yr, f, &yf, k).unwrap();
        prop_assert!(g.item(l) >= 0.0);
    }

    #[test]
    fn augmenter_output_bounded(seed in any::<u64>(), k in 1usize..5, scale in 0.5f64..50.0) {
        let aug = AugmenterNet::new(AugmenterConfig { latent_dim: 6, k, hidden: vec![8, 8], output_dim: 5 }, seed).unwrap();
        let mut rng = seeded(seed);
        let mut z = sample_latent(10, 6, &mut rng);
        z.values_mut().iter_mut().for_each(|v| *v *= scale);
        let labels: Vec<usize> = (0..10).map(|i| i % k + 1).collect();
        let x = aug.augment(&z, &labels).unwrap();
        // tanh rounds to exactly 1.0 in f64 once its input passes about 19
        prop_assert!(x.values().iter().all(|v| v.abs() <= 1.0));
        if scale <= 3.0 {
            prop_assert!(x.values().iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn logit_width_per_head(k in 1usize..8, seed in any::<u64>()) {
        for (head, width) in [(HeadMode::TwoK, 2 * k), (HeadMode::KPlusOne, k + 1), (HeadMode::Binary, 2)] {
            let k = if head == HeadMode::Binary { 1 } else { k };
            let clf = ClassifierNet::new(ClassifierConfig::new(3, k, vec![4], head), seed).unwrap();
            let out = clf.classify(&Tensor::zeros(vec![2, 3]), None).unwrap();
            prop_assert_eq!(out.shape(), &[2, width][..]);
        }
        prop_assert!(ClassifierNet::new(ClassifierConfig::new(3, k + 1, vec![4], HeadMode::Binary), seed).is_err());
    }

    #[test]
    fn sampler_batches_cover_every_class(
        sizes in prop::collection::vec(1usize..12, 1..6),
        extra in 0usize..10,
        seed in any::<u64>(),
    ) {
        let k = sizes.len();
        let samples: Vec<LabeledSample> =
            sizes.iter().enumerate().flat_map(|(c, &n)| (0..n).map(move |_| LabeledSample { x: vec![0.0], y: c + 1 })).collect();
        let d = Dataset::new(samples, k, Layout::Vector { dim: 1 }).unwrap();
        let mut s = BalancedSampler::new(&d).unwrap();
        let mut rng = seeded(seed);
        for _ in 0..20 {
            let batch = s.next_batch(k + extra, &mut rng);
            prop_assert_eq!(batch.len(), k + extra);
            let labels = d.labels_of(&batch);
            for c in 1..=k {
                prop_assert!(labels.contains(&c));
            }
        }
    }

    #[test]
    fn subsample_exact_counts(n in 1usize..30, seed in any::<u64>()) {
        let pool = gen_gaussian_mixture(3, 30, &MixtureSpec::on_circle(3, 2.0, 1.0), 5).unwrap();
        let s = subsample(&pool, SubsampleSpec { n_per_class: n, seed }).unwrap();
        prop_assert_eq!(s.class_counts(), vec![n; 3]);
        prop_assert_eq!(s, subsample(&pool, SubsampleSpec { n_per_class: n, seed }).unwrap());
    }

    #[test]
    fn split_is_a_partition(n in 2usize..40, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let samples: Vec<LabeledSample> =
            (0..2 * n).map(|i| LabeledSample { x: vec![i as f64 / (2 * n) as f64], y: i % 2 + 1 }).collect();
        let d = Dataset::new(samples, 2, Layout::Vector { dim: 1 }).unwrap();
        let (train, test) = split(&d, fraction, seed).unwrap();
        let mut ids: Vec<u64> = train.samples().iter().chain(test.samples()).map(|s| s.x[0].to_bits()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), 2 * n);
        prop_assert_eq!(train.len() + test.len(), 2 * n);
    }

    #[test]
    fn traditional_augment_keeps_labels_and_range(seed in any::<u64>(), mult in 1usize..5) {
        let mut rng = seeded(seed);
        let samples: Vec<LabeledSample> =
            (0..12).map(|i| LabeledSample { x: (0..16).map(|_| rng.random_range(-1.0..=1.0)).collect(), y: i % 4 + 1 }).collect();
        let d = Dataset::new(samples, 4, Layout::Grid { h: 4, w: 4, c: 1 }).unwrap();
        let ops = [AugmentOp::Rotate { max_degrees: 30.0 }, AugmentOp::Translate { max_shift: 1 }, AugmentOp::FlipH, AugmentOp::Jitter { sigma: 0.5 }];
        let a = traditional_augment(&d, &ops, mult, seed).unwrap();
        prop_assert_eq!(a.len(), 12 * mult);
        for (i, s) in a.samples().iter().enumerate() {
            prop_assert_eq!(s.y, d.samples()[i % 12].y);
            prop_assert!(s.x.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn adam_second_moment_nonnegative(seed in any::<u64>(), steps in 1usize..20) {
        let mut rng = seeded(seed);
        let mut params = vec![uniform(vec![3, 2], -2.0, 2.0, &mut rng)];
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig::default();
        for t in 1..=steps {
            let g: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            adam_step(&mut params, &[&g], &mut state, &cfg, &["p".to_string()]).unwrap();
            prop_assert_eq!(state.t, t as u64);
            prop_assert!(state.v[0].iter().all(|v| *v >= 0.0));
            prop_assert_eq!(state.m[0].len(), 6);
        }
    }
}
