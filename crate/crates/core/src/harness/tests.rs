use super::*;

fn tiny_spec(modes: Vec<Mode>) -> ExperimentSpec {
    let mut s = ExperimentSpec {
        modes,
        n_per_class: vec![5, 10],
        seeds: vec![0, 1],
        source: DataSource::Synthetic { k: 3, radius: 2.0, sigma: 0.5, pool_per_class: 40, test_per_class: 30, seed: 3 },
        ..Default::default()
    };
    s.train.k_g = 2;
    s.train.k_c = 2;
    s.train.latent_dim = 4;
    s.train.augmentation_ratio = 2;
    s.model.augmenter_hidden = vec![8];
    s.model.classifier_hidden = vec![8];
    s.augment.multiplier = 2;
    s
}

#[test]
fn matrix_counts_and_object_accounting() {
    let dir = tempfile::tempdir().unwrap();
    let modes = vec![Mode::C, Mode::CAug, Mode::Dada, Mode::DadaAug, Mode::VanillaGan, Mode::KPlusOne];
    let r = run_experiment(&tiny_spec(modes.clone()), dir.path()).unwrap();
    assert_eq!(r.cells.len(), modes.len() * 2 * 2);
    assert_eq!(r.failures(), 0, "{:?}", r.cells.iter().filter_map(|c| c.error.clone()).collect::<Vec<_>>());
    for c in &r.cells {
        let expected = match c.mode {
            Mode::C | Mode::CAug => 0,
            Mode::VanillaGan => 3,
            _ => 1,
        };
        assert_eq!(c.augmenters_built, expected, "{}", c.id());
        assert!((0.0..=1.0).contains(&c.accuracy.unwrap()));
        for p in c.logs.iter().chain(&c.params) {
            assert!(dir.path().join(p).exists(), "{p}");
        }
    }
    assert_eq!(r.curves.len(), modes.len() * 2);
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn same_spec_same_files_and_resume() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = tiny_spec(vec![Mode::C, Mode::Dada]);
    run_experiment(&spec, a.path()).unwrap();
    run_experiment(&spec, b.path()).unwrap();
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "result.json"), read(b.path(), "result.json"));
    assert_eq!(read(a.path(), "logs/dada_n5_s1.jsonl"), read(b.path(), "logs/dada_n5_s1.jsonl"));

    // rerun skips finished cells: a tampered cell file is kept as is
    let cell = a.path().join("cells/c_n5_s0.json");
    let mut c: CellResult = serde_json::from_str(&fs::read_to_string(&cell).unwrap()).unwrap();
    c.accuracy = Some(0.123);
    fs::write(&cell, serde_json::to_string(&c).unwrap()).unwrap();
    let again = run_experiment(&spec, a.path()).unwrap();
    assert_eq!(again.cells[0].accuracy, Some(0.123));
    let timing: Timing = serde_json::from_str(&fs::read_to_string(a.path().join("timing.json")).unwrap()).unwrap();
    assert!(timing.cells.is_empty());

    // a changed config invalidates the cell
    let mut changed = spec.clone();
    changed.train.k_c = 3;
    let fresh = run_experiment(&changed, a.path()).unwrap();
    assert_ne!(fresh.cells[0].accuracy, Some(0.123));
}

#[test]
fn failing_cell_does_not_stop_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = tiny_spec(vec![Mode::C]);
    spec.n_per_class = vec![5, 100];
    let r = run_experiment(&spec, dir.path()).unwrap();
    assert_eq!(r.cells.len(), 4);
    assert_eq!(r.failures(), 2);
    assert!(r.cells.iter().filter(|c| c.n_per_class == 100).all(|c| c.error.as_deref().unwrap().contains("class")));
    assert_eq!(r.curve(Mode::C, 5).unwrap().n_seeds, 2);
}

#[test]
fn parallel_workers_match_serial() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = tiny_spec(vec![Mode::C, Mode::Dada]);
    let serial = run_experiment(&spec, a.path()).unwrap();
    let parallel = run_experiment(&ExperimentSpec { workers: 3, ..spec }, b.path()).unwrap();
    assert_eq!(serial.cells, parallel.cells);
}

fn fake_cell(mode: Mode, n: usize, seed: u64, acc: Option<f64>) -> CellResult {
    CellResult {
        mode,
        n_per_class: n,
        seed,
        accuracy: acc,
        error: acc.is_none().then(|| "boom".into()),
        augmenters_built: 0,
        logs: vec![],
        params: vec![],
        fingerprint: String::new(),
    }
}

#[test]
fn curves_rows_and_statistics() {
    let mut cells = Vec::new();
    let accs = [0.5, 0.7, 0.9];
    for mode in [Mode::C, Mode::Dada] {
        for n in [5, 10, 20] {
            for (s, a) in accs.iter().enumerate() {
                cells.push(fake_cell(mode, n, s as u64, Some(*a + n as f64 / 100.0)));
            }
        }
    }
    let r = ExperimentResult { config: ConfigMap::new(), curves: aggregate(&cells), cells };
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("curves.csv");
    emit_curves(&r, &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "mode,n_per_class,mean_acc,std_acc,n_seeds");
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((f[0], f[1], f[4]), ("c", "5", "3"));
    let (mean, std): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
    assert!((mean - 0.75).abs() < 1e-12);
    assert!((std - 0.2).abs() < 1e-12);

    let empty = ExperimentResult { config: ConfigMap::new(), curves: vec![], cells: vec![] };
    assert!(matches!(emit_curves(&empty, &p), Err(DadaError::Usage(_))));
}

#[test]
fn curves_skip_failed_seeds() {
    let cells = vec![fake_cell(Mode::C, 5, 0, Some(0.6)), fake_cell(Mode::C, 5, 1, None)];
    let p = &aggregate(&cells)[0];
    assert_eq!((p.n_seeds, p.mean_acc, p.std_acc), (1, 0.6, 0.0));
}

fn generator(k: usize, dim: usize) -> AugmenterNet {
    AugmenterNet::new(AugmenterConfig { latent_dim: 4, k, hidden: vec![8], output_dim: dim }, 7).unwrap()
}

#[test]
fn dump_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let g = generator(3, 4);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(dump_generated(&g, 3, 4, &a, 9, Some((2, 2, 1))).unwrap(), 12);
    dump_generated(&g, 3, 4, &b, 9, Some((2, 2, 1))).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 12);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap());
    }
    let pgm = fs::read(a.join("class2_0003.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n2 2\n255\n"));

    let v = dir.path().join("v");
    assert_eq!(dump_generated(&g, 3, 4, &v, 9, None).unwrap(), 12);
    let text = fs::read_to_string(v.join("generated.csv")).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.starts_with("y,x1,x2,x3,x4\n1,"));

    assert!(dump_generated(&g, 2, 4, &v, 9, None).is_err());
    assert!(dump_generated(&g, 3, 4, &v, 9, Some((3, 3, 1))).is_err());
}

#[test]
fn pixel_range_endpoints() {
    assert_eq!(to_byte(-1.0), 0);
    assert_eq!(to_byte(1.0), 255);
    assert_eq!(to_byte(0.0), 128);
}

#[test]
fn per_class_provider_routes_labels() {
    let gens: Vec<AugmenterNet> = (0..3)
        .map(|c| {
            let mut g = AugmenterNet::new(AugmenterConfig { latent_dim: 2, k: 1, hidden: vec![], output_dim: 1 }, c).unwrap();
            // constant output tanh(c - 1): -0.76, 0, 0.76
            for p in g.params_mut() {
                p.values_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            let b = g.params_mut().last_mut().unwrap();
            b.values_mut()[0] = c as f64 - 1.0;
            g.set_trainable(false);
            g
        })
        .collect();
    let p = PerClassGenerators::new(gens).unwrap();
    let x = p.generate(&[3, 1, 2, 3], &mut seeded(0)).unwrap();
    let t = 1f64.tanh();
    assert_eq!(x.values(), &[t, -t, 0.0, t]);
    assert!(p.generate(&[4], &mut seeded(0)).is_err());
}

#[test]
fn gradient_suite_passes() {
    for e in gradient_suite(10, 1).unwrap() {
        assert!(e.passed(), "{e:?}");
    }
}

#[test]
fn csv_source_writes_scaling_and_splits() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("y,x1,x2\n");
    for i in 0..20 {
        text.push_str(&format!("{},{},{}\n", i % 2 + 1, i, 40 - i));
    }
    let p = dir.path().join("d.csv");
    fs::write(&p, text).unwrap();
    let src = DataSource::Csv { train: p, test: None, test_fraction: 0.2 };
    let (pool, test) = load_source(&src, Some(dir.path())).unwrap();
    assert_eq!((pool.len(), test.len()), (16, 4));
    assert!(dir.path().join("scaling.json").exists());
}
