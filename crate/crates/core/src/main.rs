use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use dada::harness::{self, ConfigMap, ExperimentResult};
use dada::models::AugmenterNet;
use dada::{DadaError, Result};

/// Adversarial data augmentation experiments for very small training sets.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment matrix. Extra `key=value` or `--key=value`
    /// arguments override config entries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated modes.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n_per_class: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Write accuracy-versus-set-size curves from a result file.
    Curves {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write generated samples from saved augmenter parameters.
    Dump {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of classes; inferred from the parameters when possible.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write images of shape HxWxC instead of CSV rows.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Finite-difference check of every training objective.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_free_overrides(args: &[String]) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let a = a.trim_start_matches("--");
        let (k, v) = match a.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| DadaError::Config(format!("override {a} has no value")))?;
                (a.to_string(), v.clone())
            }
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_grid(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.parse().map_err(|_| DadaError::Config(format!("grid {s:?} is not HxWxC"))))
        .collect::<Result<_>>()?;
    match parts[..] {
        [h, w, c] => Ok((h, w, c)),
        [h, w] => Ok((h, w, 1)),
        _ => Err(DadaError::Config(format!("grid {s:?} is not HxWxC"))),
    }
}

fn run(config: &Path, flags: [(&str, Option<String>); 3], out: Option<PathBuf>, overrides: &[String]) -> Result<u8> {
    let mut map = parse_free_overrides(overrides)?;
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    let spec = harness::load_spec(config, &map)?;
    let out = out.unwrap_or_else(|| {
        PathBuf::from("runs").join(config.file_stem().map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned()))
    });
    let result = harness::run_experiment(&spec, &out)?;
    for p in &result.curves {
        println!(
            "{:<12} n={:<5} mean={:.4} std={:.4} seeds={}",
            p.mode.name(),
            p.n_per_class,
            p.mean_acc,
            p.std_acc,
            p.n_seeds
        );
    }
    for c in result.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("cell {} failed: {}", c.id(), c.error.as_deref().unwrap_or_default());
    }
    println!("results in {}", out.display());
    Ok(if result.failures() > 0 { 2 } else { 0 })
}

fn execute(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Run { config, mode, n_per_class, seeds, out, overrides } => {
            run(&config, [("modes", mode), ("n_per_class", n_per_class), ("seeds", seeds)], out, &overrides)
        }
        Command::Curves { result, out } => {
            harness::emit_curves(&ExperimentResult::load(&result)?, &out)?;
            Ok(0)
        }
        Command::Dump { params, out, k, count, seed, grid } => {
            let aug = AugmenterNet::load(&params, k)?;
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            let n = harness::dump_generated(&aug, k.unwrap_or(aug.k()), count, &out, seed, grid)?;
            println!("wrote {n} samples to {}", out.display());
            Ok(0)
        }
        Command::Gradcheck { trials, seed } => {
            let mut ok = true;
            for e in harness::gradient_suite(trials, seed)? {
                println!(
                    "{} {:<22} trials={} failures={} max_rel_error={:.3e}",
                    if e.passed() { "PASS" } else { "FAIL" },
                    e.name,
                    e.trials,
                    e.failures,
                    e.max_rel_error
                );
                ok &= e.passed();
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
