use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cluens::config::PipelineConfig;
use cluens::io::read_labels;
use cluens::pipeline::{configure_threads, run_ablation, run_pipeline, run_train_toy, AblationMode, Scores};
use cluens::synth::{generate_synthetic_bundle, write_bundle, SynthConfig};

/// Multi-layer ensemble clustering with entropy-weighted bipartite consensus.
#[derive(Parser)]
#[command(name = "cluens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a bundle of layer files into K consensus clusters.
    Cluster(Common),
    /// Run an ablation study against ground-truth labels.
    Ablate {
        /// single_layer, multi_layer, ensemble_size_sweep, weighting or all.
        #[arg(long, default_value = "all")]
        mode: String,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic Gaussian-blob layer bundle with known labels.
    Synth(SynthArgs),
    /// Train the toy contrastive encoder and export its layer representations.
    TrainToy {
        /// Matrix file with the training samples.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predicted labels against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also write metrics.csv / metrics.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Settings shared by the pipeline commands. Flags override the config file.
#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Target number of clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Base clusterings per layer.
    #[arg(long = "m-prime")]
    m_prime: Option<usize>,
    /// Use unit cluster weights.
    #[arg(long = "no-weighting")]
    no_weighting: bool,
    #[arg(long, num_args = 1..)]
    layers: Vec<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p).with_context(|| format!("config: reading {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(m) = self.m_prime {
            cfg.m_prime = m;
        }
        if self.no_weighting {
            cfg.weighting = false;
        }
        if !self.layers.is_empty() {
            cfg.layers = self.layers.clone();
        }
        if let Some(t) = &self.truth {
            cfg.truth = Some(t.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        for kv in &self.set {
            let Some((key, value)) = kv.split_once('=') else {
                bail!("config: override {kv:?} is not key=value");
            };
            cfg.set(key, value).context("config")?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Number of views (layers).
    #[arg(long, default_value_t = 6)]
    lambda: usize,
    /// Same noise level on every view instead of the graded bundle whose
    /// last view is pure noise.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn cluster(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let outcome = run_pipeline(&cfg)?;
    let r = &outcome.run;
    println!(
        "{} samples, {} layers, {} base clusterings, {} catalog clusters -> {} clusters",
        r.bundle.n_samples(),
        r.bundle.n_layers(),
        r.ensemble.n_members(),
        r.ensemble.n_clusters(),
        r.result.k
    );
    if let Some(s) = outcome.scores {
        println!("nmi {:.4}  ari {:.4}  acc {:.4}", s.nmi, s.ari, s.acc);
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn ablate(mode: &str, common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let modes: Vec<AblationMode> = if mode == "all" {
        AblationMode::ALL.to_vec()
    } else {
        vec![mode.parse::<AblationMode>().context("config")?]
    };
    for m in modes {
        let report = run_ablation(&cfg, m)?;
        println!("== {}", m.as_str());
        print!("{}", report.table.to_text());
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = match args.noise {
        Some(noise) => SynthConfig::uniform(args.n, args.k, args.lambda, noise, args.seed),
        None => SynthConfig::with_noise_view(args.n, args.k, args.lambda, args.seed),
    };
    let data = generate_synthetic_bundle(&cfg).context("synth")?;
    let paths = write_bundle(&args.out, &data.bundle, Some(&data.truth)).context("write")?;
    for p in &paths {
        println!("{}", p.display());
    }
    Ok(())
}

fn train_toy(input: &Path, epochs: Option<usize>, batch: Option<usize>, common: &Common) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(e) = epochs {
        cfg.toy_epochs = e;
    }
    if let Some(b) = batch {
        cfg.toy_batch = b;
    }
    let (outcome, scores) = run_train_toy(input, &cfg)?;
    if let (Some(first), Some(last)) = (outcome.loss_trace.first(), outcome.loss_trace.last()) {
        println!("loss {first:.4} -> {last:.4} over {} epochs", outcome.loss_trace.len());
    }
    if let Some(s) = scores {
        println!("nmi {:.4}  ari {:.4}  acc {:.4}", s.nmi, s.ari, s.acc);
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn eval(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let p = read_labels(pred).context("load")?;
    let t = read_labels(truth).context("load")?;
    let scores = Scores::compute(&p, &t).context("metrics")?;
    let table = scores.table();
    print!("{}", table.to_text());
    if let Some(dir) = out {
        let write = || -> std::io::Result<()> {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("metrics.csv"), table.to_csv())?;
            std::fs::write(dir.join("metrics.txt"), table.to_text())
        };
        write().context("write")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Cluster(common) => cluster(common),
        Command::Ablate { mode, common } => ablate(mode, common),
        Command::Synth(args) => synth(args),
        Command::TrainToy {
            input,
            epochs,
            batch,
            common,
        } => train_toy(input, *epochs, *batch, common),
        Command::Eval { pred, truth, out } => eval(pred, truth, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
