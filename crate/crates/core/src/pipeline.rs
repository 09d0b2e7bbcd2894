//! File-driven orchestration: load layers, optionally train the toy encoder,
//! build and weight the ensemble, partition the consensus graph, score it and
//! write reports. Every failure is tagged with the stage it came from.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;

use crate::base::generate_ensemble;
use crate::config::PipelineConfig;
use crate::consensus::{
    build_weighted_graph, compute_weights, consensus_partition_with, ClusterWeights,
};
use crate::contrastive::{train_toy, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::io;
use crate::kmeans::{kmeans, KMeansConfig};
use crate::layers::prepare_bundle;
use crate::metrics::{acc, ari, nmi};
use crate::model::{build_catalog, ClusterEnsemble, ConsensusResult, FeatureMatrix, LayerBundle};
use crate::seed;

pub const NMI_NOTE: &str = "nmi: mutual information over the arithmetic mean of the two entropies";

pub const THREADS_ENV: &str = "CLUENS_THREADS";

/// Caps the global worker pool at `CLUENS_THREADS` when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub nmi: f64,
    pub ari: f64,
    pub acc: f64,
}

impl Scores {
    pub fn compute(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        Ok(Self {
            nmi: nmi(predicted, truth)?,
            ari: ari(predicted, truth)?,
            acc: acc(predicted, truth)?,
        })
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["metric", "value"]).with_note(NMI_NOTE);
        t.push(vec!["nmi".into(), self.nmi.to_string()]);
        t.push(vec!["ari".into(), self.ari.to_string()]);
        t.push(vec!["acc".into(), self.acc.to_string()]);
        t
    }
}

/// A report rendered both as CSV and as an aligned text table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    /// Rendered as a leading `# ` comment line.
    pub note: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            note: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }

    fn note_line(&self) -> String {
        self.note.as_ref().map_or(String::new(), |n| format!("# {n}\n"))
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.note_line();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.columns[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = self.note_line();
        out.push_str(&line(&self.columns));
        out.push_str(&line(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>()));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    /// Column values parsed as floats; `None` when a cell does not parse.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|x| x == name)?;
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }
}

/// Loads layer files in order; each layer is tagged with its file stem.
pub fn load_bundle(paths: &[PathBuf]) -> Result<LayerBundle> {
    if paths.is_empty() {
        return Err(Error::Config("no layer files given".into()));
    }
    let layers = paths.iter().map(io::read_matrix).collect::<Result<Vec<_>>>()?;
    let tags = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
        })
        .collect();
    LayerBundle::new(layers, tags)
}

fn toy_train_config(cfg: &PipelineConfig, n: usize) -> TrainConfig {
    let mut t = TrainConfig::new(cfg.k, cfg.toy_epochs, cfg.toy_batch.min(n), seed::derive(cfg.seed, "toy", &[]));
    t.learning_rate = cfg.toy_learning_rate;
    t.loss = cfg.loss;
    t
}

/// Trains the toy encoder on `data` and returns it with the selected layer
/// representations of the clean input.
pub fn train_and_extract(data: &FeatureMatrix, cfg: &PipelineConfig) -> Result<(TrainOutcome, LayerBundle)> {
    let outcome = train_toy(data, &toy_train_config(cfg, data.rows()))?;
    let sel = cfg.selection;
    let extracted = outcome
        .encoder
        .extract_layers(data.view(), sel.backbone, sel.instance, sel.cluster)?;
    let (tags, layers): (Vec<String>, Vec<Array2<f64>>) = extracted.into_iter().unzip();
    let layers = layers.into_iter().map(FeatureMatrix::new).collect::<Result<Vec<_>>>()?;
    Ok((outcome, LayerBundle::new(layers, tags)?))
}

/// Everything a consensus run produces in memory.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    /// The bundle after dimensionality reduction.
    pub bundle: LayerBundle,
    pub ensemble: ClusterEnsemble,
    pub result: ConsensusResult,
    pub m_prime: usize,
}

impl ClusterRun {
    /// Layer index of ensemble member `m`.
    pub fn member_layer(&self, m: usize) -> usize {
        m / self.m_prime
    }

    /// Mean weight and mean uncertainty of the catalog clusters drawn from
    /// each layer.
    pub fn layer_weight_means(&self) -> Vec<(f64, f64)> {
        let mut acc = vec![(0.0, 0.0, 0usize); self.bundle.n_layers()];
        for (j, c) in self.ensemble.catalog().iter().enumerate() {
            let a = &mut acc[self.member_layer(c.member)];
            a.0 += self.result.weights[j];
            a.1 += self.result.uncertainty[j];
            a.2 += 1;
        }
        acc.into_iter()
            .map(|(w, h, n)| (w / n as f64, h / n as f64))
            .collect()
    }
}

/// Weights (entropy-based or unit) and partitions a prebuilt ensemble.
pub fn consensus_of(ensemble: &ClusterEnsemble, cfg: &PipelineConfig) -> Result<ConsensusResult> {
    let weights = if cfg.weighting {
        compute_weights(ensemble).map_err(|e| e.in_stage("weighting"))?
    } else {
        ClusterWeights::unit(ensemble)
    };
    let graph = build_weighted_graph(ensemble, &weights).map_err(|e| e.in_stage("consensus"))?;
    consensus_partition_with(&graph, cfg.k, seed::derive(cfg.seed, "consensus", &[]), &cfg.tcut)
        .map_err(|e| e.in_stage("consensus"))
}

/// Reduction, ensemble generation, weighting and consensus on an in-memory
/// bundle.
pub fn cluster_bundle(raw: &LayerBundle, cfg: &PipelineConfig) -> Result<ClusterRun> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let bundle = prepare_bundle(raw, &cfg.selection).map_err(|e| e.in_stage("prepare"))?;
    let ensemble = generate_ensemble(&bundle, &cfg.ensemble_config()).map_err(|e| e.in_stage("ensemble"))?;
    let result = consensus_of(&ensemble, cfg)?;
    Ok(ClusterRun {
        bundle,
        ensemble,
        result,
        m_prime: cfg.m_prime,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub run: ClusterRun,
    pub scores: Option<Scores>,
    pub files: Vec<PathBuf>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(LayerBundle, Option<Vec<usize>>)> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let bundle = load_bundle(&cfg.layers).map_err(|e| e.in_stage("load"))?;
    let truth = match &cfg.truth {
        Some(p) => {
            let t = io::read_labels(p).map_err(|e| e.in_stage("load"))?;
            if t.len() != bundle.n_samples() {
                return Err(Error::LengthMismatch {
                    left: bundle.n_samples(),
                    right: t.len(),
                }
                .in_stage("load"));
            }
            Some(t)
        }
        None => None,
    };
    let bundle = if cfg.toy_epochs > 0 {
        let input = bundle.layers().get(cfg.toy_input).ok_or_else(|| {
            Error::Config(format!("toy_input {} out of range", cfg.toy_input)).in_stage("contrastive")
        })?;
        train_and_extract(input, cfg).map_err(|e| e.in_stage("contrastive"))?.1
    } else {
        bundle
    };
    Ok((bundle, truth))
}

fn write_file(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn cluster_table(run: &ClusterRun) -> Table {
    let mut t = Table::new(&["cluster", "member", "layer", "tag", "local", "size", "uncertainty", "weight"]);
    for (j, c) in run.ensemble.catalog().iter().enumerate() {
        let layer = run.member_layer(c.member);
        t.push(vec![
            j.to_string(),
            c.member.to_string(),
            layer.to_string(),
            run.bundle.tags()[layer].clone(),
            c.local.to_string(),
            c.samples.len().to_string(),
            run.result.uncertainty[j].to_string(),
            run.result.weights[j].to_string(),
        ]);
    }
    t
}

fn layer_table(run: &ClusterRun) -> Table {
    let mut t = Table::new(&["layer", "tag", "dim", "members", "clusters", "mean_uncertainty", "mean_weight"]);
    let means = run.layer_weight_means();
    for (l, (w, h)) in means.into_iter().enumerate() {
        let clusters: usize = run.ensemble.members()[l * run.m_prime..(l + 1) * run.m_prime]
            .iter()
            .map(|m| m.k())
            .sum();
        t.push(vec![
            l.to_string(),
            run.bundle.tags()[l].clone(),
            run.bundle.layer(l).cols().to_string(),
            run.m_prime.to_string(),
            clusters.to_string(),
            h.to_string(),
            w.to_string(),
        ]);
    }
    t
}

fn summary(run: &ClusterRun, cfg: &PipelineConfig, scores: Option<&Scores>) -> String {
    let mut sizes = vec![0usize; run.result.k];
    run.result.labels.iter().for_each(|&l| sizes[l] += 1);
    let mut s = String::new();
    let _ = writeln!(s, "samples            {}", run.bundle.n_samples());
    let _ = writeln!(s, "layers             {}", run.bundle.n_layers());
    let _ = writeln!(s, "base clusterings   {}", run.ensemble.n_members());
    let _ = writeln!(s, "catalog clusters   {}", run.ensemble.n_clusters());
    let _ = writeln!(s, "weighting          {}", if cfg.weighting { "entropy" } else { "unit" });
    let _ = writeln!(s, "consensus clusters {}", run.result.k);
    let _ = writeln!(
        s,
        "cluster sizes      {}",
        sizes.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    );
    if let Some(sc) = scores {
        let _ = writeln!(s, "nmi                {}", sc.nmi);
        let _ = writeln!(s, "ari                {}", sc.ari);
        let _ = writeln!(s, "acc                {}", sc.acc);
        let _ = writeln!(s, "({NMI_NOTE})");
    }
    s
}

/// Runs the full pipeline from files and writes `labels.txt`,
/// `clusters.csv`, `layers.csv`, `summary.txt`, `config.txt` and, with
/// ground truth, `metrics.csv` / `metrics.txt` into `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let (bundle, truth) = load_inputs(cfg)?;
    let run = cluster_bundle(&bundle, cfg)?;
    let scores = truth
        .as_deref()
        .map(|t| Scores::compute(&run.result.labels, t))
        .transpose()
        .map_err(|e| e.in_stage("metrics"))?;

    let write = || -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&cfg.out)?;
        let mut files = Vec::new();
        write_file(cfg.out.join("labels.txt"), &io::format_labels(&run.result.labels), &mut files)?;
        write_file(cfg.out.join("clusters.csv"), &cluster_table(&run).to_csv(), &mut files)?;
        write_file(cfg.out.join("layers.csv"), &layer_table(&run).to_csv(), &mut files)?;
        if let Some(sc) = &scores {
            let t = sc.table();
            write_file(cfg.out.join("metrics.csv"), &t.to_csv(), &mut files)?;
            write_file(cfg.out.join("metrics.txt"), &t.to_text(), &mut files)?;
        }
        write_file(cfg.out.join("summary.txt"), &summary(&run, cfg, scores.as_ref()), &mut files)?;
        write_file(cfg.out.join("config.txt"), &cfg.to_text(), &mut files)?;
        Ok(files)
    };
    let files = write().map_err(|e| e.in_stage("write"))?;
    Ok(PipelineOutcome { run, scores, files })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    SingleLayer,
    MultiLayer,
    EnsembleSizeSweep,
    Weighting,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::SingleLayer,
        AblationMode::MultiLayer,
        AblationMode::EnsembleSizeSweep,
        AblationMode::Weighting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::SingleLayer => "single_layer",
            AblationMode::MultiLayer => "multi_layer",
            AblationMode::EnsembleSizeSweep => "ensemble_size_sweep",
            AblationMode::Weighting => "weighting",
        }
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub mode: AblationMode,
    pub table: Table,
}

/// k-means with `k` clusters on each layer alone.
pub fn single_layer_labels(bundle: &LayerBundle, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    use rayon::prelude::*;
    let km = KMeansConfig::new(k).n_init(10);
    (0..bundle.n_layers())
        .into_par_iter()
        .map(|l| {
            let s = seed::derive(seed, "single-layer", &[l as u64]);
            Ok(kmeans(bundle.layer(l).view(), &km, s)?.labels)
        })
        .collect()
}

fn score_row(lead: Vec<String>, s: &Scores) -> Vec<String> {
    let mut row = lead;
    row.extend([s.nmi.to_string(), s.ari.to_string(), s.acc.to_string()]);
    row
}

/// Keeps the first `m_prime` members of every layer of an ensemble built
/// with `run.m_prime >= m_prime` members per layer. Member draws and seeds
/// are per layer and per index, so this equals a fresh run at `m_prime`.
pub fn truncate_ensemble(run: &ClusterRun, m_prime: usize) -> Result<ClusterEnsemble> {
    if m_prime == 0 || m_prime > run.m_prime {
        return Err(Error::invalid(format!(
            "cannot keep {m_prime} of {} members per layer",
            run.m_prime
        )));
    }
    let members = run
        .ensemble
        .members()
        .iter()
        .enumerate()
        .filter(|(i, _)| i % run.m_prime < m_prime)
        .map(|(_, m)| m.clone())
        .collect();
    build_catalog(members)
}

/// Runs one ablation on an in-memory bundle with known labels.
pub fn ablation_on_bundle(
    raw: &LayerBundle,
    truth: &[usize],
    cfg: &PipelineConfig,
    mode: AblationMode,
) -> Result<AblationReport> {
    if truth.len() != raw.n_samples() {
        return Err(Error::LengthMismatch {
            left: raw.n_samples(),
            right: truth.len(),
        }
        .in_stage("load"));
    }
    let score = |labels: &[usize]| Scores::compute(labels, truth).map_err(|e| e.in_stage("metrics"));
    let single = |bundle: &LayerBundle| {
        single_layer_labels(bundle, cfg.k, seed::derive(cfg.seed, "ablation", &[]))
            .map_err(|e| e.in_stage("single-layer"))
    };
    let table = match mode {
        AblationMode::SingleLayer => {
            cfg.validate().map_err(|e| e.in_stage("config"))?;
            let bundle = prepare_bundle(raw, &cfg.selection).map_err(|e| e.in_stage("prepare"))?;
            let mut t = Table::new(&["layer", "tag", "nmi", "ari", "acc"]);
            for (l, labels) in single(&bundle)?.iter().enumerate() {
                t.push(score_row(vec![l.to_string(), bundle.tags()[l].clone()], &score(labels)?));
            }
            t
        }
        AblationMode::MultiLayer => {
            let run = cluster_bundle(raw, cfg)?;
            let singles = single(&run.bundle)?
                .iter()
                .map(|l| score(l))
                .collect::<Result<Vec<_>>>()?;
            let n = singles.len() as f64;
            let mean = Scores {
                nmi: singles.iter().map(|s| s.nmi).sum::<f64>() / n,
                ari: singles.iter().map(|s| s.ari).sum::<f64>() / n,
                acc: singles.iter().map(|s| s.acc).sum::<f64>() / n,
            };
            let mut t = Table::new(&["setting", "layers", "nmi", "ari", "acc"]);
            let layers = run.bundle.n_layers().to_string();
            t.push(score_row(vec!["consensus".into(), layers.clone()], &score(&run.result.labels)?));
            t.push(score_row(vec!["mean_single_layer".into(), layers], &mean));
            t
        }
        AblationMode::EnsembleSizeSweep => {
            if cfg.sweep.is_empty() || cfg.sweep.contains(&0) {
                return Err(Error::Config("sweep must list positive ensemble sizes".into()).in_stage("config"));
            }
            let top = PipelineConfig {
                m_prime: *cfg.sweep.iter().max().expect("nonempty"),
                ..cfg.clone()
            };
            let run = cluster_bundle(raw, &top)?;
            let mut t = Table::new(&["m_prime", "members", "catalog_clusters", "nmi", "ari", "acc"]);
            for &m in &cfg.sweep {
                let ensemble = truncate_ensemble(&run, m).map_err(|e| e.in_stage("ensemble"))?;
                let result = consensus_of(&ensemble, cfg)?;
                t.push(score_row(
                    vec![m.to_string(), ensemble.n_members().to_string(), ensemble.n_clusters().to_string()],
                    &score(&result.labels)?,
                ));
            }
            t
        }
        AblationMode::Weighting => {
            let run = cluster_bundle(raw, &PipelineConfig { weighting: true, ..cfg.clone() })?;
            let unit_cfg = PipelineConfig { weighting: false, ..cfg.clone() };
            let unit = consensus_of(&run.ensemble, &unit_cfg)?;
            let mean_w = |r: &ConsensusResult| r.weights.iter().sum::<f64>() / r.weights.len() as f64;
            let mut t = Table::new(&["weighting", "mean_weight", "nmi", "ari", "acc"]);
            t.push(score_row(
                vec!["entropy".into(), mean_w(&run.result).to_string()],
                &score(&run.result.labels)?,
            ));
            t.push(score_row(vec!["unit".into(), mean_w(&unit).to_string()], &score(&unit.labels)?));
            t
        }
    };
    Ok(AblationReport {
        mode,
        table: table.with_note(NMI_NOTE),
    })
}

/// Runs one ablation from files and writes `ablation_<mode>.csv` and
/// `ablation_<mode>.txt` into `cfg.out`.
pub fn run_ablation(cfg: &PipelineConfig, mode: AblationMode) -> Result<AblationReport> {
    let (bundle, truth) = load_inputs(cfg)?;
    let truth = truth.ok_or_else(|| Error::Config("ablation needs truth labels".into()).in_stage("load"))?;
    let report = ablation_on_bundle(&bundle, &truth, cfg, mode)?;
    let write = || -> Result<()> {
        fs::create_dir_all(&cfg.out)?;
        let stem = format!("ablation_{}", mode.as_str());
        fs::write(cfg.out.join(format!("{stem}.csv")), report.table.to_csv())?;
        fs::write(cfg.out.join(format!("{stem}.txt")), report.table.to_text())?;
        Ok(())
    };
    write().map_err(|e| e.in_stage("write"))?;
    Ok(report)
}

/// Trains the toy encoder on one matrix file, then writes the per-epoch loss
/// trace, the encoder's own cluster predictions and the extracted layers
/// (as `layer_XX.bin` plus `tags.txt`) into `cfg.out`.
pub fn run_train_toy(input: &Path, cfg: &PipelineConfig) -> Result<(TrainOutcome, Option<Scores>)> {
    if cfg.toy_epochs == 0 {
        return Err(Error::Config("toy_epochs must be at least 1".into()).in_stage("config"));
    }
    let data = io::read_matrix(input).map_err(|e| e.in_stage("load"))?;
    let truth = cfg
        .truth
        .as_ref()
        .map(io::read_labels)
        .transpose()
        .map_err(|e| e.in_stage("load"))?;
    let (outcome, bundle) = train_and_extract(&data, cfg).map_err(|e| e.in_stage("contrastive"))?;
    let predicted = outcome
        .encoder
        .predict_clusters(data.view())
        .map_err(|e| e.in_stage("contrastive"))?;
    let scores = truth
        .as_deref()
        .map(|t| Scores::compute(&predicted, t))
        .transpose()
        .map_err(|e| e.in_stage("metrics"))?;
    let write = || -> Result<()> {
        fs::create_dir_all(&cfg.out)?;
        let mut t = Table::new(&["epoch", "loss"]);
        for (e, l) in outcome.loss_trace.iter().enumerate() {
            t.push(vec![e.to_string(), l.to_string()]);
        }
        fs::write(cfg.out.join("loss.csv"), t.to_csv())?;
        io::write_labels(cfg.out.join("predictions.txt"), &predicted)?;
        crate::synth::write_bundle(&cfg.out, &bundle, None)?;
        if let Some(sc) = &scores {
            fs::write(cfg.out.join("metrics.csv"), sc.table().to_csv())?;
        }
        Ok(())
    };
    write().map_err(|e| e.in_stage("write"))?;
    Ok((outcome, scores))
}
