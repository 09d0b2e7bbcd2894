//! Pipeline configuration: a flat `key = value` text file, with later
//! assignments (including command-line overrides) winning.
//!
//! ```text
//! # comment
//! k = 5
//! m_prime = 5
//! layers = run/layer_00.bin, run/layer_01.bin
//! weighting = true
//! ```

use std::path::{Path, PathBuf};

use crate::base::{EnsembleConfig, TcutOptions};
use crate::contrastive::LossConfig;
use crate::error::{Error, Result};
use crate::layers::LayerSelection;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Target cluster count `K`.
    pub k: usize,
    pub selection: LayerSelection,
    pub m_prime: usize,
    /// Defaults to `k`.
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub representatives: Option<usize>,
    pub knn_k: usize,
    pub probe_groups: usize,
    pub tcut: TcutOptions,
    pub loss: LossConfig,
    pub weighting: bool,
    pub seed: u64,
    pub layers: Vec<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    /// `M'` values for the ensemble-size sweep.
    pub sweep: Vec<usize>,
    /// Toy contrastive stage; skipped when `toy_epochs` is 0.
    pub toy_epochs: usize,
    pub toy_batch: usize,
    pub toy_learning_rate: f64,
    /// Index of the loaded layer the toy encoder is trained on.
    pub toy_input: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 2,
            selection: LayerSelection::default(),
            m_prime: 5,
            k_min: None,
            k_max: None,
            representatives: None,
            knn_k: 5,
            probe_groups: 2,
            tcut: TcutOptions::default(),
            loss: LossConfig::default(),
            weighting: true,
            seed: 0,
            layers: Vec::new(),
            truth: None,
            out: PathBuf::from("out"),
            sweep: (1..=6).collect(),
            toy_epochs: 0,
            toy_batch: 128,
            toy_learning_rate: 1e-3,
            toy_input: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for key {key:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for key {key:?}"))),
    }
}

fn parse_opt(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl PipelineConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "k" => self.k = parse(key, value)?,
            "m_prime" => self.m_prime = parse(key, value)?,
            "k_min" => self.k_min = parse_opt(key, value)?,
            "k_max" => self.k_max = parse_opt(key, value)?,
            "representatives" => self.representatives = parse_opt(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "probe_groups" => self.probe_groups = parse(key, value)?,
            "tcut_restarts" => self.tcut.kmeans_restarts = parse(key, value)?,
            "tcut_max_iter" => self.tcut.kmeans_max_iter = parse(key, value)?,
            "tau_i" => self.loss.tau_i = parse(key, value)?,
            "tau_c" => self.loss.tau_c = parse(key, value)?,
            "self_pair_excluded" => self.loss.self_pair_excluded = parse_bool(key, value)?,
            "weighting" => self.weighting = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "backbone_layers" => self.selection.backbone = parse(key, value)?,
            "instance_layers" => self.selection.instance = parse(key, value)?,
            "cluster_layers" => self.selection.cluster = parse(key, value)?,
            "dim_threshold" => self.selection.dim_threshold = parse(key, value)?,
            "target_dim" => self.selection.target_dim = parse(key, value)?,
            "layers" => self.layers = split_list(value).map(PathBuf::from).collect(),
            "truth" => {
                self.truth = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "out" => self.out = PathBuf::from(value),
            "sweep" => {
                self.sweep = split_list(value)
                    .map(|v| parse(key, v))
                    .collect::<Result<_>>()?
            }
            "toy_epochs" => self.toy_epochs = parse(key, value)?,
            "toy_batch" => self.toy_batch = parse(key, value)?,
            "toy_learning_rate" => self.toy_learning_rate = parse(key, value)?,
            "toy_input" => self.toy_input = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every assignment in a config file body.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.m_prime == 0 {
            return Err(Error::Config("m_prime must be at least 1".into()));
        }
        if self.out.as_os_str().is_empty() {
            return Err(Error::Config("output directory must be set".into()));
        }
        if self.layers.iter().any(|p| p.as_os_str().is_empty()) {
            return Err(Error::Config("layer paths must be nonempty".into()));
        }
        self.selection.validate()?;
        self.loss.validate()
    }

    /// Ensemble settings, with the ensemble seed derived from the master seed.
    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            m_prime: self.m_prime,
            k_min: self.k_min.unwrap_or(self.k),
            k_max: self.k_max,
            representatives: self.representatives,
            knn_k: self.knn_k,
            probe_groups: self.probe_groups,
            tcut: self.tcut,
            seed: seed::derive(self.seed, "ensemble", &[]),
        }
    }

    /// Canonical `key = value` listing of every setting.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("auto".to_string(), |x| x.to_string());
        let list = |v: &[PathBuf]| {
            v.iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("k", self.k.to_string());
        kv("m_prime", self.m_prime.to_string());
        kv("k_min", opt(self.k_min));
        kv("k_max", opt(self.k_max));
        kv("representatives", opt(self.representatives));
        kv("knn_k", self.knn_k.to_string());
        kv("probe_groups", self.probe_groups.to_string());
        kv("tcut_restarts", self.tcut.kmeans_restarts.to_string());
        kv("tcut_max_iter", self.tcut.kmeans_max_iter.to_string());
        kv("tau_i", self.loss.tau_i.to_string());
        kv("tau_c", self.loss.tau_c.to_string());
        kv("self_pair_excluded", self.loss.self_pair_excluded.to_string());
        kv("weighting", self.weighting.to_string());
        kv("seed", self.seed.to_string());
        kv("backbone_layers", self.selection.backbone.to_string());
        kv("instance_layers", self.selection.instance.to_string());
        kv("cluster_layers", self.selection.cluster.to_string());
        kv("dim_threshold", self.selection.dim_threshold.to_string());
        kv("target_dim", self.selection.target_dim.to_string());
        kv("layers", list(&self.layers));
        kv(
            "truth",
            self.truth.as_ref().map_or(String::new(), |p| p.display().to_string()),
        );
        kv("out", self.out.display().to_string());
        kv(
            "sweep",
            self.sweep.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", "),
        );
        kv("toy_epochs", self.toy_epochs.to_string());
        kv("toy_batch", self.toy_batch.to_string());
        kv("toy_learning_rate", self.toy_learning_rate.to_string());
        kv("toy_input", self.toy_input.to_string());
        out
    }
}
