use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::classifier::{Optimizer, TrainConfig};
use crate::error::{Error, Result};
use crate::fractal::DirectionSet;
use crate::pipeline::embed::DEFAULT_EMBEDDING_DIM;
use crate::pipeline::extract::{DescriptorConfig, Family};
use crate::selection::SelectionConfig;
use crate::structural::ThicknessEdges;
use crate::texture::LbpParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Hand-crafted descriptors only.
    Hdl,
    /// Hand-crafted descriptors concatenated with embeddings before selection.
    Hybrid,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hdl => "hdl",
            Mode::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "hdl" => Some(Mode::Hdl),
            "hybrid" => Some(Mode::Hybrid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    None,
    Standin,
    File(PathBuf),
}

/// Everything that determines an experiment's outcome.
///
/// The text form is flat `key = value` lines; `#` starts a comment. A bare
/// `seed` sets every named seed and is applied before the specific ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub descriptors: DescriptorConfig,
    pub split_ratio: f64,
    pub split_seed: u64,
    pub folds: usize,
    pub fold_seed: u64,
    pub selection: SelectionConfig,
    pub train: TrainConfig,
    /// Keep the epoch with the lowest loss on the held-out fold during CV.
    pub early_stopping: bool,
    pub embedding: EmbeddingSource,
    pub embedding_dim: usize,
    pub embedding_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            descriptors: DescriptorConfig::default(),
            split_ratio: 0.8,
            split_seed: 0,
            folds: 5,
            fold_seed: 0,
            selection: SelectionConfig::default(),
            train: TrainConfig::default(),
            early_stopping: false,
            embedding: EmbeddingSource::None,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            embedding_seed: 0,
        }
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    v.split(',').map(str::trim).filter(|t| !t.is_empty()).map(f).collect()
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true/false, got {v:?}")),
    }
}

fn join(values: impl IntoIterator<Item = String>) -> String {
    values.into_iter().collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.iter().any(|(_, seen, _)| *seen == k) {
                return Err(Error::Config {
                    line: i + 1,
                    reason: format!("duplicate key {k:?}"),
                });
            }
            entries.push((i + 1, k, v));
        }
        // the shared seed first, so specific seeds override it wherever they appear
        entries.sort_by_key(|(_, k, _)| k != "seed");
        let mut config = ExperimentConfig::default();
        for (line, k, v) in entries {
            config
                .set(&k, &v)
                .map_err(|reason| Error::Config { line, reason })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets every named seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.split_seed = seed;
        self.fold_seed = seed;
        self.train.seed = seed;
        self.embedding_seed = seed;
    }

    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let d = &mut self.descriptors;
        match key {
            "seed" => self.set_seed(num(v)?),
            "split.ratio" => self.split_ratio = num(v)?,
            "split.seed" => self.split_seed = num(v)?,
            "cv.k" => self.folds = num(v)?,
            "cv.seed" => self.fold_seed = num(v)?,
            "select.alpha" => self.selection.alpha = num(v)?,
            "select.redundancy_r" => self.selection.redundancy_r = num(v)?,
            "mlp.hidden" => self.train.hidden = num(v)?,
            "mlp.learning_rate" => self.train.learning_rate = num(v)?,
            "mlp.epochs" => self.train.epochs = num(v)?,
            "mlp.batch_size" => self.train.batch_size = num(v)?,
            "mlp.epsilon" => self.train.epsilon = num(v)?,
            "mlp.seed" => self.train.seed = num(v)?,
            "mlp.optimizer" => {
                self.train.optimizer = match v {
                    "adagrad" => Optimizer::Adagrad,
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(format!("unknown optimizer {v:?}")),
                }
            }
            "mlp.early_stopping" => self.early_stopping = boolean(v)?,
            "features.families" => {
                d.families = list(v, |t| Family::parse(t).ok_or_else(|| format!("unknown family {t:?}")))?
            }
            "thick.edges" => d.thickness_edges = ThicknessEdges::new(list(v, num)?).map_err(|e| e.to_string())?,
            "thick.proportions" => d.thickness_proportions = boolean(v)?,
            "glcm.levels" => d.glcm_levels = num(v)?,
            "lbp.pairs" => {
                d.lbp = list(v, |t| {
                    let (p, r) = t.split_once(':').ok_or_else(|| format!("expected P:R, got {t:?}"))?;
                    LbpParams::new(num(p)?, num(r)?).map_err(|e| e.to_string())
                })?
            }
            "hurst.angles" => d.hurst_angles = DirectionSet::new(list(v, num)?).map_err(|e| e.to_string())?,
            "embed.source" => {
                self.embedding = match v {
                    "none" => EmbeddingSource::None,
                    "standin" => EmbeddingSource::Standin,
                    path => EmbeddingSource::File(PathBuf::from(path)),
                }
            }
            "embed.dim" => self.embedding_dim = num(v)?,
            "embed.seed" => self.embedding_seed = num(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split.ratio must be in (0, 1)");
        }
        if self.folds < 2 {
            return bad("cv.k must be >= 2");
        }
        if !(self.selection.alpha > 0.0 && self.selection.alpha < 1.0) {
            return bad("select.alpha must be in (0, 1)");
        }
        if !(self.selection.redundancy_r > 0.0 && self.selection.redundancy_r <= 1.0) {
            return bad("select.redundancy_r must be in (0, 1]");
        }
        if self.descriptors.glcm_levels < 2 || self.descriptors.glcm_levels > 256 {
            return bad("glcm.levels must be in 2..=256");
        }
        if self.descriptors.lbp.is_empty() {
            return bad("lbp.pairs must list at least one P:R pair");
        }
        if self.train.hidden == 0 || self.train.batch_size == 0 || !(self.train.learning_rate > 0.0) {
            return bad("mlp.hidden, mlp.batch_size and mlp.learning_rate must be positive");
        }
        if self.embedding_dim == 0 {
            return bad("embed.dim must be >= 1");
        }
        Ok(())
    }

    /// Canonical text listing every key; equal configs give equal text.
    pub fn to_text(&self) -> String {
        let d = &self.descriptors;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("split.ratio", self.split_ratio.to_string());
        kv("split.seed", self.split_seed.to_string());
        kv("cv.k", self.folds.to_string());
        kv("cv.seed", self.fold_seed.to_string());
        kv("select.alpha", self.selection.alpha.to_string());
        kv("select.redundancy_r", self.selection.redundancy_r.to_string());
        kv("mlp.hidden", self.train.hidden.to_string());
        kv("mlp.learning_rate", self.train.learning_rate.to_string());
        kv("mlp.epochs", self.train.epochs.to_string());
        kv("mlp.batch_size", self.train.batch_size.to_string());
        kv("mlp.epsilon", self.train.epsilon.to_string());
        kv("mlp.seed", self.train.seed.to_string());
        kv(
            "mlp.optimizer",
            match self.train.optimizer {
                Optimizer::Adagrad => "adagrad",
                Optimizer::Sgd => "sgd",
            }
            .into(),
        );
        kv("mlp.early_stopping", self.early_stopping.to_string());
        kv("features.families", join(d.families.iter().map(|f| f.prefix().to_string())));
        kv("thick.edges", join(d.thickness_edges.as_slice().iter().map(f64::to_string)));
        kv("thick.proportions", d.thickness_proportions.to_string());
        kv("glcm.levels", d.glcm_levels.to_string());
        kv("lbp.pairs", join(d.lbp.iter().map(|p| format!("{}:{}", p.points, p.radius))));
        kv("hurst.angles", join(d.hurst_angles.angles().iter().map(f64::to_string)));
        kv(
            "embed.source",
            match &self.embedding {
                EmbeddingSource::None => "none".into(),
                EmbeddingSource::Standin => "standin".into(),
                EmbeddingSource::File(p) => p.display().to_string(),
            },
        );
        kv("embed.dim", self.embedding_dim.to_string());
        kv("embed.seed", self.embedding_seed.to_string());
        out
    }
}
