use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Mel,
    Raw,
    Awe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    None,
    Concat,
    #[serde(alias = "xattn", alias = "cross-attention")]
    CrossAttention,
}

impl Fusion {
    pub const ALL: [Fusion; 3] = [Fusion::None, Fusion::Concat, Fusion::CrossAttention];
}

/// How the text side is reduced to one vector for concatenation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextVector {
    /// Mean of the word-piece rows, special tokens excluded.
    #[default]
    TokenMean,
    /// The sequence-start token row.
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSelection {
    Single(usize),
    All,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Mel => "mel",
            Feature::Raw => "raw",
            Feature::Awe => "awe",
        })
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::None => "none",
            Fusion::Concat => "concat",
            Fusion::CrossAttention => "xattn",
        })
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::Single(l) => write!(f, "{l}"),
            LayerSelection::All => f.write_str("all"),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mel" => Ok(Feature::Mel),
            "raw" | "hubert" => Ok(Feature::Raw),
            "awe" | "awes" => Ok(Feature::Awe),
            other => Err(Error::Config(format!("unknown feature {other:?} (mel|raw|awe)"))),
        }
    }
}

impl FromStr for Fusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Fusion::None),
            "concat" => Ok(Fusion::Concat),
            "xattn" | "cross_attention" | "cross-attention" => Ok(Fusion::CrossAttention),
            other => Err(Error::Config(format!("unknown fusion {other:?} (none|concat|xattn)"))),
        }
    }
}

impl FromStr for LayerSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(LayerSelection::All);
        }
        s.parse()
            .map(LayerSelection::Single)
            .map_err(|_| Error::Config(format!("layer must be an index or \"all\", got {s:?}")))
    }
}

impl Serialize for LayerSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LayerSelection::Single(l) => s.serialize_u64(*l as u64),
            LayerSelection::All => s.serialize_str("all"),
        }
    }
}

impl<'de> Deserialize<'de> for LayerSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(LayerSelection::Single(i)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;
pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub feature: Feature,
    pub fusion: Fusion,
    pub layer: LayerSelection,
    pub split_ratio: f64,
    /// One training run per seed.
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub text_vector: TextVector,
    /// Z-score inputs with training-split statistics.
    pub standardize: bool,
    /// Allow Mel + cross-attention, which is rejected by default.
    pub force_mel_cross_attention: bool,
}

impl ExperimentConfig {
    pub fn new(manifest: impl Into<PathBuf>, feature: Feature, fusion: Fusion, layer: LayerSelection) -> Self {
        ExperimentConfig {
            manifest: manifest.into(),
            feature,
            fusion,
            layer,
            split_ratio: DEFAULT_SPLIT_RATIO,
            seeds: DEFAULT_SEEDS.to_vec(),
            train: TrainConfig::default(),
            model: ModelConfig::default(),
            text_vector: TextVector::default(),
            standardize: true,
            force_mel_cross_attention: false,
        }
    }

    pub fn n_runs(&self) -> usize {
        self.seeds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.feature == Feature::Mel
            && self.fusion == Fusion::CrossAttention
            && !self.force_mel_cross_attention
        {
            return Err(Error::Config(
                "mel + cross-attention is disabled; set force_mel_cross_attention to run it".into(),
            ));
        }
        if self.model.hidden1 == 0 || self.model.hidden2 == 0 || self.model.d_model == 0 {
            return Err(Error::Config(format!("model sizes must be >= 1: {:?}", self.model)));
        }
        self.train.validate()
    }

    /// Hex SHA-256 of every setting except the manifest location.
    pub fn fingerprint(&self) -> String {
        let mut settings = serde_json::to_value(self).expect("config serializes");
        settings
            .as_object_mut()
            .expect("config is an object")
            .remove("manifest");
        let digest = Sha256::digest(settings.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn with_layer(&self, layer: usize) -> Self {
        ExperimentConfig {
            layer: LayerSelection::Single(layer),
            ..self.clone()
        }
    }

    pub fn with_fusion(&self, fusion: Fusion) -> Self {
        ExperimentConfig {
            fusion,
            ..self.clone()
        }
    }
}

/// Partial config read from a TOML file; present keys override the
/// command-line values.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub manifest: Option<PathBuf>,
    pub feature: Option<Feature>,
    pub fusion: Option<Fusion>,
    pub layer: Option<LayerSelection>,
    pub split_ratio: Option<f64>,
    pub runs: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub train: Option<TrainConfig>,
    pub model: Option<ModelConfig>,
    pub text_vector: Option<TextVector>,
    pub standardize: Option<bool>,
    pub force_mel_cross_attention: Option<bool>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(v) = self.manifest {
            cfg.manifest = v;
        }
        if let Some(v) = self.feature {
            cfg.feature = v;
        }
        if let Some(v) = self.fusion {
            cfg.fusion = v;
        }
        if let Some(v) = self.layer {
            cfg.layer = v;
        }
        if let Some(v) = self.split_ratio {
            cfg.split_ratio = v;
        }
        match (self.seeds, self.runs) {
            (Some(seeds), Some(runs)) if seeds.len() != runs => {
                return Err(Error::Config(format!(
                    "runs = {runs} but {} seeds listed",
                    seeds.len()
                )))
            }
            (Some(seeds), _) => cfg.seeds = seeds,
            (None, Some(runs)) => cfg.seeds = (1..=runs as u64).collect(),
            (None, None) => {}
        }
        if let Some(v) = self.train {
            cfg.train = v;
        }
        if let Some(v) = self.model {
            cfg.model = v;
        }
        if let Some(v) = self.text_vector {
            cfg.text_vector = v;
        }
        if let Some(v) = self.standardize {
            cfg.standardize = v;
        }
        if let Some(v) = self.force_mel_cross_attention {
            cfg.force_mel_cross_attention = v;
        }
        Ok(())
    }
}
