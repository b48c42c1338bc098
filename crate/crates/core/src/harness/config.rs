use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::DEFAULT_VARIANCE_TARGET;
use crate::dataset::{GeneratorConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::models::{ArchitectureId, DEFAULT_CNN_BOTTLENECK, DEFAULT_DNN_N, DEFAULT_LSTM_N};
use crate::nn::TrainConfig;
use crate::signal::FeatureSetId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DetectorId {
    #[serde(rename = "DNN")]
    Dnn,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "CNN")]
    Cnn,
    #[serde(rename = "BM_PCA")]
    BmPca,
    #[serde(rename = "BM_IQR")]
    BmIqr,
}

impl DetectorId {
    pub const ALL: [DetectorId; 5] = [
        DetectorId::Dnn,
        DetectorId::Lstm,
        DetectorId::Cnn,
        DetectorId::BmPca,
        DetectorId::BmIqr,
    ];

    pub fn key(self) -> &'static str {
        match self {
            DetectorId::Dnn => "DNN",
            DetectorId::Lstm => "LSTM",
            DetectorId::Cnn => "CNN",
            DetectorId::BmPca => "BM_PCA",
            DetectorId::BmIqr => "BM_IQR",
        }
    }

    /// Table block heading.
    pub fn title(self) -> &'static str {
        match self {
            DetectorId::Dnn => "Fully connected autoencoder (DNN)",
            DetectorId::Lstm => "LSTM autoencoder (LSTM)",
            DetectorId::Cnn => "Convolutional autoencoder (CNN)",
            DetectorId::BmPca => "Benchmark PCA",
            DetectorId::BmIqr => "Benchmark IQR",
        }
    }

    pub fn architecture(self) -> Option<ArchitectureId> {
        match self {
            DetectorId::Dnn => Some(ArchitectureId::Dnn),
            DetectorId::Lstm => Some(ArchitectureId::Lstm),
            DetectorId::Cnn => Some(ArchitectureId::Cnn),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorId::ALL
            .into_iter()
            .find(|d| d.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown detector {s:?}; expected one of DNN, LSTM, CNN, BM_PCA, BM_IQR"
                ))
            })
    }
}

fn default_dnn_n() -> usize {
    DEFAULT_DNN_N
}

fn default_lstm_n() -> usize {
    DEFAULT_LSTM_N
}

fn default_bottleneck() -> usize {
    DEFAULT_CNN_BOTTLENECK
}

fn default_variance_target() -> f64 {
    DEFAULT_VARIANCE_TARGET
}

/// One detector and its hyperparameters. Autoencoders may override the
/// experiment-wide training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DetectorConfig {
    #[serde(rename = "DNN")]
    Dnn {
        #[serde(default = "default_dnn_n")]
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
    },
    #[serde(rename = "LSTM")]
    Lstm {
        #[serde(default = "default_lstm_n")]
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
    },
    #[serde(rename = "CNN")]
    Cnn {
        #[serde(default = "default_bottleneck")]
        bottleneck: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
    },
    #[serde(rename = "BM_PCA")]
    BmPca {
        #[serde(default = "default_variance_target")]
        variance_target: f64,
    },
    #[serde(rename = "BM_IQR")]
    BmIqr {},
}

impl DetectorConfig {
    /// Defaults for `id`.
    pub fn default_for(id: DetectorId) -> Self {
        match id {
            DetectorId::Dnn => DetectorConfig::Dnn {
                n: DEFAULT_DNN_N,
                train: None,
            },
            DetectorId::Lstm => DetectorConfig::Lstm {
                n: DEFAULT_LSTM_N,
                train: None,
            },
            DetectorId::Cnn => DetectorConfig::Cnn {
                bottleneck: DEFAULT_CNN_BOTTLENECK,
                train: None,
            },
            DetectorId::BmPca => DetectorConfig::BmPca {
                variance_target: DEFAULT_VARIANCE_TARGET,
            },
            DetectorId::BmIqr => DetectorConfig::BmIqr {},
        }
    }

    pub fn id(&self) -> DetectorId {
        match self {
            DetectorConfig::Dnn { .. } => DetectorId::Dnn,
            DetectorConfig::Lstm { .. } => DetectorId::Lstm,
            DetectorConfig::Cnn { .. } => DetectorId::Cnn,
            DetectorConfig::BmPca { .. } => DetectorId::BmPca,
            DetectorConfig::BmIqr {} => DetectorId::BmIqr,
        }
    }

    /// Training settings for this detector given the experiment default.
    pub fn train_config<'a>(&'a self, default: &'a TrainConfig) -> &'a TrainConfig {
        match self {
            DetectorConfig::Dnn { train, .. }
            | DetectorConfig::Lstm { train, .. }
            | DetectorConfig::Cnn { train, .. } => train.as_ref().unwrap_or(default),
            _ => default,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Generate(GeneratorConfig),
    Load(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub threshold_frac: f64,
    pub eval_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        let s = SplitSpec::default();
        Self {
            train_frac: s.train_frac,
            threshold_frac: s.threshold_frac,
            eval_frac: s.eval_frac,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.train_frac, self.threshold_frac, self.eval_frac)
    }
}

fn default_feature_sets() -> Vec<FeatureSetId> {
    FeatureSetId::ALL.to_vec()
}

fn default_detectors() -> Vec<DetectorConfig> {
    DetectorId::ALL.into_iter().map(DetectorConfig::default_for).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything one experiment needs. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<FeatureSetId>,
    #[serde(default = "default_detectors")]
    pub detectors: Vec<DetectorConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Generate(GeneratorConfig::default()),
            split: SplitConfig::default(),
            feature_sets: default_feature_sets(),
            detectors: default_detectors(),
            train: TrainConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("config line {} column {}: {e}", e.line(), e.column()))
        })?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_sets.is_empty() {
            return Err(Error::config("at least one feature set is required"));
        }
        if self.detectors.is_empty() {
            return Err(Error::config("at least one detector is required"));
        }
        for (i, fs) in self.feature_sets.iter().enumerate() {
            if self.feature_sets[..i].contains(fs) {
                return Err(Error::config(format!("feature set {fs} listed twice")));
            }
        }
        for (i, d) in self.detectors.iter().enumerate() {
            if self.detectors[..i].iter().any(|o| o.id() == d.id()) {
                return Err(Error::config(format!("detector {} listed twice", d.id())));
            }
            d.train_config(&self.train).validate()?;
            if let DetectorConfig::BmPca { variance_target } = d {
                if !(*variance_target > 0.0 && *variance_target <= 1.0) {
                    return Err(Error::config("BM_PCA variance_target must lie in (0, 1]"));
                }
            }
        }
        if let DatasetSource::Generate(g) = &self.dataset {
            g.validate()?;
        }
        self.split.spec()?;
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"dataset": {"generate": {}}}"#).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.detectors.len(), 5);
        assert_eq!(cfg.feature_sets.len(), 8);
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.detectors[1] = DetectorConfig::Lstm {
            n: 32,
            train: Some(TrainConfig {
                max_epochs: 3,
                ..TrainConfig::default()
            }),
        };
        cfg.dataset = DatasetSource::Load("data.jsonl".into());
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.detectors[1].train_config(&back.train).max_epochs, 3);
        assert_eq!(back.detectors[0].train_config(&back.train).max_epochs, 100);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"dataset": {"generate": {}}, "bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"dataset": {"generate": {}}, "detectors": [{"kind": "SVM"}]}"#).is_err());
        let empty = ExperimentConfig {
            detectors: vec![],
            ..ExperimentConfig::default()
        };
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let twice = ExperimentConfig {
            feature_sets: vec![FeatureSetId::Audio, FeatureSetId::Audio],
            ..ExperimentConfig::default()
        };
        assert!(twice.validate().is_err());
    }

    #[test]
    fn detector_ids_parse() {
        assert_eq!("bm_pca".parse::<DetectorId>().unwrap(), DetectorId::BmPca);
        assert!("svm".parse::<DetectorId>().is_err());
    }
}
