use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, DetectorConfig, DetectorId, ExperimentConfig};
use super::report::{ExperimentReport, ReportRow, TimelineRow};
use crate::baseline::{iqr_fit, outlier_ratio, pca_fit, pca_score, IqrModel, PcaModel};
use crate::dataset::{generate_synthetic, load_dataset, split, Dataset, SensorSample, Split};
use crate::detect::{calibrate_threshold, evaluate, AnomalyScore, Threshold};
use crate::error::{Error, Result};
use crate::models::{Autoencoder, ModelSpec};
use crate::nn::{Checkpoint, TrainConfig, TrainReport};
use crate::rng::SplitMix64;
use crate::signal::{
    assemble_features, fit_normalizer, window, FeatureSetId, Normalizer, Window, WindowBatch,
    WINDOW_SIZE,
};

pub const STATE_FORMAT: &str = "iiot-anomaly/detector-v1";

/// What a fitted detector scores windows with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedModel {
    Autoencoder {
        spec: ModelSpec,
        checkpoint: Checkpoint,
    },
    Pca(PcaModel),
    Iqr(IqrModel),
}

/// Every artifact fitted for one (detector, feature set) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub format: String,
    pub detector: DetectorId,
    pub feature_set: FeatureSetId,
    pub normalizer: Normalizer,
    pub model: FittedModel,
    pub threshold: Threshold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_report: Option<TrainReport>,
}

enum Scorer<'a> {
    Autoencoder(Autoencoder),
    Pca(&'a PcaModel),
    Iqr(&'a IqrModel),
}

impl Scorer<'_> {
    fn window_score(&self, w: &Window) -> Result<f64> {
        match self {
            Scorer::Autoencoder(ae) => ae.window_error(w),
            Scorer::Pca(m) => pca_score(m, w.values.as_slice()),
            Scorer::Iqr(m) => outlier_ratio(m, w.values.as_slice()),
        }
    }

    fn window_scores(&self, windows: &[Window]) -> Result<Vec<f64>> {
        windows.par_iter().map(|w| self.window_score(w)).collect()
    }
}

/// Normalized windows of one sample.
pub fn sample_windows(
    sample: &SensorSample,
    fs: FeatureSetId,
    normalizer: &Normalizer,
) -> Result<Vec<Window>> {
    let fm = normalizer.apply(&assemble_features(sample, fs)?)?;
    Ok(window(&fm, WINDOW_SIZE, WINDOW_SIZE)?.windows)
}

fn dataset_windows(ds: &Dataset, fs: FeatureSetId, normalizer: &Normalizer) -> Result<Vec<Window>> {
    let per: Vec<Vec<Window>> = ds
        .samples
        .par_iter()
        .map(|s| sample_windows(s, fs, normalizer))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn vectors(windows: &[Window]) -> Vec<Vec<f64>> {
    windows.iter().map(|w| w.values.as_slice().to_vec()).collect()
}

/// Seed for the initial weights of one combination.
fn init_seed(train_seed: u64, detector: DetectorId, fs: FeatureSetId) -> u64 {
    SplitMix64::derived(train_seed, &[detector as u64, fs as u64]).next_u64()
}

/// Fits normalizer, model and threshold using only the train and threshold
/// subsets of `split`.
pub fn fit_combination(
    split: &Split,
    detector: &DetectorConfig,
    fs: FeatureSetId,
    default_train: &TrainConfig,
) -> Result<DetectorState> {
    let features = split
        .train
        .samples
        .iter()
        .map(|s| assemble_features(s, fs))
        .collect::<Result<Vec<_>>>()?;
    let normalizer = fit_normalizer(&features)?;
    let train_windows = dataset_windows(&split.train, fs, &normalizer)?;
    let threshold_windows = dataset_windows(&split.threshold, fs, &normalizer)?;
    let id = detector.id();
    let channels = fs.channel_count();

    let mut train_report = None;
    let (model, threshold) = match detector {
        DetectorConfig::BmPca { variance_target } => {
            let m = pca_fit(&vectors(&train_windows), *variance_target)?;
            let scores = Scorer::Pca(&m).window_scores(&threshold_windows)?;
            let th = calibrate_threshold(&scores)?;
            (FittedModel::Pca(m), th)
        }
        DetectorConfig::BmIqr {} => {
            let m = iqr_fit(&vectors(&train_windows), &vectors(&threshold_windows))?;
            let th = m.ratio_threshold;
            (FittedModel::Iqr(m), th)
        }
        DetectorConfig::Dnn { n, .. }
        | DetectorConfig::Lstm { n, .. }
        | DetectorConfig::Cnn { bottleneck: n, .. } => {
            let arch = id.architecture().expect("autoencoder detector");
            let mut spec = ModelSpec::new(arch, channels);
            if matches!(detector, DetectorConfig::Cnn { .. }) {
                spec.cnn_bottleneck = *n;
            } else {
                spec.n = *n;
            }
            let train_cfg = detector.train_config(default_train);
            let mut ae = Autoencoder::new(spec.clone(), init_seed(train_cfg.seed, id, fs))?;
            let batch = WindowBatch {
                windows: train_windows,
                window_size: WINDOW_SIZE,
                stride: WINDOW_SIZE,
            };
            train_report = Some(ae.train(&batch, train_cfg)?);
            let scores = Scorer::Autoencoder(ae.clone()).window_scores(&threshold_windows)?;
            let th = calibrate_threshold(&scores)?;
            (
                FittedModel::Autoencoder {
                    spec,
                    checkpoint: Checkpoint::from_model(&ae.model),
                },
                th,
            )
        }
    };
    Ok(DetectorState {
        format: STATE_FORMAT.to_string(),
        detector: id,
        feature_set: fs,
        normalizer,
        model,
        threshold,
        train_report,
    })
}

impl DetectorState {
    fn scorer(&self) -> Result<Scorer<'_>> {
        Ok(match &self.model {
            FittedModel::Autoencoder { spec, checkpoint } => Scorer::Autoencoder(
                Autoencoder::from_model(spec.clone(), checkpoint.clone().into_model()?)?,
            ),
            FittedModel::Pca(m) => Scorer::Pca(m),
            FittedModel::Iqr(m) => Scorer::Iqr(m),
        })
    }

    /// Scores and classifies every sample of `ds`, in order.
    pub fn score_dataset(&self, ds: &Dataset) -> Result<Vec<AnomalyScore>> {
        let scorer = self.scorer()?;
        ds.samples
            .iter()
            .map(|s| {
                let windows = sample_windows(s, self.feature_set, &self.normalizer)?;
                let mut score = AnomalyScore::new(s.sample_id, scorer.window_scores(&windows)?);
                score.decide(&self.threshold);
                Ok(score)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(text)?;
        if state.format != STATE_FORMAT {
            return Err(Error::config(format!(
                "unsupported detector state format {:?}",
                state.format
            )));
        }
        Ok(state)
    }
}

/// Scores every sample of the split and computes metrics on the eval subset.
pub fn evaluate_combination(state: &DetectorState, split: &Split) -> Result<ReportRow> {
    let roles = split.roles();
    let mut timeline = Vec::new();
    let (mut predicted, mut truth) = (Vec::new(), Vec::new());
    for (ds, is_eval) in [(&split.train, false), (&split.threshold, false), (&split.eval, true)] {
        let scores = state.score_dataset(ds)?;
        for (sample, score) in ds.samples.iter().zip(scores) {
            let role = roles[&sample.sample_id];
            if is_eval {
                predicted.push(score.is_flagged);
                truth.push(sample.is_anomaly);
            }
            timeline.push(TimelineRow {
                sample_id: sample.sample_id,
                timestamp: sample.timestamp,
                score: score.sample_score,
                threshold: state.threshold.value,
                flagged: score.is_flagged,
                truth: sample.is_anomaly,
                split: role,
            });
        }
    }
    timeline.sort_by_key(|r| (r.timestamp, r.sample_id));
    Ok(ReportRow {
        detector: state.detector,
        feature_set: state.feature_set,
        metrics: evaluate(&predicted, &truth)?,
        threshold: state.threshold,
        timeline,
        runtime_seconds: 0.0,
    })
}

fn with_context<T>(id: DetectorId, fs: FeatureSetId, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Combination {
        detector: id.to_string(),
        feature_set: fs.to_string(),
        source: Box::new(e),
    })
}

pub fn load_source(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Generate(g) => generate_synthetic(g),
        DatasetSource::Load(path) => load_dataset(path),
    }
}

/// All combinations in config order (feature set major).
pub fn combinations(cfg: &ExperimentConfig) -> Vec<(FeatureSetId, &DetectorConfig)> {
    cfg.feature_sets
        .iter()
        .flat_map(|&fs| cfg.detectors.iter().map(move |d| (fs, d)))
        .collect()
}

/// Fits every combination of `cfg` on `ds`.
pub fn fit_all(cfg: &ExperimentConfig, ds: &Dataset) -> Result<(Split, Vec<(DetectorState, f64)>)> {
    cfg.validate()?;
    let sp = split(ds, &cfg.split.spec()?, cfg.split.seed)?;
    let states = combinations(cfg)
        .into_iter()
        .map(|(fs, d)| {
            let start = Instant::now();
            let state = with_context(d.id(), fs, fit_combination(&sp, d, fs, &cfg.train))?;
            Ok((state, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sp, states))
}

/// Evaluates fitted states against the split of `ds` that `cfg` defines.
pub fn evaluate_all(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    states: &[(DetectorState, f64)],
) -> Result<ExperimentReport> {
    let sp = split(ds, &cfg.split.spec()?, cfg.split.seed)?;
    let rows = states
        .iter()
        .map(|(state, fit_seconds)| {
            let start = Instant::now();
            let mut row =
                with_context(state.detector, state.feature_set, evaluate_combination(state, &sp))?;
            row.runtime_seconds = fit_seconds + start.elapsed().as_secs_f64();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(cfg.clone(), rows))
}

/// Dataset, split, fit and evaluate for every (detector, feature set).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let ds = load_source(cfg)?;
    run_experiment_on(cfg, &ds)
}

/// [`run_experiment`] on an already loaded dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentReport> {
    let (_, states) = fit_all(cfg, ds)?;
    evaluate_all(cfg, ds, &states)
}
