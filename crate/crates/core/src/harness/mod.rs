//! Experiment orchestration: configuration, the dataset → features →
//! detector → metrics pipeline, report rendering and timeline export.

mod config;
mod pipeline;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{DatasetSource, DetectorConfig, DetectorId, ExperimentConfig, SplitConfig};
pub use pipeline::{
    combinations, evaluate_all, evaluate_combination, fit_all, fit_combination, load_source,
    run_experiment, run_experiment_on, sample_windows, DetectorState, FittedModel, STATE_FORMAT,
};
pub use report::{
    export_timeline, format_metric, parse_timeline, render_tables, timeline_csv,
    timeline_file_name, write_outputs, ExperimentReport, OutputFiles, Protocol, ReportRow,
    RuntimeEntry, Tables, TimelineRow, REPORT_FORMAT, TIMELINE_HEADER,
};

use crate::error::{Error, Result};

pub fn state_file_name(state: &DetectorState) -> String {
    format!("{}_{}.json", state.detector, state.feature_set)
}

/// Writes each state to `dir/models/<DETECTOR>_<FEATURE_SET>.json` and the
/// fit times to `dir/models/fit_runtime.json`.
pub fn save_states(states: &[(DetectorState, f64)], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let models = dir.as_ref().join("models");
    fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
    let mut paths = Vec::new();
    let mut runtime = Vec::new();
    for (state, seconds) in states {
        let path = models.join(state_file_name(state));
        fs::write(&path, state.to_json()?).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
        runtime.push(RuntimeEntry {
            detector: state.detector,
            feature_set: state.feature_set,
            seconds: *seconds,
        });
    }
    let rt = models.join("fit_runtime.json");
    fs::write(&rt, serde_json::to_string_pretty(&runtime)?).map_err(|e| Error::io(&rt, e))?;
    Ok(paths)
}

/// Loads the state of every combination of `cfg` from `dir/models`.
pub fn load_states(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<Vec<(DetectorState, f64)>> {
    let models = dir.as_ref().join("models");
    let rt_path = models.join("fit_runtime.json");
    let runtime: Vec<RuntimeEntry> = match fs::read_to_string(&rt_path) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Vec::new(),
    };
    combinations(cfg)
        .into_iter()
        .map(|(fs, d)| {
            let path = models.join(format!("{}_{}.json", d.id(), fs));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let state = DetectorState::from_json(&text)?;
            if state.detector != d.id() || state.feature_set != fs {
                return Err(Error::config(format!(
                    "{} holds {} on {}",
                    path.display(),
                    state.detector,
                    state.feature_set
                )));
            }
            let seconds = runtime
                .iter()
                .find(|r| r.detector == d.id() && r.feature_set == fs)
                .map_or(0.0, |r| r.seconds);
            Ok((state, seconds))
        })
        .collect()
}
