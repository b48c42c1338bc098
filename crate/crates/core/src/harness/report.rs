use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DetectorId, ExperimentConfig};
use crate::dataset::SplitRole;
use crate::detect::{Metrics, Threshold};
use crate::error::{Error, Result};
use crate::signal::FeatureSetId;

pub const REPORT_FORMAT: &str = "iiot-anomaly/report-v1";
pub const TIMELINE_HEADER: &str = "sample_id,timestamp,score,threshold,flagged,truth,split";

/// Detection protocol written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub window_size: usize,
    pub window_stride: usize,
    pub window_score: String,
    pub threshold: String,
    pub window_vote: String,
    pub sample_decision: String,
    pub metrics_on: String,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            window_size: crate::signal::WINDOW_SIZE,
            window_stride: crate::signal::WINDOW_SIZE,
            window_score: "autoencoders and BM_PCA: mean squared reconstruction error; BM_IQR: fraction of values outside mean +- 1.5 iqr".into(),
            threshold: "mean + population standard deviation (divisor N) of threshold-subset window scores".into(),
            window_vote: "window score > threshold".into(),
            sample_decision: "anomalous iff 2 * votes >= window count".into(),
            metrics_on: "eval subset, anomalous = positive".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub sample_id: u64,
    pub timestamp: i64,
    /// Mean window score.
    pub score: f64,
    pub threshold: f64,
    pub flagged: bool,
    pub truth: bool,
    pub split: SplitRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub detector: DetectorId,
    pub feature_set: FeatureSetId,
    pub metrics: Metrics,
    pub threshold: Threshold,
    /// Every sample of the dataset, timestamp-ascending.
    pub timeline: Vec<TimelineRow>,
    /// Wall time of fit plus evaluation. Kept out of `report.json` so equal
    /// configs give equal bytes; see [`write_outputs`].
    #[serde(skip)]
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub config: ExperimentConfig,
    pub protocol: Protocol,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, rows: Vec<ReportRow>) -> Self {
        Self {
            format: REPORT_FORMAT.to_string(),
            config,
            protocol: Protocol::default(),
            rows,
        }
    }

    pub fn row(&self, detector: DetectorId, fs: FeatureSetId) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.detector == detector && r.feature_set == fs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.format != REPORT_FORMAT {
            return Err(Error::config(format!(
                "unsupported report format {:?}",
                report.format
            )));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Two decimals, half up.
pub fn format_metric(x: f64) -> String {
    let cents = (x * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", cents / 100.0)
}

/// Detectors in first-appearance order, each with its rows in feature-set
/// report order.
fn blocks(report: &ExperimentReport) -> Result<Vec<(DetectorId, Vec<&ReportRow>)>> {
    if report.rows.is_empty() {
        return Err(Error::Usage("cannot render an empty report".into()));
    }
    let mut detectors: Vec<DetectorId> = Vec::new();
    for r in &report.rows {
        if !detectors.contains(&r.detector) {
            detectors.push(r.detector);
        }
    }
    Ok(detectors
        .into_iter()
        .map(|d| {
            let rows = FeatureSetId::ALL
                .iter()
                .filter_map(|&fs| report.row(d, fs))
                .collect();
            (d, rows)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub text: String,
    pub csv: String,
}

/// One block per detector with columns Acc., F1, P, R.
pub fn render_tables(report: &ExperimentReport) -> Result<Tables> {
    let blocks = blocks(report)?;
    let width = FeatureSetId::ALL
        .iter()
        .map(|f| f.display_name().len())
        .max()
        .unwrap_or(0)
        .max("Features".len());
    let mut text = String::new();
    let mut csv = String::from("detector,feature_set,accuracy,f1,precision,recall\n");
    for (i, (detector, rows)) in blocks.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        let _ = writeln!(text, "{}", detector.title());
        let _ = writeln!(text, "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}", "Features", "Acc.", "F1", "P", "R");
        for r in rows {
            let m = &r.metrics;
            let cells = [m.accuracy, m.f1, m.precision, m.recall].map(format_metric);
            let _ = writeln!(
                text,
                "{:<width$}  {:>5}  {:>5}  {:>5}  {:>5}",
                r.feature_set.display_name(),
                cells[0],
                cells[1],
                cells[2],
                cells[3]
            );
            let _ = writeln!(csv, "{},{},{}", detector, r.feature_set, cells.join(","));
        }
    }
    Ok(Tables { text, csv })
}

pub fn timeline_csv(row: &ReportRow) -> String {
    let mut out = String::with_capacity(64 * (row.timeline.len() + 1));
    out.push_str(TIMELINE_HEADER);
    out.push('\n');
    for t in &row.timeline {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.sample_id, t.timestamp, t.score, t.threshold, t.flagged, t.truth, t.split
        );
    }
    out
}

pub fn parse_timeline(text: &str) -> Result<Vec<TimelineRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TIMELINE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {TIMELINE_HEADER:?}"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let bad = |message: String| Error::Parse { line: i + 1, message };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let flag = |s: &str| s.parse::<bool>().map_err(|e| bad(format!("{s:?}: {e}")));
            Ok(TimelineRow {
                sample_id: f[0].parse().map_err(|e| bad(format!("sample_id: {e}")))?,
                timestamp: f[1].parse().map_err(|e| bad(format!("timestamp: {e}")))?,
                score: num(f[2])?,
                threshold: num(f[3])?,
                flagged: flag(f[4])?,
                truth: flag(f[5])?,
                split: match f[6] {
                    "train" => SplitRole::Train,
                    "threshold" => SplitRole::Threshold,
                    "eval" => SplitRole::Eval,
                    other => return Err(bad(format!("unknown split {other:?}"))),
                },
            })
        })
        .collect()
}

pub fn export_timeline(row: &ReportRow, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, timeline_csv(row)).map_err(|e| Error::io(path, e))
}

pub fn timeline_file_name(detector: DetectorId, fs: FeatureSetId) -> String {
    format!("{detector}_{fs}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeEntry {
    pub detector: DetectorId,
    pub feature_set: FeatureSetId,
    pub seconds: f64,
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub report: PathBuf,
    pub tables_text: PathBuf,
    pub tables_csv: PathBuf,
    pub timelines: Vec<PathBuf>,
    pub runtime: PathBuf,
}

/// Writes `report.json`, `tables.txt`, `tables.csv`, one timeline per row
/// under `timelines/`, and wall times to `runtime.json`. Everything except
/// `runtime.json` is a pure function of the config.
pub fn write_outputs(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<OutputFiles> {
    let dir = dir.as_ref();
    let timeline_dir = dir.join("timelines");
    fs::create_dir_all(&timeline_dir).map_err(|e| Error::io(&timeline_dir, e))?;
    let write = |path: PathBuf, text: &str| -> Result<PathBuf> {
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let tables = render_tables(report)?;
    let runtime: Vec<RuntimeEntry> = report
        .rows
        .iter()
        .map(|r| RuntimeEntry {
            detector: r.detector,
            feature_set: r.feature_set,
            seconds: r.runtime_seconds,
        })
        .collect();
    Ok(OutputFiles {
        report: write(dir.join("report.json"), &report.to_json()?)?,
        tables_text: write(dir.join("tables.txt"), &tables.text)?,
        tables_csv: write(dir.join("tables.csv"), &tables.csv)?,
        timelines: report
            .rows
            .iter()
            .map(|r| {
                let path = timeline_dir.join(timeline_file_name(r.detector, r.feature_set));
                export_timeline(r, &path)?;
                Ok(path)
            })
            .collect::<Result<_>>()?,
        runtime: write(dir.join("runtime.json"), &serde_json::to_string_pretty(&runtime)?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(detector: DetectorId, fs: FeatureSetId, m: Metrics) -> ReportRow {
        ReportRow {
            detector,
            feature_set: fs,
            metrics: m,
            threshold: Threshold {
                value: 1.0,
                mean: 0.5,
                std: 0.5,
                calibration_count: 2,
            },
            timeline: vec![],
            runtime_seconds: 0.0,
        }
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_metric(1.0), "1.00");
        assert_eq!(format_metric(0.0), "0.00");
        assert_eq!(format_metric(0.125), "0.13");
        assert_eq!(format_metric(0.625), "0.63");
        assert_eq!(format_metric(0.8), "0.80");
        assert_eq!(format_metric(2.0 / 3.0), "0.67");
        assert_eq!(format_metric(0.005), "0.01");
        assert_eq!(format_metric(0.0049), "0.00");
    }

    #[test]
    fn table_row_layout() {
        let m = Metrics {
            accuracy: 0.48,
            precision: 0.47,
            recall: 0.94,
            f1: 0.63,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        let report = ExperimentReport::new(
            ExperimentConfig::default(),
            vec![
                row(DetectorId::BmIqr, FeatureSetId::Audio, m),
                row(DetectorId::BmIqr, FeatureSetId::Vib1d, m),
            ],
        );
        let t = render_tables(&report).unwrap();
        let lines: Vec<&str> = t.text.lines().collect();
        assert_eq!(lines[0], "Benchmark IQR");
        assert!(lines[2].starts_with("Vibrations 1D "));
        let cells: Vec<&str> = lines[2].split_whitespace().skip(2).collect();
        assert_eq!(cells, ["0.48", "0.63", "0.47", "0.94"]);
        assert!(lines[3].starts_with("Audio "));
        assert_eq!(
            t.csv.lines().nth(1).unwrap(),
            "BM_IQR,VIB1D,0.48,0.63,0.47,0.94"
        );
        let empty = ExperimentReport::new(ExperimentConfig::default(), vec![]);
        assert!(matches!(render_tables(&empty), Err(Error::Usage(_))));
    }

    #[test]
    fn timeline_round_trip() {
        let mut r = row(DetectorId::Dnn, FeatureSetId::Vib3d, Metrics::from_counts(1, 1, 1, 1));
        r.timeline = (0..5)
            .map(|i| TimelineRow {
                sample_id: i,
                timestamp: 1_600_000_000 + 60 * i as i64,
                score: 0.1 + (i as f64).sqrt() / 7.0,
                threshold: 0.30000000000000004,
                flagged: i % 2 == 0,
                truth: false,
                split: SplitRole::Eval,
            })
            .collect();
        let csv = timeline_csv(&r);
        assert_eq!(csv.lines().count(), 6);
        assert_eq!(parse_timeline(&csv).unwrap(), r.timeline);
        assert!(parse_timeline("nope\n").is_err());
    }
}
