//! Every detector on every feature set, from a JSON config or a small
//! built-in one, with all report files written to the output directory.
//!
//! cargo run --release --example full_experiment -- [config.json]

use iiot_anomaly::dataset::GeneratorConfig;
use iiot_anomaly::harness::{
    render_tables, run_experiment, write_outputs, DatasetSource, DetectorConfig, ExperimentConfig,
};
use iiot_anomaly::nn::TrainConfig;

fn main() -> iiot_anomaly::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            dataset: DatasetSource::Generate(GeneratorConfig {
                n_samples_per_condition: 20,
                ..GeneratorConfig::default()
            }),
            train: TrainConfig { max_epochs: 3, ..TrainConfig::default() },
            output_dir: "out/full_experiment".into(),
            detectors: ExperimentConfig::default()
                .detectors
                .into_iter()
                .map(|d| match d {
                    DetectorConfig::Lstm { train, .. } => DetectorConfig::Lstm { n: 32, train },
                    other => other,
                })
                .collect(),
            ..ExperimentConfig::default()
        },
    };
    let report = run_experiment(&cfg)?;
    let files = write_outputs(&report, &cfg.output_dir)?;
    print!("{}", render_tables(&report)?.text);
    println!("report: {}", files.report.display());
    println!("{} timelines under {}", files.timelines.len(), cfg.output_dir.join("timelines").display());
    Ok(())
}
