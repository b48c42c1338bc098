use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iiot_anomaly::dataset::save_dataset;
use iiot_anomaly::harness::{
    evaluate_all, fit_all, load_source, load_states, render_tables, save_states, write_outputs,
    DatasetSource, DetectorConfig, DetectorId, ExperimentConfig, ExperimentReport,
};
use iiot_anomaly::signal::FeatureSetId;
use iiot_anomaly::{Error, Result};

#[derive(Parser)]
#[command(name = "iiot-anomaly", version, about = "Reconstruction-error anomaly detection for IIoT sensor recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic dataset as JSON Lines.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Destination file [default: <output_dir>/dataset.jsonl].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit every (detector, feature set) and save the states under <output_dir>/models.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score saved states and write the report, tables and timelines.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train and evaluate in one go.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the tables of a saved report.
    Report {
        /// Report file [default: out/report.json].
        #[arg(long, default_value = "out/report.json")]
        report: PathBuf,
        /// Print CSV instead of aligned text.
        #[arg(long)]
        csv: bool,
    },
}

/// A JSON config file plus flags that override its keys.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Load this JSONL dataset instead of generating one (dataset.load).
    #[arg(long)]
    dataset: Option<PathBuf>,

    #[arg(long)]
    n_samples_per_condition: Option<usize>,
    #[arg(long)]
    anomaly_fraction: Option<f64>,
    #[arg(long)]
    base_amplitude: Option<f64>,
    #[arg(long)]
    harmonic_count: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    anomaly_harmonic_gain: Option<f64>,
    #[arg(long)]
    anomaly_noise_gain: Option<f64>,
    /// dataset.generate.seed
    #[arg(long)]
    generator_seed: Option<u64>,

    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    threshold_frac: Option<f64>,
    #[arg(long)]
    eval_frac: Option<f64>,
    /// split.seed
    #[arg(long)]
    split_seed: Option<u64>,

    /// Comma-separated, e.g. VIB1D,FFT_AUDIO.
    #[arg(long, value_delimiter = ',')]
    feature_sets: Option<Vec<FeatureSetId>>,
    /// Comma-separated, e.g. DNN,BM_IQR. Hyperparameters come from the
    /// config entry of the same kind, else defaults.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorId>>,

    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    /// train.seed
    #[arg(long)]
    train_seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.output_dir {
            cfg.output_dir = p.clone();
        }
        if let Some(p) = &self.dataset {
            cfg.dataset = DatasetSource::Load(p.clone());
        }
        let generator_flags = [
            self.n_samples_per_condition.is_some(),
            self.anomaly_fraction.is_some(),
            self.base_amplitude.is_some(),
            self.harmonic_count.is_some(),
            self.noise_std.is_some(),
            self.anomaly_harmonic_gain.is_some(),
            self.anomaly_noise_gain.is_some(),
            self.generator_seed.is_some(),
        ];
        match &mut cfg.dataset {
            DatasetSource::Generate(g) => {
                set(&mut g.n_samples_per_condition, self.n_samples_per_condition);
                set(&mut g.anomaly_fraction, self.anomaly_fraction);
                set(&mut g.base_amplitude, self.base_amplitude);
                set(&mut g.harmonic_count, self.harmonic_count);
                set(&mut g.noise_std, self.noise_std);
                set(&mut g.anomaly_harmonic_gain, self.anomaly_harmonic_gain);
                set(&mut g.anomaly_noise_gain, self.anomaly_noise_gain);
                set(&mut g.seed, self.generator_seed);
            }
            DatasetSource::Load(_) if generator_flags.contains(&true) => {
                return Err(Error::Usage(
                    "generator flags cannot be combined with a loaded dataset".into(),
                ))
            }
            DatasetSource::Load(_) => {}
        }
        set(&mut cfg.split.train_frac, self.train_frac);
        set(&mut cfg.split.threshold_frac, self.threshold_frac);
        set(&mut cfg.split.eval_frac, self.eval_frac);
        set(&mut cfg.split.seed, self.split_seed);
        if let Some(fs) = &self.feature_sets {
            cfg.feature_sets = fs.clone();
        }
        if let Some(ids) = &self.detectors {
            cfg.detectors = ids
                .iter()
                .map(|&id| {
                    cfg.detectors
                        .iter()
                        .find(|d| d.id() == id)
                        .cloned()
                        .unwrap_or_else(|| DetectorConfig::default_for(id))
                })
                .collect();
        }
        set(&mut cfg.train.learning_rate, self.learning_rate);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.max_epochs, self.max_epochs);
        set(&mut cfg.train.early_stop_patience, self.early_stop_patience);
        set(&mut cfg.train.seed, self.train_seed);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn finish(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let files = write_outputs(report, &cfg.output_dir)?;
    print!("{}", render_tables(report)?.text);
    eprintln!("wrote {}", files.report.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { cfg, out } => {
            let cfg = cfg.resolve()?;
            if matches!(cfg.dataset, DatasetSource::Load(_)) {
                return Err(Error::Usage("generate needs a generator config, not a dataset path".into()));
            }
            let ds = load_source(&cfg)?;
            let out = out.unwrap_or_else(|| cfg.output_dir.join("dataset.jsonl"));
            if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Usage(format!("{}: {e}", dir.display())))?;
            }
            save_dataset(&ds, &out)?;
            eprintln!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Train { cfg } => {
            let cfg = cfg.resolve()?;
            let ds = load_source(&cfg)?;
            let (_, states) = fit_all(&cfg, &ds)?;
            for path in save_states(&states, &cfg.output_dir)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Evaluate { cfg } => {
            let cfg = cfg.resolve()?;
            let ds = load_source(&cfg)?;
            let states = load_states(&cfg, &cfg.output_dir)?;
            finish(&cfg, &evaluate_all(&cfg, &ds, &states)?)?;
        }
        Command::Run { cfg } => {
            let cfg = cfg.resolve()?;
            let ds = load_source(&cfg)?;
            let (_, states) = fit_all(&cfg, &ds)?;
            save_states(&states, &cfg.output_dir)?;
            finish(&cfg, &evaluate_all(&cfg, &ds, &states)?)?;
        }
        Command::Report { report, csv } => {
            let tables = render_tables(&ExperimentReport::load(&report)?)?;
            print!("{}", if csv { tables.csv } else { tables.text });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
