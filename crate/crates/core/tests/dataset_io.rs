use std::io::Write;

use iiot_anomaly::dataset::{
    generate_synthetic, load_dataset, parse_dataset, save_dataset, split, GeneratorConfig,
    Provenance, SensorSample, SplitSpec, SAMPLE_LEN,
};
use iiot_anomaly::Error;
use proptest::prelude::*;

fn small(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_samples_per_condition: 4,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn save_then_load_is_identity() {
    let ds = generate_synthetic(&small(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.provenance, Provenance::Synthetic);
    assert_eq!(back.generator_seed, Some(3));
}

#[test]
fn file_of_recorded_shape_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pump.jsonl");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    for i in 0..3041u64 {
        let wave = |k: usize| -> Vec<f64> { (0..SAMPLE_LEN).map(|t| ((t + k + i as usize) % 9) as f64).collect() };
        let sample = SensorSample {
            sample_id: i,
            timestamp: 1_600_000_000 + 60 * i as i64,
            audio: wave(0),
            vib_x: wave(1),
            vib_y: wave(2),
            vib_z: wave(3),
            temperature: 40.0,
            operating_freq_hz: [100, 150][i as usize % 2],
            is_anomaly: i % 3 == 0,
            rotation_tag: false,
            tube_id: 1,
        };
        serde_json::to_writer(&mut out, &sample).unwrap();
        out.write_all(b"\n").unwrap();
    }
    drop(out);
    let ds = load_dataset(&path).unwrap();
    assert_eq!(ds.len(), 3041);
    assert_eq!(ds.provenance, Provenance::File);
    assert_eq!(ds.samples[3040].vib_z[0], ((3 + 3040) % 9) as f64);
}

#[test]
fn malformed_lines_name_their_line_number() {
    let ds = generate_synthetic(&small(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    save_dataset(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();

    let mut short = lines.clone();
    let mut s: SensorSample = serde_json::from_str(&short[2]).unwrap();
    s.audio.pop();
    short[2] = serde_json::to_string(&s).unwrap();
    match parse_dataset(&short.join("\n")) {
        Err(Error::Parse { line: 3, message }) => assert!(message.contains(&s.sample_id.to_string())),
        other => panic!("{other:?}"),
    }

    lines[4] = lines[4].replacen('{', "{\"extra\": 1, ", 1);
    assert!(matches!(parse_dataset(&lines.join("\n")), Err(Error::Parse { line: 5, .. })));
    assert!(matches!(parse_dataset("{not json"), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn stratified_split_counts() {
    let cfg = GeneratorConfig {
        n_samples_per_condition: 100,
        ..GeneratorConfig::default()
    };
    let ds = generate_synthetic(&cfg).unwrap();
    let sp = split(&ds, &SplitSpec::default(), 4).unwrap();
    for freq in [50, 100, 150, 200, 250] {
        let count = |d: &iiot_anomaly::dataset::Dataset| {
            d.samples.iter().filter(|s| s.operating_freq_hz == freq && !s.is_anomaly).count()
        };
        assert_eq!((count(&sp.train), count(&sp.threshold), count(&sp.eval)), (30, 10, 10));
    }
    assert_eq!(sp.eval.anomaly_count(), 250);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn anomalies_never_reach_train_or_threshold(seed in any::<u64>(), split_seed in any::<u64>(), frac in 0.0f64..0.8) {
        let cfg = GeneratorConfig { anomaly_fraction: frac, n_samples_per_condition: 20, ..small(seed) };
        let ds = generate_synthetic(&cfg).unwrap();
        let sp = split(&ds, &SplitSpec::default(), split_seed).unwrap();
        prop_assert_eq!(sp.train.anomaly_count() + sp.threshold.anomaly_count(), 0);
        prop_assert_eq!(sp.train.len() + sp.threshold.len() + sp.eval.len(), ds.len());
        prop_assert_eq!(sp.eval.anomaly_count(), ds.anomaly_count());
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>()) {
        prop_assert_eq!(generate_synthetic(&small(seed)).unwrap(), generate_synthetic(&small(seed)).unwrap());
    }
}
