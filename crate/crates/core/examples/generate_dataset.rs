//! Generates a synthetic pump dataset, writes it as JSON Lines and reads it
//! back.
//!
//! cargo run --release --example generate_dataset -- [out.jsonl]

use std::collections::BTreeMap;

use iiot_anomaly::dataset::{generate_synthetic, load_dataset, save_dataset, GeneratorConfig};

fn main() -> iiot_anomaly::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "dataset.jsonl".into());
    let cfg = GeneratorConfig {
        n_samples_per_condition: 20,
        seed: 42,
        ..GeneratorConfig::default()
    };
    let ds = generate_synthetic(&cfg)?;
    save_dataset(&ds, &path)?;
    let back = load_dataset(&path)?;
    assert_eq!(back, ds);

    let mut per_condition: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for s in &back.samples {
        let e = per_condition.entry(s.operating_freq_hz).or_default();
        if s.is_anomaly {
            e.1 += 1;
        } else {
            e.0 += 1;
        }
    }
    println!("{} samples written to {path}", back.len());
    for (hz, (healthy, anomalous)) in per_condition {
        println!("{hz:>4} Hz  healthy {healthy:>3}  anomalous {anomalous:>3}");
    }
    Ok(())
}
