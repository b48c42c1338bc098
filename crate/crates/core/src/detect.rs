//! Window scoring, threshold calibration, majority vote and metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean of `(input - output)²` over every element.
pub fn window_error(input: &Tensor, output: &Tensor) -> Result<f64> {
    if input.shape() != output.shape() {
        return Err(Error::shape(format!(
            "window error between {:?} and {:?}",
            input.shape(),
            output.shape()
        )));
    }
    if input.is_empty() {
        return Err(Error::shape("window error of an empty window"));
    }
    let sum: f64 = input
        .as_slice()
        .iter()
        .zip(output.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / input.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub mean: f64,
    /// Population standard deviation (divisor N).
    pub std: f64,
    pub calibration_count: usize,
}

/// `mean + std` of healthy held-out errors.
pub fn calibrate_threshold(errors: &[f64]) -> Result<Threshold> {
    if errors.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 calibration errors, got {}",
            errors.len()
        )));
    }
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::Calibration(format!(
            "calibration error {bad} is not finite and non-negative"
        )));
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(Threshold {
        value: mean + std,
        mean,
        std,
        calibration_count: errors.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub sample_id: u64,
    pub window_errors: Vec<f64>,
    pub sample_score: f64,
    pub votes_anomalous: usize,
    pub is_flagged: bool,
}

impl AnomalyScore {
    /// Unclassified score; call [`classify`] or [`AnomalyScore::decide`].
    pub fn new(sample_id: u64, window_errors: Vec<f64>) -> Self {
        let sample_score = if window_errors.is_empty() {
            0.0
        } else {
            window_errors.iter().sum::<f64>() / window_errors.len() as f64
        };
        Self {
            sample_id,
            window_errors,
            sample_score,
            votes_anomalous: 0,
            is_flagged: false,
        }
    }

    /// Fills in the votes and the flag against `th`.
    pub fn decide(&mut self, th: &Threshold) -> bool {
        self.votes_anomalous = votes(&self.window_errors, th.value);
        self.is_flagged = classify(self, th);
        self.is_flagged
    }
}

/// Windows strictly above `threshold`.
pub fn votes(window_errors: &[f64], threshold: f64) -> usize {
    window_errors.iter().filter(|&&e| e > threshold).count()
}

/// Majority vote; half or more of the windows above the threshold flags
/// the sample.
pub fn classify(score: &AnomalyScore, th: &Threshold) -> bool {
    let v = votes(&score.window_errors, th.value);
    !score.window_errors.is_empty() && v * 2 >= score.window_errors.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

/// Anomalous is the positive class.
pub fn evaluate(predicted: &[bool], truth: &[bool]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::shape("cannot evaluate an empty prediction set"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn th(value: f64) -> Threshold {
        Threshold {
            value,
            mean: value,
            std: 0.0,
            calibration_count: 2,
        }
    }

    #[test]
    fn window_error_cases() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::filled(2, 2, 1.0);
        assert_eq!(window_error(&a, &b).unwrap(), 3.5);
        assert_eq!(window_error(&a, &a).unwrap(), 0.0);
        assert_eq!(window_error(&Tensor::filled(3, 5, 1.0), &Tensor::zeros(3, 5)).unwrap(), 1.0);
        assert!(window_error(&a, &Tensor::zeros(1, 4)).is_err());
    }

    #[test]
    fn threshold_cases() {
        let t = calibrate_threshold(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.mean, 2.0);
        assert_eq!(t.std, (2.0f64 / 3.0).sqrt());
        assert_eq!(t.value, 2.0 + (2.0f64 / 3.0).sqrt());
        assert_eq!(calibrate_threshold(&[0.25; 7]).unwrap().value, 0.25);
        assert!(matches!(calibrate_threshold(&[1.0]), Err(Error::Calibration(_))));
        assert!(calibrate_threshold(&[1.0, f64::NAN]).is_err());
        assert!(calibrate_threshold(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn vote_cases() {
        let score = |above: usize| {
            let e = (0..16).map(|i| if i < above { 2.0 } else { 0.5 }).collect();
            AnomalyScore::new(0, e)
        };
        assert!(classify(&score(9), &th(1.0)));
        assert!(classify(&score(8), &th(1.0)));
        assert!(!classify(&score(7), &th(1.0)));
        assert!(!classify(&score(0), &th(1.0)));
        // strict comparison
        assert!(!classify(&AnomalyScore::new(0, vec![1.0; 4]), &th(1.0)));
        let mut s = score(8);
        assert!(s.decide(&th(1.0)));
        assert_eq!(s.votes_anomalous, 8);
    }

    #[test]
    fn metric_cases() {
        let m = Metrics::from_counts(3, 1, 4, 2);
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-15);
        let all = evaluate(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!((all.accuracy, all.precision, all.recall, all.f1), (1.0, 1.0, 1.0, 1.0));
        let none = evaluate(&[false, false], &[true, false]).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        assert!(evaluate(&[true], &[]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }

    #[test]
    fn gaussian_healthy_vote_rate_is_below_half() {
        let mut rng = crate::rng::SplitMix64::new(17);
        for _ in 0..20 {
            let errors: Vec<f64> = (0..2000).map(|_| (1.0 + 0.2 * rng.normal()).abs()).collect();
            let t = calibrate_threshold(&errors[..1000]).unwrap();
            let flagged = errors[1000..]
                .chunks(16)
                .filter(|c| classify(&AnomalyScore::new(0, c.to_vec()), &t))
                .count();
            let windows = votes(&errors[1000..], t.value) as f64 / 1000.0;
            assert!(windows < 0.5);
            assert!((flagged as f64) < 0.5 * (1000 / 16 + 1) as f64);
        }
    }

    proptest! {
        #[test]
        fn votes_are_monotone_in_threshold(
            errors in prop::collection::vec(0.0f64..10.0, 1..40),
            a in 0.0f64..10.0,
            b in 0.0f64..10.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(votes(&errors, hi) <= votes(&errors, lo));
            let s = AnomalyScore::new(0, errors);
            prop_assert!(classify(&s, &th(lo)) || !classify(&s, &th(hi)));
        }

        #[test]
        fn classify_ignores_window_order(
            mut errors in prop::collection::vec(0.0f64..4.0, 1..32),
            t in 0.0f64..4.0,
            seed in any::<u64>(),
        ) {
            let before = classify(&AnomalyScore::new(0, errors.clone()), &th(t));
            crate::rng::SplitMix64::new(seed).shuffle(&mut errors);
            prop_assert_eq!(before, classify(&AnomalyScore::new(0, errors), &th(t)));
        }
    }
}
