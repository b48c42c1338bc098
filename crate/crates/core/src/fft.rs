//! Iterative in-place radix-2 decimation-in-time FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Forward transform `X[k] = Σ_j x[j]·e^(−2πi·jk/N)`, unscaled.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    let n = buf.len();
    if !n.is_power_of_two() {
        return Err(Error::shape(format!("fft length {n} is not a power of two")));
    }
    if n <= 1 {
        return Ok(());
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    // Twiddles for the largest stage; smaller stages stride through them.
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    Ok(())
}

/// First `N/2` bins of `|FFT(series)| / N`.
pub fn fft_magnitude(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::shape(format!(
            "fft_magnitude needs a power-of-two length >= 2, got {n}"
        )));
    }
    let mut buf: Vec<Complex64> = series.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf)?;
    let scale = 1.0 / n as f64;
    Ok(buf[..n / 2].iter().map(|c| c.norm() * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn naive_dft_magnitude(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im).sqrt() / n as f64
            })
            .collect()
    }

    #[test]
    fn constant_is_dc_only() {
        let out = fft_magnitude(&[2.5; 1024]).unwrap();
        assert_eq!(out.len(), 512);
        assert!((out[0] - 2.5).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_tone_halves_amplitude() {
        let n = 1024;
        for k in [1usize, 37, 200, 511] {
            let a = 3.0;
            let x: Vec<f64> = (0..n)
                .map(|j| a * (2.0 * PI * (k * j) as f64 / n as f64).cos())
                .collect();
            let out = fft_magnitude(&x).unwrap();
            for (bin, v) in out.iter().enumerate() {
                let expected = if bin == k { a / 2.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-10, "k={k} bin={bin}: {v}");
            }
        }
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = SplitMix64::new(99);
        for n in [2usize, 4, 16, 256, 1024] {
            let x: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let fast = fft_magnitude(&x).unwrap();
            let slow = naive_dft_magnitude(&x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(fft_magnitude(&[0.0; 1000]), Err(Error::Shape(_))));
        assert!(fft_magnitude(&[1.0]).is_err());
    }
}
