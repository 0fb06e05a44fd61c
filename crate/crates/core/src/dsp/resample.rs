//! Integer-factor decimation with a compensated anti-alias lowpass.

use super::fir::design_ls_lowpass;
use crate::{Error, Result, Scalar};

/// Anti-alias filter order used when decimating.
pub const ANTIALIAS_ORDER: usize = 500;

/// Resample `x` from `fs_in` down to `fs_out`; `fs_in / fs_out` must be a
/// positive integer. A linear-phase lowpass with cutoff `0.9·fs_out/2` is
/// applied (delay-compensated) before every `factor`-th sample is kept, so
/// the output has `ceil(len / factor)` samples.
pub fn resample<F: Scalar>(x: &[F], fs_in: f64, fs_out: f64) -> Result<Vec<F>> {
    let factor = integer_factor(fs_in, fs_out)?;
    if factor == 1 {
        return Ok(x.to_vec());
    }
    let cutoff = 0.9 * fs_out / 2.0;
    let stop = fs_out / 2.0;
    let lp = design_ls_lowpass::<F>(cutoff, stop, fs_in, ANTIALIAS_ORDER)?;
    let filtered = lp.apply_compensated(x)?;
    Ok(filtered.into_iter().step_by(factor).collect())
}

/// The integer decimation factor, or an error if `fs_in/fs_out` is not a
/// positive integer.
pub fn integer_factor(fs_in: f64, fs_out: f64) -> Result<usize> {
    if !(fs_in > 0.0 && fs_out > 0.0 && fs_out <= fs_in) {
        return Err(Error::NonIntegerFactor { fs_in, fs_out });
    }
    let ratio = fs_in / fs_out;
    let factor = ratio.round();
    if (ratio - factor).abs() > 1e-9 || factor < 1.0 {
        return Err(Error::NonIntegerFactor { fs_in, fs_out });
    }
    Ok(factor as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn non_integer_factor_rejected() {
        assert!(resample(&vec![0.0f64; 4096], 44100.0, 512.0).is_err());
        assert!(resample(&vec![0.0f64; 4096], 128.0, 512.0).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let x = vec![2.5f64; 4096];
        let y = resample(&x, 512.0, 128.0).unwrap();
        assert_eq!(y.len(), 1024);
        for &v in &y[128..y.len() - 128] {
            assert_abs_diff_eq!(v, 2.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn output_length_is_ceil() {
        let y = resample(&vec![0.0f64; 1001], 512.0, 128.0).unwrap();
        assert_eq!(y.len(), 251); // ceil(1001/4)
    }

    #[test]
    fn in_band_sine_preserved() {
        let fs_in = 512.0;
        let n = 8192;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 10.0 * t as f64 / fs_in).sin())
            .collect();
        let y = resample(&x, fs_in, 128.0).unwrap();
        let mid = &y[y.len() / 4..3 * y.len() / 4];
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        let expected = (0.5f64).sqrt();
        assert!((rms / expected - 1.0).abs() < 0.01, "rms {rms}");
    }

    #[test]
    fn above_nyquist_sine_rejected() {
        let fs_in = 512.0;
        let n = 8192;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 70.0 * t as f64 / fs_in).sin())
            .collect();
        let y = resample(&x, fs_in, 128.0).unwrap();
        let mid = &y[y.len() / 4..3 * y.len() / 4];
        let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
        let input_rms = (0.5f64).sqrt();
        assert!(20.0 * (rms / input_rms).log10() <= -30.0, "rms {rms}");
    }
}
