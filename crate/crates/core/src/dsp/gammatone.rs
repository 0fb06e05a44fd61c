//! Gammatone filterbank on the ERB-rate scale.

use crate::{Error, Result, Scalar};
use rustfft::num_complex::Complex;

/// ERB-rate scale (Glasberg & Moore): `21.4·log10(4.37e-3·f + 1)`.
pub fn erb_rate(f_hz: f64) -> f64 {
    21.4 * (4.37e-3 * f_hz + 1.0).log10()
}

/// Inverse of [`erb_rate`].
pub fn erb_rate_inv(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) / 4.37e-3
}

/// Equivalent rectangular bandwidth at a center frequency, in Hz.
pub fn erb_bandwidth(f_hz: f64) -> f64 {
    24.7 * (4.37e-3 * f_hz + 1.0)
}

/// `n` center frequencies from `lo_hz` to `hi_hz`, equally spaced on the
/// ERB-rate scale (endpoints included).
pub fn erb_space(lo_hz: f64, hi_hz: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::TooFewSamples { len: n, min: 2 });
    }
    if !(lo_hz > 0.0 && lo_hz < hi_hz) {
        return Err(Error::InvalidBand {
            lo_hz,
            hi_hz,
            reason: "need 0 < lo < hi",
        });
    }
    let (r_lo, r_hi) = (erb_rate(lo_hz), erb_rate(hi_hz));
    Ok((0..n)
        .map(|i| erb_rate_inv(r_lo + (r_hi - r_lo) * i as f64 / (n - 1) as f64))
        .collect())
}

/// A 4th-order all-pole gammatone filterbank.
///
/// Each channel is a cascade of four identical complex one-pole sections
/// with pole radius `exp(-2π·1.019·ERB(fc)/fs)`, normalized to unity gain at
/// the center frequency. The magnitude of the complex output is the
/// sub-band envelope.
#[derive(Debug, Clone)]
pub struct GammatoneBank {
    pub fs: f64,
    pub center_freqs: Vec<f64>,
}

impl GammatoneBank {
    /// The analysis bank: 28 channels, one ERB apart, 50 Hz to 5 kHz.
    pub fn new(fs: f64) -> Result<Self> {
        Self::with_params(fs, 50.0, 5000.0, 28)
    }

    pub fn with_params(fs: f64, lo_hz: f64, hi_hz: f64, n_channels: usize) -> Result<Self> {
        if hi_hz >= fs / 2.0 {
            return Err(Error::NyquistViolation {
                edge_hz: hi_hz,
                nyquist_hz: fs / 2.0,
            });
        }
        Ok(Self {
            fs,
            center_freqs: erb_space(lo_hz, hi_hz, n_channels)?,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.center_freqs.len()
    }

    /// Magnitude envelope of one sub-band (cascade of 4 complex one-poles,
    /// `|output|` per sample).
    pub fn subband_envelope<F: Scalar>(&self, x: &[F], fc: f64) -> Vec<F> {
        let theta = 2.0 * std::f64::consts::PI * fc / self.fs;
        let r = (-2.0 * std::f64::consts::PI * 1.019 * erb_bandwidth(fc) / self.fs).exp();
        let pole = Complex::new(F::cast(r * theta.cos()), F::cast(r * theta.sin()));
        // per-stage gain: |1 - r e^{jθ} e^{-jθ}| = 1 - r gives unity at fc
        let gain = F::cast(1.0 - r);

        let zero = Complex::new(F::zero(), F::zero());
        let mut state = [zero; 4];
        let mut out = Vec::with_capacity(x.len());
        for &xi in x {
            let mut v = Complex::new(gain * xi, F::zero());
            for s in state.iter_mut() {
                v += pole * *s;
                *s = v;
                v *= gain;
            }
            // the last stage multiplied one gain too many
            v /= gain;
            out.push((v.re * v.re + v.im * v.im).sqrt());
        }
        out
    }
}
