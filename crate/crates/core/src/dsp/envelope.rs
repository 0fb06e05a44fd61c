//! Speech envelope extraction.

use super::gammatone::GammatoneBank;
use super::resample::resample;
use crate::model::{Recording, RecordingKind};
use crate::{Error, Result, Scalar};
use rayon::prelude::*;

/// Compression exponent applied to each sub-band magnitude.
pub const COMPRESSION_EXPONENT: f64 = 0.6;

/// Extract the broadband speech envelope from mono audio.
///
/// Each gammatone sub-band contributes `|analytic sample|^0.6`; sub-bands
/// are averaged and the result is decimated to `env_fs` (512 Hz in the
/// pipeline). Deterministic: identical audio gives identical output.
pub fn extract_envelope<F: Scalar>(
    audio: &Recording<F>,
    bank: &GammatoneBank,
    env_fs: f64,
) -> Result<Vec<F>> {
    if audio.kind != RecordingKind::Audio {
        return Err(Error::InvalidRecording(
            "envelope extraction needs audio".into(),
        ));
    }
    if audio.fs < 10_000.0 {
        return Err(Error::FsMismatch {
            expected: 10_000.0,
            actual: audio.fs,
        });
    }
    if (audio.fs - bank.fs).abs() > 1e-9 {
        return Err(Error::FsMismatch {
            expected: bank.fs,
            actual: audio.fs,
        });
    }
    let x = audio.channel(0);
    if x.is_empty() {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }

    let exponent = F::cast(COMPRESSION_EXPONENT);
    let subbands: Vec<Vec<F>> = bank
        .center_freqs
        .par_iter()
        .map(|&fc| {
            bank.subband_envelope(&x, fc)
                .into_iter()
                .map(|m| m.powf(exponent))
                .collect()
        })
        .collect();

    // average across sub-bands in fixed channel order
    let scale = F::cast(1.0 / bank.n_channels() as f64);
    let mut avg = vec![F::zero(); x.len()];
    for sub in &subbands {
        for (a, &s) in avg.iter_mut().zip(sub) {
            *a += s;
        }
    }
    for a in avg.iter_mut() {
        *a *= scale;
    }

    resample(&avg, audio.fs, env_fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Recording;

    const FS: f64 = 16384.0;

    fn audio(samples: Vec<f64>) -> Recording<f64> {
        Recording::mono(samples, FS, "audio", RecordingKind::Audio).unwrap()
    }

    #[test]
    fn silence_gives_zero_envelope() {
        let bank = GammatoneBank::new(FS).unwrap();
        let env = extract_envelope(&audio(vec![0.0; 16384]), &bank, 512.0).unwrap();
        assert_eq!(env.len(), 512);
        assert!(env.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn steady_tone_gives_flat_envelope() {
        let bank = GammatoneBank::new(FS).unwrap();
        let n = 2 * 16384;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * 1000.0 * t as f64 / FS).sin())
            .collect();
        let env = extract_envelope(&audio(x), &bank, 512.0).unwrap();
        // skip the first 50 ms transient (and the symmetric tail edge)
        let skip = (0.05 * 512.0) as usize;
        let body = &env[skip..env.len() - skip];
        let mean = body.iter().sum::<f64>() / body.len() as f64;
        let var = body.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / body.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.05, "coefficient of variation {cv}");
    }

    #[test]
    fn am_tone_envelope_peaks_at_modulation_rate() {
        let bank = GammatoneBank::new(FS).unwrap();
        let n = 4 * 16384;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let time = t as f64 / FS;
                let carrier = (2.0 * std::f64::consts::PI * 1000.0 * time).sin();
                let modulation = 1.0 + (2.0 * std::f64::consts::PI * 4.0 * time).sin();
                modulation * carrier
            })
            .collect();
        let env = extract_envelope(&audio(x), &bank, 512.0).unwrap();
        // FFT of the demeaned envelope: strongest line at 4 Hz
        let m = env.len();
        let mean = env.iter().sum::<f64>() / m as f64;
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = env
            .iter()
            .map(|&v| rustfft::num_complex::Complex::new(v - mean, 0.0))
            .collect();
        rustfft::FftPlanner::new()
            .plan_fft_forward(m)
            .process(&mut buf);
        let peak_bin = (1..m / 2)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap();
        let peak_hz = peak_bin as f64 * 512.0 / m as f64;
        assert!((peak_hz - 4.0).abs() < 0.3, "peak at {peak_hz} Hz");
    }

    #[test]
    fn chain_is_deterministic() {
        let bank = GammatoneBank::new(FS).unwrap();
        let x: Vec<f64> = (0..16384)
            .map(|t| {
                (2.0 * std::f64::consts::PI * 700.0 * t as f64 / FS).sin()
                    * (1.0 + (2.0 * std::f64::consts::PI * 3.0 * t as f64 / FS).sin())
            })
            .collect();
        let a = extract_envelope(&audio(x.clone()), &bank, 512.0).unwrap();
        let b = extract_envelope(&audio(x), &bank, 512.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_eeg_and_low_rate_input() {
        let bank = GammatoneBank::new(FS).unwrap();
        let eeg = Recording::mono(vec![0.0; 100], FS, "ch", RecordingKind::Eeg).unwrap();
        assert!(extract_envelope(&eeg, &bank, 512.0).is_err());
        let low = Recording::mono(vec![0.0; 100], 8192.0, "a", RecordingKind::Audio).unwrap();
        assert!(extract_envelope(&low, &bank, 512.0).is_err());
    }
}
