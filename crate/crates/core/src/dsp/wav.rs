//! Mono WAV ingestion (PCM16 and IEEE float32).

use crate::model::{Recording, RecordingKind};
use crate::{Error, Result, Scalar};
use std::path::Path;

/// Read a mono WAV file as an audio recording. PCM16 samples are scaled to
/// `[-1, 1)`; float32 samples are taken as-is.
pub fn read_wav<F: Scalar>(path: impl AsRef<Path>) -> Result<Recording<F>> {
    let mut reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidRecording(format!(
            "expected mono WAV, got {} channels",
            spec.channels
        )));
    }
    let samples: Vec<F> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| F::cast(v as f64 / 32768.0)).map_err(Error::from))
            .collect::<Result<_>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| F::cast(v as f64)).map_err(Error::from))
            .collect::<Result<_>>()?,
        (format, bits) => {
            return Err(Error::InvalidRecording(format!(
                "unsupported WAV encoding: {format:?} {bits}-bit (use PCM16 or float32)"
            )))
        }
    };
    Recording::mono(
        samples,
        spec.sample_rate as f64,
        "audio",
        RecordingKind::Audio,
    )
}
