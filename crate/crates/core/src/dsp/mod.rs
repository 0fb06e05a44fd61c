//! The signal chain: envelope extraction, FIR design and filtering,
//! resampling, referencing, and normalization.

mod envelope;
mod fir;
mod gammatone;
mod linalg;
mod resample;
mod wav;

pub use envelope::{extract_envelope, COMPRESSION_EXPONENT};
pub use fir::{
    convolve, design_ls_fir, design_ls_fir_with, design_ls_lowpass, BandWeighting, FirFilter,
    BAND_FILTER_ORDER,
};
pub use gammatone::{erb_bandwidth, erb_rate, erb_rate_inv, erb_space, GammatoneBank};
pub use resample::{integer_factor, resample, ANTIALIAS_ORDER};
pub use wav::read_wav;

pub(crate) use linalg::{cholesky, logdet_from_chol};

use crate::model::{Band, BandSpec, EnvelopeSet, Recording};
use crate::{Error, Result, Scalar};
use ndarray::Array2;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Z-score with the population standard deviation. Errors on constant input.
pub fn zscore<F: Scalar>(x: &[F]) -> Result<Vec<F>> {
    if x.is_empty() {
        return Err(Error::SignalTooShort { len: 0, min: 1 });
    }
    let n = x.len() as f64;
    let mean = x.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let var = x.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::ConstantSignal);
    }
    let inv_sd = F::cast(1.0 / var.sqrt());
    let mean = F::cast(mean);
    Ok(x.iter().map(|&v| (v - mean) * inv_sd).collect())
}

/// Subtract the per-sample mean across channels from every channel.
pub fn average_reference<F: Scalar>(rec: &Recording<F>) -> Result<Recording<F>> {
    if rec.n_channels() < 2 {
        return Err(Error::InvalidRecording(
            "average reference needs at least 2 channels".into(),
        ));
    }
    let mut samples = rec.samples.clone();
    let scale = 1.0 / rec.n_channels() as f64;
    for mut row in samples.rows_mut() {
        let mean = F::cast(row.iter().map(|v| v.as_f64()).sum::<f64>() * scale);
        row.mapv_inplace(|v| v - mean);
    }
    Recording::new(samples, rec.fs, rec.channel_names.clone(), rec.kind)
}

/// Filter a broadband envelope into the analysis bands, normalize, and
/// decimate to the analysis rate.
///
/// Order per band: band filter at the envelope rate, z-score, decimate,
/// z-score again (decimation removes a sliver of out-of-band variance, so
/// the final normalization re-establishes unit variance exactly).
pub fn band_envelopes<F: Scalar>(
    env: &[F],
    env_fs: f64,
    bands: &[BandSpec],
    analysis_fs: f64,
) -> Result<EnvelopeSet<F>> {
    let series: Vec<(Band, Vec<F>)> = bands
        .par_iter()
        .map(|spec| {
            let filt = design_ls_fir::<F>(spec, env_fs)?;
            let filtered = filt.apply_compensated(env)?;
            let normalized = zscore(&filtered)?;
            let decimated = resample(&normalized, env_fs, analysis_fs)?;
            Ok((spec.name, zscore(&decimated)?))
        })
        .collect::<Result<_>>()?;
    EnvelopeSet::new(analysis_fs, series.into_iter().collect())
}

/// The EEG chain: decimate to the filter rate, average reference, band
/// filter, per-channel z-score, decimate to the analysis rate, re-normalize.
///
/// `filter_fs` is where the band filters run (512 Hz in the pipeline);
/// recordings already at or below it are filtered at their own rate.
pub fn preprocess_eeg<F: Scalar>(
    rec: &Recording<F>,
    bands: &[BandSpec],
    filter_fs: f64,
    analysis_fs: f64,
) -> Result<BTreeMap<Band, Recording<F>>> {
    let work_fs = filter_fs.min(rec.fs);
    let channels: Vec<Vec<F>> = if (rec.fs - work_fs).abs() > 1e-9 {
        (0..rec.n_channels())
            .into_par_iter()
            .map(|c| resample(&rec.channel(c), rec.fs, work_fs))
            .collect::<Result<_>>()?
    } else {
        (0..rec.n_channels()).map(|c| rec.channel(c)).collect()
    };
    let n = channels[0].len();
    let mut at_work = Array2::zeros((n, channels.len()));
    for (c, col) in channels.iter().enumerate() {
        for (t, &v) in col.iter().enumerate() {
            at_work[(t, c)] = v;
        }
    }
    let referenced = average_reference(&Recording::new(
        at_work,
        work_fs,
        rec.channel_names.clone(),
        rec.kind,
    )?)?;

    let mut out = BTreeMap::new();
    for spec in bands {
        let filt = design_ls_fir::<F>(spec, work_fs)?;
        let processed: Vec<Vec<F>> = (0..referenced.n_channels())
            .into_par_iter()
            .map(|c| {
                let filtered = filt.apply_compensated(&referenced.channel(c))?;
                let normalized = zscore(&filtered)?;
                let decimated = resample(&normalized, work_fs, analysis_fs)?;
                zscore(&decimated)
            })
            .collect::<Result<_>>()?;
        let rows = processed[0].len();
        let mut data = Array2::zeros((rows, processed.len()));
        for (c, col) in processed.iter().enumerate() {
            for (t, &v) in col.iter().enumerate() {
                data[(t, c)] = v;
            }
        }
        out.insert(
            spec.name,
            Recording::new(data, analysis_fs, rec.channel_names.clone(), rec.kind)?,
        );
    }
    Ok(out)
}
