//! Domain types, validation, manifest, and matrix I/O shared by all modules.

mod layout;
mod manifest;
mod matio;

pub use layout::{builtin_biosemi64, default_channel_selection, ChannelLayout};
pub use manifest::{CohortManifest, ManifestSubject};
pub use matio::{read_matrix, write_matrix};

use crate::{Error, Result, Scalar};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// What a [`Recording`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordingKind {
    Eeg,
    Audio,
}

/// A multichannel time series (EEG or audio) with sampling metadata.
///
/// Samples are stored sample-major (`time × channels`). Immutable after
/// construction; safe to share across parallel workers.
#[derive(Debug, Clone)]
pub struct Recording<F> {
    pub samples: Array2<F>,
    pub fs: f64,
    pub channel_names: Vec<String>,
    pub kind: RecordingKind,
}

impl<F: Scalar> Recording<F> {
    pub fn new(
        samples: Array2<F>,
        fs: f64,
        channel_names: Vec<String>,
        kind: RecordingKind,
    ) -> Result<Self> {
        if fs.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidRecording(format!("fs must be > 0, got {fs}")));
        }
        if samples.ncols() != channel_names.len() {
            return Err(Error::InvalidRecording(format!(
                "{} channels but {} names",
                samples.ncols(),
                channel_names.len()
            )));
        }
        if kind == RecordingKind::Audio && samples.ncols() != 1 {
            return Err(Error::InvalidRecording(format!(
                "audio must be mono, got {} channels",
                samples.ncols()
            )));
        }
        Ok(Self {
            samples,
            fs,
            channel_names,
            kind,
        })
    }

    /// Mono convenience constructor.
    pub fn mono(samples: Vec<F>, fs: f64, name: &str, kind: RecordingKind) -> Result<Self> {
        let n = samples.len();
        let arr = Array2::from_shape_vec((n, 1), samples).expect("shape matches");
        Self::new(arr, fs, vec![name.to_string()], kind)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.samples.ncols()
    }

    /// Contiguous copy of one channel.
    pub fn channel(&self, idx: usize) -> Vec<F> {
        self.samples.column(idx).to_vec()
    }

    pub fn channel_index(&self, name: &str) -> Result<usize> {
        self.channel_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn duration_min(&self) -> f64 {
        self.n_samples() as f64 / self.fs / 60.0
    }
}

/// One issue found by [`validate_recording`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    /// NaN or infinite samples on a channel.
    NonFinite { channel: String, count: usize },
    /// Channel with exactly zero standard deviation.
    FlatChannel { channel: String },
    /// Sampling rate differs from the manifest.
    FsMismatch { expected: f64, actual: f64 },
}

/// Report-only validation result; never fails.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Check a recording for NaN/Inf samples, flat channels, and (optionally) a
/// sampling-rate mismatch against the manifest. Warnings only — channels are
/// never dropped.
pub fn validate_recording<F: Scalar>(
    rec: &Recording<F>,
    expected_fs: Option<f64>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Some(expected) = expected_fs {
        if (expected - rec.fs).abs() > 1e-9 {
            report.issues.push(ValidationIssue::FsMismatch {
                expected,
                actual: rec.fs,
            });
        }
    }
    for (c, name) in rec.channel_names.iter().enumerate() {
        let col = rec.samples.column(c);
        let bad = col.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            report.issues.push(ValidationIssue::NonFinite {
                channel: name.clone(),
                count: bad,
            });
            continue;
        }
        let n = col.len() as f64;
        if n > 0.0 {
            let m = col.iter().map(|v| v.as_f64()).sum::<f64>() / n;
            let var = col.iter().map(|v| (v.as_f64() - m).powi(2)).sum::<f64>() / n;
            if var == 0.0 {
                report.issues.push(ValidationIssue::FlatChannel {
                    channel: name.clone(),
                });
            }
        }
    }
    report
}

/// The analysis frequency bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    Broad,
}

impl Band {
    /// All six bands, broad last.
    pub const ALL: [Band; 6] = [
        Band::Delta,
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::Gamma,
        Band::Broad,
    ];

    /// The five narrow bands used as classifier features.
    pub const NARROW: [Band; 5] = [
        Band::Delta,
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
            Band::Broad => "broad",
        }
    }

    /// Canonical band edges in Hz.
    pub fn canonical(self) -> BandSpec {
        let (lo, hi) = match self {
            Band::Delta => (0.5, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 12.0),
            Band::Beta => (12.0, 30.0),
            Band::Gamma => (30.0, 49.0),
            Band::Broad => (0.5, 49.0),
        };
        BandSpec {
            name: self,
            lo_hz: lo,
            hi_hz: hi,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Band {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Band::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Manifest(format!("unknown band name {s:?}")))
    }
}

/// A frequency band with its passband edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: Band,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandSpec {
    pub fn new(name: Band, lo_hz: f64, hi_hz: f64) -> Result<Self> {
        if lo_hz.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidBand {
                lo_hz,
                hi_hz,
                reason: "lo must be > 0",
            });
        }
        if hi_hz.partial_cmp(&lo_hz) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidBand {
                lo_hz,
                hi_hz,
                reason: "hi must be > lo",
            });
        }
        Ok(Self { name, lo_hz, hi_hz })
    }

    pub fn width_hz(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }
}

/// Per-band normalized envelopes at the analysis rate.
#[derive(Debug, Clone)]
pub struct EnvelopeSet<F> {
    pub fs: f64,
    pub bands: BTreeMap<Band, Vec<F>>,
}

impl<F: Scalar> EnvelopeSet<F> {
    pub fn new(fs: f64, bands: BTreeMap<Band, Vec<F>>) -> Result<Self> {
        let set = Self { fs, bands };
        set.check()?;
        Ok(set)
    }

    /// Every band series has identical length; z-scored within 1e-9.
    pub fn check(&self) -> Result<()> {
        let mut len = None;
        for (band, series) in &self.bands {
            match len {
                None => len = Some(series.len()),
                Some(l) if l != series.len() => {
                    return Err(Error::InvalidRecording(format!(
                        "band {band} has {} samples, expected {l}",
                        series.len()
                    )))
                }
                _ => {}
            }
            let xs: Vec<f64> = series.iter().map(|v| v.as_f64()).collect();
            let m = crate::stats::mean(&xs);
            let sd = crate::stats::pop_var(&xs).sqrt();
            if m.abs() >= 1e-9 || (sd - 1.0).abs() >= 1e-9 {
                return Err(Error::InvalidRecording(format!(
                    "band {band} envelope is not z-scored (mean {m:.2e}, std {sd})"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, band: Band) -> Result<&[F]> {
        self.bands
            .get(&band)
            .map(|v| v.as_slice())
            .ok_or(Error::MissingBand {
                id: "envelope".into(),
                band,
            })
    }
}

/// Integer lag grid over a time window.
///
/// Lags are contiguous sample offsets covering `[t_min, t_max]`, endpoints
/// rounded outward. Positive lag means the EEG *follows* the stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagGrid {
    pub fs: f64,
    pub t_min_ms: f64,
    pub t_max_ms: f64,
    lag_min: i64,
    lag_max: i64,
}

impl LagGrid {
    pub fn new(fs: f64, t_min_ms: f64, t_max_ms: f64) -> Result<Self> {
        if fs.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || t_min_ms >= t_max_ms {
            return Err(Error::InvalidRecording(format!(
                "invalid lag grid: fs={fs}, window [{t_min_ms}, {t_max_ms}] ms"
            )));
        }
        // outward rounding with a tiny guard so exact sample boundaries stay put
        let lag_min = (t_min_ms / 1000.0 * fs + 1e-9).floor() as i64;
        let lag_max = (t_max_ms / 1000.0 * fs - 1e-9).ceil() as i64;
        Ok(Self {
            fs,
            t_min_ms,
            t_max_ms,
            lag_min,
            lag_max,
        })
    }

    /// −200..500 ms at 128 Hz: lags −26..64, 91 points.
    pub fn default_128() -> Self {
        Self::new(128.0, -200.0, 500.0).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        (self.lag_max - self.lag_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lag_min(&self) -> i64 {
        self.lag_min
    }

    pub fn lag_max(&self) -> i64 {
        self.lag_max
    }

    pub fn lags(&self) -> impl Iterator<Item = i64> + '_ {
        self.lag_min..=self.lag_max
    }

    /// Lag time in milliseconds.
    pub fn time_ms(&self, lag: i64) -> f64 {
        lag as f64 / self.fs * 1000.0
    }

    pub fn times_ms(&self) -> Vec<f64> {
        self.lags().map(|l| self.time_ms(l)).collect()
    }

    /// Largest absolute lag, used for overlap checks.
    pub fn max_abs_lag(&self) -> usize {
        self.lag_min.unsigned_abs().max(self.lag_max.unsigned_abs()) as usize
    }
}

/// Mutual information as a function of lag — one multivariate curve, in bits.
#[derive(Debug, Clone, PartialEq)]
pub struct Tmif<F> {
    pub grid: LagGrid,
    pub values: Vec<F>,
}

impl<F: Scalar> Tmif<F> {
    pub fn new(grid: LagGrid, values: Vec<F>) -> Self {
        assert_eq!(grid.len(), values.len(), "one value per lag");
        Self { grid, values }
    }

    /// Lag (in samples) of the maximum value.
    pub fn argmax_lag(&self) -> i64 {
        let mut best = (self.grid.lag_min(), F::neg_infinity());
        for (lag, &v) in self.grid.lags().zip(&self.values) {
            if v > best.1 {
                best = (lag, v);
            }
        }
        best.0
    }

    pub fn max_value(&self) -> F {
        self.values.iter().copied().fold(F::neg_infinity(), F::max)
    }

    /// Write as CSV (`lag_ms,value`).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lag_ms,value")?;
        for (lag, v) in self.grid.lags().zip(&self.values) {
            writeln!(w, "{},{}", self.grid.time_ms(lag), v)?;
        }
        Ok(())
    }
}

/// Per-channel TMIF curves from the single-channel analysis
/// (`channels × lags`, in bits).
#[derive(Debug, Clone)]
pub struct TmifMatrix<F> {
    pub grid: LagGrid,
    pub channel_names: Vec<String>,
    pub values: Array2<F>,
}

impl<F: Scalar> TmifMatrix<F> {
    /// One channel's curve as a [`Tmif`].
    pub fn channel(&self, idx: usize) -> Tmif<F> {
        Tmif::new(self.grid.clone(), self.values.row(idx).to_vec())
    }

    /// Write as CSV (`lag_ms,<chan1>,<chan2>,...`).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        write!(w, "lag_ms")?;
        for name in &self.channel_names {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (j, lag) in self.grid.lags().enumerate() {
            write!(w, "{}", self.grid.time_ms(lag))?;
            for c in 0..self.values.nrows() {
                write!(w, ",{}", self.values[(c, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Cohort group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Aphasia,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Control => "control",
            Group::Aphasia => "aphasia",
        })
    }
}

/// A participant with their per-band multivariate TMIFs.
#[derive(Debug, Clone)]
pub struct Subject<F> {
    pub id: String,
    pub group: Group,
    pub age: f64,
    pub tmifs: BTreeMap<Band, Tmif<F>>,
}

impl<F: Scalar> Subject<F> {
    pub fn new(id: impl Into<String>, group: Group, age: f64) -> Result<Self> {
        let id = id.into();
        if age.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::InvalidRecording(format!(
                "subject {id}: age must be > 0"
            )));
        }
        Ok(Self {
            id,
            group,
            age,
            tmifs: BTreeMap::new(),
        })
    }

    pub fn tmif(&self, band: Band) -> Result<&Tmif<F>> {
        self.tmifs.get(&band).ok_or(Error::MissingBand {
            id: self.id.clone(),
            band,
        })
    }
}
