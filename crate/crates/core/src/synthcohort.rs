//! Forward-model synthetic cohorts with known ground truth.
//!
//! The generator builds a shared per-band stimulus (band-limited
//! spectrum-shaped noise), convolves it with per-band response kernels, and
//! mixes the result into EEG channels through a fixed topography with
//! additive Gaussian sensor noise. The patient group's kernel amplitude is
//! scaled by a per-band effect factor, modelling reduced envelope tracking;
//! sensor noise is calibrated against the *unscaled* signal so the effect
//! changes tracking strength, not the noise floor.
//!
//! Every downstream analysis is validated against cohorts from this module:
//! the effect direction, the affected bands, and the expected detection
//! performance are all known by construction.

use crate::model::{
    Band, ChannelLayout, CohortManifest, EnvelopeSet, Group, ManifestSubject, Recording,
    RecordingKind,
};
use crate::{derive_seed, Error, Result, Scalar};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Response-kernel template: a difference of Gaussians with a dominant peak
/// at `latency_ms` and an opposite-sign early lobe near `0.3·latency_ms`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrfTemplate {
    pub latency_ms: f64,
    pub width_ms: f64,
    pub amplitude: f64,
}

impl Default for TrfTemplate {
    fn default() -> Self {
        // two peaks near 50 ms and 170 ms
        Self {
            latency_ms: 170.0,
            width_ms: 45.0,
            amplitude: 1.0,
        }
    }
}

/// Band-appropriate kernels: the kernel's transfer must pass its own band,
/// so width shrinks (and the peak moves earlier) with band frequency.
fn default_trf() -> BTreeMap<Band, TrfTemplate> {
    [
        (
            Band::Delta,
            TrfTemplate {
                latency_ms: 170.0,
                width_ms: 60.0,
                amplitude: 1.0,
            },
        ),
        (
            Band::Theta,
            TrfTemplate {
                latency_ms: 120.0,
                width_ms: 30.0,
                amplitude: 1.0,
            },
        ),
        (
            Band::Alpha,
            TrfTemplate {
                latency_ms: 100.0,
                width_ms: 16.0,
                amplitude: 1.0,
            },
        ),
        (
            Band::Beta,
            TrfTemplate {
                latency_ms: 70.0,
                width_ms: 8.0,
                amplitude: 1.0,
            },
        ),
        (
            Band::Gamma,
            TrfTemplate {
                latency_ms: 50.0,
                width_ms: 5.0,
                amplitude: 1.0,
            },
        ),
    ]
    .into_iter()
    .collect()
}

fn default_effect() -> BTreeMap<Band, f64> {
    Band::NARROW.iter().map(|&b| (b, 1.0)).collect()
}

fn default_age_range() -> (f64, f64) {
    (60.0, 85.0)
}

/// Generator parameters. Reproducible: the same spec always produces the
/// same cohort, byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_controls: usize,
    pub n_patients: usize,
    pub fs: f64,
    pub duration_min: f64,
    pub n_channels: usize,
    /// Per-band response kernels.
    pub trf: BTreeMap<Band, TrfTemplate>,
    /// Multiplicative kernel-amplitude factor applied to the patient group,
    /// per band (1.0 = no group difference).
    pub group_effect: BTreeMap<Band, f64>,
    /// Sensor noise level per channel, relative to the unscaled signal.
    pub snr_db: f64,
    /// Per-subject tracking-strength spread: each subject's signal gain is
    /// drawn uniformly from ±this many dB.
    pub subject_gain_spread_db: f64,
    pub age_range: (f64, f64),
    /// Added to patient ages (0 keeps age uninformative).
    pub age_group_shift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_controls: 22,
            n_patients: 27,
            fs: 128.0,
            duration_min: 2.0,
            n_channels: 8,
            trf: default_trf(),
            group_effect: default_effect(),
            snr_db: -5.0,
            subject_gain_spread_db: 3.0,
            age_range: default_age_range(),
            age_group_shift: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn n_samples(&self) -> usize {
        (self.duration_min * 60.0 * self.fs).round() as usize
    }

    /// Set the same effect factor on a list of bands.
    pub fn with_effect(mut self, bands: &[Band], factor: f64) -> Self {
        for &b in bands {
            self.group_effect.insert(b, factor);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_min <= 0.0 || self.fs <= 0.0 || self.n_channels == 0 {
            return Err(Error::Manifest(
                "synth spec: durations and sizes must be positive".into(),
            ));
        }
        if self.group_effect.values().any(|&e| e < 0.0) {
            return Err(Error::Manifest(
                "synth spec: effect factors must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Channel gain topography: a fixed dipolar template (both polarities,
    /// near-zero mean) so the tracked signal survives average referencing.
    pub fn channel_gain(&self, c: usize) -> f64 {
        let phase = std::f64::consts::TAU * (c as f64 + 0.5) / self.n_channels as f64;
        phase.sin()
    }

    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_channels)
            .map(|c| format!("CH{:02}", c + 1))
            .collect()
    }

    /// Channels entering the multivariate analysis: the top half by
    /// absolute gain.
    pub fn channel_selection(&self) -> Vec<String> {
        let names = self.channel_names();
        let mut by_gain: Vec<usize> = (0..self.n_channels).collect();
        by_gain.sort_by(|&a, &b| {
            self.channel_gain(b)
                .abs()
                .total_cmp(&self.channel_gain(a).abs())
                .then(a.cmp(&b))
        });
        let mut keep: Vec<usize> = by_gain[..(self.n_channels / 2).max(1)].to_vec();
        keep.sort_unstable();
        keep.into_iter().map(|c| names[c].clone()).collect()
    }

    /// Ring layout for adjacency construction.
    pub fn layout(&self) -> ChannelLayout {
        let xy = (0..self.n_channels)
            .map(|c| {
                let a = std::f64::consts::TAU * c as f64 / self.n_channels as f64;
                (a.cos(), a.sin())
            })
            .collect();
        ChannelLayout::new(self.channel_names(), xy).expect("lengths match")
    }
}

/// Interior stimulus edges: each band's noise keeps a 12%-of-width margin
/// inside its nominal edges, so a neighboring band's analysis filter (with
/// its 10% transition) cannot pick it up. Group effects then stay confined
/// to their own band's features.
fn stimulus_edges(band: Band) -> (f64, f64) {
    let spec = band.canonical();
    let margin = 0.12 * spec.width_hz();
    (spec.lo_hz + margin, spec.hi_hz - margin)
}

/// Band-limited spectrum-shaped (1/√f within the band) Gaussian noise,
/// z-scored. Deterministic in `seed`.
fn band_limited_noise<F: Scalar>(n: usize, fs: f64, lo: f64, hi: f64, seed: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex::new(0.0f64, 0.0); n];
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * fs / n as f64;
        if f < lo || f > hi {
            continue;
        }
        let mag = 1.0 / f.sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        spectrum[k] = Complex::new(mag * re, mag * im);
        spectrum[n - k] = spectrum[k].conj();
    }
    let mut buf = spectrum;
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let raw: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    let z = crate::dsp::zscore(&raw).expect("band noise is not constant");
    z.into_iter().map(F::cast).collect()
}

/// The shared stimulus: one envelope per narrow band plus their sum as the
/// broad band, all z-scored at the analysis rate.
pub fn stimulus_envelopes<F: Scalar>(spec: &SynthSpec) -> Result<EnvelopeSet<F>> {
    spec.validate()?;
    let n = spec.n_samples();
    let mut bands = BTreeMap::new();
    let mut broad = vec![0.0f64; n];
    for (bi, &band) in Band::NARROW.iter().enumerate() {
        let (lo, hi) = stimulus_edges(band);
        let series: Vec<F> =
            band_limited_noise(n, spec.fs, lo, hi, derive_seed(spec.seed, 10 + bi as u64));
        for (b, v) in broad.iter_mut().zip(&series) {
            *b += v.as_f64();
        }
        bands.insert(band, series);
    }
    let broad_z = crate::dsp::zscore(&broad)?;
    bands.insert(Band::Broad, broad_z.into_iter().map(F::cast).collect());
    EnvelopeSet::new(spec.fs, bands)
}

/// Response kernel sampled at the analysis rate.
fn trf_kernel(template: &TrfTemplate, fs: f64) -> Vec<f64> {
    let support_ms = template.latency_ms + 3.5 * template.width_ms;
    let len = ((support_ms / 1000.0 * fs).ceil() as usize).max(2);
    (0..len)
        .map(|k| {
            let t = k as f64 / fs * 1000.0;
            let main = (-((t - template.latency_ms) / template.width_ms).powi(2) / 2.0).exp();
            let early_center = 0.3 * template.latency_ms;
            let early_width = 0.7 * template.width_ms;
            let early = (-((t - early_center) / early_width).powi(2) / 2.0).exp();
            template.amplitude * (main - 0.5 * early)
        })
        .collect()
}

/// Causal convolution, same length as the input.
fn convolve_causal(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; signal.len()];
    for (t, o) in out.iter_mut().enumerate() {
        let kmax = kernel.len().min(t + 1);
        let mut acc = 0.0;
        for (k, &h) in kernel.iter().enumerate().take(kmax) {
            acc += h * signal[t - k];
        }
        *o = acc;
    }
    out
}

/// Generate a subject's EEG (and return the shared stimulus). Identical
/// `(spec, group, subject_seed)` yields identical bytes.
pub fn generate_subject<F: Scalar>(
    spec: &SynthSpec,
    group: Group,
    subject_seed: u64,
) -> Result<(Recording<F>, EnvelopeSet<F>)> {
    let envelopes = stimulus_envelopes::<F>(spec)?;
    let eeg = generate_subject_eeg(spec, group, subject_seed, &envelopes)?;
    Ok((eeg, envelopes))
}

fn generate_subject_eeg<F: Scalar>(
    spec: &SynthSpec,
    group: Group,
    subject_seed: u64,
    envelopes: &EnvelopeSet<F>,
) -> Result<Recording<F>> {
    spec.validate()?;
    let n = spec.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(subject_seed);
    let gain_db: f64 = (rng.gen::<f64>() * 2.0 - 1.0) * spec.subject_gain_spread_db;
    let subject_gain = 10f64.powf(gain_db / 20.0);

    // per-band response traces at effect 1 (reference) and at the group's
    // effect factor
    let mut reference = vec![0.0f64; n];
    let mut tracked = vec![0.0f64; n];
    for &band in Band::NARROW.iter() {
        let template = spec.trf.get(&band).copied().unwrap_or_default();
        let kernel = trf_kernel(&template, spec.fs);
        let env: Vec<f64> = envelopes.get(band)?.iter().map(|v| v.as_f64()).collect();
        let trace = convolve_causal(&env, &kernel);
        let effect = if group == Group::Aphasia {
            spec.group_effect.get(&band).copied().unwrap_or(1.0)
        } else {
            1.0
        };
        for ((r, s), v) in reference.iter_mut().zip(tracked.iter_mut()).zip(&trace) {
            *r += v;
            *s += effect * v;
        }
    }
    let ref_rms = (reference.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let noise_scale = 10f64.powf(-spec.snr_db / 20.0);

    let mut samples = Array2::zeros((n, spec.n_channels));
    // flat sensor-noise floor: snr_db describes the best (|gain| = 1)
    // channel; the subject gain scales the tracked signal only, so it
    // shifts the subject's true SNR (scaling noise alongside would be a
    // pure amplitude change that the rank transform removes)
    let sigma = ref_rms * noise_scale;
    for c in 0..spec.n_channels {
        let signal_gain = spec.channel_gain(c) * subject_gain;
        let mut chan_rng = ChaCha8Rng::seed_from_u64(derive_seed(subject_seed, 100 + c as u64));
        for t in 0..n {
            let e: f64 = StandardNormal.sample(&mut chan_rng);
            samples[(t, c)] = F::cast(signal_gain * tracked[t] + sigma * e);
        }
    }
    Recording::new(samples, spec.fs, spec.channel_names(), RecordingKind::Eeg)
}

/// Deterministic per-subject roster: id, group, RNG seed, and age.
fn subject_roster(spec: &SynthSpec) -> Vec<(String, Group, u64, f64)> {
    let total = spec.n_controls + spec.n_patients;
    (0..total)
        .map(|idx| {
            let group = if idx < spec.n_controls {
                Group::Control
            } else {
                Group::Aphasia
            };
            let subject_seed = derive_seed(spec.seed, 1000 + idx as u64);
            let mut age_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 5000 + idx as u64));
            let (lo, hi) = spec.age_range;
            let mut age = lo + age_rng.gen::<f64>() * (hi - lo);
            if group == Group::Aphasia {
                age += spec.age_group_shift;
            }
            (format!("sub-{:03}", idx + 1), group, subject_seed, age)
        })
        .collect()
}

/// Generate the cohort directly as analysis-ready data (preprocessed band
/// EEG + stimulus envelopes), without touching the filesystem.
pub fn cohort_data<F: Scalar>(
    spec: &SynthSpec,
    grid: &crate::model::LagGrid,
    bands: &[Band],
) -> Result<crate::pipeline::CohortData<F>> {
    use rayon::prelude::*;
    spec.validate()?;
    let envelopes = stimulus_envelopes::<F>(spec)?;
    let band_specs: Vec<_> = bands.iter().map(|b| b.canonical()).collect();
    let subjects: Vec<crate::pipeline::SubjectRecords<F>> = subject_roster(spec)
        .into_par_iter()
        .map(|(id, group, subject_seed, age)| {
            let eeg = generate_subject_eeg::<F>(spec, group, subject_seed, &envelopes)?;
            let band_eeg = crate::dsp::preprocess_eeg(&eeg, &band_specs, spec.fs, spec.fs)?;
            Ok(crate::pipeline::SubjectRecords {
                id,
                group,
                age,
                band_eeg,
            })
        })
        .collect::<Result<_>>()?;
    Ok(crate::pipeline::CohortData {
        fs: spec.fs,
        subjects,
        envelopes,
        selection: crate::gcmi::ChannelSelection::new(spec.channel_selection())?,
        grid: grid.clone(),
        mi_options: Default::default(),
    })
}

/// Generate the cohort and write it to `out_dir`: per-band envelope
/// matrices, per-subject EEG matrices, a layout CSV, and `manifest.json`.
pub fn generate_cohort<F: Scalar>(spec: &SynthSpec, out_dir: &Path) -> Result<CohortManifest> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let envelopes = stimulus_envelopes::<F>(spec)?;

    let mut env_paths = BTreeMap::new();
    for (&band, series) in &envelopes.bands {
        let stem = PathBuf::from(format!("env_{band}"));
        let rec = Recording::mono(series.clone(), spec.fs, "envelope", RecordingKind::Audio)?;
        crate::model::write_matrix(&rec, out_dir.join(&stem))?;
        env_paths.insert(band, stem);
    }

    let layout_path = PathBuf::from("layout.csv");
    {
        let layout = spec.layout();
        let mut text = String::from("name,x,y\n");
        for (name, (x, y)) in layout.names.iter().zip(&layout.xy) {
            text.push_str(&format!("{name},{x},{y}\n"));
        }
        std::fs::write(out_dir.join(&layout_path), text)?;
    }

    let mut subjects = Vec::new();
    for (id, group, subject_seed, age) in subject_roster(spec) {
        let eeg = generate_subject_eeg::<F>(spec, group, subject_seed, &envelopes)?;
        let stem = PathBuf::from(format!("eeg_{id}"));
        crate::model::write_matrix(&eeg, out_dir.join(&stem))?;
        subjects.push(ManifestSubject {
            id,
            group,
            age,
            eeg: stem,
            band_eeg: BTreeMap::new(),
            tmif: BTreeMap::new(),
        });
    }

    let manifest = CohortManifest {
        fs: spec.fs,
        envelopes: env_paths,
        channel_selection: spec.channel_selection(),
        layout: Some(layout_path),
        subjects,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}
