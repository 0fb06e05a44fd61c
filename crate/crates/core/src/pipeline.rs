//! Analysis-ready cohort data and the stage plumbing shared by the CLI.

use crate::classifier::CvConfig;
use crate::gcmi::{tmif_multivariate_with, ChannelSelection, MiOptions};
use crate::model::{
    read_matrix, Band, CohortManifest, EnvelopeSet, Group, LagGrid, Recording, Subject, Tmif,
};
use crate::{Error, Result, Scalar};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// One subject's preprocessed (band-filtered, normalized, analysis-rate)
/// EEG.
#[derive(Debug, Clone)]
pub struct SubjectRecords<F> {
    pub id: String,
    pub group: Group,
    pub age: f64,
    pub band_eeg: BTreeMap<Band, Recording<F>>,
}

impl<F: Scalar> SubjectRecords<F> {
    pub fn band(&self, band: Band) -> Result<&Recording<F>> {
        self.band_eeg.get(&band).ok_or(Error::MissingBand {
            id: self.id.clone(),
            band,
        })
    }
}

/// Everything the analyses need: per-subject band EEG, the shared stimulus
/// envelopes, the channel selection, and the lag grid.
#[derive(Debug, Clone)]
pub struct CohortData<F> {
    pub fs: f64,
    pub subjects: Vec<SubjectRecords<F>>,
    pub envelopes: EnvelopeSet<F>,
    pub selection: ChannelSelection,
    pub grid: LagGrid,
    pub mi_options: MiOptions,
}

impl<F: Scalar> CohortData<F> {
    /// Multivariate TMIF of one subject in one band over the full recording.
    pub fn tmif_of(&self, subject_idx: usize, band: Band) -> Result<Tmif<F>> {
        let sub = &self.subjects[subject_idx];
        tmif_multivariate_with(
            sub.band(band)?,
            self.envelopes.get(band)?,
            &self.grid,
            &self.selection,
            &self.mi_options,
        )
    }

    /// Compute per-band TMIFs for every subject (the classifier's input).
    pub fn subjects_with_tmifs(&self, bands: &[Band]) -> Result<Vec<Subject<F>>> {
        self.subjects
            .par_iter()
            .enumerate()
            .map(|(i, records)| {
                let mut subject = Subject::new(records.id.clone(), records.group, records.age)?;
                for &band in bands {
                    subject.tmifs.insert(band, self.tmif_of(i, band)?);
                }
                Ok(subject)
            })
            .collect()
    }

    pub fn group_indices(&self, group: Group) -> Vec<usize> {
        (0..self.subjects.len())
            .filter(|&i| self.subjects[i].group == group)
            .collect()
    }

    /// Duration of the shortest subject recording, in minutes.
    pub fn duration_min(&self) -> f64 {
        self.subjects
            .iter()
            .flat_map(|s| s.band_eeg.values())
            .map(|r| r.duration_min())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Load a manifest whose subjects carry preprocessed band EEG, or
/// preprocess raw EEG on the fly when a band file is absent.
pub fn load_cohort<F: Scalar>(
    manifest: &CohortManifest,
    bands: &[Band],
    grid: &LagGrid,
    selection: Option<Vec<String>>,
    filter_fs: f64,
) -> Result<CohortData<F>> {
    let band_specs: Vec<_> = bands.iter().map(|b| b.canonical()).collect();
    let mut env_map = BTreeMap::new();
    for &band in bands {
        let stem = manifest.envelopes.get(&band).ok_or(Error::MissingBand {
            id: "manifest envelopes".into(),
            band,
        })?;
        let rec: Recording<F> = read_matrix(manifest.resolve(stem))?;
        if (rec.fs - manifest.fs).abs() > 1e-9 {
            return Err(Error::FsMismatch {
                expected: manifest.fs,
                actual: rec.fs,
            });
        }
        env_map.insert(band, rec.channel(0));
    }
    let envelopes = EnvelopeSet {
        fs: manifest.fs,
        bands: env_map,
    };

    let subjects: Vec<SubjectRecords<F>> = manifest
        .subjects
        .par_iter()
        .map(|entry| {
            let mut band_eeg = BTreeMap::new();
            let preprocessed: Vec<Band> = bands
                .iter()
                .copied()
                .filter(|b| entry.band_eeg.contains_key(b))
                .collect();
            if preprocessed.len() == bands.len() {
                for &band in bands {
                    let rec: Recording<F> = read_matrix(manifest.resolve(&entry.band_eeg[&band]))?;
                    band_eeg.insert(band, rec);
                }
            } else {
                let raw: Recording<F> = read_matrix(manifest.resolve(&entry.eeg))?;
                band_eeg = crate::dsp::preprocess_eeg(&raw, &band_specs, filter_fs, manifest.fs)?;
            }
            Ok(SubjectRecords {
                id: entry.id.clone(),
                group: entry.group,
                age: entry.age,
                band_eeg,
            })
        })
        .collect::<Result<_>>()?;

    let selection = ChannelSelection::new(match selection {
        Some(names) => names,
        None => manifest.channel_selection.clone(),
    })?;

    Ok(CohortData {
        fs: manifest.fs,
        subjects,
        envelopes,
        selection,
        grid: grid.clone(),
        mi_options: MiOptions::default(),
    })
}

/// Store a TMIF as a two-column matrix (`lag_ms`, `mi_bits`) so the binary
/// export round-trips without a separate grid sidecar.
pub fn tmif_to_matrix<F: Scalar>(tmif: &Tmif<F>) -> Recording<F> {
    let n = tmif.grid.len();
    let mut data = ndarray::Array2::zeros((n, 2));
    for (row, (lag, &v)) in tmif.grid.lags().zip(&tmif.values).enumerate() {
        data[(row, 0)] = F::cast(tmif.grid.time_ms(lag));
        data[(row, 1)] = v;
    }
    Recording::new(
        data,
        tmif.grid.fs,
        vec!["lag_ms".into(), "mi_bits".into()],
        crate::model::RecordingKind::Eeg,
    )
    .expect("valid tmif matrix")
}

/// Rebuild a TMIF from its two-column matrix form.
pub fn tmif_from_matrix<F: Scalar>(rec: &Recording<F>) -> Result<Tmif<F>> {
    if rec.n_channels() != 2 || rec.n_samples() == 0 {
        return Err(Error::Manifest(
            "tmif matrix must be lag_ms x mi_bits".into(),
        ));
    }
    let lag_ms = rec.channel(0);
    let values = rec.channel(1);
    let fs = rec.fs;
    let to_lag = |ms: F| (ms.as_f64() * fs / 1000.0).round();
    let first = to_lag(lag_ms[0]);
    let last = to_lag(lag_ms[lag_ms.len() - 1]);
    let grid = LagGrid::new(fs, first / fs * 1000.0, last / fs * 1000.0)?;
    if grid.len() != values.len() {
        return Err(Error::GridMismatch);
    }
    Ok(Tmif::new(grid, values))
}

/// Default nested-CV configuration bound to a seed.
pub fn default_cv_config(seed: u64) -> CvConfig {
    CvConfig {
        seed,
        ..Default::default()
    }
}
