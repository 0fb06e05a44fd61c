//! Recording-length, stability, and reliability analyses.
//!
//! How much data does envelope tracking need? These analyses crop the
//! recording to its first `t` minutes, recompute TMIFs, and quantify
//! classification performance, within-/between-subject stability, and
//! split-half reliability, locating saturation knees with the Kneedle rule.

use crate::classifier::{nested_loso_evaluate, CvConfig};
use crate::gcmi::{mean_mi, tmif_multivariate_with, MEAN_MI_WINDOW_MS};
use crate::model::{Band, Group, Recording, Subject, Tmif};
use crate::pipeline::CohortData;
use crate::stats::{fisher_ci95, mean, norm_sf, pearson_p_two_tailed, pearson_r, stderr_mean};
use crate::{Error, Result, Scalar};
use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::Serialize;

/// Strictly increasing list of recording durations in minutes.
#[derive(Debug, Clone)]
pub struct DurationGrid(Vec<f64>);

impl DurationGrid {
    pub fn new(minutes: Vec<f64>) -> Result<Self> {
        if minutes.is_empty() || minutes[0] <= 0.0 {
            return Err(Error::CropOutOfRange {
                minutes: minutes.first().copied().unwrap_or(0.0),
                available_min: f64::INFINITY,
            });
        }
        if minutes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Manifest(
                "durations must be strictly increasing".into(),
            ));
        }
        Ok(Self(minutes))
    }

    /// The 25-minute schedule: first 1, 3, 5, …, 25 minutes.
    pub fn default_25min() -> Self {
        Self((0..13).map(|i| 1.0 + 2.0 * i as f64).collect())
    }

    pub fn minutes(&self) -> &[f64] {
        &self.0
    }

    /// Error if any duration exceeds the recording length.
    pub fn check_fits(&self, available_min: f64) -> Result<()> {
        let max = *self.0.last().expect("non-empty");
        if max > available_min + 1e-9 {
            return Err(Error::CropOutOfRange {
                minutes: max,
                available_min,
            });
        }
        Ok(())
    }
}

fn crop_recording<F: Scalar>(rec: &Recording<F>, n: usize) -> Recording<F> {
    Recording {
        samples: rec.samples.slice(s![0..n, ..]).to_owned(),
        fs: rec.fs,
        channel_names: rec.channel_names.clone(),
        kind: rec.kind,
    }
}

/// TMIF of one subject computed on the first `minutes` of EEG and envelope.
pub fn crop_and_tmif<F: Scalar>(
    cohort: &CohortData<F>,
    subject_idx: usize,
    band: Band,
    minutes: f64,
) -> Result<Tmif<F>> {
    let sub = &cohort.subjects[subject_idx];
    let eeg = sub.band(band)?;
    let available_min = eeg.duration_min();
    let n = (minutes * 60.0 * cohort.fs).floor() as usize;
    if minutes <= 0.0 || n == 0 || n > eeg.n_samples() {
        return Err(Error::CropOutOfRange {
            minutes,
            available_min,
        });
    }
    let env = &cohort.envelopes.get(band)?[..n];
    tmif_multivariate_with(
        &crop_recording(eeg, n),
        env,
        &cohort.grid,
        &cohort.selection,
        &cohort.mi_options,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityKind {
    /// Pearson r between the duration-TMIF and the full TMIF per subject,
    /// aggregated as mean ± SE across subjects.
    WithinSubject,
    /// Pearson r across subjects between mean MI at the duration and at
    /// full length.
    BetweenSubject,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityPoint {
    pub band: Band,
    pub duration_min: f64,
    pub r: f64,
    /// Standard error across subjects (within-subject curves only).
    pub stderr: Option<f64>,
    /// Subjects contributing (correlations undefined on constant TMIFs are
    /// recorded as missing and excluded).
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCurve {
    pub kind: StabilityKind,
    pub points: Vec<StabilityPoint>,
    /// Kneedle knee of the across-band average curve, in minutes.
    pub knee_min: Option<f64>,
}

impl StabilityCurve {
    /// Tidy CSV (`band,duration_min,value,stderr`).
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "band,duration_min,value,stderr")?;
        for p in &self.points {
            match p.stderr {
                Some(se) => writeln!(w, "{},{},{},{}", p.band, p.duration_min, p.r, se)?,
                None => writeln!(w, "{},{},{},", p.band, p.duration_min, p.r)?,
            }
        }
        Ok(())
    }

    fn across_band_average(&self, durations: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &d in durations {
            let rs: Vec<f64> = self
                .points
                .iter()
                .filter(|p| p.duration_min == d && p.r.is_finite())
                .map(|p| p.r)
                .collect();
            if !rs.is_empty() {
                xs.push(d);
                ys.push(mean(&rs));
            }
        }
        (xs, ys)
    }
}

/// Per subject, band, and duration: correlate the cropped-recording TMIF
/// with the full-recording TMIF over the full lag window.
pub fn within_subject_stability<F: Scalar>(
    cohort: &CohortData<F>,
    durations: &DurationGrid,
    bands: &[Band],
) -> Result<StabilityCurve> {
    within_subject_stability_windowed(cohort, durations, bands, None)
}

/// [`within_subject_stability`] restricted to lags whose time falls inside
/// `window_ms` (`None` = the full lag range).
pub fn within_subject_stability_windowed<F: Scalar>(
    cohort: &CohortData<F>,
    durations: &DurationGrid,
    bands: &[Band],
    window_ms: Option<(f64, f64)>,
) -> Result<StabilityCurve> {
    durations.check_fits(cohort.duration_min())?;
    let keep: Vec<bool> = cohort
        .grid
        .lags()
        .map(|lag| match window_ms {
            None => true,
            Some((lo, hi)) => {
                let t = cohort.grid.time_ms(lag);
                t >= lo - 1e-9 && t <= hi + 1e-9
            }
        })
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::WindowOutsideGrid {
            lo_ms: window_ms.map_or(0.0, |w| w.0),
            hi_ms: window_ms.map_or(0.0, |w| w.1),
            grid_lo_ms: cohort.grid.time_ms(cohort.grid.lag_min()),
            grid_hi_ms: cohort.grid.time_ms(cohort.grid.lag_max()),
        });
    }
    let n_subj = cohort.subjects.len();
    let full: Vec<Vec<Tmif<F>>> = bands
        .iter()
        .map(|&band| {
            (0..n_subj)
                .map(|i| cohort.tmif_of(i, band))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::new();
    for (bi, &band) in bands.iter().enumerate() {
        for &minutes in durations.minutes() {
            let rs: Vec<Option<f64>> = (0..n_subj)
                .into_par_iter()
                .map(|i| {
                    let cropped = crop_and_tmif(cohort, i, band, minutes)?;
                    let select = |t: &Tmif<F>| -> Vec<f64> {
                        t.values
                            .iter()
                            .zip(&keep)
                            .filter(|(_, &k)| k)
                            .map(|(v, _)| v.as_f64())
                            .collect()
                    };
                    Ok(pearson_r(&select(&cropped), &select(&full[bi][i])).ok())
                })
                .collect::<Result<_>>()?;
            let valid: Vec<f64> = rs.into_iter().flatten().collect();
            let (r, se) = if valid.is_empty() {
                (f64::NAN, None)
            } else {
                (mean(&valid), Some(stderr_mean(&valid)))
            };
            points.push(StabilityPoint {
                band,
                duration_min: minutes,
                r,
                stderr: se,
                n: valid.len(),
            });
        }
    }
    let curve = StabilityCurve {
        kind: StabilityKind::WithinSubject,
        points,
        knee_min: None,
    };
    let (xs, ys) = curve.across_band_average(durations.minutes());
    let knee_min = if xs.len() >= 3 {
        knee_point(&xs, &ys)?
    } else {
        None
    };
    Ok(StabilityCurve { knee_min, ..curve })
}

/// Per band and duration: Pearson r across subjects between mean MI
/// (0–400 ms) at the duration and at full length.
pub fn between_subject_stability<F: Scalar>(
    cohort: &CohortData<F>,
    durations: &DurationGrid,
    bands: &[Band],
) -> Result<StabilityCurve> {
    durations.check_fits(cohort.duration_min())?;
    let n_subj = cohort.subjects.len();
    if n_subj < 3 {
        return Err(Error::TooFewSubjects {
            n: n_subj,
            min: 3,
            context: "between-subject stability",
        });
    }
    let mut points = Vec::new();
    for &band in bands {
        let full_mi: Vec<f64> = (0..n_subj)
            .into_par_iter()
            .map(|i| Ok(mean_mi(&cohort.tmif_of(i, band)?, MEAN_MI_WINDOW_MS)?.as_f64()))
            .collect::<Result<_>>()?;
        for &minutes in durations.minutes() {
            let cropped_mi: Vec<f64> = (0..n_subj)
                .into_par_iter()
                .map(|i| {
                    Ok(
                        mean_mi(&crop_and_tmif(cohort, i, band, minutes)?, MEAN_MI_WINDOW_MS)?
                            .as_f64(),
                    )
                })
                .collect::<Result<_>>()?;
            let r = pearson_r(&cropped_mi, &full_mi).unwrap_or(f64::NAN);
            points.push(StabilityPoint {
                band,
                duration_min: minutes,
                r,
                stderr: None,
                n: n_subj,
            });
        }
    }
    let curve = StabilityCurve {
        kind: StabilityKind::BetweenSubject,
        points,
        knee_min: None,
    };
    let (xs, ys) = curve.across_band_average(durations.minutes());
    let knee_min = if xs.len() >= 3 {
        knee_point(&xs, &ys)?
    } else {
        None
    };
    Ok(StabilityCurve { knee_min, ..curve })
}

/// Kneedle knee of a concave-increasing curve (S = 1, no smoothing, no
/// interpolation): min-max normalize, difference curve `d = yₙ − xₙ`, and
/// the knee is the first local maximum of `d` whose threshold
/// `d − S·mean(Δxₙ)` is undercut before the next local maximum.
pub fn knee_point(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    const S: f64 = 1.0;
    let n = xs.len();
    if n < 3 {
        return Err(Error::TooFewSamples { len: n, min: 3 });
    }
    assert_eq!(xs.len(), ys.len());
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Manifest(
            "knee_point needs strictly increasing x".into(),
        ));
    }
    let (x_min, x_max) = (xs[0], xs[n - 1]);
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_max == y_min {
        return Ok(None);
    }
    let xn: Vec<f64> = xs.iter().map(|&x| (x - x_min) / (x_max - x_min)).collect();
    let d: Vec<f64> = ys
        .iter()
        .zip(&xn)
        .map(|(&y, &x)| (y - y_min) / (y_max - y_min) - x)
        .collect();
    let mean_dx = xn.windows(2).map(|w| w[1] - w[0]).sum::<f64>() / (n - 1) as f64;
    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| d[i] >= d[i - 1] && d[i] >= d[i + 1])
        .collect();
    for (ci, &c) in candidates.iter().enumerate() {
        let threshold = d[c] - S * mean_dx;
        let end = candidates.get(ci + 1).copied().unwrap_or(n);
        if d[c + 1..end].iter().any(|&v| v < threshold) {
            return Ok(Some(xs[c]));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Serialize)]
pub struct DurationPerformance {
    pub duration_min: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DurationCurve {
    pub points: Vec<DurationPerformance>,
    /// Kneedle knee of the accuracy curve, in minutes.
    pub knee_min: Option<f64>,
}

impl DurationCurve {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "duration_min,accuracy,f1,auc")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.duration_min, p.accuracy, p.f1, p.auc)?;
        }
        Ok(())
    }
}

/// Full nested-CV classification per recording duration, with the knee of
/// the accuracy curve. Single-entry grids yield a one-point curve and no
/// knee.
pub fn classification_vs_duration<F: Scalar>(
    cohort: &CohortData<F>,
    durations: &DurationGrid,
    cfg: &CvConfig,
) -> Result<DurationCurve> {
    durations.check_fits(cohort.duration_min())?;
    let mut points = Vec::new();
    for &minutes in durations.minutes() {
        let subjects: Vec<Subject<F>> = cohort
            .subjects
            .par_iter()
            .enumerate()
            .map(|(i, records)| {
                let mut subject = Subject::new(records.id.clone(), records.group, records.age)?;
                for &band in &cfg.bands {
                    subject
                        .tmifs
                        .insert(band, crop_and_tmif(cohort, i, band, minutes)?);
                }
                Ok(subject)
            })
            .collect::<Result<_>>()?;
        let report = nested_loso_evaluate(&subjects, cfg)?;
        points.push(DurationPerformance {
            duration_min: minutes,
            accuracy: report.accuracy,
            f1: report.f1,
            auc: report.auc,
        });
    }
    let knee_min = if points.len() >= 3 {
        let xs: Vec<f64> = points.iter().map(|p| p.duration_min).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.accuracy).collect();
        knee_point(&xs, &ys)?
    } else {
        None
    };
    Ok(DurationCurve { points, knee_min })
}

/// Compare two independent Pearson correlations via the Fisher z transform:
/// `z = (atanh r₁ − atanh r₂) / sqrt(1/(n₁−3) + 1/(n₂−3))`, two-tailed
/// normal p. Multiple-comparison correction is the caller's business.
pub fn fisher_z_compare(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<(f64, f64)> {
    if r1.abs() >= 1.0 || r2.abs() >= 1.0 {
        return Err(Error::UndefinedCorrelation(
            "|r| must be < 1 for the Fisher z transform",
        ));
    }
    if n1 <= 3 || n2 <= 3 {
        return Err(Error::TooFewSamples {
            len: n1.min(n2),
            min: 4,
        });
    }
    let z = (r1.atanh() - r2.atanh()) / (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    Ok((z, 2.0 * norm_sf(z.abs())))
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitHalfEntry {
    pub band: Band,
    pub group: Group,
    pub r: f64,
    pub ci95: (f64, f64),
    /// Two-tailed p from the t transform, Bonferroni-corrected across the
    /// tested bands.
    pub p_corrected: f64,
    pub n: usize,
}

/// Split-half reliability: the recording (cropped to an even sample count)
/// is split into its first and second half, the mean MI (0–400 ms) is
/// computed per half, and the halves are correlated across subjects within
/// each group.
pub fn split_half_reliability<F: Scalar>(
    cohort: &CohortData<F>,
    bands: &[Band],
) -> Result<Vec<SplitHalfEntry>> {
    let n_subj = cohort.subjects.len();
    let n_bands = bands.len();
    // mean MI per (band, subject, half)
    let mut half_mi = vec![[0.0f64; 2]; n_bands * n_subj];
    for (bi, &band) in bands.iter().enumerate() {
        let per_subject: Vec<[f64; 2]> = (0..n_subj)
            .into_par_iter()
            .map(|i| {
                let sub = &cohort.subjects[i];
                let eeg = sub.band(band)?;
                let env = cohort.envelopes.get(band)?;
                let half = eeg.n_samples() / 2;
                if half == 0 {
                    return Err(Error::SignalTooShort {
                        len: eeg.n_samples(),
                        min: 2,
                    });
                }
                let mut out = [0.0; 2];
                for (h, range) in [(0usize, 0..half), (1usize, half..2 * half)] {
                    let eeg_half = Recording {
                        samples: eeg.samples.slice(s![range.clone(), ..]).to_owned(),
                        fs: eeg.fs,
                        channel_names: eeg.channel_names.clone(),
                        kind: eeg.kind,
                    };
                    let tmif = tmif_multivariate_with(
                        &eeg_half,
                        &env[range.clone()],
                        &cohort.grid,
                        &cohort.selection,
                        &cohort.mi_options,
                    )?;
                    out[h] = mean_mi(&tmif, MEAN_MI_WINDOW_MS)?.as_f64();
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (i, v) in per_subject.into_iter().enumerate() {
            half_mi[bi * n_subj + i] = v;
        }
    }

    let mut entries = Vec::new();
    for group in [Group::Aphasia, Group::Control] {
        let idx = cohort.group_indices(group);
        if idx.len() < 3 {
            return Err(Error::TooFewSubjects {
                n: idx.len(),
                min: 3,
                context: "split-half",
            });
        }
        for (bi, &band) in bands.iter().enumerate() {
            let first: Vec<f64> = idx.iter().map(|&i| half_mi[bi * n_subj + i][0]).collect();
            let second: Vec<f64> = idx.iter().map(|&i| half_mi[bi * n_subj + i][1]).collect();
            let r = pearson_r(&first, &second)?;
            let p = (pearson_p_two_tailed(r, idx.len()) * n_bands as f64).min(1.0);
            entries.push(SplitHalfEntry {
                band,
                group,
                r,
                ci95: fisher_ci95(r, idx.len())?,
                p_corrected: p,
                n: idx.len(),
            });
        }
    }
    Ok(entries)
}

/// CSV mirroring the reliability table layout
/// (`band,group,r,ci_low,ci_high,p_corrected,n`).
pub fn split_half_csv<W: std::io::Write>(entries: &[SplitHalfEntry], mut w: W) -> Result<()> {
    writeln!(w, "band,group,r,ci_low,ci_high,p_corrected,n")?;
    for e in entries {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            e.band, e.group, e.r, e.ci95.0, e.ci95.1, e.p_corrected, e.n
        )?;
    }
    Ok(())
}

/// Pearson correlations across subjects of the mean MI (0–400 ms) between
/// every pair of bands (broad + the five narrow bands by default).
pub fn band_correlation_matrix<F: Scalar>(
    subjects: &[Subject<F>],
    group: Group,
    bands: &[Band],
) -> Result<Array2<f64>> {
    let members: Vec<&Subject<F>> = subjects.iter().filter(|s| s.group == group).collect();
    if members.len() < 3 {
        return Err(Error::TooFewSubjects {
            n: members.len(),
            min: 3,
            context: "band correlation matrix",
        });
    }
    let mut mi = Array2::zeros((bands.len(), members.len()));
    for (bi, &band) in bands.iter().enumerate() {
        for (si, subject) in members.iter().enumerate() {
            mi[(bi, si)] = mean_mi(subject.tmif(band)?, MEAN_MI_WINDOW_MS)?.as_f64();
        }
    }
    let mut out = Array2::zeros((bands.len(), bands.len()));
    for i in 0..bands.len() {
        for j in 0..bands.len() {
            out[(i, j)] = if i == j {
                1.0
            } else {
                pearson_r(&mi.row(i).to_vec(), &mi.row(j).to_vec())?
            };
        }
    }
    Ok(out)
}

/// CSV of a band correlation matrix with header row/column.
pub fn band_correlation_csv<W: std::io::Write>(
    matrix: &Array2<f64>,
    bands: &[Band],
    mut w: W,
) -> Result<()> {
    write!(w, "band")?;
    for b in bands {
        write!(w, ",{b}")?;
    }
    writeln!(w)?;
    for (i, b) in bands.iter().enumerate() {
        write!(w, "{b}")?;
        for j in 0..bands.len() {
            write!(w, ",{}", matrix[(i, j)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
