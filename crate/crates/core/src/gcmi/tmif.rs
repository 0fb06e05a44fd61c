//! Temporal mutual information functions.
//!
//! The TMIF is the MI between the stimulus envelope and lag-shifted EEG as a
//! function of lag. Positive lag means the brain response *follows* the
//! stimulus: at lag τ the estimator pairs `env[t]` with `eeg[t + τ]` over
//! every sample where both are defined (no wraparound).
//!
//! Each lag's overlapping segment is copula-transformed per column before
//! the Gaussian MI is applied, which keeps the estimate self-consistent with
//! the segment actually entering the covariance. (Transforming once globally
//! and slicing afterwards is a near-equivalent alternative; the per-segment
//! choice is deliberate.)

use super::copula::{QnormTable, WindowedCopula};
use super::mi::{gaussian_mi_cols, MiOptions};
use crate::model::{LagGrid, Recording, Tmif, TmifMatrix};
use crate::{Error, Result, Scalar};
use ndarray::Array2;
use rayon::prelude::*;

/// Ordered channel names entering the multivariate TMIF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSelection {
    names: Vec<String>,
}

impl ChannelSelection {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Resolve to column indices of a recording.
    pub fn indices<F: Scalar>(&self, rec: &Recording<F>) -> Result<Vec<usize>> {
        self.names.iter().map(|n| rec.channel_index(n)).collect()
    }
}

fn check_inputs<F: Scalar>(eeg: &Recording<F>, env: &[F], grid: &LagGrid) -> Result<()> {
    if eeg.n_samples() != env.len() {
        return Err(Error::DimensionMismatch {
            expected: eeg.n_samples(),
            actual: env.len(),
        });
    }
    if (eeg.fs - grid.fs).abs() > 1e-9 {
        return Err(Error::FsMismatch {
            expected: grid.fs,
            actual: eeg.fs,
        });
    }
    let min_overlap = 10 * grid.len();
    let overlap = eeg.n_samples().saturating_sub(grid.max_abs_lag());
    if overlap < min_overlap {
        return Err(Error::OverlapTooShort {
            overlap,
            min: min_overlap,
        });
    }
    Ok(())
}

/// Envelope window `[a, b)` at lag τ; the EEG window is `[a+τ, b+τ)`.
fn window(n: usize, lag: i64) -> (usize, usize) {
    let a = (-lag).max(0) as usize;
    let b = n - lag.max(0) as usize;
    (a, b)
}

/// Multivariate TMIF: at each lag, the Gaussian-copula MI between the
/// selected channels jointly (copula-transformed per channel) and the
/// envelope.
pub fn tmif_multivariate<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
    sel: &ChannelSelection,
) -> Result<Tmif<F>> {
    tmif_multivariate_with(eeg, env, grid, sel, &MiOptions::default())
}

/// [`tmif_multivariate`] with explicit estimator options.
pub fn tmif_multivariate_with<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
    sel: &ChannelSelection,
    opts: &MiOptions,
) -> Result<Tmif<F>> {
    check_inputs(eeg, env, grid)?;
    let indices = sel.indices(eeg)?;
    let n = env.len();

    let env_copula = WindowedCopula::new(env)?;
    let chan_copulas: Vec<WindowedCopula> = indices
        .iter()
        .map(|&c| WindowedCopula::new(&eeg.channel(c)))
        .collect::<Result<_>>()?;

    let values: Vec<f64> = grid
        .lags()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|lag| {
            let (a, b) = window(n, lag);
            let m = b - a;
            let table = QnormTable::new(m);
            let mut scratch = Vec::with_capacity(m);
            let mut env_z = vec![0.0; m];
            env_copula.transform_window(a, b, &table, &mut scratch, &mut env_z)?;
            let shift = |i: usize| (i as i64 + lag) as usize;
            let mut chan_z = vec![vec![0.0; m]; chan_copulas.len()];
            for (copula, buf) in chan_copulas.iter().zip(chan_z.iter_mut()) {
                copula.transform_window(shift(a), shift(b), &table, &mut scratch, buf)?;
            }
            let x_refs: Vec<&[f64]> = chan_z.iter().map(|v| v.as_slice()).collect();
            gaussian_mi_cols(&x_refs, &[&env_z], opts)
        })
        .collect::<Result<_>>()?;

    Ok(Tmif::new(
        grid.clone(),
        values.into_iter().map(F::cast).collect(),
    ))
}

/// Single-channel TMIFs: one MI curve per channel (`channels × lags`).
pub fn tmif_single_channel<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
) -> Result<TmifMatrix<F>> {
    tmif_single_channel_with(eeg, env, grid, &MiOptions::default())
}

/// [`tmif_single_channel`] with explicit estimator options.
pub fn tmif_single_channel_with<F: Scalar>(
    eeg: &Recording<F>,
    env: &[F],
    grid: &LagGrid,
    opts: &MiOptions,
) -> Result<TmifMatrix<F>> {
    check_inputs(eeg, env, grid)?;
    let n = env.len();
    let n_channels = eeg.n_channels();

    let env_copula = WindowedCopula::new(env)?;
    let chan_copulas: Vec<WindowedCopula> = (0..n_channels)
        .map(|c| WindowedCopula::new(&eeg.channel(c)))
        .collect::<Result<_>>()?;

    // parallel over lags so the quantile table and envelope window are
    // computed once and shared by every channel
    let per_lag: Vec<Vec<f64>> = grid
        .lags()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|lag| {
            let (a, b) = window(n, lag);
            let m = b - a;
            let table = QnormTable::new(m);
            let mut scratch = Vec::with_capacity(m);
            let mut env_z = vec![0.0; m];
            env_copula.transform_window(a, b, &table, &mut scratch, &mut env_z)?;
            let shift = |i: usize| (i as i64 + lag) as usize;
            let mut ch_z = vec![0.0; m];
            let mut col = Vec::with_capacity(chan_copulas.len());
            for copula in &chan_copulas {
                copula.transform_window(shift(a), shift(b), &table, &mut scratch, &mut ch_z)?;
                col.push(gaussian_mi_cols(&[&ch_z], &[&env_z], opts)?);
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;

    let mut values = Array2::zeros((n_channels, grid.len()));
    for (j, col) in per_lag.iter().enumerate() {
        for (c, &v) in col.iter().enumerate() {
            values[(c, j)] = F::cast(v);
        }
    }
    Ok(TmifMatrix {
        grid: grid.clone(),
        channel_names: eeg.channel_names.clone(),
        values,
    })
}

/// Arithmetic mean of the TMIF over lags whose time falls in
/// `[window_ms.0, window_ms.1]` (inclusive). The window must lie inside the
/// grid.
pub fn mean_mi<F: Scalar>(tmif: &Tmif<F>, window_ms: (f64, f64)) -> Result<F> {
    let grid = &tmif.grid;
    let (lo, hi) = window_ms;
    let grid_lo = grid.time_ms(grid.lag_min());
    let grid_hi = grid.time_ms(grid.lag_max());
    if lo >= hi || lo < grid_lo - 1e-9 || hi > grid_hi + 1e-9 {
        return Err(Error::WindowOutsideGrid {
            lo_ms: lo,
            hi_ms: hi,
            grid_lo_ms: grid_lo,
            grid_hi_ms: grid_hi,
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (lag, &v) in grid.lags().zip(&tmif.values) {
        let t = grid.time_ms(lag);
        if t >= lo - 1e-9 && t <= hi + 1e-9 {
            sum += v.as_f64();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::WindowOutsideGrid {
            lo_ms: lo,
            hi_ms: hi,
            grid_lo_ms: grid_lo,
            grid_hi_ms: grid_hi,
        });
    }
    Ok(F::cast(sum / count as f64))
}

/// The default 0–400 ms integration window for mean MI summaries.
pub const MEAN_MI_WINDOW_MS: (f64, f64) = (0.0, 400.0);
