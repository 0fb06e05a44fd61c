//! Aphasia detection: RBF SVM over per-band TMIF features with nested
//! leave-one-subject-out cross-validation.
//!
//! The outer loop holds one subject out; an inner stratified k-fold on the
//! remaining subjects picks the `C` hyperparameter and the TMIF pruning
//! length by validation accuracy (ties prefer the smaller `C`, then the
//! shorter pruning). Feature standardization is always fit on the training
//! side of whichever split is being evaluated, so the held-out subject
//! never leaks into scaling or hyperparameter choice.

mod metrics;
mod svm;

pub use metrics::{confusion_metrics, roc_auc, ConfusionMetrics, RocPoint};
pub use svm::{svm_train, SvmModel, SvmParams};

use crate::model::{Band, Group, Subject};
use crate::{derive_seed, Error, Result, Scalar};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Nested-CV configuration.
#[derive(Debug, Clone)]
pub struct CvConfig {
    /// Feature bands (the five narrow bands by default).
    pub bands: Vec<Band>,
    pub c_grid: Vec<f64>,
    /// Candidate TMIF end-lags in ms (features run from the grid start).
    pub prune_ms: Vec<f64>,
    pub inner_folds: usize,
    pub seed: u64,
    pub svm_tol: f64,
    pub svm_max_iter: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            bands: Band::NARROW.to_vec(),
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            prune_ms: vec![100.0, 200.0, 300.0, 400.0, 500.0],
            inner_folds: 5,
            seed: 0,
            svm_tol: 1e-3,
            svm_max_iter: 100_000,
        }
    }
}

/// Concatenated per-band TMIF values (pruned to an end-lag) plus age.
#[derive(Debug, Clone)]
pub struct FeatureVector {
    pub subject_id: String,
    /// +1 for aphasia, −1 for control.
    pub label: f64,
    pub values: Vec<f64>,
}

/// Build one subject's feature vector from its own TMIFs and age.
pub fn build_features<F: Scalar>(
    subject: &Subject<F>,
    bands: &[Band],
    prune_end_ms: f64,
) -> Result<FeatureVector> {
    let mut values = Vec::new();
    for &band in bands {
        let tmif = subject.tmif(band)?;
        let grid = &tmif.grid;
        let mut kept = 0usize;
        for (lag, &v) in grid.lags().zip(&tmif.values) {
            if grid.time_ms(lag) <= prune_end_ms + 1e-9 {
                values.push(v.as_f64());
                kept += 1;
            }
        }
        if kept == 0 {
            return Err(Error::WindowOutsideGrid {
                lo_ms: grid.time_ms(grid.lag_min()),
                hi_ms: prune_end_ms,
                grid_lo_ms: grid.time_ms(grid.lag_min()),
                grid_hi_ms: grid.time_ms(grid.lag_max()),
            });
        }
    }
    values.push(subject.age);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRecording(format!(
            "subject {}: non-finite feature",
            subject.id
        )));
    }
    Ok(FeatureVector {
        subject_id: subject.id.clone(),
        label: if subject.group == Group::Aphasia {
            1.0
        } else {
            -1.0
        },
        values,
    })
}

/// Per-feature standardization (mean 0, population std 1; constant features
/// are centered only).
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&Vec<f64>]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut std = vec![0.0; d];
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// RBF width rule: `γ = 1 / (d · var(X))` over all entries of the
/// (standardized) training matrix.
fn gamma_rule(rows: &[Vec<f64>]) -> f64 {
    let d = rows[0].len();
    let n = (rows.len() * d) as f64;
    let mean: f64 = rows.iter().flat_map(|r| r.iter()).sum::<f64>() / n;
    let var: f64 = rows
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubjectOutcome {
    pub id: String,
    pub group: Group,
    pub decision_value: f64,
    pub predicted: Group,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldChoice {
    pub held_out: String,
    pub c: f64,
    pub prune_ms: f64,
    pub inner_accuracy: f64,
}

/// Classifier evaluation over all held-out predictions.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub n_subjects: usize,
    pub n_aphasia: usize,
    pub n_control: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub subjects: Vec<SubjectOutcome>,
    pub folds: Vec<FoldChoice>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// ROC as CSV (`fpr,tpr,threshold`).
    pub fn roc_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "fpr,tpr,threshold")?;
        for p in &self.roc {
            writeln!(w, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
        }
        Ok(())
    }
}

/// Stratified fold assignment: within each class, shuffled indices are
/// dealt round-robin, so every fold holds both classes whenever each class
/// has at least `k` members.
fn stratified_folds(labels: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut folds = vec![0usize; labels.len()];
    for class in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            folds[i] = pos % k;
        }
    }
    folds
}

/// Evaluate the full nested-LOSO pipeline.
pub fn nested_loso_evaluate<F: Scalar>(
    cohort: &[Subject<F>],
    cfg: &CvConfig,
) -> Result<EvaluationReport> {
    evaluate_with_bands(cohort, &cfg.bands, cfg)
}

/// Nested LOSO with an explicit feature-band list (ablation entry point).
pub fn evaluate_with_bands<F: Scalar>(
    cohort: &[Subject<F>],
    bands: &[Band],
    cfg: &CvConfig,
) -> Result<EvaluationReport> {
    let n = cohort.len();
    let n_aphasia = cohort.iter().filter(|s| s.group == Group::Aphasia).count();
    let n_control = n - n_aphasia;
    if n_aphasia < 3 || n_control < 3 {
        return Err(Error::TooFewSubjects {
            n: n_aphasia.min(n_control),
            min: 3,
            context: "per class for nested LOSO",
        });
    }

    // features once per pruning length; standardization is applied per split
    let mut prune_grid = cfg.prune_ms.clone();
    prune_grid.sort_by(f64::total_cmp);
    let mut c_grid = cfg.c_grid.clone();
    c_grid.sort_by(f64::total_cmp);
    let features: Vec<Vec<FeatureVector>> = prune_grid
        .iter()
        .map(|&prune| {
            cohort
                .iter()
                .map(|s| build_features(s, bands, prune))
                .collect()
        })
        .collect::<Result<_>>()?;
    let labels: Vec<f64> = features[0].iter().map(|f| f.label).collect();

    let outcomes: Vec<(SubjectOutcome, FoldChoice)> = (0..n)
        .into_par_iter()
        .map(|left_out| {
            let train_idx: Vec<usize> = (0..n).filter(|&i| i != left_out).collect();
            let train_labels: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();
            let min_class = train_labels
                .iter()
                .filter(|&&l| l > 0.0)
                .count()
                .min(train_labels.iter().filter(|&&l| l < 0.0).count());
            let k = cfg.inner_folds.min(min_class);
            if k < 2 {
                return Err(Error::TooFewSubjects {
                    n: min_class,
                    min: 2,
                    context: "per class in inner folds",
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, left_out as u64));
            let folds = stratified_folds(&train_labels, k, &mut rng);

            // grid search by inner validation accuracy;
            // ties: smaller C, then shorter pruning
            let mut best: Option<(f64, usize, usize)> = None; // (acc, c_idx, prune_idx)
            for (ci, &c) in c_grid.iter().enumerate() {
                for (pi, _) in prune_grid.iter().enumerate() {
                    let mut correct = 0usize;
                    let mut total = 0usize;
                    for fold in 0..k {
                        let fit_idx: Vec<usize> = train_idx
                            .iter()
                            .enumerate()
                            .filter(|&(pos, _)| folds[pos] != fold)
                            .map(|(_, &i)| i)
                            .collect();
                        let val_idx: Vec<usize> = train_idx
                            .iter()
                            .enumerate()
                            .filter(|&(pos, _)| folds[pos] == fold)
                            .map(|(_, &i)| i)
                            .collect();
                        let (c_ok, c_tot) =
                            fit_and_score(&features[pi], &fit_idx, &val_idx, c, cfg)?;
                        correct += c_ok;
                        total += c_tot;
                    }
                    let acc = correct as f64 / total as f64;
                    let better = match best {
                        None => true,
                        Some((b_acc, _, _)) => acc > b_acc,
                    };
                    if better {
                        best = Some((acc, ci, pi));
                    }
                }
            }
            let (inner_accuracy, ci, pi) = best.expect("grid not empty");
            let c = c_grid[ci];

            // refit on the whole outer-training set
            let feats = &features[pi];
            let rows: Vec<&Vec<f64>> = train_idx.iter().map(|&i| &feats[i].values).collect();
            let scaler = Standardizer::fit(&rows);
            let train_x: Vec<Vec<f64>> = train_idx
                .iter()
                .map(|&i| scaler.transform(&feats[i].values))
                .collect();
            let train_y: Vec<f64> = train_idx.iter().map(|&i| feats[i].label).collect();
            let gamma = gamma_rule(&train_x);
            let mut params = SvmParams::new(c, gamma);
            params.tol = cfg.svm_tol;
            params.max_iter = cfg.svm_max_iter;
            let model = svm_train(&train_x, &train_y, &params)?;
            let dv = model.decide(&scaler.transform(&feats[left_out].values))?;

            let subject = &cohort[left_out];
            Ok((
                SubjectOutcome {
                    id: subject.id.clone(),
                    group: subject.group,
                    decision_value: dv,
                    predicted: if dv >= 0.0 {
                        Group::Aphasia
                    } else {
                        Group::Control
                    },
                },
                FoldChoice {
                    held_out: subject.id.clone(),
                    c,
                    prune_ms: prune_grid[pi],
                    inner_accuracy,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let (subjects, folds): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let predicted: Vec<bool> = subjects
        .iter()
        .map(|o| o.predicted == Group::Aphasia)
        .collect();
    let actual: Vec<bool> = subjects.iter().map(|o| o.group == Group::Aphasia).collect();
    let scores: Vec<f64> = subjects.iter().map(|o| o.decision_value).collect();
    let m = confusion_metrics(&predicted, &actual);
    let (roc, auc) = roc_auc(&scores, &actual)?;

    Ok(EvaluationReport {
        n_subjects: n,
        n_aphasia,
        n_control,
        accuracy: m.accuracy,
        f1: m.f1,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        auc,
        roc,
        subjects,
        folds,
    })
}

fn fit_and_score(
    feats: &[FeatureVector],
    fit_idx: &[usize],
    val_idx: &[usize],
    c: f64,
    cfg: &CvConfig,
) -> Result<(usize, usize)> {
    let rows: Vec<&Vec<f64>> = fit_idx.iter().map(|&i| &feats[i].values).collect();
    let scaler = Standardizer::fit(&rows);
    let x: Vec<Vec<f64>> = fit_idx
        .iter()
        .map(|&i| scaler.transform(&feats[i].values))
        .collect();
    let y: Vec<f64> = fit_idx.iter().map(|&i| feats[i].label).collect();
    let gamma = gamma_rule(&x);
    let mut params = SvmParams::new(c, gamma);
    params.tol = cfg.svm_tol;
    params.max_iter = cfg.svm_max_iter;
    let model = svm_train(&x, &y, &params)?;
    let mut correct = 0;
    for &i in val_idx {
        let dv = model.decide(&scaler.transform(&feats[i].values))?;
        let predicted = if dv >= 0.0 { 1.0 } else { -1.0 };
        if predicted == feats[i].label {
            correct += 1;
        }
    }
    Ok((correct, val_idx.len()))
}

/// Performance change when one band's features are removed.
#[derive(Debug, Clone, Serialize)]
pub struct AblationEntry {
    pub dropped_band: Band,
    pub accuracy: f64,
    pub f1: f64,
    pub auc: f64,
    pub delta_accuracy: f64,
    pub delta_f1: f64,
    pub delta_auc: f64,
}

/// Re-run the nested CV without `band` and report the metric drops versus
/// the full model.
pub fn ablate_band<F: Scalar>(
    cohort: &[Subject<F>],
    band: Band,
    cfg: &CvConfig,
    baseline: &EvaluationReport,
) -> Result<AblationEntry> {
    let reduced_bands: Vec<Band> = cfg.bands.iter().copied().filter(|&b| b != band).collect();
    if reduced_bands.len() == cfg.bands.len() {
        return Err(Error::MissingBand {
            id: "ablation".into(),
            band,
        });
    }
    let reduced = evaluate_with_bands(cohort, &reduced_bands, cfg)?;
    Ok(AblationEntry {
        dropped_band: band,
        accuracy: reduced.accuracy,
        f1: reduced.f1,
        auc: reduced.auc,
        delta_accuracy: baseline.accuracy - reduced.accuracy,
        delta_f1: baseline.f1 - reduced.f1,
        delta_auc: baseline.auc - reduced.auc,
    })
}

/// Full ablation study: baseline plus one entry per feature band.
#[derive(Debug, Clone, Serialize)]
pub struct AblationStudy {
    pub baseline_accuracy: f64,
    pub baseline_f1: f64,
    pub baseline_auc: f64,
    pub entries: Vec<AblationEntry>,
}

pub fn ablation_study<F: Scalar>(cohort: &[Subject<F>], cfg: &CvConfig) -> Result<AblationStudy> {
    let baseline = nested_loso_evaluate(cohort, cfg)?;
    let entries = cfg
        .bands
        .clone()
        .into_iter()
        .map(|band| ablate_band(cohort, band, cfg, &baseline))
        .collect::<Result<_>>()?;
    Ok(AblationStudy {
        baseline_accuracy: baseline.accuracy,
        baseline_f1: baseline.f1,
        baseline_auc: baseline.auc,
        entries,
    })
}
