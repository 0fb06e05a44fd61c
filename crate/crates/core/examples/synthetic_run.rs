//! Minimal library walkthrough: generate a synthetic cohort and evaluate
//! the nested-LOSO classifier on it.

use envtrack::classifier::{nested_loso_evaluate, CvConfig};
use envtrack::model::{Band, LagGrid};
use envtrack::synthcohort::{cohort_data, SynthSpec};

fn main() -> envtrack::Result<()> {
    let spec = SynthSpec {
        n_controls: 8,
        n_patients: 10,
        duration_min: 1.0,
        ..SynthSpec::default().with_effect(&[Band::Delta, Band::Theta], 0.5)
    };
    let grid = LagGrid::default_128(); // -200..500 ms, 91 lags
    let cohort = cohort_data::<f64>(&spec, &grid, &Band::NARROW)?;
    let subjects = cohort.subjects_with_tmifs(&Band::NARROW)?;
    let report = nested_loso_evaluate(&subjects, &CvConfig::default())?;
    println!(
        "accuracy {:.1}%  AUC {:.1}%",
        report.accuracy * 100.0,
        report.auc * 100.0
    );
    Ok(())
}
