//! Stage implementations. Each stage writes its artifacts under
//! `out/<run-id>/<stage>/` together with a `run.json` log.

use crate::config::Config;
use crate::runlog::RunLog;
use anyhow::{anyhow, bail};
use envtrack::classifier::{ablate_band, nested_loso_evaluate};
use envtrack::clusterstats::{
    build_adjacency, spatiotemporal_cluster_test, temporal_cluster_test, ClusterConfig,
};
use envtrack::dsp;
use envtrack::gcmi::tmif_single_channel;
use envtrack::model::{
    read_matrix, write_matrix, Band, ChannelLayout, CohortManifest, Group, Recording,
    RecordingKind, Subject, Tmif,
};
use envtrack::nullperm::significance_level;
use envtrack::pipeline::{load_cohort, tmif_from_matrix, tmif_to_matrix, CohortData};
use envtrack::timecourse::{
    band_correlation_csv, band_correlation_matrix, between_subject_stability,
    classification_vs_duration, fisher_z_compare, split_half_csv, split_half_reliability,
    within_subject_stability, DurationGrid,
};
use envtrack::{derive_seed, Real};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// Re-express `stem` (relative to `old_root`) relative to `new_root`,
/// falling back to an absolute path when they share no prefix.
fn rebase(
    stem: &std::path::Path,
    old_root: &std::path::Path,
    new_root: &std::path::Path,
) -> PathBuf {
    if stem.is_absolute() {
        return stem.to_path_buf();
    }
    let absolutize = |p: &std::path::Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().unwrap_or_default().join(p)
        }
    };
    let target = absolutize(&old_root.join(stem));
    let base = absolutize(new_root);
    let t: Vec<_> = target.components().collect();
    let b: Vec<_> = base.components().collect();
    let common = t.iter().zip(&b).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return target;
    }
    let mut rel = PathBuf::new();
    for _ in common..b.len() {
        rel.push("..");
    }
    for c in &t[common..] {
        rel.push(c);
    }
    rel
}

pub struct StageCtx {
    pub config: Config,
    pub stage_dir: PathBuf,
    pub log: RunLog,
}

impl StageCtx {
    pub fn new(config: Config, stage: &str, jobs: usize) -> anyhow::Result<Self> {
        let stage_dir = config.out_dir.join(config.run_id()).join(stage);
        std::fs::create_dir_all(&stage_dir)?;
        let snapshot = serde_json::to_value(&config)?;
        Ok(Self {
            log: RunLog::new(stage, config.seed, jobs, snapshot),
            config,
            stage_dir,
        })
    }

    fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<PathBuf> {
        let path = self.stage_dir.join(name);
        std::fs::write(&path, text)?;
        self.log.add_output(&path)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        self.write_text(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    fn write_recording(&mut self, stem: &str, rec: &Recording<Real>) -> anyhow::Result<PathBuf> {
        let path = self.stage_dir.join(stem);
        write_matrix(rec, &path)?;
        self.log.add_output(&path.with_extension("f32"))?;
        self.log.add_output(&path.with_extension("json"))?;
        Ok(path)
    }

    pub fn finish(self) -> anyhow::Result<()> {
        self.log.write(&self.stage_dir)
    }

    fn load_manifest(&mut self) -> anyhow::Result<CohortManifest> {
        let path = self.config.dataset_manifest()?.to_path_buf();
        self.log.add_input(&path)?;
        Ok(CohortManifest::load(&path)?)
    }

    fn analysis_bands(&self) -> Vec<Band> {
        self.config.bands.clone()
    }

    fn cohort(&mut self, bands: &[Band]) -> anyhow::Result<CohortData<Real>> {
        let manifest = self.load_manifest()?;
        let grid = self.config.lag_grid()?;
        let selection = self.config.tmif.as_ref().and_then(|t| t.selection.clone());
        let filter_fs = self.config.preprocess.clone().unwrap_or_default().filter_fs;
        Ok(load_cohort(&manifest, bands, &grid, selection, filter_fs)?)
    }
}

// ---------------------------------------------------------------- synth

pub fn synth(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let mut spec = ctx
        .config
        .synth
        .clone()
        .ok_or_else(|| anyhow!("config section `synth` is required"))?;
    spec.seed = ctx.config.seed;
    let manifest = envtrack::synthcohort::generate_cohort::<Real>(&spec, &ctx.stage_dir)?;
    for subject in &manifest.subjects {
        ctx.log
            .add_output(&ctx.stage_dir.join(subject.eeg.with_extension("f32")))?;
    }
    for stem in manifest.envelopes.values() {
        ctx.log
            .add_output(&ctx.stage_dir.join(stem.with_extension("f32")))?;
    }
    ctx.log.add_output(&ctx.stage_dir.join("manifest.json"))?;
    println!(
        "synth: wrote {} subjects to {}",
        manifest.subjects.len(),
        ctx.stage_dir.display()
    );
    Ok(())
}

// ------------------------------------------------------------- envelope

pub fn envelope(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let stage = ctx
        .config
        .envelope
        .clone()
        .ok_or_else(|| anyhow!("config section `envelope` is required"))?;
    ctx.log.add_input(&stage.audio)?;
    let audio: Recording<Real> = dsp::read_wav(&stage.audio)?;
    let bank = dsp::GammatoneBank::new(audio.fs)?;
    let broadband = dsp::extract_envelope(&audio, &bank, stage.env_fs)?;
    let broadband_rec = Recording::mono(
        broadband.clone(),
        stage.env_fs,
        "envelope",
        RecordingKind::Audio,
    )?;
    ctx.write_recording("envelope_broadband", &broadband_rec)?;

    let analysis_fs = ctx.config.grid.fs;
    let specs: Vec<_> = ctx.analysis_bands().iter().map(|b| b.canonical()).collect();
    let set = dsp::band_envelopes(&broadband, stage.env_fs, &specs, analysis_fs)?;
    for (band, series) in &set.bands {
        let rec = Recording::mono(
            series.clone(),
            analysis_fs,
            "envelope",
            RecordingKind::Audio,
        )?;
        ctx.write_recording(&format!("env_{band}"), &rec)?;
    }
    println!("envelope: {} bands at {} Hz", set.bands.len(), analysis_fs);
    Ok(())
}

// ------------------------------------------------------------ preprocess

pub fn preprocess(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let manifest = ctx.load_manifest()?;
    let stage = ctx.config.preprocess.clone().unwrap_or_default();
    let analysis_fs = ctx.config.grid.fs;
    let specs: Vec<_> = ctx.analysis_bands().iter().map(|b| b.canonical()).collect();

    let mut updated = manifest.clone();
    // inherited references are re-based onto the new manifest's directory
    let new_root = ctx.stage_dir.clone();
    for stem in updated.envelopes.values_mut() {
        *stem = rebase(stem, &manifest.root, &new_root);
    }
    if let Some(layout) = updated.layout.as_mut() {
        *layout = rebase(layout, &manifest.root, &new_root);
    }
    for (entry, original) in updated.subjects.iter_mut().zip(&manifest.subjects) {
        let raw: Recording<Real> = read_matrix(manifest.resolve(&original.eeg))?;
        let bands = dsp::preprocess_eeg(&raw, &specs, stage.filter_fs, analysis_fs)?;
        entry.eeg = rebase(&original.eeg, &manifest.root, &new_root);
        for (band, rec) in bands {
            let stem = format!("band_{}_{}", entry.id, band);
            ctx.write_recording(&stem, &rec)?;
            entry.band_eeg.insert(band, PathBuf::from(stem));
        }
    }
    updated.root = ctx.stage_dir.clone();
    let manifest_path = ctx.stage_dir.join("manifest.json");
    updated.save(&manifest_path)?;
    ctx.log.add_output(&manifest_path)?;
    println!(
        "preprocess: {} subjects x {} bands",
        updated.subjects.len(),
        specs.len()
    );
    Ok(())
}

// ----------------------------------------------------------------- tmif

pub fn tmif(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let bands = ctx.analysis_bands();
    let cohort = ctx.cohort(&bands)?;
    let single_channel = ctx.config.tmif.clone().unwrap_or_default().single_channel;

    let mut manifest = ctx.load_manifest()?;
    let old_root = manifest.root.clone();
    let new_root = ctx.stage_dir.clone();
    for stem in manifest.envelopes.values_mut() {
        *stem = rebase(stem, &old_root, &new_root);
    }
    if let Some(layout) = manifest.layout.as_mut() {
        *layout = rebase(layout, &old_root, &new_root);
    }
    for entry in manifest.subjects.iter_mut() {
        entry.eeg = rebase(&entry.eeg, &old_root, &new_root);
        for stem in entry.band_eeg.values_mut() {
            *stem = rebase(stem, &old_root, &new_root);
        }
    }

    for (i, records) in cohort.subjects.iter().enumerate() {
        for &band in &bands {
            let tm = cohort.tmif_of(i, band)?;
            let mut csv = Vec::new();
            tm.to_csv(&mut csv)?;
            ctx.write_text(
                &format!("tmif_{}_{band}.csv", records.id),
                &String::from_utf8(csv)?,
            )?;
            let stem = format!("tmif_{}_{band}", records.id);
            ctx.write_recording(&stem, &tmif_to_matrix(&tm))?;
            manifest.subjects[i].tmif.insert(band, PathBuf::from(stem));
        }
        if single_channel {
            for &band in &bands {
                let matrix = tmif_single_channel(
                    records.band(band)?,
                    cohort.envelopes.get(band)?,
                    &cohort.grid,
                )?;
                let mut csv = Vec::new();
                matrix.to_csv(&mut csv)?;
                ctx.write_text(
                    &format!("tmif_sc_{}_{band}.csv", records.id),
                    &String::from_utf8(csv)?,
                )?;
            }
        }
    }
    manifest.root = ctx.stage_dir.clone();
    let manifest_path = ctx.stage_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    ctx.log.add_output(&manifest_path)?;
    println!(
        "tmif: {} subjects x {} bands",
        cohort.subjects.len(),
        bands.len()
    );
    Ok(())
}

/// Load subjects with TMIFs: from the manifest's tmif entries when present,
/// otherwise computed from the band EEG.
fn subjects_with_tmifs(ctx: &mut StageCtx, bands: &[Band]) -> anyhow::Result<Vec<Subject<Real>>> {
    let manifest = ctx.load_manifest()?;
    let has_all = manifest
        .subjects
        .iter()
        .all(|s| bands.iter().all(|b| s.tmif.contains_key(b)));
    if has_all {
        let mut subjects = Vec::new();
        for entry in &manifest.subjects {
            let mut subject = Subject::new(entry.id.clone(), entry.group, entry.age)?;
            for &band in bands {
                let rec: Recording<Real> = read_matrix(manifest.resolve(&entry.tmif[&band]))?;
                subject.tmifs.insert(band, tmif_from_matrix(&rec)?);
            }
            subjects.push(subject);
        }
        Ok(subjects)
    } else {
        let cohort = ctx.cohort(bands)?;
        Ok(cohort.subjects_with_tmifs(bands)?)
    }
}

// ----------------------------------------------------------------- null

#[derive(Serialize)]
struct NullSummary {
    subject: String,
    group: Group,
    band: Band,
    n_perm: usize,
    significance_level: f64,
    tmif_max: f64,
    exceeds: bool,
}

pub fn null(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let stage = ctx.config.null.clone().unwrap_or_default();
    let bands = stage.bands.unwrap_or_else(|| ctx.analysis_bands());
    let cohort = ctx.cohort(&bands)?;
    let mut summary = Vec::new();
    for (i, records) in cohort.subjects.iter().enumerate() {
        for (bi, &band) in bands.iter().enumerate() {
            let seed = derive_seed(ctx.config.seed, (i * 64 + bi) as u64);
            let null = significance_level(
                records.band(band)?,
                cohort.envelopes.get(band)?,
                &cohort.grid,
                &cohort.selection,
                band.canonical(),
                stage.n_perm,
                seed,
            )?;
            let mut csv = Vec::new();
            null.to_csv(&mut csv)?;
            ctx.write_text(
                &format!("nulldist_{}_{band}.csv", records.id),
                &String::from_utf8(csv)?,
            )?;
            let tmif_max = cohort.tmif_of(i, band)?.max_value();
            summary.push(NullSummary {
                subject: records.id.clone(),
                group: records.group,
                band,
                n_perm: stage.n_perm,
                significance_level: null.significance_level,
                tmif_max,
                exceeds: tmif_max > null.significance_level,
            });
        }
    }
    ctx.write_json("significance_levels.json", &summary)?;
    println!("null: {} subject x band levels", summary.len());
    Ok(())
}

// --------------------------------------------------------------- cluster

pub fn cluster(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let stage = ctx.config.cluster.clone().unwrap_or_default();
    let bands = ctx.analysis_bands();
    let cfg = ClusterConfig {
        n_perm: stage.n_perm,
        cluster_alpha: stage.cluster_alpha,
        tail: stage.tail,
        seed: ctx.config.seed,
    };

    let subjects = subjects_with_tmifs(ctx, &bands)?;
    for &band in &bands {
        let controls: Vec<Tmif<Real>> = subjects
            .iter()
            .filter(|s| s.group == Group::Control)
            .map(|s| s.tmif(band).cloned())
            .collect::<Result<_, _>>()?;
        let patients: Vec<Tmif<Real>> = subjects
            .iter()
            .filter(|s| s.group == Group::Aphasia)
            .map(|s| s.tmif(band).cloned())
            .collect::<Result<_, _>>()?;
        let result = temporal_cluster_test(&controls, &patients, &cfg)?;
        ctx.write_text(&format!("cluster_{band}.json"), &(result.to_json()? + "\n"))?;
        let mut csv = Vec::new();
        result.t_values_csv(&mut csv)?;
        ctx.write_text(&format!("cluster_{band}_t.csv"), &String::from_utf8(csv)?)?;
        let significant = result.significant(0.05).count();
        println!(
            "cluster[{band}]: {} clusters, {} below p=0.05{}",
            result.clusters.len(),
            significant,
            if result.exhaustive {
                " (exhaustive)"
            } else {
                ""
            }
        );
    }

    if stage.spatiotemporal {
        let manifest = ctx.load_manifest()?;
        let layout_path = manifest
            .layout
            .as_ref()
            .ok_or_else(|| anyhow!("spatiotemporal test needs a layout in the manifest"))?;
        let layout = ChannelLayout::from_csv_file(manifest.resolve(layout_path))?;
        let adjacency = build_adjacency(&layout, stage.adjacency_k)?;
        let cohort = ctx.cohort(&bands)?;
        for &band in &bands {
            let mut controls = Vec::new();
            let mut patients = Vec::new();
            for records in &cohort.subjects {
                let matrix = tmif_single_channel(
                    records.band(band)?,
                    cohort.envelopes.get(band)?,
                    &cohort.grid,
                )?;
                match records.group {
                    Group::Control => controls.push(matrix),
                    Group::Aphasia => patients.push(matrix),
                }
            }
            let result = spatiotemporal_cluster_test(&controls, &patients, &adjacency, &cfg)?;
            ctx.write_text(
                &format!("cluster_spatiotemporal_{band}.json"),
                &(result.to_json()? + "\n"),
            )?;
        }
    }
    Ok(())
}

// --------------------------------------------------------------- classify

pub fn classify(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let stage = ctx.config.classify.clone().unwrap_or_default();
    let cv = ctx.config.cv_config();
    let subjects = subjects_with_tmifs(ctx, &cv.bands.clone())?;
    let report = nested_loso_evaluate(&subjects, &cv)?;
    ctx.write_text("report.json", &(report.to_json()? + "\n"))?;
    let mut roc = Vec::new();
    report.roc_csv(&mut roc)?;
    ctx.write_text("roc.csv", &String::from_utf8(roc)?)?;
    println!(
        "classify: accuracy {:.2}% / F1 {:.2}% / AUC {:.2}% / sens {:.2}% / spec {:.2}%",
        report.accuracy * 100.0,
        report.f1 * 100.0,
        report.auc * 100.0,
        report.sensitivity * 100.0,
        report.specificity * 100.0
    );

    if stage.ablation {
        let mut entries = Vec::new();
        for &band in &cv.bands.clone() {
            entries.push(ablate_band(&subjects, band, &cv, &report)?);
        }
        ctx.write_json("ablation.json", &entries)?;
        for e in &entries {
            println!(
                "ablation[-{}]: accuracy drop {:+.2} pts, AUC drop {:+.2} pts",
                e.dropped_band,
                e.delta_accuracy * 100.0,
                e.delta_auc * 100.0
            );
        }
    }
    Ok(())
}

// --------------------------------------------------------------- duration

pub fn duration(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let stage = ctx
        .config
        .duration
        .clone()
        .ok_or_else(|| anyhow!("config section `duration` (with `minutes`) is required"))?;
    let durations = DurationGrid::new(stage.minutes)?;
    let cv = ctx.config.cv_config();
    let cohort = ctx.cohort(&Band::ALL)?;

    let curve = classification_vs_duration(&cohort, &durations, &cv)?;
    let mut csv = Vec::new();
    curve.to_csv(&mut csv)?;
    ctx.write_text("classification_vs_duration.csv", &String::from_utf8(csv)?)?;
    ctx.write_json("classification_vs_duration.json", &curve)?;

    let narrow = Band::NARROW.to_vec();
    let within = within_subject_stability(&cohort, &durations, &narrow)?;
    let mut csv = Vec::new();
    within.to_csv(&mut csv)?;
    ctx.write_text("within_subject_stability.csv", &String::from_utf8(csv)?)?;
    let between = between_subject_stability(&cohort, &durations, &narrow)?;
    let mut csv = Vec::new();
    between.to_csv(&mut csv)?;
    ctx.write_text("between_subject_stability.csv", &String::from_utf8(csv)?)?;
    #[derive(Serialize)]
    struct Knees {
        classification_knee_min: Option<f64>,
        within_subject_knee_min: Option<f64>,
        between_subject_knee_min: Option<f64>,
    }
    ctx.write_json(
        "knees.json",
        &Knees {
            classification_knee_min: curve.knee_min,
            within_subject_knee_min: within.knee_min,
            between_subject_knee_min: between.knee_min,
        },
    )?;
    println!(
        "duration: knees at {:?} (classification) / {:?} (within) / {:?} (between) minutes",
        curve.knee_min, within.knee_min, between.knee_min
    );
    Ok(())
}

// ------------------------------------------------------------ reliability

pub fn reliability(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let narrow = Band::NARROW.to_vec();
    let cohort = ctx.cohort(&narrow)?;
    let entries = split_half_reliability(&cohort, &narrow)?;
    let mut csv = Vec::new();
    split_half_csv(&entries, &mut csv)?;
    ctx.write_text("split_half.csv", &String::from_utf8(csv)?)?;
    ctx.write_json("split_half.json", &entries)?;

    // group comparison per band (Fisher z, Bonferroni across bands)
    #[derive(Serialize)]
    struct GroupComparison {
        band: Band,
        r_aphasia: f64,
        r_control: f64,
        z: f64,
        p_corrected: f64,
    }
    let mut comparisons = Vec::new();
    for &band in &narrow {
        let get = |group: Group| {
            entries
                .iter()
                .find(|e| e.band == band && e.group == group)
                .map(|e| (e.r, e.n))
                .expect("entry exists")
        };
        let (ra, na) = get(Group::Aphasia);
        let (rc, nc) = get(Group::Control);
        let (z, p) = fisher_z_compare(rc, nc, ra, na)?;
        comparisons.push(GroupComparison {
            band,
            r_aphasia: ra,
            r_control: rc,
            z,
            p_corrected: (p * narrow.len() as f64).min(1.0),
        });
    }
    ctx.write_json("group_comparison.json", &comparisons)?;
    println!("reliability: {} band x group entries", entries.len());
    Ok(())
}

// -------------------------------------------------------------- bandcorr

pub fn bandcorr(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let bands = [
        Band::Broad,
        Band::Delta,
        Band::Theta,
        Band::Alpha,
        Band::Beta,
        Band::Gamma,
    ];
    let subjects = subjects_with_tmifs(ctx, &bands)?;
    for group in [Group::Aphasia, Group::Control] {
        let matrix = band_correlation_matrix(&subjects, group, &bands)?;
        let mut csv = Vec::new();
        band_correlation_csv(&matrix, &bands, &mut csv)?;
        ctx.write_text(
            &format!("band_correlation_{group}.csv"),
            &String::from_utf8(csv)?,
        )?;
    }
    println!("bandcorr: 6x6 matrices for both groups");
    Ok(())
}

// ---------------------------------------------------------------- report

pub fn report(ctx: &mut StageCtx) -> anyhow::Result<()> {
    let run_dir = ctx.config.out_dir.join(ctx.config.run_id());
    let mut summary = BTreeMap::new();
    for stage in [
        "synth",
        "envelope",
        "preprocess",
        "tmif",
        "null",
        "cluster",
        "classify",
        "duration",
        "reliability",
        "bandcorr",
    ] {
        let dir = run_dir.join(stage);
        if !dir.is_dir() {
            continue;
        }
        let mut artifacts = Vec::new();
        let mut names: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            if name != "run.json" {
                artifacts.push(name);
            }
        }
        summary.insert(stage.to_string(), artifacts);
    }
    if summary.is_empty() {
        bail!("no stage outputs under {}", run_dir.display());
    }
    // pull headline numbers when present
    #[derive(Serialize)]
    struct Summary {
        run_id: String,
        stages: BTreeMap<String, Vec<String>>,
        classify: Option<serde_json::Value>,
        knees: Option<serde_json::Value>,
    }
    let read_json = |p: PathBuf| -> Option<serde_json::Value> {
        std::fs::read_to_string(p)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
    };
    let classify = read_json(run_dir.join("classify/report.json")).map(|v| {
        serde_json::json!({
            "accuracy": v.get("accuracy"),
            "f1": v.get("f1"),
            "auc": v.get("auc"),
            "sensitivity": v.get("sensitivity"),
            "specificity": v.get("specificity"),
        })
    });
    let knees = read_json(run_dir.join("duration/knees.json"));
    let summary = Summary {
        run_id: ctx.config.run_id(),
        stages: summary,
        classify,
        knees,
    };
    ctx.write_json("summary.json", &summary)?;
    println!("report: {}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Dispatch table used by main.
pub fn run_stage(name: &str, ctx: &mut StageCtx) -> anyhow::Result<()> {
    match name {
        "synth" => synth(ctx),
        "envelope" => envelope(ctx),
        "preprocess" => preprocess(ctx),
        "tmif" => tmif(ctx),
        "null" => null(ctx),
        "cluster" => cluster(ctx),
        "classify" => classify(ctx),
        "duration" => duration(ctx),
        "reliability" => reliability(ctx),
        "bandcorr" => bandcorr(ctx),
        "report" => report(ctx),
        other => bail!("unknown stage {other}"),
    }
}
