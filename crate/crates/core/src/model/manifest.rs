//! Cohort manifest: what a dataset on disk looks like.
//!
//! A JSON document listing subjects with their file paths plus shared
//! resources (stimulus envelopes, channel selection, layout). Paths are
//! relative to the manifest's directory. See `docs/formats.md`.

use crate::model::{Band, Group};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub group: Group,
    pub age: f64,
    /// Stem of the subject's raw EEG matrix (`.f32` + `.json`).
    pub eeg: PathBuf,
    /// Per-band preprocessed EEG stems, filled in by the preprocess stage.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub band_eeg: BTreeMap<Band, PathBuf>,
    /// Per-band multivariate TMIF CSVs, filled in by the tmif stage.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tmif: BTreeMap<Band, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortManifest {
    /// Analysis sampling rate in Hz.
    pub fs: f64,
    /// Per-band normalized stimulus envelope stems at the analysis rate.
    pub envelopes: BTreeMap<Band, PathBuf>,
    /// Channels entering the multivariate analysis.
    pub channel_selection: Vec<String>,
    /// Optional `name,x,y` layout CSV for adjacency construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PathBuf>,
    /// Subjects in iteration order.
    pub subjects: Vec<ManifestSubject>,
    /// Directory the manifest was loaded from (not serialized).
    #[serde(skip)]
    pub root: PathBuf,
}

impl CohortManifest {
    /// Load and validate: unique subject ids, referenced files exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut manifest: CohortManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        manifest.root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Resolve a manifest-relative stem to an absolute path.
    pub fn resolve(&self, stem: &Path) -> PathBuf {
        if stem.is_absolute() {
            stem.to_path_buf()
        } else {
            self.root.join(stem)
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.id) {
                return Err(Error::Manifest(format!("duplicate subject id {:?}", s.id)));
            }
        }
        let check = |stem: &Path| -> Result<()> {
            let payload = self.resolve(stem).with_extension("f32");
            if !payload.exists() {
                return Err(Error::Manifest(format!(
                    "missing file {}",
                    payload.display()
                )));
            }
            Ok(())
        };
        for stem in self.envelopes.values() {
            check(stem)?;
        }
        for s in &self.subjects {
            check(&s.eeg)?;
            for stem in s.band_eeg.values() {
                check(stem)?;
            }
        }
        Ok(())
    }
}
