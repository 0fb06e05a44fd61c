//! 2-D channel layouts for adjacency construction.

use crate::{Error, Result};
use std::path::Path;

/// Channel names with 2-D positions (azimuthal-equidistant projection,
/// head radius ≈ 1).
#[derive(Debug, Clone)]
pub struct ChannelLayout {
    pub names: Vec<String>,
    pub xy: Vec<(f64, f64)>,
}

impl ChannelLayout {
    pub fn new(names: Vec<String>, xy: Vec<(f64, f64)>) -> Result<Self> {
        if names.len() != xy.len() {
            return Err(Error::Manifest(format!(
                "layout has {} names but {} positions",
                names.len(),
                xy.len()
            )));
        }
        Ok(Self { names, xy })
    }

    /// Parse a `name,x,y` CSV (header row required).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut xy = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("name")) {
                continue;
            }
            let mut parts = line.split(',');
            let name = parts
                .next()
                .ok_or_else(|| Error::Manifest(format!("layout line {i}: missing name")))?;
            let x: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Manifest(format!("layout line {i}: bad x")))?;
            let y: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Manifest(format!("layout line {i}: bad y")))?;
            names.push(name.trim().to_string());
            xy.push((x, y));
        }
        Self::new(names, xy)
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Keep only the named channels, in the given order.
    pub fn subset(&self, names: &[String]) -> Result<Self> {
        let mut xy = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownChannel(name.clone()))?;
            xy.push(self.xy[idx]);
        }
        Ok(Self {
            names: names.to_vec(),
            xy,
        })
    }
}

/// Approximate 2-D layout of the 64-channel BioSemi montage (10-10 labels).
///
/// Reconstructed from the standard 10-10 angular scheme (great-circle arc
/// subdivision, azimuthal-equidistant projection); exact cap coordinates are
/// not published in machine-readable form, so treat positions as nominal.
pub fn builtin_biosemi64() -> ChannelLayout {
    ChannelLayout::from_csv_str(include_str!("../../data/biosemi64_layout.csv"))
        .expect("builtin layout parses")
}

/// Fronto-central and parieto-occipital channels used by default for the
/// multivariate analysis (a nominal reconstruction; override per dataset).
pub fn default_channel_selection() -> Vec<String> {
    [
        "F1", "Fz", "F2", "FC1", "FCz", "FC2", "C1", "Cz", "C2", "CP1", "CPz", "CP2", "P3", "P1",
        "Pz", "P2", "P4", "PO3", "POz", "PO4", "O1", "Oz", "O2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biosemi64_has_64_channels() {
        let layout = builtin_biosemi64();
        assert_eq!(layout.len(), 64);
        assert!(layout.names.iter().any(|n| n == "Cz"));
        assert!(layout.names.iter().any(|n| n == "Fp1"));
        // Cz is at the vertex
        let cz = layout.names.iter().position(|n| n == "Cz").unwrap();
        let (x, y) = layout.xy[cz];
        assert!(x.abs() < 1e-6 && y.abs() < 1e-6);
    }

    #[test]
    fn default_selection_is_subset_of_biosemi64() {
        let layout = builtin_biosemi64();
        let sel = default_channel_selection();
        assert!(!sel.is_empty());
        let sub = layout.subset(&sel).unwrap();
        assert_eq!(sub.len(), sel.len());
    }
}
