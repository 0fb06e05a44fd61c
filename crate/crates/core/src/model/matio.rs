//! Bit-exact matrix I/O.
//!
//! A matrix is stored as `<name>.f32` — raw little-endian `float32`,
//! sample-major (row = time sample) — plus a `<name>.json` sidecar:
//!
//! ```json
//! {"version":1,"fs":128.0,"rows":7680,"cols":8,"channels":["CH01",...],"kind":"eeg"}
//! ```
//!
//! Payloads are `float32` on disk regardless of the in-memory scalar;
//! `write ∘ read ∘ write` is byte-identical.

use crate::model::{Recording, RecordingKind};
use crate::{Error, Result, Scalar};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    fs: f64,
    rows: usize,
    cols: usize,
    channels: Vec<String>,
    kind: RecordingKind,
}

fn paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.with_extension("");
    (stem.with_extension("f32"), stem.with_extension("json"))
}

/// Write a recording as `<path>.f32` + `<path>.json`. Any extension on
/// `path` is replaced. Single writer per path.
pub fn write_matrix<F: Scalar>(rec: &Recording<F>, path: impl AsRef<Path>) -> Result<()> {
    let (payload_path, sidecar_path) = paths(path.as_ref());
    let sidecar = Sidecar {
        version: FORMAT_VERSION,
        fs: rec.fs,
        rows: rec.n_samples(),
        cols: rec.n_channels(),
        channels: rec.channel_names.clone(),
        kind: rec.kind,
    };
    fs::write(&sidecar_path, serde_json::to_string(&sidecar)?)?;

    let mut w = BufWriter::new(fs::File::create(&payload_path)?);
    for row in rec.samples.rows() {
        for v in row {
            let bits = (v.to_f32().unwrap_or(f32::NAN)).to_le_bytes();
            w.write_all(&bits)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a recording written by [`write_matrix`]. `path` may point at the
/// `.f32` payload, the `.json` sidecar, or the bare stem.
pub fn read_matrix<F: Scalar>(path: impl AsRef<Path>) -> Result<Recording<F>> {
    let (payload_path, sidecar_path) = paths(path.as_ref());
    let sidecar: Sidecar = serde_json::from_str(&fs::read_to_string(&sidecar_path)?)?;
    if sidecar.version != FORMAT_VERSION {
        return Err(Error::UnknownVersion(sidecar.version));
    }
    let bytes = fs::read(&payload_path)?;
    let expected = (sidecar.rows * sidecar.cols * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::PayloadMismatch {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let mut data = Vec::with_capacity(sidecar.rows * sidecar.cols);
    for chunk in bytes.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        data.push(F::cast(v as f64));
    }
    let samples = Array2::from_shape_vec((sidecar.rows, sidecar.cols), data)
        .expect("payload length already checked");
    Recording::new(samples, sidecar.fs, sidecar.channels, sidecar.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(values: Vec<f64>, rows: usize, cols: usize) -> Recording<f64> {
        let samples = Array2::from_shape_vec((rows, cols), values).unwrap();
        let names = (0..cols).map(|c| format!("C{c}")).collect();
        Recording::new(samples, 128.0, names, RecordingKind::Eeg).unwrap()
    }

    #[test]
    fn round_trip_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m");
        let original = rec(vec![1.0, -2.5, 3.25, 4.0, 0.5, -1.125], 3, 2);
        write_matrix(&original, &path).unwrap();
        let back: Recording<f64> = read_matrix(&path).unwrap();
        assert_eq!(back.samples, original.samples);
        assert_eq!(back.channel_names, original.channel_names);
        assert_eq!(back.fs, original.fs);
    }

    #[test]
    fn short_payload_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m");
        write_matrix(&rec(vec![1.0, 2.0, 3.0, 4.0], 2, 2), &path).unwrap();
        let payload = path.with_extension("f32");
        let mut bytes = std::fs::read(&payload).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&payload, bytes).unwrap();
        match read_matrix::<f64>(&path) {
            Err(Error::PayloadMismatch {
                expected: 16,
                actual: 12,
            }) => {}
            other => panic!("expected payload mismatch, got {other:?}"),
        }
    }

    #[test]
    fn unknown_version_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m");
        write_matrix(&rec(vec![1.0], 1, 1), &path).unwrap();
        let sidecar = path.with_extension("json");
        let text = std::fs::read_to_string(&sidecar)
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        std::fs::write(&sidecar, text).unwrap();
        assert!(matches!(
            read_matrix::<f64>(&path),
            Err(Error::UnknownVersion(9))
        ));
    }

    #[test]
    fn known_bytes_decode_exactly() {
        // handcrafted little-endian float32 fixture: [1.0, -2.0, 0.5, 6.25]
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fix");
        let bytes: Vec<u8> = [1.0f32, -2.0, 0.5, 6.25]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(&bytes[..4], &[0x00, 0x00, 0x80, 0x3f]);
        std::fs::write(path.with_extension("f32"), &bytes).unwrap();
        std::fs::write(
            path.with_extension("json"),
            r#"{"version":1,"fs":128.0,"rows":2,"cols":2,"channels":["a","b"],"kind":"eeg"}"#,
        )
        .unwrap();
        let rec: Recording<f64> = read_matrix(&path).unwrap();
        assert_eq!(rec.samples[(0, 0)], 1.0);
        assert_eq!(rec.samples[(0, 1)], -2.0);
        assert_eq!(rec.samples[(1, 0)], 0.5);
        assert_eq!(rec.samples[(1, 1)], 6.25);
    }

    proptest! {
        /// write ∘ read ∘ write produces identical bytes for arbitrary
        /// finite float matrices.
        #[test]
        fn round_trip_is_byte_identical(
            rows in 1usize..20,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..rows * cols)
                .map(|_| (rng.gen::<f32>() * 100.0 - 50.0) as f64)
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p1 = dir.path().join("a");
            let p2 = dir.path().join("b");
            let original = rec(values, rows, cols);
            write_matrix(&original, &p1).unwrap();
            let back: Recording<f64> = read_matrix(&p1).unwrap();
            write_matrix(&back, &p2).unwrap();
            prop_assert_eq!(
                std::fs::read(p1.with_extension("f32")).unwrap(),
                std::fs::read(p2.with_extension("f32")).unwrap()
            );
            prop_assert_eq!(
                std::fs::read(p1.with_extension("json")).unwrap(),
                std::fs::read(p2.with_extension("json")).unwrap()
            );
        }
    }
}
