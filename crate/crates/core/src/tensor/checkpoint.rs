//! Weight checkpoints: a JSON manifest plus one little-endian f64 blob per
//! tensor.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<Entry>,
    meta: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
    file: String,
}

/// Writes `tensors` under `dir`, creating it if needed.
pub fn save_checkpoint(dir: &Path, tensors: &[(String, &Tensor)], meta: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(tensors.len());
    for (i, (name, t)) in tensors.iter().enumerate() {
        let file = format!("{i:03}.bin");
        let bytes: Vec<u8> = t.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(dir.join(&file), bytes)?;
        entries.push(Entry { name: name.clone(), shape: t.shape(), file });
    }
    let manifest = Manifest { tensors: entries, meta };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> Result<(Vec<(String, Tensor)>, serde_json::Value)> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for e in manifest.tensors {
        let bytes = fs::read(dir.join(&e.file))?;
        let expected = e.shape[0] * e.shape[1] * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "{}: blob has {} bytes, shape {:?} needs {expected}",
                e.name,
                bytes.len(),
                e.shape
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((e.name, Tensor::from_vec(e.shape[0], e.shape[1], values)?.tracked()));
    }
    Ok((out, manifest.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = Tensor::from_vec(2, 3, vec![0.1, -1.0 / 3.0, 1e-300, 5.0, -0.0, 7.25]).unwrap();
        let b = Tensor::from_vec(1, 1, vec![std::f64::consts::PI]).unwrap();
        let meta = serde_json::json!({"layer_count": 2});
        save_checkpoint(dir.path(), &[("a".into(), &a), ("b".into(), &b)], meta.clone()).unwrap();
        let (loaded, m) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(m, meta);
        assert_eq!(loaded[0].0, "a");
        assert_eq!(loaded[0].1.shape(), [2, 3]);
        for (x, y) in loaded[0].1.values().iter().zip(a.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(loaded[1].1.values(), b.values());
    }

    #[test]
    fn truncated_blob_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = Tensor::zeros(2, 2);
        save_checkpoint(dir.path(), &[("a".into(), &a)], serde_json::Value::Null).unwrap();
        fs::write(dir.path().join("000.bin"), [0u8; 12]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
    }
}
