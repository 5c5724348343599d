//! Checkpoint files: one JSON header line indexing named tensors, then
//! raw little-endian 32-bit float blobs.
//!
//! Offsets are measured from the first byte after the header's newline.
//! Values train as f64 but persist as f32; a save/load/save cycle is
//! byte-identical because loading widens losslessly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::Tensor;
use super::NumericsError;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    /// Sorted by name so equal parameter sets serialize identically.
    tensors: BTreeMap<String, TensorIndexEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorIndexEntry {
    shape: Vec<usize>,
    byte_offset: u64,
    byte_len: u64,
}

/// Writes every parameter of `params` to `path` in checkpoint format.
pub fn save_checkpoint(path: &Path, params: &ParamSet) -> Result<(), NumericsError> {
    let mut names: Vec<&str> = params.iter().map(|(_, p)| p.name.as_str()).collect();
    names.sort_unstable();

    let mut tensors = BTreeMap::new();
    let mut offset = 0u64;
    for name in &names {
        let id = params.id_of(name).expect("name from iteration");
        let p = params.get(id);
        let byte_len = (p.value.len() * 4) as u64;
        tensors.insert(
            name.to_string(),
            TensorIndexEntry { shape: p.value.shape().to_vec(), byte_offset: offset, byte_len },
        );
        offset += byte_len;
    }
    let header = Header { format_version: CHECKPOINT_FORMAT_VERSION, tensors };

    let file = File::create(path).map_err(|e| NumericsError::Io { path: path.display().to_string(), source: e })?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| NumericsError::Io { path: path.display().to_string(), source: e };
    serde_json::to_writer(&mut w, &header).map_err(|e| NumericsError::CheckpointFormat { detail: e.to_string() })?;
    w.write_all(b"\n").map_err(io_err)?;
    for name in &names {
        let id = params.id_of(name).expect("name from iteration");
        for v in params.get(id).value.as_slice() {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads a checkpoint back into a fresh [`ParamSet`] (f32 widened to f64).
pub fn load_checkpoint(path: &Path) -> Result<ParamSet, NumericsError> {
    let file = File::open(path).map_err(|e| NumericsError::Io { path: path.display().to_string(), source: e })?;
    let mut r = BufReader::new(file);
    let io_err = |e: std::io::Error| NumericsError::Io { path: path.display().to_string(), source: e };

    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte).map_err(io_err)?;
        if n == 0 {
            return Err(NumericsError::CheckpointFormat { detail: "missing header newline".into() });
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| NumericsError::CheckpointFormat { detail: format!("header: {e}") })?;
    if header.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(NumericsError::CheckpointFormat {
            detail: format!("unsupported format_version {}", header.format_version),
        });
    }

    let mut blob = Vec::new();
    r.read_to_end(&mut blob).map_err(io_err)?;

    let mut params = ParamSet::new();
    for (name, entry) in &header.tensors {
        let count: usize = entry.shape.iter().product();
        if entry.byte_len != (count * 4) as u64 {
            return Err(NumericsError::CheckpointFormat {
                detail: format!("tensor {name}: byte_len {} does not match shape {:?}", entry.byte_len, entry.shape),
            });
        }
        let start = entry.byte_offset as usize;
        let end = start + entry.byte_len as usize;
        if end > blob.len() {
            return Err(NumericsError::CheckpointFormat {
                detail: format!("tensor {name}: blob truncated at {} of {end} bytes", blob.len()),
            });
        }
        let data: Vec<f64> = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        params.add(name.clone(), Tensor::new(entry.shape.clone(), data)?)?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_params() -> ParamSet {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        params.add_matrix("b.w", 3, 4, &mut rng).unwrap();
        params.add_matrix("a.w", 2, 2, &mut rng).unwrap();
        params.add_zero_vector("a.b", 2).unwrap();
        params
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("one.ckpt");
        let p2 = dir.path().join("two.ckpt");
        let params = sample_params();
        save_checkpoint(&p1, &params).unwrap();
        let loaded = load_checkpoint(&p1).unwrap();
        save_checkpoint(&p2, &loaded).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn round_trip_relative_error_small() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let params = sample_params();
        save_checkpoint(&path, &params).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for (_, p) in params.iter() {
            let q = loaded.get(loaded.id_of(&p.name).unwrap());
            for (a, b) in p.value.as_slice().iter().zip(q.value.as_slice()) {
                let rel = (a - b).abs() / a.abs().max(1.0);
                assert!(rel <= 1e-6, "{}: {a} vs {b}", p.name);
            }
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &sample_params()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(NumericsError::CheckpointFormat { .. })
        ));
    }
}
