//! Binary embedding matrices: magic `TDCE`, then little-endian u32
//! version, dim and count, then `count * dim` f32 values row-major.
//! Clip ids live in a `<file>.ids.csv` sidecar with header `row,clip_id`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use timbrediff_core::Embedding;

use crate::error::{Error, Result};
use crate::fsutil::{atomic_write, read_bytes};

pub const MAGIC: &[u8; 4] = b"TDCE";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Row-major f32 matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
}

pub fn encode(matrix: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * matrix.dim * matrix.rows.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.dim as u32).to_le_bytes());
    out.extend_from_slice(&(matrix.rows.len() as u32).to_le_bytes());
    for row in &matrix.rows {
        debug_assert_eq!(row.len(), matrix.dim);
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<EmbeddingMatrix, String> {
    if bytes.len() < HEADER_LEN {
        return Err(format!(
            "file has {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err("bad magic, expected TDCE".into());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice"));
    let version = word(4);
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let dim = word(8) as usize;
    let count = word(12) as usize;
    let expected = dim
        .checked_mul(count)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or("header sizes overflow")?;
    if bytes.len() != expected {
        return Err(format!(
            "payload size mismatch: {dim} x {count} needs {expected} bytes, file has {}",
            bytes.len()
        ));
    }
    if dim == 0 && count > 0 {
        return Err("zero-dimensional rows".into());
    }
    let rows = bytes[HEADER_LEN..]
        .chunks_exact(4 * dim.max(1))
        .take(count)
        .map(|row| {
            row.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .collect()
        })
        .collect();
    Ok(EmbeddingMatrix { dim, rows })
}

pub fn ids_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".ids.csv");
    PathBuf::from(name)
}

#[derive(Serialize, Deserialize)]
struct IdRow {
    row: usize,
    clip_id: String,
}

/// Write embeddings and their id sidecar. All rows must share one dimension.
pub fn write_embeddings(path: &Path, embeddings: &[Embedding]) -> Result<()> {
    let dim = embeddings.first().map_or(0, Embedding::dim);
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
        return Err(timbrediff_core::Error::DimensionMismatch {
            expected: dim,
            actual: bad.dim(),
        }
        .into());
    }
    let matrix = EmbeddingMatrix {
        dim,
        rows: embeddings.iter().map(|e| e.vector.clone()).collect(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for (row, e) in embeddings.iter().enumerate() {
        w.serialize(IdRow {
            row,
            clip_id: e.clip_id.clone(),
        })
        .map_err(|e| Error::format(path, e))?;
    }
    let ids = w.into_inner().map_err(|e| Error::format(path, e))?;
    atomic_write(path, &encode(&matrix))?;
    atomic_write(&ids_path(path), &ids)
}

/// Read embeddings and their ids, tagging them with `provider_id`.
pub fn read_embeddings(path: &Path, provider_id: &str) -> Result<Vec<Embedding>> {
    let matrix = decode(&read_bytes(path)?).map_err(|r| Error::format(path, r))?;
    let sidecar = ids_path(path);
    let id_bytes = read_bytes(&sidecar)?;
    let mut rdr = csv::Reader::from_reader(id_bytes.as_slice());
    let mut ids = vec![None; matrix.rows.len()];
    for (line, rec) in rdr.deserialize::<IdRow>().enumerate() {
        let rec = rec.map_err(|e| Error::format(&sidecar, e))?;
        let slot = ids.get_mut(rec.row).ok_or_else(|| {
            Error::format(
                &sidecar,
                format!("row {}: index {} out of range", line + 1, rec.row),
            )
        })?;
        if slot.replace(rec.clip_id).is_some() {
            return Err(Error::format(
                &sidecar,
                format!("row {}: duplicate index {}", line + 1, rec.row),
            ));
        }
    }
    matrix
        .rows
        .into_iter()
        .zip(ids)
        .enumerate()
        .map(|(i, (v, id))| {
            let id =
                id.ok_or_else(|| Error::format(&sidecar, format!("no clip id for row {i}")))?;
            Ok(Embedding::new(v, provider_id, id)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&EmbeddingMatrix {
            dim: 2,
            rows: vec![vec![1.0, -2.5]],
        });
        assert_eq!(&bytes[..4], b"TDCE");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 24);
    }

    #[test]
    fn decode_rejects_bad_input() {
        let good = encode(&EmbeddingMatrix {
            dim: 3,
            rows: vec![vec![0.0; 3]; 2],
        });
        assert!(decode(&good[..10]).is_err());
        assert!(decode(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad).unwrap_err().contains("magic"));
        let mut bad = good;
        bad[4] = 2;
        assert!(decode(&bad).unwrap_err().contains("version"));
    }

    #[test]
    fn file_round_trip_with_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tdce");
        let embs = vec![
            Embedding::new(vec![0.1, 0.2], "external", "a").unwrap(),
            Embedding::new(vec![-3.0, 1e-30], "external", "b,c").unwrap(),
        ];
        write_embeddings(&p, &embs).unwrap();
        assert!(dir.path().join("e.tdce.ids.csv").exists());
        assert_eq!(read_embeddings(&p, "external").unwrap(), embs);
    }

    proptest! {
        #[test]
        fn encode_decode_is_lossless(dim in 1usize..12, rows in prop::collection::vec(prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 12), 0..20)) {
            let m = EmbeddingMatrix { dim, rows: rows.into_iter().map(|r| r[..dim].to_vec()).collect() };
            let back = decode(&encode(&m)).unwrap();
            prop_assert_eq!(back.dim, m.dim);
            for (a, b) in back.rows.iter().zip(&m.rows) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
