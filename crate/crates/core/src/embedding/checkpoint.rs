//! Binary embedding checkpoints.
//!
//! Layout: magic `XRSG`, format version (u32), n_tracks (u64), dim (u32),
//! then the input and output tables as row-major little-endian f32.

use std::fs;
use std::path::Path;

use super::TrackEmbeddingTable;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"XRSG";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub fn write_table(table: &TrackEmbeddingTable, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * table.input_vectors.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(table.n_tracks as u64).to_le_bytes());
    buf.extend_from_slice(&(table.dim as u32).to_le_bytes());
    for x in table.input_vectors.iter().chain(&table.output_vectors) {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_table(path: &Path) -> Result<TrackEmbeddingTable> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("not an embedding checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let n_tracks = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let cells = n_tracks
        .checked_mul(dim)
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    let expected = cells.checked_mul(8).and_then(|b| b.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(bad(format!(
            "expected {} payload floats for {n_tracks} x {dim}, file has {} bytes",
            2 * cells,
            bytes.len()
        )));
    }
    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let input_vectors: Vec<f32> = floats.by_ref().take(cells).collect();
    let output_vectors: Vec<f32> = floats.collect();
    let table = TrackEmbeddingTable {
        n_tracks,
        dim,
        input_vectors,
        output_vectors,
    };
    if !table.is_finite() {
        return Err(bad("non-finite entries".into()));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let table = TrackEmbeddingTable {
            n_tracks: 3,
            dim: 2,
            input_vectors: vec![0.5, -1.25, 3.0, 1e-7, -0.0, 7.5],
            output_vectors: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        write_table(&table, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), (HEADER_LEN + 48) as u64);
        assert_eq!(read_table(&path).unwrap(), table);

        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_table(&path), Err(Error::Checkpoint { .. })));
        bytes[0] = b'Z';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_table(&path), Err(Error::Checkpoint { .. })));
    }
}
