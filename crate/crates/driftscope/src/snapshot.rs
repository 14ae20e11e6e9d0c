//! Binary embedding snapshots.
//!
//! Layout, all little-endian: 8-byte magic `DRFTEMB1`, `u64` vocabulary size,
//! `u32` dimension, `u32` week index, `u64` seed, then the word matrix and the
//! context matrix as row-major `f32`. A JSON sidecar carries training stats.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use driftscope_core::embeddings::EmbeddingSnapshot;
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 8] = b"DRFTEMB1";
const HEADER_LEN: usize = 8 + 8 + 4 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}: bad magic bytes")]
    BadMagic(PathBuf),
    #[error("{path}: expected {expected} bytes, found {found}")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: sidecar: {source}")]
    Sidecar {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub week_index: usize,
    pub epochs_run: usize,
    pub final_rho: f64,
    pub cap_hit: bool,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub vocab_size: u64,
    pub dim: u32,
    pub week: u32,
    pub seed: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode(snap: &EmbeddingSnapshot, seed: u64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * snap.input.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(snap.vocab_size as u64).to_le_bytes());
    buf.extend_from_slice(&(snap.dim as u32).to_le_bytes());
    buf.extend_from_slice(&(snap.week_index as u32).to_le_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    for x in snap.input.iter().chain(&snap.output) {
        buf.extend_from_slice(&(*x as f32).to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(Header, Vec<f64>, Vec<f64>), SnapshotError> {
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic(path.to_path_buf()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let header = Header {
        vocab_size: u64_at(8),
        dim: u32_at(16),
        week: u32_at(20),
        seed: u64_at(24),
    };
    let n = header.vocab_size as usize * header.dim as usize;
    let expected = HEADER_LEN + 2 * n * 4;
    if bytes.len() != expected {
        return Err(SnapshotError::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let floats: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let (input, output) = floats.split_at(n);
    Ok((header, input.to_vec(), output.to_vec()))
}

pub fn bin_path(dir: &Path, week: usize) -> PathBuf {
    dir.join(format!("week_{week:03}.bin"))
}

pub fn sidecar_path(dir: &Path, week: usize) -> PathBuf {
    dir.join(format!("week_{week:03}.json"))
}

pub fn write(dir: &Path, snap: &EmbeddingSnapshot, seed: u64) -> Result<(), SnapshotError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let bin = bin_path(dir, snap.week_index);
    let mut f = fs::File::create(&bin).map_err(io_err(&bin))?;
    f.write_all(&encode(snap, seed)).map_err(io_err(&bin))?;
    let side = sidecar_path(dir, snap.week_index);
    let meta = Sidecar {
        week_index: snap.week_index,
        epochs_run: snap.epochs_run,
        final_rho: snap.final_rho,
        cap_hit: snap.cap_hit,
        epoch_losses: snap.epoch_losses.clone(),
    };
    let json = serde_json::to_vec_pretty(&meta).map_err(|source| SnapshotError::Sidecar {
        path: side.clone(),
        source,
    })?;
    fs::write(&side, json).map_err(io_err(&side))
}

pub fn read(dir: &Path, week: usize) -> Result<(Header, EmbeddingSnapshot), SnapshotError> {
    let bin = bin_path(dir, week);
    let mut bytes = Vec::new();
    fs::File::open(&bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(&bin))?;
    let (header, input, output) = decode(&bytes, &bin)?;
    let side = sidecar_path(dir, week);
    let text = fs::read(&side).map_err(io_err(&side))?;
    let meta: Sidecar = serde_json::from_slice(&text).map_err(|source| SnapshotError::Sidecar {
        path: side.clone(),
        source,
    })?;
    Ok((
        header,
        EmbeddingSnapshot {
            week_index: header.week as usize,
            vocab_size: header.vocab_size as usize,
            dim: header.dim as usize,
            input,
            output,
            epochs_run: meta.epochs_run,
            final_rho: meta.final_rho,
            cap_hit: meta.cap_hit,
            epoch_losses: meta.epoch_losses,
        },
    ))
}

/// Rounds every value to `f32` precision so in-memory results agree with
/// what a reload from disk would produce.
pub fn round_to_stored(snap: &mut EmbeddingSnapshot) {
    for x in snap.input.iter_mut().chain(snap.output.iter_mut()) {
        *x = *x as f32 as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut s = EmbeddingSnapshot::initialize(3, 2, 1);
        s.week_index = 7;
        let b = encode(&s, 99);
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(b.len(), 32 + 2 * 6 * 4);
        let (h, i, o) = decode(&b, Path::new("x")).unwrap();
        assert_eq!(h, Header { vocab_size: 3, dim: 2, week: 7, seed: 99 });
        assert_eq!(i.len(), 6);
        assert_eq!(o.len(), 6);
        assert!(decode(&b[..40], Path::new("x")).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad, Path::new("x")), Err(SnapshotError::BadMagic(_))));
    }
}
