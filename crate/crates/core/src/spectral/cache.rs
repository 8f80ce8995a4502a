//! On-disk cache of ground states.
//!
//! Layout (little endian): magic `GFSPEC01`, the 8-byte key hash, the grid
//! (`u_max`, `n_u`, `dimension`), the ground energy, then the eigenvalue and
//! ground-state arrays, each as a `u64` length followed by `f64` values.

use std::fs;
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{OperatorCoefficients, PotentialKind, TargetGrid};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"GFSPEC01";

/// What a cache entry is keyed by.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub grid: TargetGrid,
    pub kind: PotentialKind,
    pub coefficients: OperatorCoefficients,
    pub n_modes: usize,
}

impl CacheKey {
    pub fn hash(&self) -> u64 {
        // FNV-1a over the canonical text form; stable across platforms.
        let text = format!(
            "{}|{}|{}|{}|{:e}|{:e}|{:e}|{:e}|{}",
            self.grid.u_max,
            self.grid.n_u,
            self.grid.dimension,
            self.kind.label(),
            self.coefficients.kinetic,
            self.coefficients.harmonic,
            self.coefficients.quartic,
            self.coefficients.shift,
            self.n_modes
        );
        let mut h = Fnv(0xcbf2_9ce4_8422_2325);
        h.write(text.as_bytes());
        h.finish()
    }

    pub fn file_name(&self) -> String {
        format!("spectral-{:016x}.bin", self.hash())
    }
}

struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = (self.0 ^ *b as u64).wrapping_mul(0x0000_0100_0000_01B3);
        }
    }
}

/// Cached spectral data for one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedSpectrum {
    pub grid: TargetGrid,
    pub ground_energy: f64,
    pub eigenvalues: Vec<f64>,
    pub ground_state: Vec<f64>,
}

impl CachedSpectrum {
    /// Radial law of `|v|` under the squared ground state.
    pub fn marginal(&self) -> Result<crate::gibbs::RadialCdf> {
        let density: Vec<f64> = self.ground_state.iter().map(|v| v * v).collect();
        crate::gibbs::RadialCdf::from_target_density(self.grid, &density)
    }
}

pub fn cache_path(dir: &Path, key: &CacheKey) -> PathBuf {
    dir.join(key.file_name())
}

fn write_array(out: &mut Vec<u8>, a: &[f64]) {
    out.extend_from_slice(&(a.len() as u64).to_le_bytes());
    for v in a {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn store(dir: &Path, key: &CacheKey, data: &CachedSpectrum) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&key.hash().to_le_bytes());
    buf.extend_from_slice(&data.grid.u_max.to_le_bytes());
    buf.extend_from_slice(&(data.grid.n_u as u64).to_le_bytes());
    buf.extend_from_slice(&(data.grid.dimension as u64).to_le_bytes());
    buf.extend_from_slice(&data.ground_energy.to_le_bytes());
    write_array(&mut buf, &data.eigenvalues);
    write_array(&mut buf, &data.ground_state);
    let path = cache_path(dir, key);
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads the entry for `key`; `Ok(None)` when absent, an error when present
/// but corrupt or written for a different key.
pub fn load(dir: &Path, key: &CacheKey) -> Result<Option<CachedSpectrum>> {
    let path = cache_path(dir, key);
    let mut bytes = Vec::new();
    match fs::File::open(&path) {
        Ok(mut f) => f.read_to_end(&mut bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let bad = |reason: &str| Error::Format { path: path.display().to_string(), reason: reason.into() };
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    if u64_at(take(8)?) != key.hash() {
        return Err(bad("key hash mismatch"));
    }
    let u_max = f64_at(take(8)?);
    let n_u = u64_at(take(8)?) as usize;
    let dimension = u64_at(take(8)?) as usize;
    let grid = TargetGrid::new(u_max, n_u, dimension)?;
    if grid != key.grid {
        return Err(bad("grid mismatch"));
    }
    let ground_energy = f64_at(take(8)?);
    let mut arrays = Vec::new();
    for _ in 0..2 {
        let len = u64_at(take(8)?) as usize;
        let raw = take(len.checked_mul(8).ok_or_else(|| bad("length overflow"))?)?;
        arrays.push(raw.chunks_exact(8).map(f64_at).collect::<Vec<f64>>());
    }
    let ground_state = arrays.pop().expect("two arrays");
    let eigenvalues = arrays.pop().expect("two arrays");
    if ground_state.len() != grid.n_states() {
        return Err(bad("ground state length mismatch"));
    }
    Ok(Some(CachedSpectrum { grid, ground_energy, eigenvalues, ground_state }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_check() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TargetGrid::new(4.0, 17, 1).unwrap();
        let key = CacheKey {
            grid,
            kind: PotentialKind::Harmonic,
            coefficients: OperatorCoefficients::literal(PotentialKind::Harmonic, 1),
            n_modes: 3,
        };
        assert!(load(dir.path(), &key).unwrap().is_none());
        let data = CachedSpectrum {
            grid,
            ground_energy: 0.01,
            eigenvalues: vec![0.01, 1.0, 2.0],
            ground_state: (0..17).map(|i| i as f64).collect(),
        };
        store(dir.path(), &key, &data).unwrap();
        assert_eq!(load(dir.path(), &key).unwrap(), Some(data));
        let path = cache_path(dir.path(), &key);
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(40);
        fs::write(&path, bytes).unwrap();
        assert!(load(dir.path(), &key).is_err());
    }
}
