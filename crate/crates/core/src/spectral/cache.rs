//! On-disk spectral cache: a little-endian blob (`n`, `k`, eigenvalues,
//! column-major eigenvectors, mass diagonal) plus a JSON sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SpectralBasis;
use crate::error::{Error, Result};

pub const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheSidecar {
    pub schema_version: u32,
    pub mesh_hash: String,
    pub n: usize,
    pub k: usize,
    pub residuals: Vec<f64>,
    pub blob_sha256: String,
}

#[derive(Debug)]
pub enum CacheStatus {
    Hit(SpectralBasis),
    Miss,
    /// Sidecar names a different mesh or a smaller `k`.
    Stale,
    Corrupt(String),
}

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{name}.spectral.bin")),
        dir.join(format!("{name}.spectral.json")),
    )
}

fn encode(basis: &SpectralBasis) -> Vec<u8> {
    let (n, k) = (basis.n(), basis.k());
    let mut out = Vec::with_capacity(16 + 8 * (k + n * k + n));
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    for v in basis.eigenvalues.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    // nalgebra storage is column-major already
    for v in basis.eigenvectors.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in basis.mass.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], residuals: Vec<f64>) -> std::result::Result<SpectralBasis, String> {
    let read_u64 = |at: usize| -> std::result::Result<u64, String> {
        bytes
            .get(at..at + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| "truncated header".to_string())
    };
    let n = read_u64(0)? as usize;
    let k = read_u64(8)? as usize;
    let expected = 16 + 8 * (k + n * k + n);
    if bytes.len() != expected {
        return Err(format!("blob has {} bytes, expected {expected}", bytes.len()));
    }
    let floats: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let eigenvalues = DVector::from_column_slice(&floats[..k]);
    let eigenvectors = DMatrix::from_column_slice(n, k, &floats[k..k + n * k]);
    let mass = DVector::from_column_slice(&floats[k + n * k..]);
    if residuals.len() != k {
        return Err("residual count does not match k".into());
    }
    Ok(SpectralBasis {
        eigenvalues,
        eigenvectors,
        mass,
        residuals,
    })
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Write-temp-rename; the temp name is unique per process and call so
/// concurrent writers of one entry never share a temp file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.{}-{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn store_cached_basis(dir: &Path, name: &str, mesh_hash: &str, basis: &SpectralBasis) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (blob_path, sidecar_path) = paths(dir, name);
    let blob = encode(basis);
    let sidecar = CacheSidecar {
        schema_version: CACHE_SCHEMA_VERSION,
        mesh_hash: mesh_hash.to_string(),
        n: basis.n(),
        k: basis.k(),
        residuals: basis.residuals.clone(),
        blob_sha256: hex::encode(Sha256::digest(&blob)),
    };
    write_atomic(&blob_path, &blob)?;
    write_atomic(&sidecar_path, serde_json::to_string_pretty(&sidecar)?.as_bytes())
}

/// Looks up a cached basis with at least `k` eigenpairs for the given mesh.
pub fn load_cached_basis(dir: &Path, name: &str, mesh_hash: &str, k: usize) -> CacheStatus {
    let (blob_path, sidecar_path) = paths(dir, name);
    let Ok(text) = fs::read_to_string(&sidecar_path) else {
        return CacheStatus::Miss;
    };
    let sidecar: CacheSidecar = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => return CacheStatus::Corrupt(format!("sidecar: {e}")),
    };
    if sidecar.schema_version != CACHE_SCHEMA_VERSION || sidecar.mesh_hash != mesh_hash || sidecar.k < k {
        return CacheStatus::Stale;
    }
    let blob = match fs::read(&blob_path) {
        Ok(b) => b,
        Err(e) => return CacheStatus::Corrupt(format!("blob: {e}")),
    };
    if hex::encode(Sha256::digest(&blob)) != sidecar.blob_sha256 {
        return CacheStatus::Corrupt("blob checksum mismatch".into());
    }
    match decode(&blob, sidecar.residuals) {
        Ok(basis) if basis.n() == sidecar.n => CacheStatus::Hit(basis.truncated(k)),
        Ok(_) => CacheStatus::Corrupt("vertex count mismatch".into()),
        Err(e) => CacheStatus::Corrupt(e),
    }
}
