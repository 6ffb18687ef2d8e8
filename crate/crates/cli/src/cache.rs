//! On-disk cache for q and Q, keyed by the dictionary entries and the solver
//! settings.

use std::path::{Path, PathBuf};

use capset_core::capacity::{
    load_capacity_matrix, load_capacity_vector, save_capacity_matrix, save_capacity_vector,
};
use capset_core::{CapacityMatrix, CapacityVector, Dictionary, SolverConfig};
use sha2::{Digest, Sha256};

pub struct CapacityCache {
    dir: Option<PathBuf>,
    key: String,
}

pub fn default_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("capset");
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("capset");
    }
    PathBuf::from(".capset-cache")
}

impl CapacityCache {
    /// `dir = None` disables the cache.
    pub fn new(dir: Option<PathBuf>, dict: &Dictionary, solver: &SolverConfig) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"capset capacity cache v1\n");
        hasher.update(format!("{solver:?}\n").as_bytes());
        hasher.update(crate::dict::matrix_hash(dict).as_bytes());
        CapacityCache {
            dir,
            key: hex::encode(hasher.finalize()),
        }
    }

    fn path(&self, kind: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.{kind}.csv", self.key)))
    }

    pub fn load_q(&self, l: usize) -> Option<CapacityVector> {
        let (q, _) = load_capacity_vector(self.path("q")?).ok()?;
        (q.len() == l).then_some(q)
    }

    pub fn load_pairs(&self, l: usize) -> Option<CapacityMatrix> {
        let (qm, _) = load_capacity_matrix(self.path("Q")?).ok()?;
        (qm.size() == l).then_some(qm)
    }

    pub fn store_q(&self, q: &CapacityVector, label: &str, seed: Option<u64>) {
        if let Some(path) = self.path("q") {
            store(&path, |p| save_capacity_vector(q, label, seed, p));
        }
    }

    pub fn store_pairs(&self, qm: &CapacityMatrix, label: &str, seed: Option<u64>) {
        if let Some(path) = self.path("Q") {
            store(&path, |p| save_capacity_matrix(qm, label, seed, p));
        }
    }
}

/// Writes through a temporary file so a concurrent reader never sees a
/// partial cache entry. Failures only cost a recomputation later.
fn store(path: &Path, write: impl FnOnce(&Path) -> capset_core::Result<()>) {
    let Some(dir) = path.parent() else { return };
    if let Err(e) = std::fs::create_dir_all(dir) {
        log::warn!("cache directory {}: {e}", dir.display());
        return;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    match write(&tmp).map_err(|e| e.to_string()).and_then(|()| std::fs::rename(&tmp, path).map_err(|e| e.to_string())) {
        Ok(()) => log::debug!("cached {}", path.display()),
        Err(e) => {
            log::warn!("could not cache {}: {e}", path.display());
            let _ = std::fs::remove_file(&tmp);
        }
    }
}
