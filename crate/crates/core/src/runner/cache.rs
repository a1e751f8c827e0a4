use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::model::FockTruncation;
use crate::model::{ModelKind, ModelParams};
use crate::observables::{self, Observable, PointValue};

/// Environment variable that relocates the cache directory.
pub const CACHE_DIR_ENV: &str = "RABI_STARK_CACHE_DIR";

/// Content hash of everything that determines a point value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub digest: String,
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

impl CacheKey {
    /// Canonical text: sorted keys, floats in scientific notation with 17
    /// significant digits.
    pub fn canonical(params: &ModelParams, n_tr: usize, observable: &str, tol: f64) -> String {
        let kind = match params.kind {
            ModelKind::Rsm => "rsm",
            ModelKind::Qrm => "qrm",
        };
        format!(
            "{{\"coupling_g\":{},\"delta\":{},\"kind\":\"{}\",\"n_tr\":{},\"observable\":\"{}\",\"omega\":{},\"stark_u\":{},\"tol\":{}}}",
            float(params.coupling_g),
            float(params.delta),
            kind,
            n_tr,
            observable,
            float(params.omega),
            float(params.effective_stark()),
            float(tol)
        )
    }

    pub fn new(params: &ModelParams, n_tr: usize, observable: &str, tol: f64) -> Self {
        let text = Self::canonical(params, n_tr, observable, tol);
        CacheKey {
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Entry {
    value: f64,
    residual: f64,
}

/// Directory of one JSON file per key, written atomically.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// `$RABI_STARK_CACHE_DIR`, or `<output_dir>/.cache`.
    pub fn for_output(output_dir: &Path) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Cache::new(dir),
            _ => Cache::new(output_dir.join(".cache")),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(&key.digest[..2]).join(format!("{}.json", key.digest))
    }

    pub fn get(&self, key: &CacheKey) -> Option<PointValue> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        let e: Entry = serde_json::from_str(&text).ok()?;
        Some(PointValue {
            value: e.value,
            residual: e.residual,
        })
    }

    pub fn put(&self, key: &CacheKey, value: PointValue) -> Result<()> {
        let path = self.path(key);
        let parent = path.parent().expect("entry has a parent").to_path_buf();
        std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&parent).map_err(|e| Error::io(&parent, e))?;
        let body = serde_json::to_string(&Entry {
            value: value.value,
            residual: value.residual,
        })?;
        tmp.write_all(body.as_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

/// Evaluator that consults the cache before computing.
#[derive(Debug)]
pub struct CachedEvaluator {
    cache: Cache,
    tol: f64,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CachedEvaluator {
    pub fn new(cache: Cache, tol: f64) -> Self {
        CachedEvaluator {
            cache,
            tol,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    /// Number of evaluations that had to be computed.
    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn key(&self, params: &ModelParams, observable: &Observable, n_tr: usize) -> CacheKey {
        CacheKey::new(params, n_tr, &observable.key(), self.tol)
    }
}

impl Evaluator for CachedEvaluator {
    fn evaluate_at(&self, params: &ModelParams, observable: &Observable, n_tr: usize) -> Result<PointValue> {
        let key = self.key(params, observable, n_tr);
        if let Some(v) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            log::debug!("cache hit {}", key.digest);
            return Ok(v);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let v = observables::evaluate(params, observable, FockTruncation::new(n_tr)?)?;
        self.cache.put(&key, v)?;
        Ok(v)
    }
}
