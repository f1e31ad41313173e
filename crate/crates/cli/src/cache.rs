//! On-disk cache of per-domain results keyed by `(curve, h_max, degree)`.
//!
//! Lookups may run from worker threads; new entries are queued and written by
//! [`Cache::flush`] once the workers have joined.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use symlab::fem::Degree;
use symlab::geometry::BoundaryCurve;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Cache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
    pending: Mutex<Vec<(PathBuf, String)>>,
}

impl Cache {
    pub fn new(dir: PathBuf) -> Self {
        Cache {
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            pending: Mutex::new(Vec::new()),
        }
    }

    pub fn dir(&self) -> &PathBuf {
        &self.dir
    }

    pub fn key(kind: &str, curve: &BoundaryCurve, h_max: f64, degree: Degree) -> String {
        let curve_json = serde_json::to_string(curve).expect("curve serializes");
        let text = format!(
            "{kind}|{}|{curve_json}|{:016x}|{}",
            env!("CARGO_PKG_VERSION"),
            h_max.to_bits(),
            degree.order()
        );
        sha256_hex(text.as_bytes())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Cached value for `key`, or `compute()` queued for writing.
    pub fn get_or<T, E>(&self, key: &str, compute: impl FnOnce() -> Result<T, E>) -> Result<T, E>
    where
        T: Serialize + DeserializeOwned,
    {
        if let Ok(text) = std::fs::read_to_string(self.path(key)) {
            if let Ok(v) = serde_json::from_str(&text) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(v);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let value = compute()?;
        if let Ok(text) = serde_json::to_string(&value) {
            self.pending.lock().unwrap().push((self.path(key), text));
        }
        Ok(value)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    /// Writes queued entries. Failures only cost a future recomputation.
    pub fn flush(&self) -> std::io::Result<()> {
        let pending = std::mem::take(&mut *self.pending.lock().unwrap());
        if pending.is_empty() {
            return Ok(());
        }
        std::fs::create_dir_all(&self.dir)?;
        for (path, text) in pending {
            let tmp = path.with_extension("json.tmp");
            std::fs::write(&tmp, text)?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_separate_inputs() {
        let c = BoundaryCurve::circle(1.0, [0.0, 0.0]).unwrap();
        let a = Cache::key("report", &c, 0.05, Degree::Quadratic);
        assert_eq!(a, Cache::key("report", &c, 0.05, Degree::Quadratic));
        assert_ne!(a, Cache::key("report", &c, 0.05, Degree::Linear));
        assert_ne!(a, Cache::key("report", &c, 0.04, Degree::Quadratic));
        assert_ne!(a, Cache::key("solve", &c, 0.05, Degree::Quadratic));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
