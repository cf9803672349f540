//! On-disk store of solved curve points, keyed by problem and tolerances.
//!
//! A cache file holds the key it was written under; points are looked up by
//! the exact bit pattern of `λ`, so a different grid simply misses.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use exterior_gs::CurvePoint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Tolerances;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    /// Which pipeline produced the points (`refined` curve points differ
    /// from `traced` ones at the same λ).
    pub stage: String,
    pub n: usize,
    pub p: f64,
    pub radius: f64,
    pub tolerances: Tolerances,
}

impl CacheKey {
    pub fn digest(&self) -> String {
        let canonical = serde_json::json!({
            "stage": self.stage,
            "n": self.n,
            "p": self.p.to_bits(),
            "radius": self.radius.to_bits(),
            "tolerances": [
                self.tolerances.rel_tol.to_bits(),
                self.tolerances.abs_tol.to_bits(),
                self.tolerances.bracket_rel_width.to_bits(),
                self.tolerances.nehari_gate.to_bits(),
                self.tolerances.pohozaev_gate.to_bits(),
                self.tolerances.stability_tol.to_bits(),
                self.tolerances.refine_rel_width.to_bits(),
            ],
        });
        let hash = Sha256::digest(canonical.to_string().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheFile {
    key: CacheKey,
    /// Points by `λ.to_bits()`.
    points: BTreeMap<u64, CurvePoint>,
}

#[derive(Debug)]
pub struct PointCache {
    path: PathBuf,
    file: CacheFile,
    pub hits: usize,
}

impl PointCache {
    pub fn open(out_dir: &Path, key: CacheKey) -> Result<Self, CliError> {
        let dir = out_dir.join("cache");
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(format!("points_{}.json", key.digest()));
        let file = match std::fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str::<CacheFile>(&text) {
                // A hash collision or hand-edited file must not leak points.
                Ok(f) if f.key == key => f,
                _ => CacheFile {
                    key,
                    points: BTreeMap::new(),
                },
            },
            Err(_) => CacheFile {
                key,
                points: BTreeMap::new(),
            },
        };
        Ok(Self { path, file, hits: 0 })
    }

    pub fn get(&mut self, lambda: f64) -> Option<CurvePoint> {
        let hit = self.file.points.get(&lambda.to_bits()).cloned();
        if hit.is_some() {
            self.hits += 1;
        }
        hit
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.file.points.contains_key(&lambda.to_bits())
    }

    pub fn store(&mut self, points: &[CurvePoint]) {
        for pt in points {
            self.file.points.insert(pt.lambda.to_bits(), pt.clone());
        }
    }

    pub fn save(&self) -> Result<(), CliError> {
        let text = serde_json::to_string(&self.file).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&self.path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", self.path.display())))
    }
}
