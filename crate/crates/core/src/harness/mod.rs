//! Sweep plans, run manifests and the batch pipeline built on them.

mod analyze;
mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::CloudConfig;
use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, ZERO_THRESHOLD};

pub use analyze::{analyze, AnalysisReport, AnalyzeOptions, CellDigest, LambdaMinRow};
pub use sweep::{run_sweep, SweepOptions, SweepOutcome};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPECTRA_DIR: &str = "spectra";
pub const DEFAULT_MAX_ATOMS: usize = 8000;

fn default_threshold() -> f64 {
    ZERO_THRESHOLD
}

fn default_max_atoms() -> usize {
    DEFAULT_MAX_ATOMS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub b_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub realizations_per_cell: u64,
    pub base_seed: u64,
    #[serde(default = "default_threshold")]
    pub zero_threshold: f64,
    pub output_dir: PathBuf,
    /// Refuse cells above this size unless large runs are explicitly allowed.
    #[serde(default = "default_max_atoms")]
    pub max_atoms: usize,
}

impl SweepPlan {
    /// Both sides of the transition at laptop scale.
    pub fn desk_scale(output_dir: impl Into<PathBuf>) -> Self {
        SweepPlan {
            b_values: vec![3.0, 4.0, 4.5, 4.75, 5.0, 5.5, 6.0, 7.0, 8.0, 10.0, 20.0],
            n_values: vec![500, 1000, 2000],
            realizations_per_cell: 10,
            base_seed: 20_240_601,
            zero_threshold: ZERO_THRESHOLD,
            output_dir: output_dir.into(),
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading plan {}", path.display()), e))?;
        let plan: SweepPlan = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_values.is_empty() || self.n_values.is_empty() {
            return Err(Error::Config("plan needs at least one b and one N".into()));
        }
        if let Some(b) = self.b_values.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Config(format!("b values must be positive, got {b}")));
        }
        if self.n_values.contains(&0) {
            return Err(Error::Config("N values must be positive".into()));
        }
        if self.realizations_per_cell == 0 {
            return Err(Error::Config("realizations_per_cell must be at least 1".into()));
        }
        if !(self.zero_threshold > 0.0) {
            return Err(Error::Config("zero_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Every `(b, N, realization)` cell, in plan order.
    pub fn cells(&self) -> Vec<CloudConfig> {
        let mut cells = Vec::new();
        for &b in &self.b_values {
            for &n in &self.n_values {
                for idx in 0..self.realizations_per_cell {
                    cells.push(CloudConfig {
                        n_atoms: n,
                        b,
                        base_seed: self.base_seed,
                        realization_index: idx,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedCell {
    pub b: f64,
    pub n_atoms: usize,
    pub realization_index: u64,
    /// Relative to the manifest directory.
    pub archive: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub b: f64,
    pub n_atoms: usize,
    pub realization_index: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub plan: SweepPlan,
    pub completed: Vec<CompletedCell>,
    pub failed: Vec<FailedCell>,
}

type CellKey = (u64, usize, u64);

fn key_of(b: f64, n: usize, idx: u64) -> CellKey {
    (b.to_bits(), n, idx)
}

impl CompletedCell {
    fn key(&self) -> CellKey {
        key_of(self.b, self.n_atoms, self.realization_index)
    }
}

impl FailedCell {
    fn key(&self) -> CellKey {
        key_of(self.b, self.n_atoms, self.realization_index)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and renames it into place.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

impl RunManifest {
    pub fn new(plan: SweepPlan) -> Self {
        RunManifest {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            plan,
            completed: Vec::new(),
            failed: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Serializes with cells in `(b, N, realization)` order, so the manifest
    /// does not depend on completion order.
    pub fn save(&mut self, path: &Path) -> Result<()> {
        let order = |k: &CellKey| (f64::from_bits(k.0), k.1, k.2);
        self.completed
            .sort_by(|a, b| order(&a.key()).partial_cmp(&order(&b.key())).unwrap());
        self.failed
            .sort_by(|a, b| order(&a.key()).partial_cmp(&order(&b.key())).unwrap());
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomically(path, text.as_bytes())
    }

    fn forget(&mut self, key: CellKey) {
        self.completed.retain(|c| c.key() != key);
        self.failed.retain(|c| c.key() != key);
    }

    pub fn record_completed(&mut self, cell: CompletedCell) {
        self.forget(cell.key());
        self.completed.push(cell);
    }

    pub fn record_failed(&mut self, cell: FailedCell) {
        self.forget(cell.key());
        self.failed.push(cell);
    }

    fn find(&self, config: &CloudConfig) -> Option<&CompletedCell> {
        let key = key_of(config.b, config.n_atoms, config.realization_index);
        self.completed.iter().find(|c| c.key() == key)
    }

    /// Reads an archive listed in the manifest, verifying its checksum.
    pub fn read_verified(&self, root: &Path, cell: &CompletedCell) -> Result<Spectrum> {
        let path = root.join(&cell.archive);
        let bytes =
            fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let found = sha256_hex(&bytes);
        if found != cell.sha256 {
            return Err(Error::Checksum {
                path,
                expected: cell.sha256.clone(),
                found,
            });
        }
        Spectrum::from_archive_bytes(&bytes, &path)
    }
}

/// Writes a spectrum archive under `root/spectra/` and returns its manifest
/// entry.
pub fn store_spectrum(root: &Path, spectrum: &Spectrum) -> Result<CompletedCell> {
    let dir = root.join(SPECTRA_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let config = spectrum.provenance();
    let relative = Path::new(SPECTRA_DIR).join(Spectrum::archive_file_name(config));
    let bytes = spectrum.to_archive_bytes();
    write_atomically(&root.join(&relative), &bytes)?;
    Ok(CompletedCell {
        b: config.b,
        n_atoms: config.n_atoms,
        realization_index: config.realization_index,
        archive: relative,
        sha256: sha256_hex(&bytes),
    })
}
