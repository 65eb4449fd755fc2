use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use log::{info, warn};

use super::{
    key_of, store_spectrum, CompletedCell, FailedCell, RunManifest, SweepPlan, MANIFEST_FILE,
};
use crate::cloud::{sample_cloud, CloudConfig};
use crate::error::{Error, Result};
use crate::matrix::build_matrix;
use crate::spectrum::eigenvalues;

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Lift the plan's `max_atoms` cap.
    pub allow_large: bool,
    /// Stop after computing this many cells (the rest stay pending).
    pub cell_limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub manifest: RunManifest,
    pub computed: Vec<CloudConfig>,
    pub skipped: Vec<CloudConfig>,
    pub failed: Vec<FailedCell>,
}

impl SweepOutcome {
    pub fn is_clean(&self) -> bool {
        self.manifest.failed.is_empty()
    }
}

fn compute_cell(root: &Path, config: &CloudConfig) -> Result<CompletedCell> {
    let cloud = sample_cloud(config)?;
    let matrix = build_matrix(&cloud)?;
    let spectrum = eigenvalues(&matrix)?;
    store_spectrum(root, &spectrum)
}

/// Archive present and matching the recorded checksum.
fn is_intact(root: &Path, cell: &CompletedCell) -> bool {
    match fs::read(root.join(&cell.archive)) {
        Ok(bytes) => super::sha256_hex(&bytes) == cell.sha256,
        Err(_) => false,
    }
}

/// Computes every pending cell of `plan`, persisting each archive and
/// rewriting the manifest after every cell. Cells already recorded with an
/// intact archive are skipped; corrupted or missing ones are recomputed.
pub fn run_sweep(plan: &SweepPlan, options: &SweepOptions) -> Result<SweepOutcome> {
    plan.validate()?;
    if !options.allow_large {
        if let Some(&n) = plan.n_values.iter().find(|&&n| n > plan.max_atoms) {
            return Err(Error::Config(format!(
                "N={n} exceeds the cap of {} atoms; pass --allow-large to run it",
                plan.max_atoms
            )));
        }
    }
    let root = plan.output_dir.as_path();
    fs::create_dir_all(root).map_err(|e| Error::io(format!("creating {}", root.display()), e))?;
    let manifest_path = root.join(MANIFEST_FILE);

    let mut manifest = if manifest_path.exists() {
        let existing = RunManifest::load(&manifest_path)?;
        if existing.plan.base_seed != plan.base_seed
            || existing.plan.zero_threshold.to_bits() != plan.zero_threshold.to_bits()
        {
            return Err(Error::Config(format!(
                "{} belongs to a sweep with a different seed or threshold",
                manifest_path.display()
            )));
        }
        RunManifest {
            plan: plan.clone(),
            ..existing
        }
    } else {
        RunManifest::new(plan.clone())
    };

    let mut pending = Vec::new();
    let mut skipped = Vec::new();
    for config in plan.cells() {
        match manifest.find(&config) {
            Some(cell) if is_intact(root, cell) => skipped.push(config),
            Some(_) => {
                warn!(
                    "archive for b={} N={} r={} is missing or corrupted; recomputing",
                    config.b, config.n_atoms, config.realization_index
                );
                manifest.forget(key_of(config.b, config.n_atoms, config.realization_index));
                pending.push(config);
            }
            None => pending.push(config),
        }
    }
    if let Some(limit) = options.cell_limit {
        pending.truncate(limit);
    }
    manifest.save(&manifest_path)?;

    let workers = options
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, pending.len().max(1));
    info!(
        "sweep: {} cells pending, {} already complete, {workers} worker(s)",
        pending.len(),
        skipped.len()
    );

    let next = AtomicUsize::new(0);
    let mut computed = Vec::new();
    let mut failed = Vec::new();
    let mut write_error = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            let pending = &pending;
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(config) = pending.get(k) else { break };
                if tx.send((*config, compute_cell(root, config))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single writer: only this thread touches the manifest.
        for (config, result) in rx {
            match result {
                Ok(cell) => {
                    manifest.record_completed(cell);
                    computed.push(config);
                }
                Err(e) => {
                    warn!(
                        "cell b={} N={} r={} failed: {e}",
                        config.b, config.n_atoms, config.realization_index
                    );
                    let cell = FailedCell {
                        b: config.b,
                        n_atoms: config.n_atoms,
                        realization_index: config.realization_index,
                        error: e.to_string(),
                    };
                    manifest.record_failed(cell.clone());
                    failed.push(cell);
                }
            }
            if let Err(e) = manifest.save(&manifest_path) {
                write_error.get_or_insert(e);
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }

    Ok(SweepOutcome {
        manifest,
        computed,
        skipped,
        failed,
    })
}
