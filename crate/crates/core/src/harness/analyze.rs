use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::Serialize;

use super::{write_atomically, RunManifest, TOOLKIT_VERSION};
use crate::critical::{
    default_candidates, extrapolate_condensate, extrapolate_lambda_min, scan_power_law,
    CondensateExtrapolation, FractionPoint, LambdaMinExtrapolation, PowerLawFit,
};
use crate::ensemble::{
    aggregate_with, default_small_lambda_grid, small_lambda_cdf, AggregateOptions,
    EnsembleSummary,
};
use crate::error::{Error, Result};
use crate::locator::{locator_result, LocatorResult};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Defaults to `report/` next to the manifest.
    pub report_dir: Option<PathBuf>,
    pub candidates: Vec<f64>,
    /// Power-law points must satisfy `b >= b_c' + margin`.
    pub window_margin: f64,
    pub window_b_max: f64,
    pub locator_pairs: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            report_dir: None,
            candidates: default_candidates(),
            window_margin: 0.01,
            window_b_max: 10.0,
            locator_pairs: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDigest {
    pub b: f64,
    pub n_atoms: usize,
    pub n_realizations: usize,
    pub lambda_min_mean: f64,
    pub lambda_min_median: f64,
    pub condensate_fraction_mean: f64,
    pub condensate_fraction_stderr: f64,
    pub summary_file: PathBuf,
}

/// `lambda_min` at the largest simulated size for one `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaMinRow {
    pub b: f64,
    pub n_atoms: usize,
    pub lambda_min_mean: f64,
    pub lambda_min_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub cells: Vec<CellDigest>,
    pub lambda_min_at_largest_n: Vec<LambdaMinRow>,
    pub lambda_min_extrapolations: Vec<LambdaMinExtrapolation>,
    pub condensate_extrapolations: Vec<CondensateExtrapolation>,
    pub power_law: Option<PowerLawFit>,
    pub locator: LocatorResult,
    pub insufficient_data: Vec<String>,
    pub missing_archives: Vec<PathBuf>,
    pub integrity_errors: Vec<String>,
    #[serde(skip)]
    pub summaries: Vec<EnsembleSummary>,
    #[serde(skip)]
    pub report_dir: PathBuf,
}

impl AnalysisReport {
    pub fn is_clean(&self) -> bool {
        self.missing_archives.is_empty() && self.integrity_errors.is_empty()
    }

    pub fn condensate_at(&self, b: f64) -> Option<&CondensateExtrapolation> {
        self.condensate_extrapolations.iter().find(|c| c.b == b)
    }

    pub fn lambda_min_at(&self, b: f64) -> Option<&LambdaMinExtrapolation> {
        self.lambda_min_extrapolations.iter().find(|c| c.b == b)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    toolkit_version: &'a str,
    generated_unix_seconds: u64,
    manifest: &'a Path,
}

fn tag(b: f64, n: usize) -> String {
    format!("b{b}_N{n}")
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Error::io(format!("formatting {}", path.display()), e))?;
    write_atomically(path, &buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomically(path, text.as_bytes())
}

/// Aggregates every archive in the manifest and runs the extrapolations, the
/// power-law scan and the locator estimate. All outputs except
/// `metadata.json` are a pure function of the manifest and its archives.
pub fn analyze(manifest_path: &Path, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let manifest = RunManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let report_dir = options
        .report_dir
        .clone()
        .unwrap_or_else(|| root.join("report"));
    let cells_dir = report_dir.join("cells");
    fs::create_dir_all(&cells_dir)
        .map_err(|e| Error::io(format!("creating {}", cells_dir.display()), e))?;

    let mut missing_archives = Vec::new();
    let mut integrity_errors = Vec::new();
    let mut groups: BTreeMap<(u64, usize), Vec<Spectrum>> = BTreeMap::new();
    for cell in &manifest.completed {
        let path = root.join(&cell.archive);
        if !path.exists() {
            missing_archives.push(cell.archive.clone());
            continue;
        }
        match manifest.read_verified(root, cell) {
            Ok(spectrum) => groups
                .entry((cell.b.to_bits(), cell.n_atoms))
                .or_default()
                .push(spectrum),
            Err(e) => {
                warn!("{e}");
                integrity_errors.push(e.to_string());
            }
        }
    }
    for failed in &manifest.failed {
        integrity_errors.push(format!(
            "cell b={} N={} r={} failed during the sweep: {}",
            failed.b, failed.n_atoms, failed.realization_index, failed.error
        ));
    }

    let aggregate_options = AggregateOptions {
        zero_threshold: manifest.plan.zero_threshold,
        ..AggregateOptions::default()
    };
    let small_grid = default_small_lambda_grid();
    let mut summaries: Vec<EnsembleSummary> = Vec::new();
    let mut cells = Vec::new();
    let mut ordered: Vec<_> = groups.into_iter().collect();
    ordered.sort_by(|a, b| {
        let (ka, kb) = (a.0, b.0);
        f64::from_bits(ka.0)
            .total_cmp(&f64::from_bits(kb.0))
            .then(ka.1.cmp(&kb.1))
    });
    for ((b_bits, n), mut spectra) in ordered {
        let b = f64::from_bits(b_bits);
        spectra.sort_by_key(|s| s.provenance().realization_index);
        let summary = aggregate_with(&spectra, &aggregate_options)?;
        let small = small_lambda_cdf(&spectra, &small_grid)?;
        let t = tag(b, n);
        let summary_file = PathBuf::from("cells").join(format!("summary_{t}.json"));
        write_json(&report_dir.join(&summary_file), &summary)?;
        write_file(&cells_dir.join(format!("histogram_{t}.csv")), |w| {
            summary.histogram.write_csv(w)
        })?;
        write_file(&cells_dir.join(format!("cdf_{t}.csv")), |w| summary.cdf.write_csv(w))?;
        write_file(&cells_dir.join(format!("small_cdf_{t}.csv")), |w| small.write_csv(w))?;
        cells.push(CellDigest {
            b,
            n_atoms: n,
            n_realizations: summary.n_realizations,
            lambda_min_mean: summary.lambda_min_mean,
            lambda_min_median: summary.lambda_min_median,
            condensate_fraction_mean: summary.condensate_fraction_mean,
            condensate_fraction_stderr: summary.condensate_fraction_stderr,
            summary_file,
        });
        summaries.push(summary);
    }

    let mut by_b: Vec<(f64, Vec<EnsembleSummary>)> = Vec::new();
    for s in &summaries {
        match by_b.last_mut() {
            Some((b, group)) if b.to_bits() == s.b.to_bits() => group.push(s.clone()),
            _ => by_b.push((s.b, vec![s.clone()])),
        }
    }

    let mut insufficient_data = Vec::new();
    let mut lambda_min_at_largest_n = Vec::new();
    let mut lambda_min_extrapolations = Vec::new();
    let mut condensate_extrapolations = Vec::new();
    for (b, group) in &by_b {
        let largest = group.iter().max_by_key(|s| s.n_atoms).unwrap();
        lambda_min_at_largest_n.push(LambdaMinRow {
            b: *b,
            n_atoms: largest.n_atoms,
            lambda_min_mean: largest.lambda_min_mean,
            lambda_min_median: largest.lambda_min_median,
        });
        match extrapolate_lambda_min(group) {
            Ok(x) => lambda_min_extrapolations.push(x),
            Err(e) => insufficient_data.push(format!("lambda_min extrapolation at b={b}: {e}")),
        }
        match extrapolate_condensate(group) {
            Ok(x) => condensate_extrapolations.push(x),
            Err(e) => insufficient_data.push(format!("condensate extrapolation at b={b}: {e}")),
        }
    }

    let points: Vec<FractionPoint> = condensate_extrapolations
        .iter()
        .filter(|c| c.b <= options.window_b_max && c.asymptotic_fraction > 0.0)
        .map(|c| FractionPoint {
            b: c.b,
            fraction: c.asymptotic_fraction,
        })
        .collect();
    let power_law = match points.iter().map(|p| p.b).reduce(f64::min) {
        Some(b_min) => {
            let candidates: Vec<f64> = options
                .candidates
                .iter()
                .copied()
                .filter(|&c| c + options.window_margin <= b_min)
                .collect();
            match scan_power_law(&points, &candidates) {
                Ok(fit) => Some(fit),
                Err(e) => {
                    insufficient_data.push(format!("power-law scan: {e}"));
                    None
                }
            }
        }
        None => {
            insufficient_data.push("power-law scan: no positive condensate fractions".into());
            None
        }
    };

    let locator = locator_result(options.locator_pairs, manifest.plan.base_seed)?;

    let report = AnalysisReport {
        cells,
        lambda_min_at_largest_n,
        lambda_min_extrapolations,
        condensate_extrapolations,
        power_law,
        locator,
        insufficient_data,
        missing_archives,
        integrity_errors,
        summaries,
        report_dir: report_dir.clone(),
    };
    write_outputs(&report, &report_dir)?;
    let metadata = Metadata {
        toolkit_version: TOOLKIT_VERSION,
        generated_unix_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        manifest: manifest_path,
    };
    write_json(&report_dir.join("metadata.json"), &metadata)?;
    Ok(report)
}

fn write_outputs(report: &AnalysisReport, dir: &Path) -> Result<()> {
    write_json(&dir.join("report.json"), report)?;
    write_json(&dir.join("locator.json"), &report.locator)?;

    write_file(&dir.join("lambda_min_vs_b.csv"), |w| {
        writeln!(w, "b,n_atoms,lambda_min_mean,lambda_min_median")?;
        for row in &report.lambda_min_at_largest_n {
            writeln!(
                w,
                "{},{},{},{}",
                row.b, row.n_atoms, row.lambda_min_mean, row.lambda_min_median
            )?;
        }
        Ok(())
    })?;

    // Fitted lines sampled from 1/log10 N = 0 to the smallest simulated size.
    write_file(&dir.join("lambda_min_fits.csv"), |w| {
        writeln!(w, "b,inv_log10_n,inv_log10_lambda_min,kind")?;
        for x in &report.lambda_min_extrapolations {
            for p in &x.used {
                let xv = 1.0 / (p.n_atoms as f64).log10();
                writeln!(w, "{},{},{},data", x.b, xv, 1.0 / p.value.log10())?;
            }
            if let Some(fit) = &x.fit {
                let x_max = x.used.iter().map(|p| 1.0 / (p.n_atoms as f64).log10()).fold(0.0, f64::max);
                for k in 0..=20 {
                    let xv = x_max * k as f64 / 20.0;
                    writeln!(w, "{},{},{},fit", x.b, xv, fit.predict(xv))?;
                }
            }
        }
        Ok(())
    })?;

    write_file(&dir.join("condensate_fits.csv"), |w| {
        writeln!(w, "b,inv_log10_n,fraction,kind")?;
        for x in &report.condensate_extrapolations {
            let mut x_max: f64 = 0.0;
            for p in &x.points {
                let xv = 1.0 / (p.n_atoms as f64).log10();
                x_max = x_max.max(xv);
                writeln!(w, "{},{},{},data", x.b, xv, p.value)?;
            }
            for k in 0..=20 {
                let xv = x_max * k as f64 / 20.0;
                writeln!(w, "{},{},{},fit", x.b, xv, x.fit.predict(xv))?;
            }
        }
        Ok(())
    })?;

    write_file(&dir.join("condensate_vs_b.csv"), |w| {
        writeln!(w, "b,asymptotic_fraction,raw_intercept")?;
        for x in &report.condensate_extrapolations {
            writeln!(w, "{},{},{}", x.b, x.asymptotic_fraction, x.raw_intercept)?;
        }
        Ok(())
    })?;

    if let Some(fit) = &report.power_law {
        write_file(&dir.join("power_law_scan.csv"), |w| {
            writeln!(w, "b_c_prime,r_squared")?;
            for s in &fit.scan_grid {
                writeln!(w, "{},{}", s.b_c_prime, s.r_squared)?;
            }
            Ok(())
        })?;
        write_file(&dir.join("power_law_curve.csv"), |w| {
            writeln!(w, "b,fraction")?;
            for k in 0..=200 {
                let b = fit.b_c_prime + (12.0 - fit.b_c_prime) * k as f64 / 200.0;
                writeln!(w, "{},{}", b, fit.predict(b))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
