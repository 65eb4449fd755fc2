//! Pooled statistics over realizations at a fixed `(b, N)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{Spectrum, ZERO_THRESHOLD};

/// Linear binning on `[lo, hi]` plus an optional overflow bin above `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub overflow: bool,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            lo: 0.0,
            hi: 5.0,
            width: 0.05,
            overflow: true,
        }
    }
}

/// Bins are `(e_k, e_{k+1}]`; the first bin also holds its lower edge and
/// anything below it, so round-off negatives land in the first bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_sorted(values: &[f64], spec: &HistogramSpec) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("histogram of an empty sample".into()));
        }
        if !(spec.width > 0.0 && spec.hi > spec.lo) {
            return Err(Error::Usage(format!("invalid histogram spec {spec:?}")));
        }
        let n_bins = ((spec.hi - spec.lo) / spec.width).round().max(1.0) as usize;
        let mut bin_edges: Vec<f64> = (0..=n_bins)
            .map(|k| spec.lo + k as f64 * spec.width)
            .collect();
        bin_edges[n_bins] = spec.hi;
        let top = *values.last().unwrap();
        if spec.overflow {
            bin_edges.push(if top > spec.hi { top } else { spec.hi + spec.width });
        } else if top > spec.hi {
            return Err(Error::Usage(format!(
                "value {top} above histogram range without an overflow bin"
            )));
        }

        let total = values.len() as f64;
        let mut counts = Vec::with_capacity(bin_edges.len() - 1);
        let mut below = 0usize;
        for (k, &edge) in bin_edges.iter().enumerate().skip(1) {
            let upto = if k == bin_edges.len() - 1 {
                values.len()
            } else {
                values.partition_point(|&x| x <= edge)
            };
            counts.push((upto - below) as u64);
            below = upto;
        }
        let densities = counts
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(&c, e)| c as f64 / total / (e[1] - e[0]))
            .collect();
        Ok(Histogram {
            bin_edges,
            densities,
            counts,
        })
    }

    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    /// `value,density` rows, one per bin, keyed by bin centre.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "value,density")?;
        for (d, e) in self.densities.iter().zip(self.bin_edges.windows(2)) {
            writeln!(out, "{},{}", 0.5 * (e[0] + e[1]), d)?;
        }
        Ok(())
    }
}

/// `P(lambda)`: fraction of pooled eigenvalues `<= lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl EmpiricalCdf {
    fn evaluate(sorted: &[f64], thresholds: Vec<f64>) -> Self {
        let total = sorted.len() as f64;
        let values = thresholds
            .iter()
            .map(|&t| sorted.partition_point(|&x| x <= t) as f64 / total)
            .collect();
        EmpiricalCdf { thresholds, values }
    }

    /// `lambda,cdf` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lambda,cdf")?;
        for (t, v) in self.thresholds.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub b: f64,
    pub n_atoms: usize,
    pub n_realizations: usize,
    pub zero_threshold: f64,
    pub lambda_min_mean: f64,
    pub lambda_min_median: f64,
    pub lambda_min_stderr: f64,
    pub condensate_fraction_mean: f64,
    pub condensate_fraction_stderr: f64,
    /// Condensate size of each realization, in input order.
    pub condensate_counts: Vec<u64>,
    pub histogram: Histogram,
    pub cdf: EmpiricalCdf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    pub zero_threshold: f64,
    pub histogram: HistogramSpec,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        AggregateOptions {
            zero_threshold: ZERO_THRESHOLD,
            histogram: HistogramSpec::default(),
        }
    }
}

pub fn aggregate(spectra: &[Spectrum]) -> Result<EnsembleSummary> {
    aggregate_with(spectra, &AggregateOptions::default())
}

pub fn aggregate_with(spectra: &[Spectrum], options: &AggregateOptions) -> Result<EnsembleSummary> {
    let (b, n) = common_cell(spectra)?;
    let r = spectra.len();

    let mut minima: Vec<f64> = spectra.iter().map(Spectrum::min_eigenvalue).collect();
    let counts = spectra
        .iter()
        .map(|s| s.count_condensate(options.zero_threshold).map(|c| c as u64))
        .collect::<Result<Vec<_>>>()?;
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let total_count: u64 = counts.iter().sum();
    let condensate_fraction_mean = total_count as f64 / (r as u64 * n as u64) as f64;

    let lambda_min_mean = mean(&minima);
    let lambda_min_stderr = stderr(&minima, lambda_min_mean);
    minima.sort_by(f64::total_cmp);
    let lambda_min_median = if r % 2 == 1 {
        minima[r / 2]
    } else {
        0.5 * (minima[r / 2 - 1] + minima[r / 2])
    };

    let pooled = pooled_sorted(spectra);
    let histogram = Histogram::from_sorted(&pooled, &options.histogram)?;
    let mut thresholds = histogram.bin_edges.clone();
    let top = *pooled.last().unwrap();
    if !thresholds.contains(&top) {
        thresholds.push(top);
        thresholds.sort_by(f64::total_cmp);
    }
    let cdf = EmpiricalCdf::evaluate(&pooled, thresholds);

    Ok(EnsembleSummary {
        b,
        n_atoms: n,
        n_realizations: r,
        zero_threshold: options.zero_threshold,
        lambda_min_mean,
        lambda_min_median,
        lambda_min_stderr,
        condensate_fraction_mean,
        condensate_fraction_stderr: stderr(&fractions, condensate_fraction_mean),
        condensate_counts: counts,
        histogram,
        cdf,
    })
}

/// 60 log-spaced thresholds from `1e-13` to `1e-2`.
pub fn default_small_lambda_grid() -> Vec<f64> {
    log_grid(1e-13, 1e-2, 60)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|k| {
                if k == points - 1 {
                    hi
                } else {
                    10f64.powf(a + (b - a) * k as f64 / (points - 1) as f64)
                }
            })
            .collect(),
    }
}

/// CDF of the small-eigenvalue tail on a grid inside `[1e-13, 1e-2]`.
/// Eigenvalues below the grid (numerically zero) count at every grid point.
pub fn small_lambda_cdf(spectra: &[Spectrum], lambda_grid: &[f64]) -> Result<EmpiricalCdf> {
    if lambda_grid.is_empty() {
        return Err(Error::Usage("empty lambda grid".into()));
    }
    let tol = 1e-9;
    if lambda_grid
        .iter()
        .any(|&t| !(t >= ZERO_THRESHOLD * (1.0 - tol) && t <= 1e-2 * (1.0 + tol)))
    {
        return Err(Error::Usage("lambda grid must lie within [1e-13, 1e-2]".into()));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("lambda grid must be strictly ascending".into()));
    }
    common_cell(spectra)?;
    Ok(EmpiricalCdf::evaluate(&pooled_sorted(spectra), lambda_grid.to_vec()))
}

fn common_cell(spectra: &[Spectrum]) -> Result<(f64, usize)> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Usage("no spectra to aggregate".into()))?;
    let (b, n) = (first.b(), first.n_atoms());
    if let Some(other) = spectra
        .iter()
        .find(|s| s.b().to_bits() != b.to_bits() || s.n_atoms() != n)
    {
        return Err(Error::Usage(format!(
            "mixed cells: (b={b}, N={n}) and (b={}, N={})",
            other.b(),
            other.n_atoms()
        )));
    }
    Ok((b, n))
}

fn pooled_sorted(spectra: &[Spectrum]) -> Vec<f64> {
    let mut pooled: Vec<f64> = spectra
        .iter()
        .flat_map(|s| s.eigenvalues().iter().copied())
        .collect();
    pooled.sort_by(f64::total_cmp);
    pooled
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; zero for a single sample.
fn stderr(xs: &[f64], mean: f64) -> f64 {
    let r = xs.len();
    if r < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1) as f64;
    (var / r as f64).sqrt()
}
