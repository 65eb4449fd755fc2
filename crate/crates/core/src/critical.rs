//! Finite-size extrapolations in `1 / log10 N` and the power-law scan for the
//! critical cooperativeness.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSummary;
use crate::error::{Error, Result};
use crate::spectrum::ZERO_THRESHOLD;

/// Absolute slack on the intercept test, covering round-off of exact data.
const INTERCEPT_SLACK: f64 = 1e-12;

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard errors from the residual variance; NaN with only two points.
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub residuals: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Coefficient of determination is 1 by convention when `y` has no spread.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Usage(format!(
            "x and y lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Usage("a line needs at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Usage("fit data must be finite".into()));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::Usage("x values are all equal".into()));
    }

    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_flat = y.iter().all(|&v| v == y[0]);
    let y_mean = if y_flat { y[0] } else { y.iter().sum::<f64>() / nf };
    let sxx: f64 = x.iter().map(|v| (v - x_mean).powi(2)).sum();
    let sxy: f64 = if y_flat {
        0.0
    } else {
        x.iter().zip(y).map(|(a, b)| (a - x_mean) * (b - y_mean)).sum()
    };
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (slope * a + intercept))
        .collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let sigma2 = ss_res / (nf - 2.0);
        let se_slope = (sigma2 / sxx).sqrt();
        let se_intercept = (sigma2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();
        (se_slope, se_intercept)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        n_points: n,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVerdict {
    Vanishing,
    Gapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictBasis {
    /// Intercept of the `1/log10 lambda_min` line against its standard error.
    LinearFit,
    /// Too few points above working precision: the largest sizes already sit
    /// at numerical zero.
    PrecisionFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub n_atoms: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMinExtrapolation {
    pub b: f64,
    pub fit: Option<LinearFit>,
    pub verdict: GapVerdict,
    pub basis: VerdictBasis,
    pub used: Vec<SizePoint>,
    /// Points whose mean `lambda_min` is below working precision.
    pub excluded: Vec<SizePoint>,
}

/// Fits `1/log10(lambda_min_mean)` against `1/log10 N`.
///
/// `vanishing` when the intercept is non-negative within one standard error:
/// `lambda_min -> 0` sends `1/log10 lambda_min -> 0^-`, while a gap `g`
/// leaves the intercept at `1/log10 g < 0`.
pub fn extrapolate_lambda_min(summaries: &[EnsembleSummary]) -> Result<LambdaMinExtrapolation> {
    extrapolate_lambda_min_with(summaries, ZERO_THRESHOLD)
}

pub fn extrapolate_lambda_min_with(
    summaries: &[EnsembleSummary],
    precision: f64,
) -> Result<LambdaMinExtrapolation> {
    let (b, sorted) = size_series(summaries)?;
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for s in &sorted {
        let point = SizePoint {
            n_atoms: s.n_atoms,
            value: s.lambda_min_mean,
        };
        if s.lambda_min_mean < precision {
            excluded.push(point);
        } else if s.lambda_min_mean < 1.0 {
            used.push(point);
        } else {
            return Err(Error::Usage(format!(
                "lambda_min_mean = {} at N={} is not subradiant",
                s.lambda_min_mean, s.n_atoms
            )));
        }
    }

    if used.len() < 3 {
        if excluded.is_empty() {
            return Err(Error::InsufficientData(format!(
                "b={b}: {} usable sizes, need 3",
                used.len()
            )));
        }
        return Ok(LambdaMinExtrapolation {
            b,
            fit: None,
            verdict: GapVerdict::Vanishing,
            basis: VerdictBasis::PrecisionFloor,
            used,
            excluded,
        });
    }

    let x: Vec<f64> = used.iter().map(|p| 1.0 / (p.n_atoms as f64).log10()).collect();
    let y: Vec<f64> = used.iter().map(|p| 1.0 / p.value.log10()).collect();
    let fit = linear_fit(&x, &y)?;
    let allowance = if fit.intercept_stderr.is_finite() {
        fit.intercept_stderr
    } else {
        0.0
    };
    let verdict = if fit.intercept >= -(allowance + INTERCEPT_SLACK) {
        GapVerdict::Vanishing
    } else {
        GapVerdict::Gapped
    };
    Ok(LambdaMinExtrapolation {
        b,
        fit: Some(fit),
        verdict,
        basis: VerdictBasis::LinearFit,
        used,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensateExtrapolation {
    pub b: f64,
    pub fit: LinearFit,
    /// Intercept clamped to `[0, 1]`.
    pub asymptotic_fraction: f64,
    pub raw_intercept: f64,
    pub points: Vec<SizePoint>,
}

/// Fits the condensate fraction against `1/log10 N`; the intercept is the
/// `N -> infinity` fraction.
pub fn extrapolate_condensate(summaries: &[EnsembleSummary]) -> Result<CondensateExtrapolation> {
    let (b, sorted) = size_series(summaries)?;
    let points: Vec<SizePoint> = sorted
        .iter()
        .map(|s| SizePoint {
            n_atoms: s.n_atoms,
            value: s.condensate_fraction_mean,
        })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| 1.0 / (p.n_atoms as f64).log10()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.value).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(CondensateExtrapolation {
        b,
        raw_intercept: fit.intercept,
        asymptotic_fraction: fit.intercept.clamp(0.0, 1.0),
        fit,
        points,
    })
}

/// Checks a fixed-`b`, varying-`N` series and returns it sorted by `N`.
fn size_series(summaries: &[EnsembleSummary]) -> Result<(f64, Vec<&EnsembleSummary>)> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::InsufficientData("no summaries".into()))?;
    let b = first.b;
    if summaries.iter().any(|s| s.b.to_bits() != b.to_bits()) {
        return Err(Error::Usage("extrapolation series mixes values of b".into()));
    }
    let mut sorted: Vec<&EnsembleSummary> = summaries.iter().collect();
    sorted.sort_by_key(|s| s.n_atoms);
    if sorted.windows(2).any(|w| w[0].n_atoms == w[1].n_atoms) {
        return Err(Error::Usage(format!("b={b}: duplicate N in extrapolation series")));
    }
    if sorted[0].n_atoms < 2 {
        return Err(Error::Usage("extrapolation in 1/log10 N needs N >= 2".into()));
    }
    if sorted.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "b={b}: {} distinct sizes, need 3",
            sorted.len()
        )));
    }
    Ok((b, sorted))
}

/// Default candidate grid for `b_c'`: `[4.0, 5.2]` in steps of `0.005`.
pub fn default_candidates() -> Vec<f64> {
    candidate_grid(4.0, 5.2, 0.005)
}

pub fn candidate_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| lo + k as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub b: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub b_c_prime: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub b_c_prime: f64,
    pub beta_exponent: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub fit: LinearFit,
    pub scan_grid: Vec<CandidateScore>,
    /// Candidates rejected because some `b <= b_c'`.
    pub skipped: Vec<f64>,
    /// Contiguous candidate range around the optimum whose misfit `1 - r^2`
    /// stays within twice the optimal misfit.
    pub profile_interval: (f64, f64),
}

impl PowerLawFit {
    pub fn predict(&self, b: f64) -> f64 {
        if b <= self.b_c_prime {
            0.0
        } else {
            self.amplitude * (b - self.b_c_prime).powf(self.beta_exponent)
        }
    }
}

/// For every candidate `b_c'`, fits `log10 fraction` against
/// `log10(b - b_c')` and keeps the candidate with the largest `r^2`.
/// Ties go to the smallest candidate.
pub fn scan_power_law(points: &[FractionPoint], candidates: &[f64]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law scan needs 3 points, got {}",
            points.len()
        )));
    }
    if candidates.len() < 2 {
        return Err(Error::Usage("power-law scan needs at least two candidates".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.fraction > 0.0 && p.b.is_finite())) {
        return Err(Error::Usage(format!(
            "fraction at b={} must be positive, got {}",
            p.b, p.fraction
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|p, q| p.b.total_cmp(&q.b));
    let mut grid = candidates.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let b_floor = sorted[0].b;
    let (valid, skipped): (Vec<f64>, Vec<f64>) = grid.iter().partition(|&&c| c < b_floor);
    if !skipped.is_empty() {
        warn!(
            "skipping {} candidate(s) >= smallest b = {b_floor}",
            skipped.len()
        );
    }
    if valid.is_empty() {
        return Err(Error::Usage(format!(
            "every candidate is >= the smallest b = {b_floor}"
        )));
    }

    let y: Vec<f64> = sorted.iter().map(|p| p.fraction.log10()).collect();
    let fits: Vec<LinearFit> = valid
        .par_iter()
        .map(|&c| {
            let x: Vec<f64> = sorted.iter().map(|p| (p.b - c).log10()).collect();
            linear_fit(&x, &y)
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, f) in fits.iter().enumerate() {
        if f.r_squared > fits[best].r_squared {
            best = k;
        }
    }
    if best == 0 || best + 1 == fits.len() {
        warn!(
            "power-law optimum b_c' = {} sits on the edge of the candidate grid",
            valid[best]
        );
    }
    let misfit = |k: usize| 1.0 - fits[k].r_squared;
    let allowed = 2.0 * misfit(best) + 1e-12;
    let mut lo = best;
    while lo > 0 && misfit(lo - 1) <= allowed {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < fits.len() && misfit(hi + 1) <= allowed {
        hi += 1;
    }

    let scan_grid = valid
        .iter()
        .zip(&fits)
        .map(|(&c, f)| CandidateScore {
            b_c_prime: c,
            r_squared: f.r_squared,
        })
        .collect();
    let fit = fits[best].clone();
    Ok(PowerLawFit {
        b_c_prime: valid[best],
        beta_exponent: fit.slope,
        amplitude: 10f64.powf(fit.intercept),
        r_squared: fit.r_squared,
        fit,
        scan_grid,
        skipped,
        profile_interval: (valid[lo], valid[hi]),
    })
}
