//! Locator-expansion estimate of the transition.
//!
//! The estimate needs the geometric-mean distance `lbar` between independent
//! standard-Gaussian points; `|x - y|` is `sqrt(2)` times a chi variable with
//! three degrees of freedom, whence `ln lbar = 1 - gamma/2`. The critical
//! cooperativeness of the estimate is `b_c0 = lbar^2 e`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cloud::{distance, standard_normal_point};
use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Numerically located transition the estimate is compared against.
pub const NUMERICAL_CRITICAL_B: f64 = 4.735;

/// Pairs per Monte Carlo shard. Fixed, so results do not depend on the
/// number of worker threads.
const SHARD_PAIRS: usize = 1 << 16;

/// Variance of `ln |x - y|`: `psi'(3/2) / 4 = (pi^2/2 - 4) / 4`.
pub fn ln_distance_variance() -> f64 {
    (std::f64::consts::PI.powi(2) / 2.0 - 4.0) / 4.0
}

pub fn lbar_analytic() -> f64 {
    (1.0 - EULER_GAMMA / 2.0).exp()
}

pub fn b_c0(lbar: f64) -> Result<f64> {
    if !(lbar.is_finite() && lbar > 0.0) {
        return Err(Error::Usage(format!("lbar must be positive, got {lbar}")));
    }
    Ok(lbar * lbar * std::f64::consts::E)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub mean_ln: f64,
    pub var_ln: f64,
    pub n_pairs: u64,
}

/// Running `(count, mean, M2)` of the log distances.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}

fn shard_rng(seed: u64, shard: u64) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"erm-locator-v1");
    hasher.update(seed.to_le_bytes());
    hasher.update(shard.to_le_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// `exp(mean ln |x - y|)` over fresh independent Gaussian pairs, with the
/// delta-method standard error `lbar * sd(ln) / sqrt(n)`.
pub fn lbar_monte_carlo(n_pairs: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if n_pairs < 2 {
        return Err(Error::Usage(format!("need at least 2 pairs, got {n_pairs}")));
    }
    let shards = n_pairs.div_ceil(SHARD_PAIRS as u64);
    let partials: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let start = shard * SHARD_PAIRS as u64;
            let len = (n_pairs - start).min(SHARD_PAIRS as u64);
            let mut rng = shard_rng(seed, shard);
            let mut m = Moments::default();
            for _ in 0..len {
                let x = standard_normal_point(&mut rng);
                let y = standard_normal_point(&mut rng);
                m.push(distance(&x, &y).ln());
            }
            m
        })
        .collect();
    let total = partials.into_iter().fold(Moments::default(), Moments::merge);
    let var_ln = total.m2 / (total.count - 1) as f64;
    let estimate = total.mean.exp();
    Ok(MonteCarloEstimate {
        estimate,
        stderr: estimate * (var_ln / total.count as f64).sqrt(),
        mean_ln: total.mean,
        var_ln,
        n_pairs: total.count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatorResult {
    pub lbar_analytic: f64,
    pub lbar_mc: f64,
    pub lbar_mc_stderr: f64,
    pub b_c0_analytic: f64,
    pub b_c0_mc: f64,
    pub n_pairs: u64,
    pub ln_distance_variance_mc: f64,
    /// `b_c0_analytic / NUMERICAL_CRITICAL_B`.
    pub overestimate_ratio: f64,
}

pub fn locator_result(n_pairs: u64, seed: u64) -> Result<LocatorResult> {
    let analytic = lbar_analytic();
    let mc = lbar_monte_carlo(n_pairs, seed)?;
    let b_c0_analytic = b_c0(analytic)?;
    Ok(LocatorResult {
        lbar_analytic: analytic,
        lbar_mc: mc.estimate,
        lbar_mc_stderr: mc.stderr,
        b_c0_analytic,
        b_c0_mc: b_c0(mc.estimate)?,
        n_pairs: mc.n_pairs,
        ln_distance_variance_mc: mc.var_ln,
        overestimate_ratio: b_c0_analytic / NUMERICAL_CRITICAL_B,
    })
}
