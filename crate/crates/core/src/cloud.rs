//! Gaussian atomic clouds in dimensionless coordinates.
//!
//! Positions are `x_i = r_i / sigma`, drawn i.i.d. from the three-dimensional
//! standard normal. The physical scales `k_a` and `sigma` only enter the model
//! through the cooperativeness `b = N / (k_a sigma)^2`, so a cloud carries `b`
//! and nothing else.
//!
//! Sampling is a pure function of [`CloudConfig`]: the generator is a ChaCha20
//! stream keyed by a SHA-256 digest of `(base_seed, realization_index,
//! n_atoms, b.to_bits())`, and normals are drawn with the ziggurat sampler of
//! `rand_distr::StandardNormal`, three per atom in `x, y, z` order.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudConfig {
    pub n_atoms: usize,
    /// Cooperativeness parameter.
    pub b: f64,
    pub base_seed: u64,
    pub realization_index: u64,
}

impl CloudConfig {
    pub fn new(n_atoms: usize, b: f64, base_seed: u64, realization_index: u64) -> Result<Self> {
        let config = CloudConfig {
            n_atoms,
            b,
            base_seed,
            realization_index,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::Config("n_atoms must be at least 1".into()));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::Config(format!(
                "cooperativeness b must be positive and finite, got {}",
                self.b
            )));
        }
        Ok(())
    }

    /// 256-bit generator key for this realization.
    pub fn derived_seed(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"erm-cloud-v1");
        hasher.update(self.base_seed.to_le_bytes());
        hasher.update(self.realization_index.to_le_bytes());
        hasher.update((self.n_atoms as u64).to_le_bytes());
        hasher.update(self.b.to_bits().to_le_bytes());
        hasher.finalize().into()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    positions: Vec<Point>,
    config: CloudConfig,
}

impl Cloud {
    /// Wraps explicit positions, e.g. hand-placed test geometries.
    pub fn from_positions(positions: Vec<Point>, b: f64) -> Result<Self> {
        let config = CloudConfig::new(positions.len(), b, 0, 0)?;
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("cloud coordinates must be finite".into()));
        }
        Ok(Cloud { positions, config })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn config(&self) -> &CloudConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn pairwise_distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::Usage(format!(
                "atom index ({i}, {j}) out of range for a cloud of {n} atoms"
            )));
        }
        Ok(distance(&self.positions[i], &self.positions[j]))
    }

    /// Writes the plain-text dump: a `# N=.. b=.. seed=.. idx=..` header then
    /// one `x y z` line per atom.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let c = &self.config;
        writeln!(
            out,
            "# N={} b={} seed={} idx={}",
            c.n_atoms, c.b, c.base_seed, c.realization_index
        )?;
        for [x, y, z] in &self.positions {
            writeln!(out, "{x} {y} {z}")?;
        }
        Ok(())
    }
}

/// Euclidean distance. Symmetric to the last bit: the coordinate differences
/// only change sign when the arguments are swapped.
#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn sample_cloud(config: &CloudConfig) -> Result<Cloud> {
    config.validate()?;
    let mut rng = ChaCha20Rng::from_seed(config.derived_seed());
    let positions = (0..config.n_atoms)
        .map(|_| standard_normal_point(&mut rng))
        .collect();
    Ok(Cloud {
        positions,
        config: *config,
    })
}

pub(crate) fn standard_normal_point<R: rand::Rng + ?Sized>(rng: &mut R) -> Point {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    let z: f64 = StandardNormal.sample(rng);
    [x, y, z]
}
