//! Eigenvalues of `S`, condensate counting and collective decay.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use faer::Side;
use serde::{Deserialize, Serialize};

use crate::cloud::CloudConfig;
use crate::error::{Error, Result};
use crate::matrix::EmissionMatrix;

/// Working precision of the diagonalization; smaller eigenvalues are zero.
pub const ZERO_THRESHOLD: f64 = 1e-13;

const ARCHIVE_MAGIC: &[u8; 8] = b"ERMSPEC1";
const ARCHIVE_HEADER_LEN: usize = 8 + 8 + 8 + 8 + 8;

/// Allowed negative excursion of a computed spectrum, `1e-10 * N`.
pub fn psd_tolerance(n_atoms: usize) -> f64 {
    1e-10 * n_atoms as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    n_atoms: usize,
    b: f64,
    provenance: CloudConfig,
    psd_violation: f64,
}

impl Spectrum {
    /// Builds a spectrum from raw eigenvalues (sorted here). The provenance
    /// must describe `eigenvalues.len()` atoms.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, provenance: CloudConfig) -> Result<Self> {
        provenance.validate()?;
        if eigenvalues.len() != provenance.n_atoms {
            return Err(Error::Usage(format!(
                "{} eigenvalues for N={}",
                eigenvalues.len(),
                provenance.n_atoms
            )));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::Usage("eigenvalues must be finite".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        let psd_violation = eigenvalues[0].min(0.0);
        Ok(Spectrum {
            eigenvalues,
            n_atoms: provenance.n_atoms,
            b: provenance.b,
            provenance,
            psd_violation,
        })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn provenance(&self) -> &CloudConfig {
        &self.provenance
    }

    pub fn psd_violation(&self) -> f64 {
        self.psd_violation
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.n_atoms - 1]
    }

    /// Number of eigenvalues strictly below `threshold`. Negative round-off
    /// values are included.
    pub fn count_condensate(&self, threshold: f64) -> Result<usize> {
        if !(threshold > 0.0) {
            return Err(Error::Usage(format!("threshold must be positive, got {threshold}")));
        }
        Ok(self.eigenvalues.partition_point(|&x| x < threshold))
    }

    /// Trace, lower and upper bound checks. Failures are reported, never
    /// clamped away.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_atoms as f64;
        let eps = psd_tolerance(self.n_atoms);
        let sum: f64 = self.eigenvalues.iter().sum();
        let anomaly = if ((sum - n) / n).abs() > 1e-10 {
            Some(format!("eigenvalue sum {sum} deviates from N"))
        } else if self.min_eigenvalue() < -eps {
            Some(format!("lambda_min = {:e} below -{eps:e}", self.min_eigenvalue()))
        } else if self.max_eigenvalue() > n + eps {
            Some(format!("lambda_max = {} exceeds N", self.max_eigenvalue()))
        } else {
            None
        };
        match anomaly {
            Some(reason) => Err(numerical(&self.provenance, reason)),
            None => Ok(()),
        }
    }

    /// `spec_b<b>_N<N>_r<idx>.bin`
    pub fn archive_file_name(config: &CloudConfig) -> String {
        format!(
            "spec_b{}_N{}_r{}.bin",
            config.b, config.n_atoms, config.realization_index
        )
    }

    pub fn to_archive_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(ARCHIVE_HEADER_LEN + 8 * self.n_atoms);
        bytes.extend_from_slice(ARCHIVE_MAGIC);
        bytes.extend_from_slice(&(self.n_atoms as u64).to_le_bytes());
        bytes.extend_from_slice(&self.b.to_le_bytes());
        bytes.extend_from_slice(&self.provenance.base_seed.to_le_bytes());
        bytes.extend_from_slice(&self.provenance.realization_index.to_le_bytes());
        for x in &self.eigenvalues {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        bytes
    }

    pub fn from_archive_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < ARCHIVE_HEADER_LEN || &bytes[..8] != ARCHIVE_MAGIC {
            return Err(Error::format(origin, "missing ERMSPEC1 header"));
        }
        let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * (k + 1)].try_into().unwrap() };
        let n = u64::from_le_bytes(word(1)) as usize;
        let b = f64::from_le_bytes(word(2));
        let base_seed = u64::from_le_bytes(word(3));
        let realization_index = u64::from_le_bytes(word(4));
        let body = &bytes[ARCHIVE_HEADER_LEN..];
        if n.checked_mul(8) != Some(body.len()) {
            return Err(Error::format(origin, format!("body length does not match N={n}")));
        }
        let eigenvalues: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if eigenvalues.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::format(origin, "eigenvalues are not ascending"));
        }
        let config = CloudConfig {
            n_atoms: n,
            b,
            base_seed,
            realization_index,
        };
        Spectrum::from_eigenvalues(eigenvalues, config)
            .map_err(|e| Error::format(origin, e.to_string()))
    }

    /// Writes the archive into `dir` under [`Spectrum::archive_file_name`].
    pub fn write_archive(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(Self::archive_file_name(&self.provenance));
        let file = File::create(&path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut out = BufWriter::new(file);
        out.write_all(&self.to_archive_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        Ok(path)
    }

    pub fn read_archive(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_archive_bytes(&bytes, path)
    }
}

fn numerical(config: &CloudConfig, reason: impl Into<String>) -> Error {
    Error::Numerical {
        n_atoms: config.n_atoms,
        b: config.b,
        base_seed: config.base_seed,
        realization_index: config.realization_index,
        reason: reason.into(),
    }
}

/// All eigenvalues, ascending, without eigenvectors.
pub fn eigenvalues(matrix: &EmissionMatrix) -> Result<Spectrum> {
    let config = *matrix.provenance();
    let values = matrix
        .as_faer()
        .self_adjoint_eigenvalues(Side::Upper)
        .map_err(|e| numerical(&config, format!("eigensolver did not converge: {e:?}")))?;
    let spectrum = Spectrum::from_eigenvalues(values, config)?;
    spectrum.check_invariants()?;
    Ok(spectrum)
}

pub fn min_eigenvalue(spectrum: &Spectrum) -> f64 {
    spectrum.min_eigenvalue()
}

pub fn count_condensate(spectrum: &Spectrum, threshold: f64) -> Result<usize> {
    spectrum.count_condensate(threshold)
}

/// Survival probability `P(t)` in units of `1/Gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

/// Normalized state with equal amplitude on every atom.
pub fn uniform_state(n_atoms: usize) -> Vec<f64> {
    vec![1.0 / (n_atoms as f64).sqrt(); n_atoms]
}

/// Purely dissipative evolution `d beta/dt = -(1/2) S beta`, so
/// `P(t) = sum_k |<v_k, beta(0)>|^2 exp(-lambda_k t)`.
pub fn decay_curve(matrix: &EmissionMatrix, initial: &[f64], times: &[f64]) -> Result<DecayCurve> {
    let n = matrix.n_atoms();
    if initial.len() != n {
        return Err(Error::Usage(format!(
            "initial state has length {}, expected {n}",
            initial.len()
        )));
    }
    let norm_sq: f64 = initial.iter().map(|x| x * x).sum();
    if (norm_sq.sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::Usage(format!(
            "initial state must be normalized, |beta| = {}",
            norm_sq.sqrt()
        )));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Usage("times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Usage("times must be ascending".into()));
    }

    let config = *matrix.provenance();
    let evd = matrix
        .as_faer()
        .self_adjoint_eigen(Side::Upper)
        .map_err(|e| numerical(&config, format!("eigensolver did not converge: {e:?}")))?;
    let vectors = evd.U();
    let values = evd.S().column_vector();
    let modes: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let overlap: f64 = (0..n).map(|i| vectors[(i, k)] * initial[i]).sum();
            (values[k], overlap * overlap)
        })
        .collect();

    let survival = times
        .iter()
        .map(|&t| {
            let p: f64 = modes.iter().map(|&(lambda, w)| w * (-lambda * t).exp()).sum();
            p.clamp(0.0, 1.0)
        })
        .collect();
    Ok(DecayCurve {
        times: times.to_vec(),
        survival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{sample_cloud, Cloud};
    use crate::matrix::{build_matrix, sinc};

    fn synthetic(values: &[f64]) -> Spectrum {
        let config = CloudConfig::new(values.len(), 1.0, 0, 0).unwrap();
        Spectrum::from_eigenvalues(values.to_vec(), config).unwrap()
    }

    #[test]
    fn single_atom() {
        let cloud = Cloud::from_positions(vec![[0.0; 3]], 1.0).unwrap();
        let spectrum = eigenvalues(&build_matrix(&cloud).unwrap()).unwrap();
        assert_eq!(spectrum.eigenvalues(), &[1.0]);
        assert_eq!(min_eigenvalue(&spectrum), 1.0);
        assert_eq!(count_condensate(&spectrum, ZERO_THRESHOLD).unwrap(), 0);
    }

    #[test]
    fn two_atoms() {
        let cloud = Cloud::from_positions(vec![[0.0; 3], [0.2, -0.1, 0.4]], 0.7).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let s = m.get(0, 1);
        let spectrum = eigenvalues(&m).unwrap();
        assert!((spectrum.eigenvalues()[0] - (1.0 - s.abs())).abs() < 1e-12);
        assert!((spectrum.eigenvalues()[1] - (1.0 + s.abs())).abs() < 1e-12);
        assert!(s > 0.0);
        assert!((min_eigenvalue(&spectrum) - (1.0 - s)).abs() < 1e-12);
        assert_eq!(s, sinc(cloud.pairwise_distance(0, 1).unwrap() * (2.0f64 / 0.7).sqrt()));
    }

    #[test]
    fn condensate_counting() {
        let spectrum = synthetic(&[1e-15, 1e-14, 0.5, 1.2]);
        assert_eq!(count_condensate(&spectrum, ZERO_THRESHOLD).unwrap(), 2);
        let spectrum = synthetic(&[-3e-15, 2e-13, 1.0, 2.8]);
        assert_eq!(count_condensate(&spectrum, ZERO_THRESHOLD).unwrap(), 1);
        assert!(count_condensate(&spectrum, 0.0).is_err());
    }

    #[test]
    fn anomalies_are_reported() {
        let spectrum = synthetic(&[-1e-3, 2.001]);
        assert!(matches!(spectrum.check_invariants(), Err(Error::Numerical { .. })));
        assert_eq!(spectrum.psd_violation(), -1e-3);
        let spectrum = synthetic(&[0.5, 0.5]);
        assert!(spectrum.check_invariants().is_err());
        let spectrum = synthetic(&[0.25, 1.75]);
        assert!(spectrum.check_invariants().is_ok());
        assert_eq!(spectrum.psd_violation(), 0.0);
    }

    #[test]
    fn archive_round_trip_and_corruption() {
        let config = CloudConfig::new(30, 2.5, 77, 4).unwrap();
        let m = build_matrix(&sample_cloud(&config).unwrap()).unwrap();
        let spectrum = eigenvalues(&m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = spectrum.write_archive(dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), "spec_b2.5_N30_r4.bin");
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"ERMSPEC1");
        assert_eq!(bytes.len(), 40 + 30 * 8);
        assert_eq!(Spectrum::read_archive(&path).unwrap(), spectrum);

        assert!(Spectrum::from_archive_bytes(&bytes[..bytes.len() - 3], &path).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Spectrum::from_archive_bytes(&bad, &path), Err(Error::Format { .. })));
    }

    #[test]
    fn decay_of_isolated_atom() {
        let cloud = Cloud::from_positions(vec![[0.0; 3]], 1.0).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let curve = decay_curve(&m, &[1.0], &times).unwrap();
        for (t, p) in curve.times.iter().zip(&curve.survival) {
            assert!((p - (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_of_eigenmode() {
        // Symmetric/antisymmetric combinations are exact eigenvectors for N = 2.
        let cloud = Cloud::from_positions(vec![[0.0; 3], [0.3, 0.0, 0.0]], 1.0).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let s = m.get(0, 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let times = [0.0, 0.5, 1.0, 4.0, 20.0];
        let plus = decay_curve(&m, &[h, h], &times).unwrap();
        let minus = decay_curve(&m, &[h, -h], &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((plus.survival[k] - (-(1.0 + s) * t).exp()).abs() < 1e-12);
            assert!((minus.survival[k] - (-(1.0 - s) * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_rejects_bad_input() {
        let cloud = Cloud::from_positions(vec![[0.0; 3], [1.0, 0.0, 0.0]], 1.0).unwrap();
        let m = build_matrix(&cloud).unwrap();
        assert!(matches!(decay_curve(&m, &[1.0, 1.0], &[0.0]), Err(Error::Usage(_))));
        assert!(decay_curve(&m, &[1.0], &[0.0]).is_err());
        assert!(decay_curve(&m, &uniform_state(2), &[1.0, 0.5]).is_err());
        assert!(decay_curve(&m, &uniform_state(2), &[-1.0]).is_err());
        let curve = decay_curve(&m, &uniform_state(2), &[0.0]).unwrap();
        assert!((curve.survival[0] - 1.0).abs() < 1e-14);
    }
}
