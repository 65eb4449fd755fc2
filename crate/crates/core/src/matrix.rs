//! The emission-rate matrix `S_ij = sinc(sqrt(N/b) |x_i - x_j|)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::cloud::{distance, Cloud, CloudConfig};
use crate::error::{Error, Result};

const DUMP_MAGIC: &[u8; 4] = b"ERMS";

/// Below this argument the two-term Taylor expansion is used.
const SINC_SERIES_CUTOFF: f64 = 1e-4;

/// Unnormalized cardinal sine, `sin(x)/x` with `sinc(0) = 1`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_CUTOFF {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Peak density times the cubed wavelength, `(2 pi b)^{3/2} / sqrt(N)`.
pub fn peak_density(n_atoms: usize, b: f64) -> Result<f64> {
    if n_atoms == 0 || !(b.is_finite() && b > 0.0) {
        return Err(Error::Usage(format!(
            "peak density needs N >= 1 and b > 0, got N={n_atoms} b={b}"
        )));
    }
    Ok((2.0 * std::f64::consts::PI * b).powf(1.5) / (n_atoms as f64).sqrt())
}

/// Dense symmetric `N x N` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    entries: Vec<f64>,
    n_atoms: usize,
    b: f64,
    provenance: CloudConfig,
}

impl EmissionMatrix {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn provenance(&self) -> &CloudConfig {
        &self.provenance
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_atoms + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_atoms).map(|i| self.get(i, i)).sum()
    }

    pub(crate) fn as_faer(&self) -> faer::MatRef<'_, f64> {
        faer::MatRef::from_row_major_slice(&self.entries, self.n_atoms, self.n_atoms)
    }

    /// Debug dump: `ERMS`, u64 N, f64 b, then the N*N entries, all little-endian.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let file = File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut out = BufWriter::new(file);
        let mut write = |bytes: &[u8]| {
            out.write_all(bytes)
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))
        };
        write(DUMP_MAGIC)?;
        write(&(self.n_atoms as u64).to_le_bytes())?;
        write(&self.b.to_le_bytes())?;
        for x in &self.entries {
            write(&x.to_le_bytes())?;
        }
        out.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    /// Reads a dump back as `(N, b, row-major entries)`.
    pub fn read_dump(path: &Path) -> Result<(usize, f64, Vec<f64>)> {
        let file =
            File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        let mut input = BufReader::new(file);
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if bytes.len() < 20 || &bytes[..4] != DUMP_MAGIC {
            return Err(Error::format(path, "missing ERMS header"));
        }
        let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let b = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let body = &bytes[20..];
        if n.checked_mul(n).and_then(|nn| nn.checked_mul(8)) != Some(body.len()) {
            return Err(Error::format(path, format!("body length does not match N={n}")));
        }
        let entries = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((n, b, entries))
    }
}

/// Assembles `S` for a cloud. Each unordered pair is evaluated once in the
/// upper triangle and mirrored; the diagonal is the constant 1.
pub fn build_matrix(cloud: &Cloud) -> Result<EmissionMatrix> {
    let n = cloud.len();
    let config = *cloud.config();
    let len = n.checked_mul(n).ok_or(Error::Resource {
        n,
        bytes: (n as u128) * (n as u128) * 8,
    })?;
    let mut entries: Vec<f64> = Vec::new();
    entries.try_reserve_exact(len).map_err(|_| Error::Resource {
        n,
        bytes: (len as u128) * 8,
    })?;
    entries.resize(len, 0.0);

    let scale = (n as f64 / config.b).sqrt();
    let positions = cloud.positions();
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            row[i] = 1.0;
            let pi = &positions[i];
            for (j, slot) in row.iter_mut().enumerate().skip(i + 1) {
                *slot = sinc(scale * distance(pi, &positions[j]));
            }
        });
    for i in 1..n {
        for j in 0..i {
            entries[i * n + j] = entries[j * n + i];
        }
    }

    Ok(EmissionMatrix {
        entries,
        n_atoms: n,
        b: config.b,
        provenance: config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::sample_cloud;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(std::f64::consts::PI).abs() < 1e-15);
        let x = 1e-8;
        assert_eq!(sinc(x), 1.0 - x * x / 6.0);
        // Both branches agree at the switch-over point.
        let c = SINC_SERIES_CUTOFF;
        let series = 1.0 - c * c / 6.0 + c.powi(4) / 120.0;
        assert!((c.sin() / c - series).abs() < 1e-15);
        let below = c * 0.999_999;
        assert!((sinc(below) - below.sin() / below).abs() < 1e-15);
    }

    #[test]
    fn sinc_is_even_and_bounded() {
        for k in 0..1000 {
            let x = k as f64 * 0.037;
            assert_eq!(sinc(x), sinc(-x));
            assert!(sinc(x).abs() <= 1.0);
        }
    }

    #[test]
    fn peak_density_values() {
        assert!((peak_density(20_000, 4.73).unwrap() - 1.146).abs() < 1e-3);
        // b = 1/(2 pi) makes the prefactor exactly one.
        let unit = peak_density(1, 1.0 / (2.0 * std::f64::consts::PI)).unwrap();
        assert!((unit - 1.0).abs() < 1e-15);
        let a = peak_density(100, 3.0).unwrap();
        let b = peak_density(400, 3.0).unwrap();
        assert_eq!(a / 2.0, b);
        assert!(peak_density(0, 1.0).is_err());
        assert!(peak_density(10, 0.0).is_err());
    }

    #[test]
    fn small_matrices() {
        let one = Cloud::from_positions(vec![[0.1, 0.2, 0.3]], 2.0).unwrap();
        assert_eq!(build_matrix(&one).unwrap().entries(), &[1.0]);

        let two = Cloud::from_positions(vec![[0.0, 0.0, 0.0], [0.3, 0.4, 0.0]], 2.5).unwrap();
        let m = build_matrix(&two).unwrap();
        let s = sinc(0.5 * (2.0f64 / 2.5).sqrt());
        assert_eq!(m.entries(), &[1.0, s, s, 1.0]);
    }

    #[test]
    fn coincident_atoms_give_unit_entries() {
        let cloud = Cloud::from_positions(vec![[1.0, 1.0, 1.0]; 3], 1.0).unwrap();
        assert!(build_matrix(&cloud).unwrap().entries().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn entries_match_scalar_evaluation() {
        let config = CloudConfig::new(5, 3.7, 11, 2).unwrap();
        let cloud = sample_cloud(&config).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let scale = (5.0f64 / 3.7).sqrt();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j {
                    1.0
                } else {
                    let (lo, hi) = (i.min(j), i.max(j));
                    sinc(scale * cloud.pairwise_distance(lo, hi).unwrap())
                };
                assert_eq!(m.get(i, j), expected);
            }
        }
        assert_eq!(m.trace(), 5.0);
        assert_eq!(*m.provenance(), config);
    }

    #[test]
    fn dump_round_trip() {
        let cloud = sample_cloud(&CloudConfig::new(4, 1.5, 1, 0).unwrap()).unwrap();
        let m = build_matrix(&cloud).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        m.write_dump(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"ERMS");
        assert_eq!(bytes.len(), 4 + 8 + 8 + 16 * 8);
        let (n, b, entries) = EmissionMatrix::read_dump(&path).unwrap();
        assert_eq!((n, b), (4, 1.5));
        assert_eq!(entries, m.entries());
    }
}
