//! Reference implementations used only by the integration tests. None of
//! them share code with the library's numerical paths.

#![allow(dead_code)]

/// Row-major dense matrix helper for the oracles.
pub type Dense = Vec<Vec<f64>>;

pub fn sinc_reference(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Builds `S` directly from positions.
pub fn reference_matrix(positions: &[[f64; 3]], b: f64) -> Dense {
    let n = positions.len();
    let k = (n as f64 / b).sqrt();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = (0..3)
                        .map(|c| (positions[i][c] - positions[j][c]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    sinc_reference(k * d)
                })
                .collect()
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn determinant(mut a: Dense) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    det
}

/// Number of eigenvalues of the symmetric matrix `a` strictly below `x`:
/// the sign changes along the characteristic polynomials of the leading
/// principal submatrices, `D_0 = 1, D_k = det(A_k - x I)`.
pub fn count_below(a: &Dense, x: f64) -> usize {
    let n = a.len();
    let mut previous = 1.0f64;
    let mut changes = 0;
    for k in 1..=n {
        let block: Dense = (0..k)
            .map(|i| (0..k).map(|j| a[i][j] - if i == j { x } else { 0.0 }).collect())
            .collect();
        let mut d = determinant(block);
        if d == 0.0 {
            // A vanishing minor takes the sign opposite to its predecessor.
            d = -previous * f64::MIN_POSITIVE;
        }
        if d.signum() != previous.signum() {
            changes += 1;
        }
        previous = d;
    }
    changes
}

/// All eigenvalues, ascending, each bracketed by bisection on `count_below`
/// inside the Gershgorin interval.
pub fn bisection_eigenvalues(a: &Dense, width: f64) -> Vec<f64> {
    let n = a.len();
    let radius = |i: usize| (0..n).filter(|&j| j != i).map(|j| a[i][j].abs()).sum::<f64>();
    let lo0 = (0..n).map(|i| a[i][i] - radius(i)).fold(f64::INFINITY, f64::min) - 1.0;
    let hi0 = (0..n).map(|i| a[i][i] + radius(i)).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    (0..n)
        .map(|k| {
            // k-th eigenvalue: smallest x with count_below(x) > k.
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > width {
                let mid = 0.5 * (lo + hi);
                if count_below(a, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Classical fourth-order Runge-Kutta for `d beta/dt = -(1/2) S beta`,
/// returning `|beta|^2` at each requested time.
pub fn rk4_survival(s: &Dense, initial: &[f64], times: &[f64], step: f64) -> Vec<f64> {
    let n = initial.len();
    let rhs = |beta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| -0.5 * (0..n).map(|j| s[i][j] * beta[j]).sum::<f64>())
            .collect()
    };
    let axpy = |y: &[f64], h: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + h * b).collect()
    };
    let mut beta = initial.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let h = step.min(target - t);
            let k1 = rhs(&beta);
            let k2 = rhs(&axpy(&beta, h / 2.0, &k1));
            let k3 = rhs(&axpy(&beta, h / 2.0, &k2));
            let k4 = rhs(&axpy(&beta, h, &k3));
            for i in 0..n {
                beta[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += h;
            if target - t < 1e-15 {
                t = target;
            }
        }
        out.push(beta.iter().map(|x| x * x).sum());
    }
    out
}

/// CDF of `|x - y|` for independent standard Gaussian points in three
/// dimensions: `|x - y| / sqrt(2)` is chi-distributed with three degrees
/// of freedom.
pub fn pair_distance_cdf(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let u = r / std::f64::consts::SQRT_2;
    statrs::function::erf::erf(u / std::f64::consts::SQRT_2)
        - (2.0 / std::f64::consts::PI).sqrt() * u * (-u * u / 2.0).exp()
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
