//! Spectral-signature closure tests and support-dimension estimation from
//! point clouds (correlation-sum and local neighbor-count scaling, the
//! standard numerical proxies for Hausdorff-type dimensions).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, hermitian_eigenvalues, orthonormalize_columns, CMat};
use crate::space::{distance, random_operator_point, OperatorPoint, Point};

/// Counts eigenvalues above tol and below -tol of a self-adjoint matrix.
pub fn eigen_signature(a: &CMat, tol: f64) -> Result<(usize, usize)> {
    let residual = frobenius_norm(&(a - a.adjoint()));
    if residual > tol {
        return Err(Error::NotSelfAdjoint { residual, tol });
    }
    let herm = (a + a.adjoint()) * num_complex::Complex64::new(0.5, 0.0);
    let eigs = hermitian_eigenvalues(&herm);
    let n_pos = eigs.iter().filter(|l| **l > tol).count();
    let n_neg = eigs.iter().filter(|l| **l < -tol).count();
    Ok((n_pos, n_neg))
}

/// Signature of an operator point, read off its factored form.
pub fn eigen_signature_op(a: &OperatorPoint, tol: f64) -> (usize, usize) {
    let n_pos = a.eigenvalues().iter().filter(|l| **l > tol).count();
    let n_neg = a.eigenvalues().iter().filter(|l| **l < -tol).count();
    (n_pos, n_neg)
}

/// For each trial, builds a norm-Cauchy sequence of admissible operators
/// (signature at most (s, s)) and checks that the numerical limit keeps the
/// signature bound. Returns the violation count, expected 0.
pub fn closure_test(s: usize, n: usize, trials: usize, seed: u64) -> Result<usize> {
    if trials == 0 {
        return Err(Error::Config("closure test needs at least one trial".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::named_seed(seed, "closure"));
    let mut violations = 0usize;
    for _ in 0..trials {
        let base = random_operator_point(s, n, &mut rng);
        let mut current = base.clone();
        for j in 1..=30 {
            let decay = 0.5f64.powi(j);
            let eigs: Vec<f64> = current
                .eigenvalues()
                .iter()
                .map(|l| l * (1.0 + 0.3 * decay * rng.gen_range(-1.0..1.0f64)))
                .collect();
            let jitter = CMat::from_fn(n, current.rank(), |_, _| {
                num_complex::Complex64::new(
                    0.1 * decay * rng.gen_range(-1.0..1.0),
                    0.1 * decay * rng.gen_range(-1.0..1.0),
                )
            });
            let frame = orthonormalize_columns(&(current.frame() + jitter), 1e-12);
            if frame.ncols() != current.rank() {
                // degenerate jitter; keep the previous element
                continue;
            }
            current = OperatorPoint::new(eigs, frame, s, n)?;
        }
        let limit = current.dense();
        let scale = frobenius_norm(&limit).max(1.0);
        let (n_pos, n_neg) = eigen_signature(&limit, 1e-8 * scale)?;
        if n_pos > s || n_neg > s {
            violations += 1;
        }
    }
    Ok(violations)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionReport {
    pub global_estimate: f64,
    pub local_estimates: Vec<f64>,
    pub radii_used: Vec<f64>,
    /// Subsampled pairs with distance below each radius, aligned with
    /// `radii_used`.
    pub pair_counts: Vec<usize>,
    /// R-squared of the global log-log fit.
    pub fit_quality: f64,
}

/// Correlation-sum dimension estimate of a point cloud, plus per-point local
/// scaling estimates. Pair counts run over a deterministic subsample when
/// the cloud is large.
pub fn estimate_dimension(points: &[Point], radii: &[f64]) -> Result<DimensionReport> {
    if points.len() < 10 {
        return Err(Error::Config("dimension estimate needs at least 10 points".into()));
    }
    if radii.len() < 3 {
        return Err(Error::Config("dimension estimate needs at least 3 radii".into()));
    }
    let mut radii: Vec<f64> = radii.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if radii[0] <= 0.0 {
        return Err(Error::Config("radii must be positive".into()));
    }
    if radii[radii.len() - 1] / radii[0] < 10.0 {
        return Err(Error::Config("radii must span at least one decade".into()));
    }

    let cap = 1500usize;
    let stride = points.len().div_ceil(cap);
    let sub: Vec<&Point> = points.iter().step_by(stride).collect();
    let m = sub.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            dists.push(distance(sub[i], sub[j])?);
        }
    }
    let total_pairs = dists.len().max(1);
    let pair_counts: Vec<usize> = radii
        .iter()
        .map(|r| dists.iter().filter(|d| **d <= *r).count())
        .collect();
    if dists.iter().all(|d| *d < 1e-15) {
        return Ok(DimensionReport {
            global_estimate: 0.0,
            local_estimates: vec![0.0; m.min(100)],
            radii_used: radii,
            pair_counts,
            fit_quality: 1.0,
        });
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, count) in radii.iter().zip(&pair_counts) {
        if *count > 0 {
            xs.push(r.ln());
            ys.push((*count as f64 / total_pairs as f64).ln());
        }
    }
    let (slope, r2) = fit_line(&xs, &ys);
    let global_estimate = slope.max(0.0);

    let local_cap = 100usize;
    let local_stride = m.div_ceil(local_cap);
    let mut local_estimates = Vec::new();
    for i in (0..m).step_by(local_stride) {
        let mut lx = Vec::new();
        let mut ly = Vec::new();
        for r in &radii {
            let mut count = 0usize;
            for j in 0..m {
                if i != j && pair_dist(&dists, m, i, j) <= *r {
                    count += 1;
                }
            }
            if count > 0 {
                lx.push(r.ln());
                ly.push((count as f64).ln());
            }
        }
        let (ls, _) = fit_line(&lx, &ly);
        local_estimates.push(ls.max(0.0));
    }

    Ok(DimensionReport {
        global_estimate,
        local_estimates,
        radii_used: radii,
        pair_counts,
        fit_quality: r2,
    })
}

fn pair_dist(dists: &[f64], m: usize, i: usize, j: usize) -> f64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    // index into the packed upper triangle
    let idx = a * m - a * (a + 1) / 2 + (b - a - 1);
    dists[idx]
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let pred = my + slope * (x - mx);
            (y - pred) * (y - pred)
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, r2)
}

/// Uniform sample of the unit segment, as level-1 points in the plane.
pub fn segment_cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::named_seed(seed, "segment"));
    (0..n)
        .map(|_| Point::euclidean(1, vec![rng.gen_range(0.0..1.0), 0.0]).unwrap())
        .collect()
}

/// Uniform sample of the unit square.
pub fn square_cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::named_seed(seed, "square"));
    (0..n)
        .map(|_| {
            Point::euclidean(1, vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).unwrap()
        })
        .collect()
}

/// Log-spaced radii over [lo, hi].
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}
