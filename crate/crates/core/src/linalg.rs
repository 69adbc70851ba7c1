//! Small dense linear algebra helpers: Hermitian spectra, a general complex
//! eigensolver (Hessenberg reduction plus shifted QR), column
//! orthonormalization, and order-stable summation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Pairwise (tree) summation. Used everywhere a double sum feeds a reported
/// number so results stay reproducible across atom orderings.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = a
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ev
}

/// Operator norm of a Hermitian matrix (largest eigenvalue modulus).
pub fn hermitian_operator_norm(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .iter()
        .fold(0.0f64, |m, &l| m.max(l.abs()))
}

pub fn frobenius_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Modified Gram-Schmidt on the columns of `a`; columns with residual norm
/// below `tol` are dropped. Returns a matrix with orthonormal columns
/// spanning the same space.
pub fn orthonormalize_columns(a: &CMat, tol: f64) -> CMat {
    let n = a.nrows();
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).clone_owned();
        for b in &basis {
            let coeff = b.dotc(&v);
            v -= b * coeff;
        }
        // second pass for numerical orthogonality
        for b in &basis {
            let coeff = b.dotc(&v);
            v -= b * coeff;
        }
        let norm = v.norm();
        if norm > tol {
            basis.push(v / Complex64::new(norm, 0.0));
        }
    }
    let r = basis.len();
    CMat::from_fn(n, r, |i, j| basis[j][i])
}

/// Eigenvalues of a general complex square matrix, by Hessenberg reduction
/// and shifted QR iteration with Givens rotations. Intended for the small
/// matrices of this crate (order at most a few dozen).
pub fn complex_eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite matrix entry".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![a[(0, 0)]]);
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
    let eps = 1e-14;
    let mut h = hessenberg(a);
    let mut eigs: Vec<Complex64> = Vec::with_capacity(n);
    let mut hi = n;
    let mut iters_since_deflate = 0usize;
    let max_sweeps = 100 * n;
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            eigs.push(h[(0, 0)]);
            hi = 0;
            continue;
        }
        // deflate a negligible trailing subdiagonal entry
        let sub = h[(hi - 1, hi - 2)].norm();
        let local = h[(hi - 2, hi - 2)].norm() + h[(hi - 1, hi - 1)].norm();
        if sub <= eps * (local + scale) {
            eigs.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            iters_since_deflate = 0;
            continue;
        }
        // active block [lo, hi): split at any negligible interior subdiagonal
        let mut lo = hi - 1;
        while lo > 0 {
            let s = h[(lo, lo - 1)].norm();
            let l = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if s <= eps * (l + scale) {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        let shift = if iters_since_deflate > 0 && iters_since_deflate % 12 == 0 {
            // exceptional shift to break symmetry cycles
            Complex64::new(h[(hi - 1, hi - 2)].norm() + h[(hi - 2, hi - 3.min(hi - 2))].norm(), 0.0)
        } else {
            wilkinson_shift(&h, hi)
        };
        qr_sweep(&mut h, lo, hi, shift);
        iters_since_deflate += 1;
        total += 1;
        if total > max_sweeps {
            return Err(Error::NumericalFailure(
                "QR iteration did not converge".into(),
            ));
        }
    }
    eigs.reverse();
    Ok(eigs)
}

fn hessenberg(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        for i in (k + 2..n).rev() {
            let (c, s) = givens(h[(i - 1, k)], h[(i, k)]);
            apply_givens_rows(&mut h, i - 1, i, c, s, k, n);
            apply_givens_cols(&mut h, i - 1, i, c, s, 0, n);
        }
    }
    h
}

/// Rotation G = [[c, s], [-conj(s), c]] with real c >= 0 annihilating b:
/// G * [a; b] = [r; 0].
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let an = a.norm();
    let r = (an * an + bn * bn).sqrt();
    if an == 0.0 {
        // r = |b|; rotate b into the top slot
        return (0.0, b.conj() / bn);
    }
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

fn apply_givens_rows(h: &mut CMat, i: usize, j: usize, c: f64, s: Complex64, from: usize, to: usize) {
    for col in from..to {
        let x = h[(i, col)];
        let y = h[(j, col)];
        h[(i, col)] = x * c + y * s;
        h[(j, col)] = -x * s.conj() + y * c;
    }
}

fn apply_givens_cols(h: &mut CMat, i: usize, j: usize, c: f64, s: Complex64, from: usize, to: usize) {
    for row in from..to {
        let x = h[(row, i)];
        let y = h[(row, j)];
        h[(row, i)] = x * c + y * s.conj();
        h[(row, j)] = -x * s + y * c;
    }
}

fn wilkinson_shift(h: &CMat, hi: usize) -> Complex64 {
    let a = h[(hi - 2, hi - 2)];
    let b = h[(hi - 2, hi - 1)];
    let c = h[(hi - 1, hi - 2)];
    let d = h[(hi - 1, hi - 1)];
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn qr_sweep(h: &mut CMat, lo: usize, hi: usize, shift: Complex64) {
    let n = h.ncols();
    for k in lo..hi {
        h[(k, k)] -= shift;
    }
    let mut rots: Vec<(usize, f64, Complex64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi - 1 {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        apply_givens_rows(h, k, k + 1, c, s, k, n);
        h[(k + 1, k)] = Complex64::new(0.0, 0.0);
        rots.push((k, c, s));
    }
    for &(k, c, s) in &rots {
        let top = (k + 2).min(hi);
        apply_givens_cols(h, k, k + 1, c, s, 0, top);
    }
    for k in lo..hi {
        h[(k, k)] += shift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cmat(n: usize, rng: &mut impl Rng) -> CMat {
        CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-4.0, 0.0),
            Complex64::new(0.5, 2.0),
        ]));
        let mut ev = complex_eigenvalues(&d).unwrap();
        ev.sort_by(|p, q| p.re.partial_cmp(&q.re).unwrap());
        assert!((ev[0] - Complex64::new(-4.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(0.5, 2.0)).norm() < 1e-12);
        assert!((ev[2] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eigenvalues_match_trace_and_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..=12 {
            let a = random_cmat(n, &mut rng);
            let ev = complex_eigenvalues(&a).unwrap();
            assert_eq!(ev.len(), n);
            let tr: Complex64 = (0..n).map(|i| a[(i, i)]).sum();
            let ev_sum: Complex64 = ev.iter().sum();
            assert!((tr - ev_sum).norm() < 1e-9 * (1.0 + tr.norm()), "n={n}");
            let det = a.clone().lu().determinant();
            let ev_prod: Complex64 = ev.iter().product();
            assert!((det - ev_prod).norm() < 1e-7 * (1.0 + det.norm()), "n={n}");
        }
    }

    #[test]
    fn hermitian_agrees_with_general_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_cmat(6, &mut rng);
            let herm = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
            let mut sym = hermitian_eigenvalues(&herm);
            let mut gen: Vec<f64> = complex_eigenvalues(&herm).unwrap().iter().map(|z| z.re).collect();
            sym.sort_by(|p, q| p.partial_cmp(q).unwrap());
            gen.sort_by(|p, q| p.partial_cmp(q).unwrap());
            for (s, g) in sym.iter().zip(&gen) {
                assert!((s - g).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn orthonormalize_drops_dependent_columns() {
        let a = CMat::from_fn(4, 3, |i, j| {
            if j == 2 {
                Complex64::new((i == 0) as u8 as f64 + (i == 1) as u8 as f64, 0.0)
            } else {
                Complex64::new((i == j) as u8 as f64, 0.0)
            }
        });
        let q = orthonormalize_columns(&a, 1e-12);
        assert_eq!(q.ncols(), 2);
        let g = q.adjoint() * &q;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }
}
