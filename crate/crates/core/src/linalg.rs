//! Small dense helpers shared by the imagers and solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::C64;

const LANES: usize = 4;

/// Complex dot product `sum a_k b_k` over split real/imaginary arrays.
/// The accumulation order is fixed, so every caller gets bit-identical
/// results on a given machine, including [`cdot_split_multi`].
#[inline]
pub fn cdot_split(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> C64 {
    cdot_split_multi::<1>(ar, ai, [br], [bi])[0]
}

/// `B` dot products sharing the left operand, each summed exactly as
/// [`cdot_split`] would.
#[inline]
pub fn cdot_split_multi<const B: usize>(ar: &[f64], ai: &[f64], br: [&[f64]; B], bi: [&[f64]; B]) -> [C64; B] {
    let n = ar.len();
    assert!(ai.len() == n && br.iter().all(|b| b.len() == n) && bi.iter().all(|b| b.len() == n));
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { cdot_multi_avx2::<B>(ar, ai, br, bi) };
        }
    }
    cdot_multi_body::<B>(ar, ai, br, bi)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn cdot_multi_avx2<const B: usize>(ar: &[f64], ai: &[f64], br: [&[f64]; B], bi: [&[f64]; B]) -> [C64; B] {
    cdot_multi_body::<B>(ar, ai, br, bi)
}

#[inline(always)]
fn cdot_multi_body<const B: usize>(ar: &[f64], ai: &[f64], br: [&[f64]; B], bi: [&[f64]; B]) -> [C64; B] {
    let n = ar.len();
    let mut sr = [[0.0f64; LANES]; B];
    let mut si = [[0.0f64; LANES]; B];
    let chunks = n / LANES;
    for c in 0..chunks {
        let k = LANES * c;
        let a_r: &[f64; LANES] = ar[k..k + LANES].try_into().unwrap();
        let a_i: &[f64; LANES] = ai[k..k + LANES].try_into().unwrap();
        for b in 0..B {
            let b_r: &[f64; LANES] = br[b][k..k + LANES].try_into().unwrap();
            let b_i: &[f64; LANES] = bi[b][k..k + LANES].try_into().unwrap();
            for t in 0..LANES {
                sr[b][t] += a_r[t] * b_r[t] - a_i[t] * b_i[t];
                si[b][t] += a_r[t] * b_i[t] + a_i[t] * b_r[t];
            }
        }
    }
    for k in LANES * chunks..n {
        for b in 0..B {
            sr[b][0] += ar[k] * br[b][k] - ai[k] * bi[b][k];
            si[b][0] += ar[k] * bi[b][k] + ai[k] * br[b][k];
        }
    }
    let mut out = [C64::new(0.0, 0.0); B];
    for b in 0..B {
        let (r, i) = (&sr[b], &si[b]);
        out[b] = C64::new((r[0] + r[1]) + (r[2] + r[3]), (i[0] + i[1]) + (i[2] + i[3]));
    }
    out
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
/// Equal eigenvalues are ordered by their eigenvectors compared
/// lexicographically on (re, im) after fixing each vector's phase so that
/// its first entry of largest modulus is real and positive.
pub fn hermitian_eigen_desc(r: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let n = r.nrows();
    if n != r.ncols() {
        return Err(Error::Numeric("eigendecomposition of a non-square matrix".into()));
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite covariance entry".into()));
    }
    let sym = (r + r.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("eigendecomposition did not converge".into()))?;
    let mut vectors = eig.eigenvectors;
    for j in 0..n {
        let mut col = vectors.column_mut(j);
        let mut best = 0;
        for i in 0..n {
            if col[i].norm() > col[best].norm() * (1.0 + 1e-12) {
                best = i;
            }
        }
        let pivot = col[best];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            col *= phase;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then_with(|| {
            for i in 0..n {
                let (x, y) = (vectors[(i, a)], vectors[(i, b)]);
                let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
                if o != std::cmp::Ordering::Equal {
                    return o;
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let sorted = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok((values, sorted))
}

/// Least squares on the columns of `a` via Householder QR. Returns `None`
/// when a diagonal entry of R falls below `rel_tol` times the largest.
pub fn least_squares(a: &DMatrix<C64>, y: &DVector<C64>, rel_tol: f64) -> Option<DVector<C64>> {
    let k = a.ncols();
    if k == 0 {
        return Some(DVector::zeros(0));
    }
    if a.nrows() < k {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    if diag_max == 0.0 || (0..k).any(|i| r[(i, i)].norm() <= rel_tol * diag_max) {
        return None;
    }
    let qty = qr.q().adjoint() * y;
    r.solve_upper_triangular(&qty)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Induced 1-norm: largest column absolute sum.
pub fn max_column_sum(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdot_matches_naive_sum() {
        let n = 11;
        let a: Vec<C64> = (0..n).map(|k| C64::new(k as f64 * 0.3, 1.0 - k as f64)).collect();
        let b: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), (k as f64).cos())).collect();
        let naive: C64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let split = |v: &[C64]| (v.iter().map(|z| z.re).collect::<Vec<_>>(), v.iter().map(|z| z.im).collect::<Vec<_>>());
        let (ar, ai) = split(&a);
        let (br, bi) = split(&b);
        let got = cdot_split(&ar, &ai, &br, &bi);
        assert!((got - naive).norm() < 1e-12);
        let multi = cdot_split_multi::<3>(&ar, &ai, [&br, &ar, &br], [&bi, &ai, &bi]);
        assert_eq!(multi[0], got);
        assert_eq!(multi[2], got);
        assert_eq!(multi[1], cdot_split(&ar, &ai, &ar, &ai));
    }

    #[test]
    fn eigen_sorted_descending_and_reconstructs() {
        let a = DMatrix::from_fn(4, 4, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let r = &a * a.adjoint();
        let (vals, vecs) = hermitian_eigen_desc(&r).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = DMatrix::from_diagonal(&DVector::from_iterator(4, vals.iter().map(|&v| C64::new(v, 0.0))));
        let back = &vecs * d * vecs.adjoint();
        assert!((back - r).norm() < 1e-9);
    }

    #[test]
    fn least_squares_rejects_dependent_columns() {
        let a = DMatrix::from_fn(4, 2, |i, _| C64::new(i as f64 + 1.0, 0.0));
        let y = DVector::from_element(4, C64::new(1.0, 0.0));
        assert!(least_squares(&a, &y, 1e-10).is_none());
    }
}
