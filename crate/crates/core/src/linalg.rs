//! Small dense linear-algebra helpers shared across modules (crate-private).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{is_finite, Scalar};

/// Symmetric part `(A + Aᵀ)/2`.
pub fn symmetrize<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let half = crate::scalar::c::<T>(0.5);
    (a + a.transpose()) * half
}

/// Eigenvalues of a (symmetrized) square matrix, ascending.
pub fn sym_eigenvalues<T: Scalar>(a: &DMatrix<T>) -> Vec<T> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![a[(0, 0)]];
    }
    let mut ev: Vec<T> = symmetrize(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Smallest eigenvalue of a symmetric matrix (`+∞` for empty input).
pub fn lambda_min<T: Scalar>(a: &DMatrix<T>) -> T {
    sym_eigenvalues(a)
        .first()
        .copied()
        .unwrap_or_else(|| crate::scalar::c::<T>(f64::INFINITY))
}

/// Largest eigenvalue of a symmetric matrix (`−∞` for empty input).
pub fn lambda_max<T: Scalar>(a: &DMatrix<T>) -> T {
    sym_eigenvalues(a)
        .last()
        .copied()
        .unwrap_or_else(|| crate::scalar::c::<T>(f64::NEG_INFINITY))
}

/// Spectral norm of a symmetric matrix — the largest absolute eigenvalue.
#[cfg_attr(not(test), allow(dead_code))]
pub fn spectral_norm_sym<T: Scalar>(a: &DMatrix<T>) -> T {
    sym_eigenvalues(a)
        .into_iter()
        .map(|x| x.abs())
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}

/// Spectral norm of a general matrix via `λmax(AᵀA)½`.
#[cfg_attr(not(test), allow(dead_code))]
pub fn spectral_norm<T: Scalar>(a: &DMatrix<T>) -> T {
    if a.nrows() == 0 || a.ncols() == 0 {
        return T::zero();
    }
    let g = a.transpose() * a;
    let l = lambda_max(&g);
    if l > T::zero() {
        l.sqrt()
    } else {
        T::zero()
    }
}

/// Upper-triangular factor `T` with `TᵀT = P`; errors if `P` is not positive
/// definite.
pub fn cholesky_upper<T: Scalar>(p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let chol = symmetrize(p)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    Ok(chol.l().transpose())
}

/// Inverse, with a descriptive singularity error.
pub fn try_inverse<T: Scalar>(a: &DMatrix<T>, what: &str) -> Result<DMatrix<T>> {
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularTransform(format!("{what} is not invertible")))
}

/// Applies `(M ⊗ I_d)` to a block vector without materializing the Kronecker
/// product: `x` holds `k` stacked `d`-blocks, the result holds `p` blocks
/// with `out_i = Σ_j M[i,j]·x_j`.
pub fn kron_apply<T: Scalar>(m: &DMatrix<T>, x: &DVector<T>, d: usize) -> Result<DVector<T>> {
    let (p, k) = (m.nrows(), m.ncols());
    if x.len() != k * d {
        return Err(Error::DimensionMismatch(format!(
            "block vector has length {}, expected {k}·{d} = {}",
            x.len(),
            k * d
        )));
    }
    let mut out = DVector::zeros(p * d);
    for i in 0..p {
        let mut block = out.rows_mut(i * d, d);
        for j in 0..k {
            let coeff = m[(i, j)];
            if coeff != T::zero() {
                block.axpy(coeff, &x.rows(j * d, d), T::one());
            }
        }
    }
    Ok(out)
}

/// True when every entry is finite.
pub fn mat_finite<T: Scalar>(a: &DMatrix<T>) -> bool {
    a.iter().all(|&x| is_finite(x))
}

/// True when every entry is finite.
pub fn vec_finite<T: Scalar>(a: &DVector<T>) -> bool {
    a.iter().all(|&x| is_finite(x))
}
