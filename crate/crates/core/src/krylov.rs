//! Toeplitz Krylov matrices, Tikhonov regularization and the projection of the
//! compressed evolution operator onto the unitary group.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::complex_matrix;
use crate::error::{QsqError, Result};
use crate::linalg::{
    check_finite, check_square, hermitian_eigendecompose, hermitian_part, psd_power, svd, ComplexMatrix,
    PsdExponent,
};
use crate::state::MomentSequence;

/// Smallest Gram eigenvalue accepted by [`gram_schmidt_reference`].
pub const GRAM_SCHMIDT_MIN_EIGENVALUE: f64 = 1e-10;

/// `eta` used when none is given: `max(1e-12, 2 sigma sqrt(2d))` under declared noise.
pub fn default_eta(noise_sigma: Option<f64>, d: usize) -> f64 {
    match noise_sigma {
        Some(s) if s > 0.0 => (2.0 * s * (2.0 * d as f64).sqrt()).max(1e-12),
        _ => 1e-12,
    }
}

/// `U'_{ij} = X_{j-i+1}` and `S'_{ij} = X_{j-i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovPair {
    pub d: usize,
    #[serde(with = "complex_matrix")]
    pub u: ComplexMatrix,
    #[serde(with = "complex_matrix")]
    pub s: ComplexMatrix,
}

pub fn assemble(m: &MomentSequence, d: usize) -> Result<KrylovPair> {
    if d == 0 {
        return Err(QsqError::InvalidParameter("Krylov dimension must be at least 1".into()));
    }
    if d > m.d {
        return Err(QsqError::InvalidParameter(format!(
            "Krylov dimension {d} needs moments up to X_{d}, only {} available",
            m.d
        )));
    }
    let u = ComplexMatrix::from_fn(d, d, |i, j| m.get(j as i64 - i as i64 + 1));
    let s = ComplexMatrix::from_fn(d, d, |i, j| m.get(j as i64 - i as i64));
    Ok(KrylovPair { d, u, s })
}

#[derive(Debug, Clone)]
pub struct RegularizedGram {
    pub s_tilde: ComplexMatrix,
    pub eta: f64,
    /// Multiple of the identity added, zero if none.
    pub shift: f64,
    /// Smallest eigenvalue of the input before shifting.
    pub lambda_min: f64,
}

/// Shifts `S'` so that its smallest eigenvalue is at least `eta`.
pub fn regularize(s_prime: &ComplexMatrix, eta: f64) -> Result<RegularizedGram> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(QsqError::InvalidParameter(format!("eta must be positive, got {eta}")));
    }
    check_square(s_prime)?;
    check_finite(s_prime)?;
    let s = hermitian_part(s_prime);
    let lambda_min = hermitian_eigendecompose(&s)?.eigenvalues[0];
    if lambda_min >= eta {
        return Ok(RegularizedGram {
            s_tilde: s,
            eta,
            shift: 0.0,
            lambda_min,
        });
    }
    let shift = eta - lambda_min;
    let n = s.nrows();
    Ok(RegularizedGram {
        s_tilde: s + ComplexMatrix::identity(n, n) * Complex64::new(shift, 0.0),
        eta,
        shift,
        lambda_min,
    })
}

/// `S~^{-1/2} U' S~^{-1/2}`.
pub fn orthonormalize(u_prime: &ComplexMatrix, reg: &RegularizedGram) -> Result<ComplexMatrix> {
    let n = check_square(u_prime)?;
    if reg.s_tilde.nrows() != n {
        return Err(QsqError::DimensionMismatch {
            expected: n,
            actual: reg.s_tilde.nrows(),
        });
    }
    let w = psd_power(&reg.s_tilde, PsdExponent::InvSqrt, reg.eta)?;
    Ok(&w * u_prime * &w)
}

/// Nearest unitary `P Q^H` from `M = P D Q^H`.
pub fn project_to_unitary(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let f = svd(m)?;
    Ok(&f.p * f.q.adjoint())
}

/// Upper-triangular `C` whose columns are S-orthonormal combinations of the
/// coordinate vectors (modified Gram-Schmidt, two passes).
fn s_orthonormal_basis(s: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = s.nrows();
    let mut c = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let mut v = nalgebra::DVector::<Complex64>::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for q in 0..k {
                let qc = c.column(q).clone_owned();
                let overlap = qc.dotc(&(s * &v));
                v -= qc * overlap;
            }
        }
        let norm2 = v.dotc(&(s * &v)).re;
        if !(norm2 > 0.0) {
            return Err(QsqError::IllConditioned { lambda_min: norm2 });
        }
        c.set_column(k, &(v / Complex64::new(norm2.sqrt(), 0.0)));
    }
    Ok(c)
}

fn checked_gram(pair: &KrylovPair) -> Result<ComplexMatrix> {
    check_finite(&pair.u)?;
    check_finite(&pair.s)?;
    let s = hermitian_part(&pair.s);
    let lambda_min = hermitian_eigendecompose(&s)?.eigenvalues[0];
    if lambda_min <= GRAM_SCHMIDT_MIN_EIGENVALUE {
        return Err(QsqError::IllConditioned { lambda_min });
    }
    Ok(s)
}

/// `C^H U' C` in the S-orthonormal Krylov basis, before the last column is normalized.
pub fn gram_schmidt_projection(pair: &KrylovPair) -> Result<ComplexMatrix> {
    let s = checked_gram(pair)?;
    let c = s_orthonormal_basis(&s)?;
    Ok(c.adjoint() * &pair.u * c)
}

/// Upper-Hessenberg unitary from Gram-Schmidt followed by normalization of
/// the last column. Refuses Gram matrices with eigenvalues at or below
/// [`GRAM_SCHMIDT_MIN_EIGENVALUE`].
pub fn gram_schmidt_reference(pair: &KrylovPair) -> Result<ComplexMatrix> {
    let mut u = gram_schmidt_projection(pair)?;
    let last = u.ncols() - 1;
    let norm = u.column(last).norm();
    if norm == 0.0 {
        return Err(QsqError::IllConditioned { lambda_min: 0.0 });
    }
    u.column_mut(last).unscale_mut(norm);
    Ok(u)
}
