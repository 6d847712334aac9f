//! Dense complex matrix kernels.
//!
//! Eigendecompositions wrap nalgebra and add the input checks, orderings and
//! post-conditions the quadrature pipeline relies on. The SVD is a one-sided
//! Jacobi iteration.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{QsqError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalue gap below which unitary eigenvalues are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Largest tolerated entry of `M^H M - I` before an input is rejected as non-unitary.
pub const UNITARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct HermitianEigensystem {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns, column `k` paired with `eigenvalues[k]`.
    pub eigenvectors: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct UnitaryEigensystem {
    /// Unit modulus, ordered by phase in `[-pi, pi)`.
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: ComplexMatrix,
}

/// Exponents supported by [`psd_power`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdExponent {
    Sqrt,
    InvSqrt,
}

impl PsdExponent {
    fn value(self) -> f64 {
        match self {
            PsdExponent::Sqrt => 0.5,
            PsdExponent::InvSqrt => -0.5,
        }
    }
}

/// `M = P * diag(singular_values) * Q^H` with singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub p: ComplexMatrix,
    pub singular_values: DVector<f64>,
    pub q: ComplexMatrix,
}

/// Principal argument on the half-open branch `[-pi, pi)`.
pub fn branch_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a >= PI {
        a - 2.0 * PI
    } else {
        a
    }
}

pub fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(QsqError::NonFinite)
    }
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(QsqError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// `(M + M^H) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `M^H M - I`.
pub fn unitarity_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m - ComplexMatrix::identity(n, n);
    g.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized first,
/// and purely real inputs go through the real symmetric solver.
pub fn hermitian_eigendecompose(m: &ComplexMatrix) -> Result<HermitianEigensystem> {
    let n = check_square(m)?;
    check_finite(m)?;
    if n == 0 {
        return Ok(HermitianEigensystem {
            eigenvalues: DVector::zeros(0),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let h = hermitian_part(m);

    let (values, vectors) = if h.iter().all(|z| z.im == 0.0) {
        let real = h.map(|z| z.re);
        let eig = nalgebra::SymmetricEigen::try_new(real, f64::EPSILON, 0)
            .ok_or(QsqError::NoConvergence)?;
        (eig.eigenvalues, eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = nalgebra::SymmetricEigen::try_new(h, f64::EPSILON, 0)
            .ok_or(QsqError::NoConvergence)?;
        (eig.eigenvalues, eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(HermitianEigensystem {
        eigenvalues,
        eigenvectors,
    })
}

/// `V diag(max(lambda, floor)^p) V^H` for `p = +-1/2`.
pub fn psd_power(m: &ComplexMatrix, exponent: PsdExponent, floor: f64) -> Result<ComplexMatrix> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(QsqError::InvalidParameter(format!(
            "psd_power floor must be positive, got {floor}"
        )));
    }
    let eig = hermitian_eigendecompose(m)?;
    let p = exponent.value();
    let scaled: DVector<Complex64> = eig
        .eigenvalues
        .map(|l| Complex64::new(l.max(floor).powf(p), 0.0));
    let v = &eig.eigenvectors;
    let mut vs = v.clone();
    for (j, s) in scaled.iter().enumerate() {
        vs.column_mut(j).scale_mut(s.re);
    }
    Ok(hermitian_part(&(vs * v.adjoint())))
}

/// Singular value decomposition of a square matrix by one-sided Jacobi
/// rotations, singular values descending.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let n = check_square(m)?;
    check_finite(m)?;
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n, n);
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dotc(&a.column(j));
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut a, i, j, cs, sn, phase);
                rotate_columns(&mut v, i, j, cs, sn, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(QsqError::NoConvergence);
    }

    let norms: Vec<f64> = (0..n).map(|k| a.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let scale = norms.iter().fold(0.0f64, |acc, &x| acc.max(x));

    let mut p = ComplexMatrix::zeros(n, n);
    let mut q = ComplexMatrix::zeros(n, n);
    let mut filled = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        q.set_column(k, &v.column(src));
        if norms[src] > scale * f64::EPSILON * n as f64 && norms[src] > 0.0 {
            p.set_column(k, &(a.column(src) / Complex64::new(norms[src], 0.0)));
            filled.push(k);
        }
    }
    complete_orthonormal(&mut p, &filled);
    Ok(Svd {
        p,
        singular_values: DVector::from_iterator(n, order.iter().map(|&k| norms[k])),
        q,
    })
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// `[x_i, x_j] <- [c x_i - s conj(phase) x_j, s phase x_i + c x_j]`.
fn rotate_columns(m: &mut ComplexMatrix, i: usize, j: usize, c: f64, s: f64, phase: Complex64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = x * c - phase.conj() * y * s;
        m[(r, j)] = phase * x * s + y * c;
    }
}

/// Fills the columns of `m` not listed in `filled` so that `m` becomes unitary.
fn complete_orthonormal(m: &mut ComplexMatrix, filled: &[usize]) {
    let n = m.nrows();
    let mut basis: Vec<usize> = filled.to_vec();
    let mut candidate = 0;
    for k in (0..n).filter(|k| !filled.contains(k)) {
        loop {
            let mut x = DVector::<Complex64>::zeros(n);
            x[candidate % n] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for &b in &basis {
                    let col = m.column(b).clone_owned();
                    let overlap = col.dotc(&x);
                    x -= col * overlap;
                }
            }
            let norm = x.norm();
            if norm > 1e-8 {
                m.set_column(k, &(x / Complex64::new(norm, 0.0)));
                basis.push(k);
                break;
            }
        }
    }
}

/// Eigendecomposition of a unitary matrix.
///
/// A unitary matrix is normal, so its complex Schur form is diagonal and the
/// Schur vectors are an orthonormal eigenbasis. Vectors inside a degenerate
/// cluster are re-orthonormalized with modified Gram-Schmidt.
pub fn unitary_eigendecompose(m: &ComplexMatrix) -> Result<UnitaryEigensystem> {
    let n = check_square(m)?;
    check_finite(m)?;
    let deviation = unitarity_defect(m);
    if deviation > UNITARITY_TOL {
        return Err(QsqError::NotUnitary { deviation });
    }
    if n == 0 {
        return Ok(UnitaryEigensystem {
            eigenvalues: Vec::new(),
            eigenvectors: ComplexMatrix::zeros(0, 0),
        });
    }

    let schur = Schur::try_new(m.clone(), f64::EPSILON, 0).ok_or(QsqError::NoConvergence)?;
    let (q, t) = schur.unpack();

    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
    order.sort_by(|&a, &b| branch_arg(raw[a]).total_cmp(&branch_arg(raw[b])));

    let eigenvalues: Vec<Complex64> = order.iter().map(|&k| raw[k] / raw[k].norm()).collect();
    let mut eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| q[(i, order[j])]);

    for cluster in clusters(&eigenvalues, CLUSTER_TOL) {
        if cluster.len() > 1 {
            modified_gram_schmidt(&mut eigenvectors, &cluster);
        }
    }

    let lambda = ComplexMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let residual = max_abs(&(m * &eigenvectors - &eigenvectors * lambda));
    if residual > 1e-9 * n as f64 {
        return Err(QsqError::NoConvergence);
    }

    Ok(UnitaryEigensystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Groups of consecutive indices (in the given phase order) whose neighbours lie
/// within `tol` of each other. The first and last groups are joined when they
/// meet across the branch cut.
pub fn clusters(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, z) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (values[*g.last().unwrap()] - z).norm() < tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    if groups.len() > 1 {
        let first = groups[0][0];
        let last = *groups.last().unwrap().last().unwrap();
        if (values[first] - values[last]).norm() < tol {
            let head = groups.remove(0);
            groups.last_mut().unwrap().extend(head);
        }
    }
    groups
}

fn modified_gram_schmidt(v: &mut ComplexMatrix, cols: &[usize]) {
    for (a, &j) in cols.iter().enumerate() {
        for &i in &cols[..a] {
            let proj = v.column(i).dotc(&v.column(j));
            let ci = v.column(i).clone_owned();
            let mut cj = v.column_mut(j);
            cj.axpy(-proj, &ci, Complex64::new(1.0, 0.0));
        }
        let norm = v.column(j).norm();
        v.column_mut(j).unscale_mut(norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
        let s = svd(&random_matrix(n, seed)).unwrap();
        s.p * s.q.adjoint()
    }

    #[test]
    fn diagonal_eigenvalues_come_out_ascending() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let e = hermitian_eigendecompose(&m).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let e = hermitian_eigendecompose(&m).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        let v = e.eigenvectors.column(0);
        // (1, -1)/sqrt(2) up to phase
        assert!(((v[0] + v[1]).norm()) < 1e-14);
        assert!((v[0].norm() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let a = random_matrix(8, 3);
        let h = hermitian_part(&a);
        let e = hermitian_eigendecompose(&h).unwrap();
        let lam = ComplexMatrix::from_diagonal(&e.eigenvalues.map(|x| c(x, 0.0)));
        let rec = &e.eigenvectors * lam * e.eigenvectors.adjoint();
        assert!(max_abs(&(rec - &h)) < 1e-10 * max_abs(&h).max(1.0));
        assert!(unitarity_defect(&e.eigenvectors) < 1e-10);
        assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermitian_rejects_bad_input() {
        assert!(matches!(
            hermitian_eigendecompose(&ComplexMatrix::zeros(2, 3)),
            Err(QsqError::NotSquare { .. })
        ));
        let mut m = ComplexMatrix::identity(2, 2);
        m[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(hermitian_eigendecompose(&m), Err(QsqError::NonFinite)));
    }

    #[test]
    fn psd_power_examples() {
        let id = ComplexMatrix::identity(3, 3);
        assert!(max_abs(&(psd_power(&id, PsdExponent::InvSqrt, 1e-12).unwrap() - &id)) < 1e-15);

        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(4.0, 0.0), c(9.0, 0.0)]));
        let r = psd_power(&m, PsdExponent::Sqrt, 1e-12).unwrap();
        assert!((r[(0, 0)] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((r[(1, 1)] - c(3.0, 0.0)).norm() < 1e-14);
        assert!(r[(0, 1)].norm() < 1e-14);

        let m = ComplexMatrix::from_element(1, 1, c(4.0, 0.0));
        let r = psd_power(&m, PsdExponent::InvSqrt, 1e-12).unwrap();
        assert!((r[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn psd_power_clamps_below_floor() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(-1.0, 0.0), c(4.0, 0.0)]));
        let r = psd_power(&m, PsdExponent::Sqrt, 0.25).unwrap();
        assert!((r[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((r[(1, 1)] - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = random_matrix(6, 11);
        let m = &a * a.adjoint() + ComplexMatrix::identity(6, 6).scale(0.1);
        let r = psd_power(&m, PsdExponent::Sqrt, 1e-12).unwrap();
        assert!(max_abs(&(&r * &r - &m)) < 1e-9);
        let ri = psd_power(&m, PsdExponent::InvSqrt, 1e-12).unwrap();
        assert!(max_abs(&(&r * &ri - ComplexMatrix::identity(6, 6))) < 1e-9);
    }

    #[test]
    fn svd_examples() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0)]));
        let s = svd(&m).unwrap();
        assert!((s.singular_values[0] - 1.0).abs() < 1e-15);
        assert!((s.singular_values[1] - 0.5).abs() < 1e-15);
        for k in 0..2 {
            assert!((s.p[(k, k)].norm() - 1.0).abs() < 1e-14);
            assert!((s.q[(k, k)].norm() - 1.0).abs() < 1e-14);
        }

        let u = random_unitary(5, 2);
        let s = svd(&u).unwrap();
        assert!(s.singular_values.iter().all(|x| (x - 1.0).abs() < 1e-10));
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        let m = random_matrix(6, 5);
        let s = svd(&m).unwrap();
        let d = ComplexMatrix::from_diagonal(&s.singular_values.map(|x| c(x, 0.0)));
        assert!(max_abs(&(&s.p * d * s.q.adjoint() - &m)) < 1e-10);
        assert!(unitarity_defect(&s.p) < 1e-10);
        assert!(unitarity_defect(&s.q) < 1e-10);
        assert!(s.singular_values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert!(s.singular_values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn svd_many_sizes_and_rank_deficient() {
        for n in 1..=24 {
            let m = random_matrix(n, 100 + n as u64);
            let s = svd(&m).unwrap();
            let d = ComplexMatrix::from_diagonal(&s.singular_values.map(|x| c(x, 0.0)));
            assert!(max_abs(&(&s.p * d * s.q.adjoint() - &m)) < 1e-12 * n as f64, "n={n}");
        }
        let ones = ComplexMatrix::from_element(4, 4, c(0.5, 0.5));
        let s = svd(&ones).unwrap();
        assert!(unitarity_defect(&s.p) < 1e-12);
        assert!(unitarity_defect(&s.q) < 1e-12);
        assert!((s.singular_values[0] - 4.0 * 0.5f64.sqrt()).abs() < 1e-12);
        assert!(s.singular_values.iter().skip(1).all(|&x| x < 1e-12));
        let d = ComplexMatrix::from_diagonal(&s.singular_values.map(|x| c(x, 0.0)));
        assert!(max_abs(&(&s.p * d * s.q.adjoint() - &ones)) < 1e-12);
        let zero = svd(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(unitarity_defect(&zero.p) < 1e-12);
    }

    #[test]
    fn polar_factor_is_idempotent() {
        let m = random_matrix(5, 8);
        let s = svd(&m).unwrap();
        let w = &s.p * s.q.adjoint();
        let s2 = svd(&w).unwrap();
        let w2 = &s2.p * s2.q.adjoint();
        assert!(max_abs(&(w2 - w)) < 1e-10);
    }

    #[test]
    fn unitary_identity_and_diagonal() {
        let e = unitary_eigendecompose(&ComplexMatrix::identity(4, 4)).unwrap();
        assert!(e.eigenvalues.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-14));
        assert!(unitarity_defect(&e.eigenvectors) < 1e-12);

        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 1.0), c(0.0, -1.0)]));
        let e = unitary_eigendecompose(&m).unwrap();
        // phase order: -i (arg -pi/2) before i
        assert!((e.eigenvalues[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((e.eigenvalues[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn rotation_spectrum() {
        let th: f64 = 0.7;
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(th.cos(), 0.0), c(-th.sin(), 0.0), c(th.sin(), 0.0), c(th.cos(), 0.0)],
        );
        let e = unitary_eigendecompose(&m).unwrap();
        assert!((e.eigenvalues[0] - Complex64::from_polar(1.0, -th)).norm() < 1e-12);
        assert!((e.eigenvalues[1] - Complex64::from_polar(1.0, th)).norm() < 1e-12);
    }

    #[test]
    fn random_unitary_eigensystem_invariants() {
        for (n, seed) in [(3, 1u64), (8, 2), (20, 3), (40, 4)] {
            let u = random_unitary(n, seed);
            let e = unitary_eigendecompose(&u).unwrap();
            assert!(e.eigenvalues.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
            assert!(unitarity_defect(&e.eigenvectors) < 1e-10);
            let row0: f64 = (0..n).map(|k| e.eigenvectors[(0, k)].norm_sqr()).sum();
            assert!((row0 - 1.0).abs() < 1e-10);
            let lam = ComplexMatrix::from_diagonal(&DVector::from_vec(e.eigenvalues.clone()));
            assert!(max_abs(&(&u * &e.eigenvectors - &e.eigenvectors * lam)) < 1e-9 * n as f64);
        }
    }

    #[test]
    fn degenerate_unitary_gets_orthonormal_cluster() {
        // W diag(i, i, -1, 1) W^H with a random unitary W
        let w = random_unitary(4, 9);
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            c(0.0, 1.0),
            c(0.0, 1.0),
            c(-1.0, 0.0),
            c(1.0, 0.0),
        ]));
        let u = &w * d * w.adjoint();
        let e = unitary_eigendecompose(&u).unwrap();
        assert!(unitarity_defect(&e.eigenvectors) < 1e-10);
        let ones = e.eigenvalues.iter().filter(|z| (*z - c(0.0, 1.0)).norm() < 1e-8).count();
        assert_eq!(ones, 2);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(0.5, 0.0)]));
        assert!(matches!(unitary_eigendecompose(&m), Err(QsqError::NotUnitary { .. })));
    }

    #[test]
    fn branch_arg_maps_pi_to_minus_pi() {
        assert_eq!(branch_arg(c(-1.0, 0.0)), -PI);
        assert!((branch_arg(c(-1.0, -1e-300)) + PI).abs() < 1e-15);
        assert_eq!(branch_arg(c(1.0, 0.0)), 0.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn hermitian_invariants(seed in 0u64..100_000, n in 1usize..30) {
            let a = random_matrix(n, seed);
            let h = hermitian_part(&a);
            let e = hermitian_eigendecompose(&h).unwrap();
            let lam = ComplexMatrix::from_diagonal(&e.eigenvalues.map(|x| c(x, 0.0)));
            let scale = max_abs(&h).max(1.0);
            proptest::prop_assert!(max_abs(&(&e.eigenvectors * lam * e.eigenvectors.adjoint() - &h)) < 1e-10 * scale);
            proptest::prop_assert!(unitarity_defect(&e.eigenvectors) < 1e-10);
            proptest::prop_assert!(e.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn psd_sqrt_squares_back_random(seed in 0u64..100_000, n in 1usize..16) {
            let a = random_matrix(n, seed);
            let m = &a * a.adjoint() + ComplexMatrix::identity(n, n) * c(0.1, 0.0);
            let r = psd_power(&m, PsdExponent::Sqrt, 1e-12).unwrap();
            proptest::prop_assert!(max_abs(&(&r * &r - &m)) < 1e-9);
        }

        #[test]
        fn svd_invariants(seed in 0u64..100_000, n in 1usize..30) {
            let m = random_matrix(n, seed);
            let s = svd(&m).unwrap();
            let d = ComplexMatrix::from_diagonal(&s.singular_values.map(|x| c(x, 0.0)));
            proptest::prop_assert!(max_abs(&(&s.p * d * s.q.adjoint() - &m)) < 1e-10);
            proptest::prop_assert!(unitarity_defect(&s.p) < 1e-10);
            proptest::prop_assert!(unitarity_defect(&s.q) < 1e-10);
            let w = &s.p * s.q.adjoint();
            let s2 = svd(&w).unwrap();
            proptest::prop_assert!(max_abs(&(&s2.p * s2.q.adjoint() - &w)) < 1e-10);
        }

        #[test]
        fn unitary_invariants(seed in 0u64..100_000, n in 1usize..30) {
            let u = random_unitary(n, seed);
            let e = unitary_eigendecompose(&u).unwrap();
            proptest::prop_assert!(e.eigenvalues.iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
            proptest::prop_assert!(unitarity_defect(&e.eigenvectors) < 1e-10);
            let lam = ComplexMatrix::from_diagonal(&DVector::from_vec(e.eigenvalues.clone()));
            proptest::prop_assert!(max_abs(&(&u * &e.eigenvectors - &e.eigenvectors * lam)) < 1e-9 * n as f64);
            let row: f64 = e.eigenvectors.row(0).iter().map(|z| z.norm_sqr()).sum();
            proptest::prop_assert!((row - 1.0).abs() < 1e-10);
        }
    }
}
