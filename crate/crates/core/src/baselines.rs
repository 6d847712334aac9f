//! Laurent-polynomial baselines evaluated directly on the moments: truncated
//! Fourier series of the Gibbs factor, the a priori bound of a fixed Laurent
//! construction, and the best uniform approximation on the spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::complex_vec;
use crate::error::{QsqError, Result};
use crate::functions::{unit_pow, SpectralFunction};
use crate::linalg::{branch_arg, clusters};
use crate::pauli::SpectralData;
use crate::state::{MomentSequence, StateVector};

/// Eigenvalues of `U` closer than this are treated as one point.
pub const DISTINCT_TOL: f64 = 1e-10;

pub const LAWSON_MAX_ITER: usize = 500;
pub const LAWSON_REL_TOL: f64 = 1e-12;

/// `sum_j alpha_j z^j` for `j = -degree..=degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentApproximation {
    pub degree: usize,
    pub method: String,
    #[serde(with = "complex_vec")]
    pub coefficients: Vec<Complex64>,
    /// Method-specific error measure, see the constructors.
    pub error: f64,
}

impl LaurentApproximation {
    /// Coefficient of `z^j`.
    pub fn coefficient(&self, j: i64) -> Complex64 {
        let k = j + self.degree as i64;
        if k < 0 || k as usize >= self.coefficients.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[k as usize]
        }
    }

    pub fn to_function(&self) -> SpectralFunction {
        SpectralFunction::Laurent {
            coefficients: self.coefficients.clone(),
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let deg = self.degree as i64;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, &a)| a * unit_pow(z, k as i64 - deg))
            .sum()
    }
}

/// Truncated Fourier series of `exp(beta theta / dt)` on `theta` in `[-pi, pi)`,
/// i.e. of `exp(-beta E)` with `theta = -E dt`, keeping `|j| <= d - 1`.
///
/// `c_j = (-1)^j sinh(pi beta / dt) / (pi (beta / dt - i j))`. The reported
/// error is the L2 norm of the discarded tail.
pub fn fourier_coefficients(beta: f64, dt: f64, d: usize) -> Result<LaurentApproximation> {
    if !(beta >= 0.0 && beta.is_finite()) || !(dt > 0.0 && dt.is_finite()) || d == 0 {
        return Err(QsqError::InvalidParameter(format!(
            "need beta >= 0, dt > 0, d >= 1; got beta={beta}, dt={dt}, d={d}"
        )));
    }
    let deg = d - 1;
    let a = beta / dt;
    let coefficients: Vec<Complex64> = (-(deg as i64)..=deg as i64)
        .map(|j| {
            if a == 0.0 {
                return Complex64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0);
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(sign * (PI * a).sinh() / PI, 0.0) / Complex64::new(a, -(j as f64))
        })
        .collect();
    let total = if a == 0.0 { 1.0 } else { (2.0 * PI * a).sinh() / (2.0 * PI * a) };
    let kept: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
    Ok(LaurentApproximation {
        degree: deg,
        method: "fourier".into(),
        coefficients,
        error: (total - kept).max(0.0).sqrt(),
    })
}

/// `sum_j alpha_j X_j` with `X_{-j} = conj(X_j)`.
pub fn estimate_from_moments(m: &MomentSequence, approx: &LaurentApproximation) -> Result<Complex64> {
    if approx.degree > m.d {
        return Err(QsqError::DimensionMismatch {
            expected: approx.degree,
            actual: m.d,
        });
    }
    let deg = approx.degree as i64;
    Ok(approx
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, &a)| a * m.get(k as i64 - deg))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedBound {
    /// `4 exp(beta ||H|| / gamma - (d/2)(1 - gamma))` at the optimal gamma.
    pub bound: f64,
    pub gamma_star: f64,
    /// `bound / exp(beta ||H||)`.
    pub relative: f64,
}

/// Minimizes the fixed-Laurent error bound over `gamma` in `(0, 1)` by
/// golden-section search.
pub fn fixed_laurent_bound(beta: f64, h_norm: f64, d: usize) -> Result<FixedBound> {
    if !(beta >= 0.0 && h_norm >= 0.0 && beta.is_finite() && h_norm.is_finite()) || d == 0 {
        return Err(QsqError::InvalidParameter(format!(
            "need beta, ||H|| >= 0 and d >= 1; got beta={beta}, h_norm={h_norm}, d={d}"
        )));
    }
    let bh = beta * h_norm;
    let half = d as f64 / 2.0;
    let exponent = |g: f64| bh / g - half * (1.0 - g);
    let gamma = golden_section(exponent, 0.0, 1.0, 1e-10);
    let e = exponent(gamma);
    Ok(FixedBound {
        bound: 4.0 * e.exp(),
        gamma_star: gamma,
        relative: 4.0 * (e - bh).exp(),
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Which eigenvalues of `U` the optimal approximation is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitPoints {
    AllEigenvalues,
    StateSupport,
}

/// Best approximation of degree `d - 1` in the max norm over the distinct
/// eigenvalues of `U`; `error` is the achieved maximum residual.
pub fn optimal_laurent(spec: &SpectralData, f: &SpectralFunction, d: usize) -> Result<LaurentApproximation> {
    optimal_laurent_on(&spec.eigenphases(), f, d)
}

/// As [`optimal_laurent`], restricted to eigenvalues where `psi` has weight above `threshold`.
pub fn optimal_laurent_on_support(
    spec: &SpectralData,
    psi: &StateVector,
    f: &SpectralFunction,
    d: usize,
    threshold: f64,
) -> Result<LaurentApproximation> {
    let amps = spec.amplitudes(psi)?;
    let points: Vec<Complex64> = spec
        .eigenphases()
        .into_iter()
        .zip(amps)
        .filter(|(_, g)| g.norm_sqr() > threshold)
        .map(|(z, _)| z)
        .collect();
    optimal_laurent_on(&points, f, d)
}

/// Distinct points in phase order, merging those within [`DISTINCT_TOL`].
pub fn distinct_points(points: &[Complex64]) -> Vec<Complex64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| branch_arg(*a).total_cmp(&branch_arg(*b)));
    clusters(&sorted, DISTINCT_TOL)
        .into_iter()
        .map(|g| sorted[g[0]])
        .collect()
}

fn design(points: &[Complex64], deg: usize) -> DMatrix<Complex64> {
    let deg = deg as i64;
    DMatrix::from_fn(points.len(), (2 * deg + 1) as usize, |i, k| unit_pow(points[i], k as i64 - deg))
}

/// Least-squares solution for tall systems, minimum-norm solution for wide ones.
fn solve_least_squares(a: &DMatrix<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let (n, m) = a.shape();
    if n >= m {
        let qr = a.clone().qr();
        let rhs = qr.q().adjoint() * b;
        qr.r().solve_upper_triangular(&rhs).ok_or(QsqError::IllConditioned { lambda_min: 0.0 })
    } else {
        let qr = a.adjoint().qr();
        let y = qr
            .r()
            .adjoint()
            .solve_lower_triangular(b)
            .ok_or(QsqError::IllConditioned { lambda_min: 0.0 })?;
        Ok(qr.q() * y)
    }
}

fn max_residual(a: &DMatrix<Complex64>, x: &DVector<Complex64>, f: &DVector<Complex64>) -> (DVector<f64>, f64) {
    let r = (a * x - f).map(|z| z.norm());
    let m = r.iter().fold(0.0f64, |acc, &v| acc.max(v));
    (r, m)
}

fn sample(points: &[Complex64], f: &SpectralFunction) -> Result<DVector<Complex64>> {
    let vals: Result<Vec<Complex64>> = points.iter().map(|&z| f.eval(z)).collect();
    Ok(DVector::from_vec(vals?))
}

/// Plain least-squares fit of degree `d - 1`; `error` is the maximum residual.
pub fn least_squares_laurent(points: &[Complex64], f: &SpectralFunction, d: usize) -> Result<LaurentApproximation> {
    check_dim(d)?;
    let pts = distinct_points(points);
    let a = design(&pts, d - 1);
    let fv = sample(&pts, f)?;
    let x = solve_least_squares(&a, &fv)?;
    let (_, err) = max_residual(&a, &x, &fv);
    Ok(LaurentApproximation {
        degree: d - 1,
        method: "least_squares".into(),
        coefficients: x.iter().copied().collect(),
        error: err,
    })
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(QsqError::InvalidParameter("approximation dimension must be at least 1".into()));
    }
    Ok(())
}

/// Weighted least squares `min sum_i w_i |(A x - f)_i|^2`. On the unit circle
/// the normal matrix is Toeplitz in the weighted power sums, which keeps each
/// step linear in the number of points; a QR solve takes over if the normal
/// matrix is numerically singular.
fn weighted_solve(
    a: &DMatrix<Complex64>,
    powers: &DMatrix<Complex64>,
    w: &DVector<f64>,
    f: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let (n, m) = a.shape();
    let wc = w.map(|x| Complex64::new(x, 0.0));
    let t = powers.transpose() * &wc;
    let gram = DMatrix::from_fn(m, m, |j, k| if k >= j { t[k - j] } else { t[j - k].conj() });
    let rhs = a.adjoint() * wc.component_mul(f);
    // with no more points than unknowns the normal matrix is singular
    let chol = if n > m { gram.cholesky() } else { None };
    if let Some(chol) = chol {
        let x = chol.solve(&rhs);
        if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Ok(x);
        }
    }
    let sw = w.map(|x| Complex64::new(x.sqrt(), 0.0));
    let aw = DMatrix::from_fn(n, m, |i, k| a[(i, k)] * sw[i]);
    solve_least_squares(&aw, &f.component_mul(&sw))
}

/// Lawson's iteratively reweighted least squares on the distinct `points`.
/// With no more points than coefficients the interpolant is returned.
pub fn optimal_laurent_on(points: &[Complex64], f: &SpectralFunction, d: usize) -> Result<LaurentApproximation> {
    check_dim(d)?;
    let pts = distinct_points(points);
    if pts.is_empty() {
        return Err(QsqError::InvalidParameter("no points to fit on".into()));
    }
    let a = design(&pts, d - 1);
    let fv = sample(&pts, f)?;
    let n = pts.len();

    let deg = d - 1;
    let powers = DMatrix::from_fn(n, 2 * deg + 1, |i, p| unit_pow(pts[i], p as i64));
    let scale = fv.iter().fold(0.0f64, |m, v| m.max(v.norm()));

    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let mut best: Option<(DVector<Complex64>, f64)> = None;
    let mut previous = f64::INFINITY;
    for _ in 0..LAWSON_MAX_ITER {
        let x = match weighted_solve(&a, &powers, &w, &fv) {
            Ok(x) => x,
            // weights collapsed onto too few points after a near-exact fit
            Err(_) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        let (r, err) = max_residual(&a, &x, &fv);
        if best.as_ref().is_none_or(|(_, e)| err < *e) {
            best = Some((x, err));
        }
        if n <= a.ncols() || err <= 1e-14 * scale || (previous.is_finite() && (previous - err).abs() <= LAWSON_REL_TOL * previous.max(f64::MIN_POSITIVE)) {
            break;
        }
        previous = err;
        w = w.component_mul(&r);
        let total = w.sum();
        if !(total > 0.0) {
            break;
        }
        w /= total;
    }
    let (x, err) = best.expect("at least one iteration");
    Ok(LaurentApproximation {
        degree: d - 1,
        method: "optimal_laurent".into(),
        coefficients: x.iter().copied().collect(),
        error: err,
    })
}
