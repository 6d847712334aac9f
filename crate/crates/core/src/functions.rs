//! Functions on the unit circle that a quadrature rule can be applied to.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codec::complex_vec;
use crate::error::{QsqError, Result};
use crate::linalg::branch_arg;

/// Inputs further than this from the unit circle are rejected.
pub const CIRCLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectralFunction {
    /// `sum_j alpha_j z^j`, coefficient `k` multiplying `z^(k - deg)`.
    Laurent {
        #[serde(with = "complex_vec")]
        coefficients: Vec<Complex64>,
    },
    Monomial { power: i64 },
    /// `exp(-beta E)` with `E = -arg(z) / dt`.
    Gibbs { beta: f64, dt: f64 },
    /// `1 / (E - omega - i chi)` with `E = -arg(z) / dt`.
    Greens { omega: f64, chi: f64, dt: f64 },
}

/// `E = -arg(z) / dt` with `arg` in `[-pi, pi)`.
pub fn node_to_energy(z: Complex64, dt: f64) -> f64 {
    -branch_arg(z) / dt
}

/// `e^{-i E dt}`.
pub fn energy_to_node(e: f64, dt: f64) -> Complex64 {
    Complex64::from_polar(1.0, -e * dt)
}

/// `z^p` for `|z| = 1`, negative powers through the conjugate.
pub fn unit_pow(z: Complex64, p: i64) -> Complex64 {
    let base = if p < 0 { z.conj() } else { z };
    let mut e = p.unsigned_abs();
    let mut acc = Complex64::new(1.0, 0.0);
    let mut b = base;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

impl SpectralFunction {
    pub fn laurent(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len().is_multiple_of(2) {
            return Err(QsqError::InvalidParameter(format!(
                "Laurent coefficient vector must have odd length, got {}",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(QsqError::NonFinite);
        }
        Ok(SpectralFunction::Laurent { coefficients })
    }

    pub fn gibbs(beta: f64, dt: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(QsqError::InvalidParameter(format!("beta must be finite, got {beta}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QsqError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(SpectralFunction::Gibbs { beta, dt })
    }

    /// `chi = 0` is accepted; evaluation then fails exactly at the pole.
    pub fn greens(omega: f64, chi: f64, dt: f64) -> Result<Self> {
        if !omega.is_finite() || !(chi >= 0.0 && chi.is_finite()) {
            return Err(QsqError::InvalidParameter(format!(
                "need finite omega and chi >= 0, got omega={omega}, chi={chi}"
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(QsqError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(SpectralFunction::Greens { omega, chi, dt })
    }

    /// Laurent degree, if the function is a Laurent polynomial.
    pub fn laurent_degree(&self) -> Option<usize> {
        match self {
            SpectralFunction::Laurent { coefficients } => Some(coefficients.len() / 2),
            SpectralFunction::Monomial { power } => Some(power.unsigned_abs() as usize),
            _ => None,
        }
    }

    /// `(power, coefficient)` pairs for Laurent-type functions.
    pub fn laurent_terms(&self) -> Option<Vec<(i64, Complex64)>> {
        match self {
            SpectralFunction::Laurent { coefficients } => {
                let deg = (coefficients.len() / 2) as i64;
                Some(
                    coefficients
                        .iter()
                        .enumerate()
                        .map(|(k, &c)| (k as i64 - deg, c))
                        .collect(),
                )
            }
            SpectralFunction::Monomial { power } => Some(vec![(*power, Complex64::new(1.0, 0.0))]),
            _ => None,
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !z.is_finite() || (z.norm() - 1.0).abs() > CIRCLE_TOL {
            return Err(QsqError::Undefined(format!("|z| = {} is off the unit circle", z.norm())));
        }
        match self {
            SpectralFunction::Laurent { coefficients } => {
                let deg = (coefficients.len() / 2) as i64;
                Ok(coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| c * unit_pow(z, k as i64 - deg))
                    .sum())
            }
            SpectralFunction::Monomial { power } => Ok(unit_pow(z, *power)),
            SpectralFunction::Gibbs { beta, dt } => {
                if *beta == 0.0 {
                    return Ok(Complex64::new(1.0, 0.0));
                }
                Ok(Complex64::new((-beta * node_to_energy(z, *dt)).exp(), 0.0))
            }
            SpectralFunction::Greens { omega, chi, dt } => {
                let denom = Complex64::new(node_to_energy(z, *dt) - omega, -chi);
                if denom.norm() == 0.0 {
                    return Err(QsqError::Undefined(format!("Green's function pole at omega = {omega}")));
                }
                Ok(denom.inv())
            }
        }
    }

    /// Parses `laurent:file.json`, `monomial:5`, `gibbs:beta=1` or
    /// `greens:omega=-3.2,chi=0.1`; `dt` comes from the model.
    pub fn parse(spec: &str, dt: f64) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind.trim() {
            "laurent" => Self::from_json_file(Path::new(rest.trim())),
            "monomial" => rest
                .trim()
                .parse::<i64>()
                .map(|power| SpectralFunction::Monomial { power })
                .map_err(|_| QsqError::Config(format!("bad monomial power {rest:?}"))),
            "gibbs" => {
                let kv = parse_params(rest)?;
                Self::gibbs(lookup(&kv, "beta", None)?, dt)
            }
            "greens" => {
                let kv = parse_params(rest)?;
                Self::greens(lookup(&kv, "omega", None)?, lookup(&kv, "chi", Some(0.1))?, dt)
            }
            other => Err(QsqError::Config(format!("unknown function kind {other:?}"))),
        }
    }

    /// Reads `{"coefficients": [{"re":..,"im":..}, ...]}` ordered from `z^-deg` to `z^deg`.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            #[serde(with = "complex_vec")]
            coefficients: Vec<Complex64>,
        }
        let text = std::fs::read_to_string(path)?;
        let file: File = serde_json::from_str(&text)?;
        Self::laurent(file.coefficients).map_err(|e| QsqError::Config(e.to_string()))
    }
}

fn parse_params(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| QsqError::Config(format!("expected key=value, got {p:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| QsqError::Config(format!("bad number in {p:?}")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn lookup(kv: &[(String, f64)], key: &str, default: Option<f64>) -> Result<f64> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| QsqError::Config(format!("missing parameter {key}")))
}

/// Random Laurent polynomial of exact degree `degree` with `sum |alpha_j| = 1`.
pub fn random_laurent(degree: usize, seed: u64) -> SpectralFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    };
    let n = 2 * degree + 1;
    let mut c: Vec<Complex64> = (0..n).map(|_| draw(&mut rng)).collect();
    while degree > 0 && c[0].norm() < 1e-6 && c[n - 1].norm() < 1e-6 {
        c[0] = draw(&mut rng);
        c[n - 1] = draw(&mut rng);
    }
    let total: f64 = c.iter().map(|z| z.norm()).sum();
    for z in &mut c {
        *z /= total;
    }
    SpectralFunction::Laurent { coefficients: c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gibbs_at_one_is_one() {
        let f = SpectralFunction::gibbs(1.3, 0.2).unwrap();
        assert_eq!(f.eval(c(1.0, 0.0)).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn monomial_five_at_i() {
        let f = SpectralFunction::Monomial { power: 5 };
        let v = f.eval(c(0.0, 1.0)).unwrap();
        assert!((v - c(0.0, 1.0)).norm() < 1e-15);
        let g = SpectralFunction::Monomial { power: -3 };
        assert!((g.eval(c(0.0, 1.0)).unwrap() - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn constant_laurent() {
        let f = SpectralFunction::laurent(vec![c(1.0, 0.0)]).unwrap();
        let z = Complex64::from_polar(1.0, 0.7);
        assert_eq!(f.eval(z).unwrap(), c(1.0, 0.0));
        assert!(SpectralFunction::laurent(vec![c(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn off_circle_rejected() {
        let f = SpectralFunction::Monomial { power: 1 };
        assert!(f.eval(c(1.1, 0.0)).is_err());
        assert!(f.eval(c(1.0 + 1e-9, 0.0)).is_ok());
    }

    #[test]
    fn greens_pole() {
        let f = SpectralFunction::greens(0.0, 0.0, 0.5).unwrap();
        assert!(matches!(f.eval(c(1.0, 0.0)), Err(QsqError::Undefined(_))));
        let g = SpectralFunction::greens(0.0, 0.1, 0.5).unwrap();
        let v = g.eval(c(1.0, 0.0)).unwrap();
        assert!((v - c(0.0, 10.0)).norm() < 1e-12);
        assert!(SpectralFunction::greens(0.0, -0.1, 0.5).is_err());
    }

    #[test]
    fn node_energy_examples() {
        let dt = 0.3;
        assert_eq!(node_to_energy(c(1.0, 0.0), dt), 0.0);
        assert!((node_to_energy(Complex64::from_polar(1.0, -2.0 * dt), dt) - 2.0).abs() < 1e-12);
        assert!((node_to_energy(c(-1.0, 0.0), dt) - PI / dt).abs() < 1e-12);
    }

    #[test]
    fn random_laurent_examples() {
        let f0 = random_laurent(0, 3);
        match &f0 {
            SpectralFunction::Laurent { coefficients } => {
                assert_eq!(coefficients.len(), 1);
                assert!((coefficients[0].norm() - 1.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        assert_eq!(random_laurent(4, 11), random_laurent(4, 11));
        assert_ne!(random_laurent(4, 11), random_laurent(4, 12));
        match random_laurent(5, 9) {
            SpectralFunction::Laurent { coefficients } => {
                assert_eq!(coefficients.len(), 11);
                let s: f64 = coefficients.iter().map(|z| z.norm()).sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(coefficients[0].norm().max(coefficients[10].norm()) > 1e-6);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn parse_specs() {
        let dt = 0.25;
        assert_eq!(
            SpectralFunction::parse("monomial:5", dt).unwrap(),
            SpectralFunction::Monomial { power: 5 }
        );
        assert_eq!(
            SpectralFunction::parse("gibbs:beta=1", dt).unwrap(),
            SpectralFunction::Gibbs { beta: 1.0, dt }
        );
        assert_eq!(
            SpectralFunction::parse("greens:omega=-3.2,chi=0.1", dt).unwrap(),
            SpectralFunction::Greens { omega: -3.2, chi: 0.1, dt }
        );
        assert!(SpectralFunction::parse("sine:1", dt).is_err());
        assert!(SpectralFunction::parse("gibbs:b=1", dt).is_err());
        assert!(SpectralFunction::parse("monomial:x", dt).unwrap_err().is_config_error());
    }

    #[test]
    fn laurent_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        std::fs::write(
            &path,
            r#"{"coefficients":[{"re":0.5,"im":0},{"re":0,"im":0},{"re":0.5,"im":0}]}"#,
        )
        .unwrap();
        let f = SpectralFunction::parse(&format!("laurent:{}", path.display()), 1.0).unwrap();
        // (z + 1/z) / 2 = cos(theta)
        let z = Complex64::from_polar(1.0, 0.4);
        assert!((f.eval(z).unwrap() - c(0.4f64.cos(), 0.0)).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn gibbs_beta_zero_is_one(theta in -PI..PI, dt in 0.01f64..2.0) {
            let f = SpectralFunction::gibbs(0.0, dt).unwrap();
            prop_assert_eq!(f.eval(Complex64::from_polar(1.0, theta)).unwrap(), c(1.0, 0.0));
        }

        #[test]
        fn laurent_is_linear(seed in 0u64..1000, theta in -PI..PI, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let (SpectralFunction::Laurent { coefficients: p }, SpectralFunction::Laurent { coefficients: q }) =
                (random_laurent(3, seed), random_laurent(3, seed + 1)) else { unreachable!() };
            let mix: Vec<Complex64> = p.iter().zip(&q).map(|(x, y)| x * a + y * b).collect();
            let z = Complex64::from_polar(1.0, theta);
            let fp = SpectralFunction::laurent(p).unwrap().eval(z).unwrap();
            let fq = SpectralFunction::laurent(q).unwrap().eval(z).unwrap();
            let fm = SpectralFunction::laurent(mix).unwrap().eval(z).unwrap();
            prop_assert!((fm - (fp * a + fq * b)).norm() < 1e-12);
        }

        #[test]
        fn energy_roundtrip(x in -0.999999f64..0.999999, dt in 0.01f64..2.0) {
            let e = x * PI / dt;
            prop_assert!((node_to_energy(energy_to_node(e, dt), dt) - e).abs() < 1e-10);
        }
    }
}
