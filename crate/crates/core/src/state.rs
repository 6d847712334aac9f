//! Initial states, exact moment data and the brute-force functional oracle.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codec::complex_vec;
use crate::error::{QsqError, Result};
use crate::functions::SpectralFunction;
use crate::pauli::SpectralData;

/// Normalized state vector in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Normalizes `amps`; fails on a zero or non-finite vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(QsqError::NonFinite);
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QsqError::InvalidParameter("zero state vector".into()));
        }
        Ok(StateVector {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StateSpec {
    /// `|1010...10>`.
    Antiferromagnet,
    /// A computational basis state given by its bitstring, qubit 0 first.
    Basis(String),
    /// I.i.d. complex Gaussian amplitudes, normalized.
    Random(u64),
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Antiferromagnet => write!(f, "antiferromagnet"),
            StateSpec::Basis(bits) => write!(f, "basis:{bits}"),
            StateSpec::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = QsqError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once(':') {
            None if s == "antiferromagnet" || s == "afm" => Ok(StateSpec::Antiferromagnet),
            Some(("basis", bits)) => Ok(StateSpec::Basis(bits.trim().to_string())),
            Some(("random", seed)) => seed
                .trim()
                .parse()
                .map(StateSpec::Random)
                .map_err(|_| QsqError::Config(format!("bad random seed {seed:?}"))),
            _ => Err(QsqError::Config(format!("unknown state spec {s:?}"))),
        }
    }
}

impl From<StateSpec> for String {
    fn from(s: StateSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for StateSpec {
    type Error = QsqError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub fn prepare_state(spec: &StateSpec, n_qubits: usize) -> Result<StateVector> {
    let dim = 1usize << n_qubits;
    match spec {
        StateSpec::Antiferromagnet => {
            let bits: String = (0..n_qubits).map(|q| if q % 2 == 0 { '1' } else { '0' }).collect();
            prepare_state(&StateSpec::Basis(bits), n_qubits)
        }
        StateSpec::Basis(bits) => {
            if bits.len() != n_qubits {
                return Err(QsqError::InvalidParameter(format!(
                    "bitstring {bits:?} has length {}, expected {n_qubits}",
                    bits.len()
                )));
            }
            let index = usize::from_str_radix(bits, 2)
                .map_err(|_| QsqError::InvalidParameter(format!("bad bitstring {bits:?}")))?;
            Ok(StateVector::basis(dim, index))
        }
        StateSpec::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let amps = (0..dim)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            StateVector::normalized(amps)
        }
    }
}

/// Relative phase of the second state in a superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Plus, Phase::Minus, Phase::PlusI, Phase::MinusI];

    pub fn value(self) -> Complex64 {
        match self {
            Phase::Plus => Complex64::new(1.0, 0.0),
            Phase::Minus => Complex64::new(-1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }
}

/// `(psi0 + phase psi1) / norm` together with `norm`.
pub fn combo(psi0: &StateVector, psi1: &StateVector, phase: Phase) -> Result<(StateVector, f64)> {
    if psi0.dim() != psi1.dim() {
        return Err(QsqError::DimensionMismatch {
            expected: psi0.dim(),
            actual: psi1.dim(),
        });
    }
    let p = phase.value();
    let amps: Vec<Complex64> = psi0.amps.iter().zip(&psi1.amps).map(|(a, b)| a + p * b).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(QsqError::InvalidParameter("superposition has zero norm".into()));
    }
    Ok((
        StateVector {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        },
        norm,
    ))
}

/// `X_j = <psi0|U^j|psi0>` for `j = 0..=d`; negative indices follow by conjugation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    pub d: usize,
    pub dt: f64,
    #[serde(with = "complex_vec")]
    pub moments: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl MomentSequence {
    /// Builds a sequence from `X_1..X_d`; `X_0` is set to one.
    pub fn from_tail(dt: f64, tail: &[Complex64]) -> Self {
        let mut moments = Vec::with_capacity(tail.len() + 1);
        moments.push(Complex64::new(1.0, 0.0));
        moments.extend_from_slice(tail);
        MomentSequence {
            d: tail.len(),
            dt,
            moments,
            fingerprint: None,
        }
    }

    /// `X_j` for `|j| <= d`.
    pub fn get(&self, j: i64) -> Complex64 {
        let x = self.moments[j.unsigned_abs() as usize];
        if j < 0 {
            x.conj()
        } else {
            x
        }
    }

    pub fn truncate(&self, d: usize) -> Result<Self> {
        if d > self.d {
            return Err(QsqError::InvalidParameter(format!(
                "requested degree {d} exceeds available {}",
                self.d
            )));
        }
        Ok(MomentSequence {
            d,
            dt: self.dt,
            moments: self.moments[..=d].to_vec(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// `X_j -> conj(X_j)`, the data of the time-reversed evolution.
    pub fn conjugated(&self) -> Self {
        MomentSequence {
            moments: self.moments.iter().map(|x| x.conj()).collect(),
            ..self.clone()
        }
    }

    /// Shape checks for externally supplied data.
    pub fn validate(&self) -> Result<()> {
        if self.moments.len() != self.d + 1 {
            return Err(QsqError::DimensionMismatch {
                expected: self.d + 1,
                actual: self.moments.len(),
            });
        }
        if self.moments.iter().any(|x| !x.is_finite()) || !self.dt.is_finite() {
            return Err(QsqError::NonFinite);
        }
        if self.moments[0] != Complex64::new(1.0, 0.0) {
            return Err(QsqError::InvalidParameter("X_0 must equal 1".into()));
        }
        Ok(())
    }
}

pub fn moments(spec: &SpectralData, psi0: &StateVector, d: usize) -> Result<MomentSequence> {
    if d < 1 {
        return Err(QsqError::InvalidParameter("moment degree must be at least 1".into()));
    }
    let probs: Vec<f64> = spec.amplitudes(psi0)?.iter().map(|g| g.norm_sqr()).collect();
    let dt = spec.dt();
    let mut out = vec![Complex64::new(1.0, 0.0); d + 1];
    for (j, x) in out.iter_mut().enumerate().skip(1) {
        *x = spec
            .energies()
            .iter()
            .zip(&probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&e, &p)| Complex64::from_polar(p, -(j as f64) * e * dt))
            .sum();
    }
    Ok(MomentSequence {
        d,
        dt,
        moments: out,
        fingerprint: Some(spec.fingerprint().to_string()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

/// Adds independent `N(0, sigma^2)` noise to the real and imaginary parts of `X_1..X_d`.
pub fn apply_noise(m: &MomentSequence, noise: NoiseModel) -> Result<MomentSequence> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(QsqError::InvalidParameter(format!(
            "noise sigma must be finite and nonnegative, got {}",
            noise.sigma
        )));
    }
    let mut out = m.clone();
    if noise.sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).map_err(|e| QsqError::InvalidParameter(e.to_string()))?;
    for x in out.moments.iter_mut().skip(1) {
        let re: f64 = rng.sample(normal);
        let im: f64 = rng.sample(normal);
        *x += Complex64::new(re, im);
    }
    Ok(out)
}

/// `<psi1|f(U)|psi0> = sum_j conj(<v_j|psi1>) <v_j|psi0> f(zeta_j)`.
pub fn exact_functional(
    spec: &SpectralData,
    psi0: &StateVector,
    psi1: &StateVector,
    f: &SpectralFunction,
) -> Result<Complex64> {
    let a0 = spec.amplitudes(psi0)?;
    let a1 = if psi0 == psi1 { a0.clone() } else { spec.amplitudes(psi1)? };
    let mut total = Complex64::new(0.0, 0.0);
    for ((g0, g1), z) in a0.iter().zip(&a1).zip(spec.eigenphases()) {
        let w = g1.conj() * g0;
        if w != Complex64::new(0.0, 0.0) {
            total += w * f.eval(z)?;
        }
    }
    Ok(total)
}

/// How many eigenvectors carry a state's probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCounts {
    /// Eigenvectors with `|gamma_m|^2 > threshold`.
    pub support: usize,
    /// Smallest number of eigenvectors covering the requested mass.
    pub cover: usize,
    /// As `support`, with each degenerate eigenspace counted once.
    pub merged_support: usize,
    /// As `cover`, with each degenerate eigenspace counted once.
    pub merged_cover: usize,
}

/// Energies closer than `degeneracy_tol` are treated as one eigenspace.
pub fn support_counts(
    spec: &SpectralData,
    psi: &StateVector,
    threshold: f64,
    mass: f64,
    degeneracy_tol: f64,
) -> Result<SupportCounts> {
    let probs: Vec<f64> = spec.amplitudes(psi)?.iter().map(|g| g.norm_sqr()).collect();

    let mut merged: Vec<f64> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (&e, &p) in spec.energies().iter().zip(&probs) {
        if e - last > degeneracy_tol || merged.is_empty() {
            merged.push(p);
        } else {
            *merged.last_mut().unwrap() += p;
        }
        last = e;
    }

    let count = |ps: &[f64]| -> (usize, usize) {
        let support = ps.iter().filter(|&&p| p > threshold).count();
        let mut sorted: Vec<f64> = ps.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = sorted.iter().sum();
        let mut acc = 0.0;
        let mut cover = 0;
        for p in sorted {
            if acc >= mass * total {
                break;
            }
            acc += p;
            cover += 1;
        }
        (support, cover)
    };
    let (support, cover) = count(&probs);
    let (merged_support, merged_cover) = count(&merged);
    Ok(SupportCounts {
        support,
        cover,
        merged_support,
        merged_cover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::random_laurent;
    use crate::pauli::{spectral_decompose, Hamiltonian, ModelParams};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_site() -> SpectralData {
        let p = ModelParams {
            rows: 1,
            cols: 2,
            ..ModelParams::default()
        };
        spectral_decompose(&Hamiltonian::heisenberg(&p).unwrap(), None).unwrap()
    }

    fn small() -> SpectralData {
        spectral_decompose(&Hamiltonian::heisenberg(&ModelParams::default()).unwrap(), None).unwrap()
    }

    #[test]
    fn antiferromagnet_two_qubits() {
        let s = prepare_state(&StateSpec::Antiferromagnet, 2).unwrap();
        // |10> is basis index 2
        assert_eq!(s, StateVector::basis(4, 2));
        let s6 = prepare_state(&StateSpec::Antiferromagnet, 6).unwrap();
        assert_eq!(s6, StateVector::basis(64, 0b101010));
    }

    #[test]
    fn basis_length_checked() {
        assert!(prepare_state(&StateSpec::Basis("101".into()), 2).is_err());
        assert!(prepare_state(&StateSpec::Basis("1x".into()), 2).is_err());
    }

    #[test]
    fn random_state_is_deterministic_unit() {
        let a = prepare_state(&StateSpec::Random(7), 3).unwrap();
        let b = prepare_state(&StateSpec::Random(7), 3).unwrap();
        assert_eq!(a, b);
        assert!((a.inner(&a).re - 1.0).abs() < 1e-12);
        assert_ne!(a, prepare_state(&StateSpec::Random(8), 3).unwrap());
    }

    #[test]
    fn spec_strings() {
        for s in ["antiferromagnet", "basis:0110", "random:42"] {
            assert_eq!(s.parse::<StateSpec>().unwrap().to_string(), s);
        }
        assert!("bogus".parse::<StateSpec>().is_err());
    }

    #[test]
    fn combo_cases() {
        let psi = prepare_state(&StateSpec::Random(1), 2).unwrap();
        let (c, norm) = combo(&psi, &psi, Phase::Plus).unwrap();
        assert!((norm - 2.0).abs() < 1e-12);
        for (x, y) in c.amplitudes().iter().zip(psi.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!(combo(&psi, &psi, Phase::Minus).is_err());
        let (_, n) = combo(&StateVector::basis(4, 0), &StateVector::basis(4, 1), Phase::PlusI).unwrap();
        assert!((n - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_moments_are_pure_phases() {
        let s = small();
        let m = 17;
        let v: Vec<Complex64> = s.eigenvector(m).iter().copied().collect();
        let psi = StateVector::normalized(v).unwrap();
        let x = moments(&s, &psi, 6).unwrap();
        let e = s.energies()[m];
        for j in 0..=6 {
            let want = Complex64::from_polar(1.0, -(j as f64) * e * s.dt());
            assert!((x.moments[j] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn two_site_neel_moments() {
        let s = two_site();
        assert!((s.dt() - PI / 4.0).abs() < 1e-15);
        let psi = prepare_state(&StateSpec::Antiferromagnet, 2).unwrap();
        let x = moments(&s, &psi, 2).unwrap();
        assert_eq!(x.moments[0], Complex64::new(1.0, 0.0));
        assert!(x.moments[1].norm() < 1e-12);
        assert!((x.moments[2] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degree_zero_rejected() {
        let s = two_site();
        let psi = prepare_state(&StateSpec::Antiferromagnet, 2).unwrap();
        assert!(moments(&s, &psi, 0).is_err());
    }

    #[test]
    fn moments_json_shape() {
        let m = MomentSequence::from_tail(0.5, &[Complex64::new(0.25, -0.5)]);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["d"], 1);
        assert_eq!(v["dt"], 0.5);
        assert_eq!(v["moments"][0]["re"], 1.0);
        assert_eq!(v["moments"][1]["im"], -0.5);
        let back: MomentSequence = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();
    }

    #[test]
    fn noise_cases() {
        let s = small();
        let psi = prepare_state(&StateSpec::Antiferromagnet, 6).unwrap();
        let x = moments(&s, &psi, 10).unwrap();
        assert_eq!(apply_noise(&x, NoiseModel { sigma: 0.0, seed: 3 }).unwrap(), x);
        let n = NoiseModel { sigma: 1e-3, seed: 3 };
        let a = apply_noise(&x, n).unwrap();
        let b = apply_noise(&x, n).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.moments[0], x.moments[0]);
        assert_ne!(a.moments[1], x.moments[1]);
        assert!(apply_noise(&x, NoiseModel { sigma: -1.0, seed: 0 }).is_err());
    }

    #[test]
    fn noise_has_requested_width() {
        let m = MomentSequence::from_tail(1.0, &[Complex64::new(0.0, 0.0)]);
        let samples: Vec<Complex64> = (0..10_000u64)
            .map(|seed| apply_noise(&m, NoiseModel { sigma: 1e-3, seed }).unwrap().moments[1])
            .collect();
        let std = |xs: Vec<f64>| {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        };
        let sr = std(samples.iter().map(|z| z.re).collect());
        let si = std(samples.iter().map(|z| z.im).collect());
        assert!((sr / 1e-3 - 1.0).abs() < 0.05, "{sr}");
        assert!((si / 1e-3 - 1.0).abs() < 0.05, "{si}");
    }

    #[test]
    fn functional_examples() {
        let s = small();
        let psi = prepare_state(&StateSpec::Antiferromagnet, 6).unwrap();
        let one = SpectralFunction::laurent(vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert!((exact_functional(&s, &psi, &psi, &one).unwrap() - 1.0).norm() < 1e-12);
        let g0 = SpectralFunction::gibbs(0.0, s.dt()).unwrap();
        assert!((exact_functional(&s, &psi, &psi, &g0).unwrap() - 1.0).norm() < 1e-12);
        let x = moments(&s, &psi, 8).unwrap();
        for j in -8i64..=8 {
            let v = exact_functional(&s, &psi, &psi, &SpectralFunction::Monomial { power: j }).unwrap();
            assert!((v - x.get(j)).norm() < 1e-12);
        }
    }

    #[test]
    fn functional_matches_dense_matrix_element() {
        let p = ModelParams {
            rows: 2,
            cols: 2,
            ..ModelParams::default()
        };
        let h = Hamiltonian::heisenberg(&p).unwrap();
        let s = spectral_decompose(&h, None).unwrap();
        let dense = h.materialize_dense().unwrap();
        // U = exp(-i H dt) via the full eigendecomposition of the dense matrix
        let eig = crate::linalg::hermitian_eigendecompose(&dense).unwrap();
        let phases = eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * s.dt()));
        let u = &eig.eigenvectors
            * crate::linalg::ComplexMatrix::from_diagonal(&phases)
            * eig.eigenvectors.adjoint();
        let a = prepare_state(&StateSpec::Random(1), 4).unwrap();
        let b = prepare_state(&StateSpec::Random(2), 4).unwrap();
        let va = nalgebra::DVector::from_column_slice(a.amplitudes());
        let vb = nalgebra::DVector::from_column_slice(b.amplitudes());
        let want = vb.dotc(&(&u * &va));
        let got = exact_functional(&s, &a, &b, &SpectralFunction::Monomial { power: 1 }).unwrap();
        assert!((got - want).norm() < 1e-12);
    }

    #[test]
    fn support_of_two_site_neel() {
        let s = two_site();
        let psi = prepare_state(&StateSpec::Antiferromagnet, 2).unwrap();
        let c = support_counts(&s, &psi, 1e-12, 0.999, 1e-8).unwrap();
        assert_eq!(c.support, 2);
        assert_eq!(c.cover, 2);
        assert!(c.merged_support <= 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prefix_and_bounds(seed in 0u64..10_000, d in 1usize..12) {
            let s = small();
            let psi = prepare_state(&StateSpec::Random(seed), 6).unwrap();
            let long = moments(&s, &psi, 12).unwrap();
            let short = moments(&s, &psi, d).unwrap();
            prop_assert_eq!(&short.moments[..], &long.moments[..=d]);
            for j in -(d as i64)..=(d as i64) {
                prop_assert_eq!(short.get(-j), short.get(j).conj());
                prop_assert!(short.get(j).norm() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn laurent_functional_is_moment_sum(seed in 0u64..10_000, deg in 0usize..6) {
            let s = small();
            let psi = prepare_state(&StateSpec::Random(seed), 6).unwrap();
            let x = moments(&s, &psi, 6).unwrap();
            let f = random_laurent(deg, seed);
            let terms = f.laurent_terms().unwrap();
            let direct: Complex64 = terms.iter().map(|&(j, a)| a * x.get(j)).sum();
            let exact = exact_functional(&s, &psi, &psi, &f).unwrap();
            prop_assert!((direct - exact).norm() < 1e-12);
        }
    }
}
