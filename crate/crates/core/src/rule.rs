//! Szegő quadrature rules from moment data.
//!
//! The nodes are the eigenvalues of `U~^T`, where `U~` is the unitary
//! projection of `S~^{-1/2} U' S~^{-1/2}`. With `v~_k` the normalized
//! eigenvectors of `U~^T` and `s` the zeroth row of `S~^{1/2}`, the weights are
//! `w_k = |<s, v~_k>|^2`, the inner product being conjugate-linear in its first
//! argument.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::complex_vec;
use crate::error::{QsqError, Result};
use crate::functions::{unit_pow, SpectralFunction};
use crate::krylov::{
    assemble, default_eta, orthonormalize, project_to_unitary, regularize, KrylovPair, RegularizedGram,
};
use crate::linalg::{
    branch_arg, clusters, psd_power, unitary_eigendecompose, ComplexMatrix, PsdExponent, CLUSTER_TOL,
};
use crate::pauli::SpectralData;
use crate::state::{combo, moments, Phase, StateVector};

/// Nodes closer than this to `arg = -pi` are flagged in the diagnostics.
pub const BRANCH_CUT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleOptions {
    /// Regularization floor; `None` picks [`default_eta`] from `noise_sigma`.
    pub eta: Option<f64>,
    /// Declared noise level of the moments.
    pub noise_sigma: Option<f64>,
    /// Rescale the weights to sum to one.
    pub renormalize: bool,
    /// Merge nodes closer than [`CLUSTER_TOL`], summing their weights.
    pub merge_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Weight sum before any renormalization; `1 + shift` for exact data.
    pub raw_weight_sum: f64,
    pub eta: f64,
    pub shift: f64,
    /// Smallest eigenvalue of the unregularized Gram matrix.
    pub lambda_min: f64,
    /// Some node lies within [`BRANCH_CUT_MARGIN`] of `arg = -pi`, where the
    /// reconstructed energy is ambiguous.
    pub near_branch_cut: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzegoRule {
    pub d: usize,
    pub dt: f64,
    /// Unit modulus, ascending in phase on `[-pi, pi)`.
    #[serde(with = "complex_vec")]
    pub nodes: Vec<Complex64>,
    pub weights: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Intermediate matrices of a rule construction.
#[derive(Debug, Clone)]
pub struct RulePipeline {
    pub pair: KrylovPair,
    pub gram: RegularizedGram,
    /// Unitary `U~`.
    pub u_tilde: ComplexMatrix,
    pub rule: SzegoRule,
}

pub fn build_rule(m: &crate::state::MomentSequence, d: usize, opts: &RuleOptions) -> Result<SzegoRule> {
    Ok(build_rule_pipeline(m, d, opts)?.rule)
}

pub fn build_rule_pipeline(
    m: &crate::state::MomentSequence,
    d: usize,
    opts: &RuleOptions,
) -> Result<RulePipeline> {
    let pair = assemble(m, d)?;
    let eta = opts.eta.unwrap_or_else(|| default_eta(opts.noise_sigma, d));
    let gram = regularize(&pair.s, eta)?;
    let u_tilde = project_to_unitary(&orthonormalize(&pair.u, &gram)?)?;
    let s_half = psd_power(&gram.s_tilde, PsdExponent::Sqrt, eta)?;
    let eig = unitary_eigendecompose(&u_tilde.transpose())?;

    let s0 = s_half.row(0).transpose();
    let mut nodes = eig.eigenvalues;
    let mut weights: Vec<f64> = (0..d).map(|k| s0.dotc(&eig.eigenvectors.column(k)).norm_sqr()).collect();
    let raw_weight_sum: f64 = weights.iter().sum();

    if opts.merge_degenerate {
        (nodes, weights) = merge_clusters(&nodes, &weights);
    }
    if opts.renormalize && raw_weight_sum > 0.0 {
        for w in &mut weights {
            *w /= raw_weight_sum;
        }
    }
    let near_branch_cut = nodes.iter().any(|&z| PI - branch_arg(z).abs() < BRANCH_CUT_MARGIN);

    let rule = SzegoRule {
        d,
        dt: m.dt,
        nodes,
        weights,
        diagnostics: Diagnostics {
            raw_weight_sum,
            eta,
            shift: gram.shift,
            lambda_min: gram.lambda_min,
            near_branch_cut,
        },
    };
    Ok(RulePipeline {
        pair,
        gram,
        u_tilde,
        rule,
    })
}

fn merge_clusters(nodes: &[Complex64], weights: &[f64]) -> (Vec<Complex64>, Vec<f64>) {
    let mut merged: Vec<(Complex64, f64)> = clusters(nodes, CLUSTER_TOL)
        .into_iter()
        .map(|group| {
            let w: f64 = group.iter().map(|&k| weights[k]).sum();
            let centre: Complex64 = if w > 0.0 {
                group.iter().map(|&k| nodes[k] * weights[k]).sum()
            } else {
                group.iter().map(|&k| nodes[k]).sum()
            };
            let node = if centre.norm() > 0.0 { centre / centre.norm() } else { nodes[group[0]] };
            (node, w)
        })
        .collect();
    merged.sort_by(|a, b| branch_arg(a.0).total_cmp(&branch_arg(b.0)));
    merged.into_iter().unzip()
}

impl SzegoRule {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_k w_k f(node_k)`.
    pub fn apply(&self, f: &SpectralFunction) -> Result<Complex64> {
        self.apply_with(|z| f.eval(z))
    }

    pub fn apply_with<F>(&self, f: F) -> Result<Complex64>
    where
        F: Fn(Complex64) -> Result<Complex64>,
    {
        let mut total = Complex64::new(0.0, 0.0);
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            total += f(z)? * w;
        }
        Ok(total)
    }

    /// Smallest distance between two nodes, infinite for a single node.
    pub fn min_node_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                gap = gap.min((a - b).norm());
            }
        }
        gap
    }
}

pub fn apply_rule(rule: &SzegoRule, f: &SpectralFunction) -> Result<Complex64> {
    rule.apply(f)
}

/// `s^H f(U~^T) s` with `s` the zeroth row of `S~^{1/2}`.
///
/// Laurent-type functions are applied through matrix powers, using
/// `(U~^T)^{-1} = conj(U~)`; everything else through the eigendecomposition.
pub fn matrix_function_element(
    u_tilde: &ComplexMatrix,
    s_tilde: &ComplexMatrix,
    f: &SpectralFunction,
) -> Result<Complex64> {
    let n = u_tilde.nrows();
    if s_tilde.nrows() != n || s_tilde.ncols() != n {
        return Err(QsqError::DimensionMismatch {
            expected: n,
            actual: s_tilde.nrows(),
        });
    }
    let s_half = psd_power(s_tilde, PsdExponent::Sqrt, f64::MIN_POSITIVE)?;
    let s: DVector<Complex64> = s_half.row(0).transpose();
    let fs = match f.laurent_terms() {
        Some(terms) => {
            let forward = u_tilde.transpose();
            let backward = u_tilde.map(|z| z.conj());
            let mut out = DVector::<Complex64>::zeros(n);
            for (power, coef) in terms {
                let step = if power < 0 { &backward } else { &forward };
                let mut v = s.clone();
                for _ in 0..power.unsigned_abs() {
                    v = step * v;
                }
                out += v * coef;
            }
            out
        }
        None => {
            let eig = unitary_eigendecompose(&u_tilde.transpose())?;
            let v = &eig.eigenvectors;
            let mut coeffs = v.adjoint() * &s;
            for (k, z) in eig.eigenvalues.iter().enumerate() {
                coeffs[k] *= f.eval(*z)?;
            }
            v * coeffs
        }
    };
    Ok(s.dotc(&fs))
}

/// Rules for the four superpositions `(psi0 + p psi1) / norm`, `p` in
/// `+1, -1, +i, -i`, each with its norm. Superpositions of zero norm are `None`.
pub type ComboRules = [Option<(SzegoRule, f64)>; 4];

pub fn combo_rules(
    spec: &SpectralData,
    psi0: &StateVector,
    psi1: &StateVector,
    d: usize,
    opts: &RuleOptions,
) -> Result<ComboRules> {
    let mut out: ComboRules = [None, None, None, None];
    for (slot, phase) in out.iter_mut().zip(Phase::ALL) {
        match combo(psi0, psi1, phase) {
            Ok((state, norm)) => {
                let m = moments(spec, &state, d)?;
                *slot = Some((build_rule(&m, d, opts)?, norm));
            }
            Err(QsqError::InvalidParameter(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `<psi1|f(U)|psi0> = (a - b + i(c - d)) / 2`, where `a..d` are the rule
/// values of the four superpositions scaled by `norm^2 / 2`.
pub fn general_matrix_element(rules: &ComboRules, f: &SpectralFunction) -> Result<Complex64> {
    let mut parts = [Complex64::new(0.0, 0.0); 4];
    for (part, slot) in parts.iter_mut().zip(rules) {
        if let Some((rule, norm)) = slot {
            *part = rule.apply(f)? * (norm * norm / 2.0);
        }
    }
    let [a, b, c, d] = parts;
    Ok((a - b + Complex64::new(0.0, 1.0) * (c - d)) / 2.0)
}

/// `z^j` summed against the rule, the rule's reproduction of `X_j`.
pub fn rule_moment(rule: &SzegoRule, j: i64) -> Complex64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&z, &w)| unit_pow(z, j) * w)
        .sum()
}
