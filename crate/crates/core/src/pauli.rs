//! Pauli-string Hamiltonians on a rectangular lattice and their exact spectra.
//!
//! Qubit `q` is the `q`-th tensor factor from the left, i.e. bit `n - 1 - q` of
//! a computational basis index. The site `(r, c)` of a `rows x cols` lattice is
//! qubit `r * cols + c`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QsqError, Result};
use crate::linalg::{hermitian_eigendecompose, ComplexMatrix, HermitianEigensystem};
use crate::state::StateVector;

/// Default cap on lattice size for Hamiltonian construction.
pub const MAX_QUBITS: usize = 14;

/// Default cap for [`Hamiltonian::materialize_dense`] (a 4096 x 4096 matrix).
pub const DENSE_MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Action on a single qubit in state `bit`: returns (flipped?, phase).
    fn act(self, bit: bool) -> (bool, Complex64) {
        match self {
            Pauli::I => (false, Complex64::new(1.0, 0.0)),
            Pauli::X => (true, Complex64::new(1.0, 0.0)),
            Pauli::Y => (true, if bit { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) }),
            Pauli::Z => (false, Complex64::new(if bit { -1.0 } else { 1.0 }, 0.0)),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub word: Vec<Pauli>,
}

impl PauliTerm {
    fn on_sites(n: usize, coefficient: f64, sites: &[(usize, Pauli)]) -> Self {
        let mut word = vec![Pauli::I; n];
        for &(q, p) in sites {
            word[q] = p;
        }
        PauliTerm { coefficient, word }
    }

    /// `P |basis> = phase |image>`.
    pub fn apply(&self, basis: usize) -> (usize, Complex64) {
        let n = self.word.len();
        let mut image = basis;
        let mut phase = Complex64::new(self.coefficient, 0.0);
        for (q, p) in self.word.iter().enumerate() {
            let shift = n - 1 - q;
            let (flip, f) = p.act((basis >> shift) & 1 == 1);
            if flip {
                image ^= 1 << shift;
            }
            phase *= f;
        }
        (image, phase)
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: String = self.word.iter().map(|p| p.symbol()).collect();
        write!(f, "{}*{}", self.coefficient, w)
    }
}

/// Parameters of the XXZ-type Heisenberg model on a `rows x cols` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rows: usize,
    pub cols: usize,
    pub h: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Time step; `None` selects `pi / ||H||`.
    pub dt: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            rows: 2,
            cols: 3,
            h: 1.0,
            j1: 1.0,
            j2: 1.0,
            j3: 2.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub rows: usize,
    pub cols: usize,
    pub n_qubits: usize,
    pub terms: Vec<PauliTerm>,
}

/// Nearest-neighbour pairs of an open-boundary `rows x cols` grid, each pair once.
pub fn lattice_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let q = r * cols + c;
            if c + 1 < cols {
                edges.push((q, q + 1));
            }
            if r + 1 < rows {
                edges.push((q, q + cols));
            }
        }
    }
    edges
}

impl Hamiltonian {
    /// `H = sum_i h Z_i + sum_<i,j> (j1 X_i X_j + j2 Y_i Y_j + j3 Z_i Z_j)` with open boundaries.
    pub fn heisenberg(params: &ModelParams) -> Result<Self> {
        Self::heisenberg_with_limit(params, MAX_QUBITS)
    }

    pub fn heisenberg_with_limit(params: &ModelParams, max_qubits: usize) -> Result<Self> {
        let ModelParams { rows, cols, h, j1, j2, j3, .. } = *params;
        if rows == 0 || cols == 0 {
            return Err(QsqError::InvalidParameter(format!(
                "lattice must be at least 1x1, got {rows}x{cols}"
            )));
        }
        let n = rows * cols;
        if n > max_qubits {
            return Err(QsqError::SizeGuard {
                qubits: n,
                limit: max_qubits,
            });
        }
        if ![h, j1, j2, j3].iter().all(|x| x.is_finite()) {
            return Err(QsqError::InvalidParameter("couplings must be finite".into()));
        }

        let mut terms: Vec<PauliTerm> = (0..n)
            .map(|q| PauliTerm::on_sites(n, h, &[(q, Pauli::Z)]))
            .collect();
        for (a, b) in lattice_edges(rows, cols) {
            for (coef, p) in [(j1, Pauli::X), (j2, Pauli::Y), (j3, Pauli::Z)] {
                terms.push(PauliTerm::on_sites(n, coef, &[(a, p), (b, p)]));
            }
        }
        Ok(Hamiltonian {
            rows,
            cols,
            n_qubits: n,
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Nonzero entries of column `basis` of the Hamiltonian, keyed by row.
    pub fn column(&self, basis: usize) -> BTreeMap<usize, Complex64> {
        let mut out: BTreeMap<usize, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let (image, amp) = t.apply(basis);
            *out.entry(image).or_insert(Complex64::new(0.0, 0.0)) += amp;
        }
        let scale = self.terms.iter().fold(0.0f64, |m, t| m.max(t.coefficient.abs()));
        out.retain(|_, a| a.norm() > 1e-14 * scale);
        out
    }

    pub fn materialize_dense(&self) -> Result<ComplexMatrix> {
        self.materialize_dense_with_limit(DENSE_MAX_QUBITS)
    }

    pub fn materialize_dense_with_limit(&self, max_qubits: usize) -> Result<ComplexMatrix> {
        if self.n_qubits > max_qubits {
            return Err(QsqError::SizeGuard {
                qubits: self.n_qubits,
                limit: max_qubits,
            });
        }
        let dim = self.dim();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for b in 0..dim {
            for t in &self.terms {
                let (image, amp) = t.apply(b);
                m[(image, b)] += amp;
            }
        }
        Ok(m)
    }

    /// Splits the basis into the connected components of the Hamiltonian's
    /// sparsity graph; `H` is block diagonal over them.
    pub fn invariant_blocks(&self) -> Vec<Vec<usize>> {
        let dim = self.dim();
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for b in 0..dim {
            for &image in self.column(b).keys() {
                let (ra, rb) = (find(&mut parent, b), find(&mut parent, image));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for b in 0..dim {
            let r = find(&mut parent, b);
            groups.entry(r).or_default().push(b);
        }
        groups.into_values().collect()
    }

    pub fn fingerprint(&self) -> String {
        let mut s = format!("{}x{}:", self.rows, self.cols);
        for t in &self.terms {
            s.push_str(&t.to_string());
            s.push(';');
        }
        s
    }
}

/// One diagonalized invariant block.
#[derive(Debug, Clone)]
pub struct SpectralBlock {
    /// Computational basis indices spanned by the block, ascending.
    pub basis: Vec<usize>,
    pub eigen: HermitianEigensystem,
}

/// Full eigendecomposition of a Hamiltonian, stored block-wise.
///
/// Eigenvector `m` (in ascending energy order) is column `index[m].1` of block
/// `index[m].0`, embedded into the full space on that block's basis.
#[derive(Debug, Clone)]
pub struct SpectralData {
    dim: usize,
    dt: f64,
    h_norm: f64,
    energies: Vec<f64>,
    index: Vec<(usize, usize)>,
    blocks: Vec<SpectralBlock>,
    fingerprint: String,
}

pub fn spectral_decompose(h: &Hamiltonian, dt: Option<f64>) -> Result<SpectralData> {
    let blocks: Vec<SpectralBlock> = h
        .invariant_blocks()
        .into_par_iter()
        .map(|basis| {
            let pos: BTreeMap<usize, usize> = basis.iter().enumerate().map(|(i, &b)| (b, i)).collect();
            let k = basis.len();
            let mut m = ComplexMatrix::zeros(k, k);
            for (j, &b) in basis.iter().enumerate() {
                for (image, amp) in h.column(b) {
                    m[(pos[&image], j)] += amp;
                }
            }
            hermitian_eigendecompose(&m).map(|eigen| SpectralBlock { basis, eigen })
        })
        .collect::<Result<_>>()?;

    let mut entries: Vec<(f64, usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(bi, b)| b.eigen.eigenvalues.iter().enumerate().map(move |(k, &e)| (e, bi, k)))
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let energies: Vec<f64> = entries.iter().map(|e| e.0).collect();
    let index: Vec<(usize, usize)> = entries.iter().map(|e| (e.1, e.2)).collect();
    let h_norm = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));

    let max_dt = if h_norm > 0.0 { PI / h_norm } else { f64::INFINITY };
    let dt = match dt {
        Some(dt) => {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(QsqError::InvalidParameter(format!("dt must be positive, got {dt}")));
            }
            if dt > max_dt * (1.0 + 1e-12) {
                return Err(QsqError::InvalidParameter(format!(
                    "dt = {dt} exceeds pi/||H|| = {max_dt}"
                )));
            }
            dt
        }
        None if h_norm > 0.0 => max_dt,
        None => 1.0,
    };

    Ok(SpectralData {
        dim: h.dim(),
        dt,
        h_norm,
        energies,
        index,
        blocks,
        fingerprint: h.fingerprint(),
    })
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spectral norm, `max_j |E_j|`.
    pub fn h_norm(&self) -> f64 {
        self.h_norm
    }

    /// Ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn blocks(&self) -> &[SpectralBlock] {
        &self.blocks
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Eigenvalues `zeta_j = exp(-i E_j dt)` of the time-evolution unitary.
    pub fn eigenphases(&self) -> Vec<Complex64> {
        self.energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * self.dt))
            .collect()
    }

    /// Overlaps `<v_m|psi>` in ascending energy order.
    pub fn amplitudes(&self, psi: &StateVector) -> Result<Vec<Complex64>> {
        let amps = psi.amplitudes();
        if amps.len() != self.dim {
            return Err(QsqError::DimensionMismatch {
                expected: self.dim,
                actual: amps.len(),
            });
        }
        Ok(self
            .index
            .iter()
            .map(|&(bi, k)| {
                let block = &self.blocks[bi];
                let v = block.eigen.eigenvectors.column(k);
                block
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(i, &b)| v[i].conj() * amps[b])
                    .sum()
            })
            .collect())
    }

    /// Eigenvector `m` embedded in the full space.
    pub fn eigenvector(&self, m: usize) -> DVector<Complex64> {
        let (bi, k) = self.index[m];
        let block = &self.blocks[bi];
        let mut v = DVector::zeros(self.dim);
        for (i, &b) in block.basis.iter().enumerate() {
            v[b] = block.eigen.eigenvectors[(i, k)];
        }
        v
    }

    /// `V diag(E) V^H`; only sensible for small systems.
    pub fn reconstruct_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for block in &self.blocks {
            let v = &block.eigen.eigenvectors;
            let lam = ComplexMatrix::from_diagonal(&block.eigen.eigenvalues.map(|e| Complex64::new(e, 0.0)));
            let local = v * lam * v.adjoint();
            for (i, &bi) in block.basis.iter().enumerate() {
                for (j, &bj) in block.basis.iter().enumerate() {
                    m[(bi, bj)] = local[(i, j)];
                }
            }
        }
        m
    }
}
