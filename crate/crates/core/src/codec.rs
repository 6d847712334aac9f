//! JSON shapes for complex values: `{"re": .., "im": ..}`.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReIm {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ReIm {
    fn from(z: Complex64) -> Self {
        ReIm { re: z.re, im: z.im }
    }
}

impl From<ReIm> for Complex64 {
    fn from(z: ReIm) -> Self {
        Complex64::new(z.re, z.im)
    }
}

pub mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let out: Vec<ReIm> = v.iter().map(|&z| z.into()).collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let v: Vec<ReIm> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(Complex64::from).collect())
    }
}

/// Row-major nested arrays.
pub mod complex_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<ReIm>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)].into()).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows: Vec<Vec<ReIm>> = Vec::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(ComplexMatrix::from_fn(n, m, |i, j| rows[i][j].into()))
    }
}
