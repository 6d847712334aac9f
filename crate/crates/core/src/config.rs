//! Experiment configuration: a plain `key = value` file with `#` comments.
//!
//! Lists are comma separated. Integer lists also accept inclusive ranges such
//! as `1..12`. Every value is checked by [`ExperimentConfig::validate`] before
//! any spectral work starts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::FitPoints;
use crate::error::{QsqError, Result};
use crate::pauli::{ModelParams, MAX_QUBITS};
use crate::state::StateSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub state: StateSpec,
    /// Krylov dimensions swept by every experiment.
    pub dims: Vec<usize>,
    /// Fixed regularization floor; unset uses the noise-aware default.
    pub eta: Option<f64>,
    pub renormalize: bool,
    pub merge_degenerate: bool,
    pub seed: u64,
    /// Random polynomials or noise draws per point.
    pub trials: usize,
    /// Laurent degrees for the exactness sweep.
    pub degrees: Vec<usize>,
    /// Power of the monomial in the noise sweep.
    pub power: i64,
    pub sigmas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Inverse temperature of the method comparison.
    pub compare_beta: f64,
    pub fit_points: FitPoints,
    pub chi: f64,
    /// Frequency window; unset bounds pad the spectrum by one unit.
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_points: usize,
    /// Dimensions with a full Green's function curve on disk.
    pub curve_dims: Vec<usize>,
    pub max_qubits: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelParams::default(),
            state: StateSpec::Antiferromagnet,
            dims: (1..=12).collect(),
            eta: None,
            renormalize: false,
            merge_degenerate: false,
            seed: 0,
            trials: 10,
            degrees: vec![1, 2, 4, 6],
            power: 5,
            sigmas: vec![0.0, 1e-8, 1e-6, 1e-4],
            betas: vec![0.5, 1.0],
            compare_beta: 1.0,
            fit_points: FitPoints::AllEigenvalues,
            chi: 0.1,
            omega_min: None,
            omega_max: None,
            omega_points: 2001,
            curve_dims: vec![4, 8, 12],
            max_qubits: MAX_QUBITS,
            out: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> QsqError {
    QsqError::Config(format!("{key} = {value}: {why}"))
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn float_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| scalar(key, v.trim())).collect()
}

fn usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim) {
        if let Some((a, b)) = item.split_once("..") {
            let a: usize = scalar(key, a.trim())?;
            let b: usize = scalar(key, b.trim().trim_start_matches('='))?;
            if b < a {
                return Err(bad(key, value, "empty range"));
            }
            out.extend(a..=b);
        } else {
            out.push(scalar(key, item)?);
        }
    }
    Ok(out)
}

fn optional_float(key: &str, value: &str) -> Result<Option<f64>> {
    if value.eq_ignore_ascii_case("auto") || value.is_empty() {
        Ok(None)
    } else {
        scalar(key, value).map(Some)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| QsqError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates a config, starting from the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| QsqError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(QsqError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Assigns a single key; the result is not validated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rows" => self.model.rows = scalar(key, value)?,
            "cols" => self.model.cols = scalar(key, value)?,
            "h" => self.model.h = scalar(key, value)?,
            "j1" => self.model.j1 = scalar(key, value)?,
            "j2" => self.model.j2 = scalar(key, value)?,
            "j3" => self.model.j3 = scalar(key, value)?,
            "dt" => self.model.dt = optional_float(key, value)?,
            "state" => self.state = scalar(key, value)?,
            "dims" => self.dims = usize_list(key, value)?,
            "eta" => self.eta = optional_float(key, value)?,
            "renormalize" => self.renormalize = scalar(key, value)?,
            "merge_degenerate" => self.merge_degenerate = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "degrees" => self.degrees = usize_list(key, value)?,
            "power" => self.power = scalar(key, value)?,
            "sigmas" => self.sigmas = float_list(key, value)?,
            "betas" => self.betas = float_list(key, value)?,
            "compare_beta" => self.compare_beta = scalar(key, value)?,
            "fit_points" => {
                self.fit_points = match value {
                    "all-eigenvalues" => FitPoints::AllEigenvalues,
                    "state-support" => FitPoints::StateSupport,
                    _ => return Err(bad(key, value, "expected all-eigenvalues or state-support")),
                }
            }
            "chi" => self.chi = scalar(key, value)?,
            "omega_min" => self.omega_min = optional_float(key, value)?,
            "omega_max" => self.omega_max = optional_float(key, value)?,
            "omega_points" => self.omega_points = scalar(key, value)?,
            "curve_dims" => self.curve_dims = usize_list(key, value)?,
            "max_qubits" => self.max_qubits = scalar(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(QsqError::Config(format!("unknown key {key}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(QsqError::Config(msg));
        let m = &self.model;
        if m.rows == 0 || m.cols == 0 {
            return err("rows and cols must be at least 1".into());
        }
        if self.max_qubits == 0 || self.max_qubits > MAX_QUBITS {
            return err(format!("max_qubits must lie in 1..={MAX_QUBITS}"));
        }
        if m.rows * m.cols > self.max_qubits {
            return err(format!(
                "{}x{} lattice exceeds max_qubits = {}",
                m.rows, m.cols, self.max_qubits
            ));
        }
        for (name, v) in [("h", m.h), ("j1", m.j1), ("j2", m.j2), ("j3", m.j3)] {
            if !v.is_finite() {
                return err(format!("{name} must be finite"));
            }
        }
        if let Some(dt) = m.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return err("dt must be positive".into());
            }
        }
        if let StateSpec::Basis(bits) = &self.state {
            if bits.len() != m.rows * m.cols {
                return err(format!("basis state {bits} does not have {} qubits", m.rows * m.cols));
            }
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return err("dims must be a nonempty list of positive integers".into());
        }
        if self.curve_dims.contains(&0) {
            return err("curve_dims must be positive".into());
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return err("eta must be positive".into());
            }
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        if self.sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return err("sigmas must be finite and nonnegative".into());
        }
        if self.betas.iter().chain([&self.compare_beta]).any(|b| !(*b >= 0.0 && b.is_finite())) {
            return err("betas must be finite and nonnegative".into());
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return err("chi must be positive".into());
        }
        if let (Some(lo), Some(hi)) = (self.omega_min, self.omega_max) {
            if !(lo < hi) {
                return err("omega_min must be below omega_max".into());
            }
        }
        if [self.omega_min, self.omega_max].iter().flatten().any(|w| !w.is_finite()) {
            return err("omega bounds must be finite".into());
        }
        if self.omega_points < 2 {
            return err("omega_points must be at least 2".into());
        }
        Ok(())
    }

    pub fn max_dim(&self) -> usize {
        self.dims.iter().chain(&self.curve_dims).copied().max().unwrap_or(1)
    }
}
