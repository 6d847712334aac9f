//! Deterministic datasets for the convergence, noise and comparison studies.
//!
//! Each experiment returns in-memory tables; [`write_output`] serializes them
//! together with a JSON sidecar describing the run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{
    estimate_from_moments, fixed_laurent_bound, fourier_coefficients, optimal_laurent, optimal_laurent_on_support,
    FitPoints,
};
use crate::config::ExperimentConfig;
use crate::error::{QsqError, Result};
use crate::functions::{random_laurent, SpectralFunction};
use crate::krylov::default_eta;
use crate::pauli::{spectral_decompose, Hamiltonian, SpectralData};
use crate::rule::{build_rule, RuleOptions, SzegoRule};
use crate::state::{apply_noise, moments, prepare_state, MomentSequence, NoiseModel, StateVector};

/// Amplitude threshold for the support-restricted optimal fit.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LaurentExactness,
    NoisyMonomial,
    GibbsSweep,
    GibbsCompare,
    GreensCurve,
    GreensL1,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::LaurentExactness,
        Experiment::NoisyMonomial,
        Experiment::GibbsSweep,
        Experiment::GibbsCompare,
        Experiment::GreensCurve,
        Experiment::GreensL1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LaurentExactness => "laurent-exactness",
            Experiment::NoisyMonomial => "noisy-monomial",
            Experiment::GibbsSweep => "gibbs-sweep",
            Experiment::GibbsCompare => "gibbs-compare",
            Experiment::GreensCurve => "greens-curve",
            Experiment::GreensL1 => "greens-l1",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            Experiment::LaurentExactness => &["degree", "dim", "trial", "rel_error"],
            Experiment::NoisyMonomial => &["sigma", "dim", "trial", "rel_error"],
            Experiment::GibbsSweep => &["beta", "dim", "rel_error"],
            Experiment::GibbsCompare => &["dim", "method", "rel_error"],
            Experiment::GreensCurve => &["omega", "re_exact", "im_exact", "re_approx", "im_approx"],
            Experiment::GreensL1 => &["dim", "l1_error"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = QsqError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                QsqError::Config(format!("unknown experiment {s}; expected one of {}", names.join(", ")))
            })
    }
}

/// A CSV cell. Floats print in shortest round-trip exponent form.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:e}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
            Cell::Text(v) => s.serialize_str(v),
        }
    }
}

fn int(v: usize) -> Cell {
    Cell::Int(v as i64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `greens-curve-d8`.
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: impl Into<String>, exp: Experiment) -> Self {
        Table {
            name: name.into(),
            header: exp.header().to_vec(),
            rows: Vec::new(),
        }
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }

    pub fn float(&self, row: usize, col: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(col)?)? {
            Cell::Float(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Text(_) => None,
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.into_inner().map_err(|e| QsqError::Io(e.into_error()))
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let records: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| {
                self.header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| Ok(((*h).to_string(), serde_json::to_value(c)?)))
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        Ok(serde_json::to_vec_pretty(&records)?)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EtaRecord {
    pub sigma: f64,
    pub dim: usize,
    pub eta: f64,
}

/// Everything needed to reproduce a dataset.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Sidecar {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub n_qubits: usize,
    pub dt: f64,
    pub h_norm: f64,
    pub model_fingerprint: String,
    /// Regularization floor used at each (sigma, dim).
    pub eta: Vec<EtaRecord>,
    pub omega_range: Option<(f64, f64)>,
    pub warnings: Vec<String>,
    pub version: &'static str,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub sidecar: Sidecar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = QsqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(QsqError::Config(format!("unknown format {s}; expected csv or json"))),
        }
    }
}

/// Spectral data and initial state shared by all experiments.
pub struct Workspace {
    pub config: ExperimentConfig,
    pub hamiltonian: Hamiltonian,
    pub spectrum: SpectralData,
    pub psi: StateVector,
    /// `|<v_m|psi>|^2` and `e^{-i E_m dt}` over the support of `psi`.
    support: Vec<(f64, Complex64)>,
}

impl Workspace {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let hamiltonian = Hamiltonian::heisenberg_with_limit(&config.model, config.max_qubits)?;
        let psi = prepare_state(&config.state, hamiltonian.n_qubits)?;
        let spectrum = spectral_decompose(&hamiltonian, config.model.dt)?;
        let support = spectrum
            .amplitudes(&psi)?
            .iter()
            .zip(spectrum.eigenphases())
            .map(|(g, z)| (g.norm_sqr(), z))
            .filter(|(p, _)| *p > 0.0)
            .collect();
        Ok(Workspace {
            config: config.clone(),
            hamiltonian,
            spectrum,
            psi,
            support,
        })
    }

    fn options(&self, sigma: f64) -> RuleOptions {
        RuleOptions {
            eta: self.config.eta,
            noise_sigma: (sigma > 0.0).then_some(sigma),
            renormalize: self.config.renormalize,
            merge_degenerate: self.config.merge_degenerate,
        }
    }

    fn eta_for(&self, sigma: f64, d: usize) -> f64 {
        self.config
            .eta
            .unwrap_or_else(|| default_eta((sigma > 0.0).then_some(sigma), d))
    }

    fn exact_moments(&self, d: usize) -> Result<MomentSequence> {
        moments(&self.spectrum, &self.psi, d)
    }

    /// `<psi|f(U)|psi>` from the cached spectral weights.
    pub fn exact(&self, f: &SpectralFunction) -> Result<Complex64> {
        self.support.iter().map(|&(p, z)| Ok(p * f.eval(z)?)).sum()
    }

    /// Frequency window: the configured bounds, or the spectrum padded by one.
    pub fn omega_range(&self) -> (f64, f64) {
        let e = self.spectrum.energies();
        let lo = e.first().copied().unwrap_or(0.0) - 1.0;
        let hi = e.last().copied().unwrap_or(0.0) + 1.0;
        (self.config.omega_min.unwrap_or(lo), self.config.omega_max.unwrap_or(hi))
    }

    pub fn omega_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.omega_range();
        let n = self.config.omega_points;
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    fn sidecar(&self, exp: Experiment, eta: Vec<EtaRecord>, warnings: Vec<String>) -> Sidecar {
        let omega_range = matches!(exp, Experiment::GreensCurve | Experiment::GreensL1).then(|| self.omega_range());
        Sidecar {
            experiment: exp,
            config: self.config.clone(),
            n_qubits: self.hamiltonian.n_qubits,
            dt: self.spectrum.dt(),
            h_norm: self.spectrum.h_norm(),
            model_fingerprint: self.spectrum.fingerprint().to_string(),
            eta,
            omega_range,
            warnings,
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

pub fn relative_error(approx: Complex64, exact: Complex64) -> f64 {
    (approx - exact).norm() / exact.norm()
}

/// Builds and validates the workspace, then runs one experiment.
pub fn run_experiment(exp: Experiment, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let ws = Workspace::new(config)?;
    run_in(exp, &ws)
}

/// Runs an experiment on a prepared workspace.
pub fn run_in(exp: Experiment, ws: &Workspace) -> Result<ExperimentOutput> {
    let mut warnings = Vec::new();
    let dims = &ws.config.dims;
    let noiseless_eta = || dims.iter().map(|&d| EtaRecord { sigma: 0.0, dim: d, eta: ws.eta_for(0.0, d) }).collect();
    let (tables, eta) = match exp {
        Experiment::LaurentExactness => (vec![laurent_exactness(ws, &mut warnings)?], noiseless_eta()),
        Experiment::NoisyMonomial => {
            let eta = ws
                .config
                .sigmas
                .iter()
                .flat_map(|&s| dims.iter().map(move |&d| (s, d)))
                .map(|(s, d)| EtaRecord { sigma: s, dim: d, eta: ws.eta_for(s, d) })
                .collect();
            (vec![noisy_monomial(ws, &mut warnings)?], eta)
        }
        Experiment::GibbsSweep => (vec![gibbs_sweep(ws, &mut warnings)?], noiseless_eta()),
        Experiment::GibbsCompare => (vec![gibbs_compare(ws, &mut warnings)?], noiseless_eta()),
        Experiment::GreensCurve => {
            let eta = ws
                .config
                .curve_dims
                .iter()
                .map(|&d| EtaRecord { sigma: 0.0, dim: d, eta: ws.eta_for(0.0, d) })
                .collect();
            (greens_curve(ws, &mut warnings)?, eta)
        }
        Experiment::GreensL1 => (vec![greens_l1(ws, &mut warnings)?], noiseless_eta()),
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExperimentOutput {
        tables,
        sidecar: ws.sidecar(exp, eta, warnings),
    })
}

fn note_branch_cut(rule: &SzegoRule, what: &str, warnings: &mut Vec<String>) {
    if rule.diagnostics.near_branch_cut {
        warnings.push(format!(
            "{what}: dim {} has a node near arg = -pi; its energy may carry the wrong sign",
            rule.d
        ));
    }
}

/// One rule per dimension from a shared moment sequence.
fn rules_for(ws: &Workspace, m: &MomentSequence, dims: &[usize], sigma: f64) -> Result<Vec<SzegoRule>> {
    let opts = ws.options(sigma);
    dims.par_iter().map(|&d| build_rule(m, d, &opts)).collect()
}

fn laurent_exactness(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Table> {
    let cfg = &ws.config;
    let m = ws.exact_moments(cfg.max_dim())?;
    let rules = rules_for(ws, &m, &cfg.dims, 0.0)?;
    for r in &rules {
        note_branch_cut(r, "laurent-exactness", warnings);
    }
    let points: Vec<(usize, usize)> = cfg
        .degrees
        .iter()
        .flat_map(|&g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let blocks: Vec<Vec<Vec<Cell>>> = points
        .par_iter()
        .map(|&(g, t)| {
            let f = random_laurent(g, cfg.seed.wrapping_add(t as u64));
            let exact = ws.exact(&f)?;
            rules
                .iter()
                .map(|r| {
                    let e = relative_error(r.apply(&f)?, exact);
                    Ok(vec![int(g), int(r.d), int(t), Cell::Float(e)])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("laurent-exactness", Experiment::LaurentExactness);
    table.rows = blocks.into_iter().flatten().collect();
    Ok(table)
}

fn noisy_monomial(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Table> {
    let cfg = &ws.config;
    let f = SpectralFunction::Monomial { power: cfg.power };
    let exact = ws.exact(&f)?;
    let m = ws.exact_moments(cfg.max_dim())?;
    let points: Vec<(f64, usize)> = cfg
        .sigmas
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let blocks: Vec<(Vec<Vec<Cell>>, Vec<String>)> = points
        .par_iter()
        .map(|&(sigma, t)| {
            let noisy = apply_noise(
                &m,
                NoiseModel {
                    sigma,
                    seed: cfg.seed.wrapping_add(t as u64),
                },
            )?;
            let opts = ws.options(sigma);
            let mut rows = Vec::new();
            let mut notes = Vec::new();
            for &d in &cfg.dims {
                let r = build_rule(&noisy, d, &opts)?;
                note_branch_cut(&r, &format!("noisy-monomial sigma {sigma:e} trial {t}"), &mut notes);
                let e = relative_error(r.apply(&f)?, exact);
                rows.push(vec![Cell::Float(sigma), int(d), int(t), Cell::Float(e)]);
            }
            Ok((rows, notes))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("noisy-monomial", Experiment::NoisyMonomial);
    for (rows, notes) in blocks {
        table.rows.extend(rows);
        warnings.extend(notes);
    }
    Ok(table)
}

fn gibbs_sweep(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Table> {
    let cfg = &ws.config;
    let dt = ws.spectrum.dt();
    let m = ws.exact_moments(cfg.max_dim())?;
    let rules = rules_for(ws, &m, &cfg.dims, 0.0)?;
    for r in &rules {
        note_branch_cut(r, "gibbs-sweep", warnings);
    }
    let mut table = Table::new("gibbs-sweep", Experiment::GibbsSweep);
    for &beta in &cfg.betas {
        let f = SpectralFunction::gibbs(beta, dt)?;
        let exact = ws.exact(&f)?;
        for r in &rules {
            let e = relative_error(r.apply(&f)?, exact);
            table.rows.push(vec![Cell::Float(beta), int(r.d), Cell::Float(e)]);
        }
    }
    Ok(table)
}

fn gibbs_compare(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Table> {
    let cfg = &ws.config;
    let (dt, beta) = (ws.spectrum.dt(), cfg.compare_beta);
    let f = SpectralFunction::gibbs(beta, dt)?;
    let exact = ws.exact(&f)?;
    let m = ws.exact_moments(cfg.max_dim())?;
    let rules = rules_for(ws, &m, &cfg.dims, 0.0)?;
    for r in &rules {
        note_branch_cut(r, "gibbs-compare", warnings);
    }
    let blocks: Vec<Vec<Vec<Cell>>> = rules
        .par_iter()
        .map(|r| {
            let d = r.d;
            let qsq = relative_error(r.apply(&f)?, exact);
            let fourier = relative_error(estimate_from_moments(&m, &fourier_coefficients(beta, dt, d)?)?, exact);
            let fixed = fixed_laurent_bound(beta, ws.spectrum.h_norm(), d)?.relative;
            let approx = match cfg.fit_points {
                FitPoints::AllEigenvalues => optimal_laurent(&ws.spectrum, &f, d)?,
                FitPoints::StateSupport => {
                    optimal_laurent_on_support(&ws.spectrum, &ws.psi, &f, d, SUPPORT_THRESHOLD)?
                }
            };
            let optimal = relative_error(estimate_from_moments(&m, &approx)?, exact);
            Ok([("qsq", qsq), ("fourier", fourier), ("fixed_bound", fixed), ("optimal_laurent", optimal)]
                .into_iter()
                .map(|(name, e)| vec![int(d), Cell::Text(name.into()), Cell::Float(e)])
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new("gibbs-compare", Experiment::GibbsCompare);
    table.rows = blocks.into_iter().flatten().collect();
    Ok(table)
}

fn greens_grid(ws: &Workspace, grid: &[f64]) -> Result<Vec<SpectralFunction>> {
    let dt = ws.spectrum.dt();
    grid.iter().map(|&w| SpectralFunction::greens(w, ws.config.chi, dt)).collect()
}

fn greens_exact(ws: &Workspace, fs: &[SpectralFunction]) -> Result<Vec<Complex64>> {
    fs.par_iter().map(|f| ws.exact(f)).collect()
}

fn greens_approx(rule: &SzegoRule, fs: &[SpectralFunction]) -> Result<Vec<Complex64>> {
    fs.par_iter().map(|f| rule.apply(f)).collect()
}

fn greens_curve(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Vec<Table>> {
    let cfg = &ws.config;
    let grid = ws.omega_grid();
    let max = cfg.curve_dims.iter().copied().max().unwrap_or(1);
    let m = ws.exact_moments(max)?;
    let rules = rules_for(ws, &m, &cfg.curve_dims, 0.0)?;
    let fs = greens_grid(ws, &grid)?;
    let exact = greens_exact(ws, &fs)?;
    rules
        .iter()
        .map(|r| {
            note_branch_cut(r, "greens-curve", warnings);
            let mut table = Table::new(format!("greens-curve-d{}", r.d), Experiment::GreensCurve);
            table.rows = grid
                .iter()
                .zip(&exact)
                .zip(greens_approx(r, &fs)?)
                .map(|((&w, exact), approx)| {
                    vec![
                        Cell::Float(w),
                        Cell::Float(exact.re),
                        Cell::Float(exact.im),
                        Cell::Float(approx.re),
                        Cell::Float(approx.im),
                    ]
                })
                .collect();
            Ok(table)
        })
        .collect()
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

fn greens_l1(ws: &Workspace, warnings: &mut Vec<String>) -> Result<Table> {
    let cfg = &ws.config;
    let grid = ws.omega_grid();
    let step = grid[1] - grid[0];
    let m = ws.exact_moments(cfg.max_dim())?;
    let rules = rules_for(ws, &m, &cfg.dims, 0.0)?;
    let fs = greens_grid(ws, &grid)?;
    let exact = greens_exact(ws, &fs)?;
    let mut table = Table::new("greens-l1", Experiment::GreensL1);
    for r in &rules {
        note_branch_cut(r, "greens-l1", warnings);
        let diffs: Vec<f64> = greens_approx(r, &fs)?
            .iter()
            .zip(&exact)
            .map(|(approx, exact)| (approx - exact).norm())
            .collect();
        table.rows.push(vec![int(r.d), Cell::Float(trapezoid(&diffs, step))]);
    }
    Ok(table)
}

/// Writes every table plus `<experiment>.meta.json`; returns the paths written.
pub fn write_output(out: &ExperimentOutput, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for table in &out.tables {
        let (ext, bytes) = match format {
            OutputFormat::Csv => ("csv", table.to_csv()?),
            OutputFormat::Json => ("json", table.to_json()?),
        };
        let path = dir.join(format!("{}.{ext}", table.name));
        fs::write(&path, bytes)?;
        written.push(path);
    }
    let meta = dir.join(format!("{}.meta.json", out.sidecar.experiment));
    fs::write(&meta, serde_json::to_vec_pretty(&out.sidecar)?)?;
    written.push(meta);
    Ok(written)
}
