use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use qsq::codec::ReIm;
use qsq::config::ExperimentConfig;
use qsq::experiments::{relative_error, run_in, write_output, Experiment, OutputFormat, Workspace};
use qsq::functions::{node_to_energy, SpectralFunction};
use qsq::rule::{build_rule, RuleOptions};
use qsq::state::{apply_noise, exact_functional, moments, support_counts, MomentSequence, NoiseModel, SupportCounts};
use qsq::{QsqError, Result};

#[derive(Parser)]
#[command(name = "qsq", version, about = "Szego quadrature for spectral functions from Krylov moments")]
struct Cli {
    /// key = value config file; defaults describe the 2x3 lattice
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for random polynomials, states and noise
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; without it single results go to stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Initial state: antiferromagnet, basis:<bits> or random:<seed>
    #[arg(long, global = true)]
    state: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize the Hamiltonian and the initial state's spectral weights
    Model,
    /// Print the moments X_0..X_d
    Moments {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_negative_numbers = true)]
        noise_sigma: Option<f64>,
    },
    /// Build a quadrature rule
    Rule(RuleArgs),
    /// Compare a rule estimate of <psi|f(U)|psi> with the exact value
    Evaluate {
        /// laurent:<file.json>, monomial:<p>, gibbs:beta=<b> or greens:omega=<w>,chi=<c>
        #[arg(long)]
        function: String,
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Run a named experiment and write its dataset
    Experiment {
        /// laurent-exactness, noisy-monomial, gibbs-sweep, gibbs-compare, greens-curve or greens-l1
        name: String,
    },
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long)]
    dim: usize,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Add Gaussian noise of this size to the moments and regularize for it
    #[arg(long, allow_negative_numbers = true)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    renormalize: bool,
    #[arg(long)]
    merge_degenerate: bool,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(state) = &cli.state {
        cfg.set("state", state)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Either a table or a JSON document.
struct Emit {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: serde_json::Value,
}

fn emit(cli: &Cli, e: Emit) -> Result<()> {
    let bytes = match cli.format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(&e.json)?;
            v.push(b'\n');
            v
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&e.header)?;
            for row in &e.rows {
                w.write_record(row)?;
            }
            w.into_inner().map_err(|e| QsqError::Io(e.into_error()))?
        }
    };
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let ext = match cli.format {
                Format::Csv => "csv",
                Format::Json => "json",
            };
            let path = dir.join(format!("{}.{ext}", e.name));
            fs::write(&path, bytes)?;
            println!("{}", path.display());
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn noisy_moments(ws: &Workspace, d: usize, sigma: Option<f64>) -> Result<MomentSequence> {
    let m = moments(&ws.spectrum, &ws.psi, d)?;
    match sigma {
        Some(sigma) => apply_noise(
            &m,
            NoiseModel {
                sigma,
                seed: ws.config.seed,
            },
        ),
        None => Ok(m),
    }
}

fn rule_options(args: &RuleArgs) -> RuleOptions {
    RuleOptions {
        eta: args.eta,
        noise_sigma: args.noise_sigma,
        renormalize: args.renormalize,
        merge_degenerate: args.merge_degenerate,
    }
}

#[derive(Serialize)]
struct ModelSummary {
    rows: usize,
    cols: usize,
    n_qubits: usize,
    dim: usize,
    n_terms: usize,
    n_blocks: usize,
    h_norm: f64,
    dt: f64,
    energy_min: f64,
    energy_max: f64,
    state: String,
    /// Counted at probability above 1e-12 and 99.9% of the mass.
    support: SupportCounts,
    fingerprint: String,
}

fn cmd_model(cli: &Cli, ws: &Workspace) -> Result<()> {
    let s = &ws.spectrum;
    let probs: Vec<f64> = s.amplitudes(&ws.psi)?.iter().map(|g| g.norm_sqr()).collect();
    let summary = ModelSummary {
        rows: ws.hamiltonian.rows,
        cols: ws.hamiltonian.cols,
        n_qubits: ws.hamiltonian.n_qubits,
        dim: s.dim(),
        n_terms: ws.hamiltonian.terms.len(),
        n_blocks: s.blocks().len(),
        h_norm: s.h_norm(),
        dt: s.dt(),
        energy_min: s.energies().first().copied().unwrap_or(0.0),
        energy_max: s.energies().last().copied().unwrap_or(0.0),
        state: ws.config.state.to_string(),
        support: support_counts(s, &ws.psi, 1e-12, 0.999, 1e-8)?,
        fingerprint: s.fingerprint().to_string(),
    };
    let rows = s
        .energies()
        .iter()
        .zip(&probs)
        .enumerate()
        .map(|(i, (e, p))| vec![i.to_string(), format!("{e:e}"), format!("{p:e}")])
        .collect();
    emit(
        cli,
        Emit {
            name: "model",
            header: vec!["index", "energy", "probability"],
            rows,
            json: serde_json::to_value(&summary)?,
        },
    )
}

fn cmd_moments(cli: &Cli, ws: &Workspace, dim: usize, sigma: Option<f64>) -> Result<()> {
    let m = noisy_moments(ws, dim, sigma)?;
    let rows = m
        .moments
        .iter()
        .enumerate()
        .map(|(j, x)| vec![j.to_string(), format!("{:e}", x.re), format!("{:e}", x.im)])
        .collect();
    emit(
        cli,
        Emit {
            name: "moments",
            header: vec!["j", "re", "im"],
            rows,
            json: serde_json::to_value(&m)?,
        },
    )
}

fn cmd_rule(cli: &Cli, ws: &Workspace, args: &RuleArgs) -> Result<()> {
    let m = noisy_moments(ws, args.dim, args.noise_sigma)?;
    let rule = build_rule(&m, args.dim, &rule_options(args))?;
    if rule.diagnostics.near_branch_cut {
        eprintln!("warning: a node lies near arg = -pi; its energy may carry the wrong sign");
    }
    let rows = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(z, w)| {
            vec![
                format!("{:e}", z.re),
                format!("{:e}", z.im),
                format!("{:e}", node_to_energy(*z, rule.dt)),
                format!("{w:e}"),
            ]
        })
        .collect();
    emit(
        cli,
        Emit {
            name: "rule",
            header: vec!["node_re", "node_im", "energy", "weight"],
            rows,
            json: serde_json::to_value(&rule)?,
        },
    )
}

#[derive(Serialize)]
struct Evaluation {
    function: String,
    dim: usize,
    approx: ReIm,
    exact: ReIm,
    rel_error: f64,
}

fn reim(z: Complex64) -> ReIm {
    ReIm { re: z.re, im: z.im }
}

fn cmd_evaluate(cli: &Cli, ws: &Workspace, function: &str, args: &RuleArgs) -> Result<()> {
    let f = SpectralFunction::parse(function, ws.spectrum.dt())?;
    let m = noisy_moments(ws, args.dim, args.noise_sigma)?;
    let rule = build_rule(&m, args.dim, &rule_options(args))?;
    let approx = rule.apply(&f)?;
    let exact = exact_functional(&ws.spectrum, &ws.psi, &ws.psi, &f)?;
    let ev = Evaluation {
        function: function.to_string(),
        dim: args.dim,
        approx: reim(approx),
        exact: reim(exact),
        rel_error: relative_error(approx, exact),
    };
    let row = vec![
        ev.function.clone(),
        ev.dim.to_string(),
        format!("{:e}", approx.re),
        format!("{:e}", approx.im),
        format!("{:e}", exact.re),
        format!("{:e}", exact.im),
        format!("{:e}", ev.rel_error),
    ];
    emit(
        cli,
        Emit {
            name: "evaluate",
            header: vec!["function", "dim", "re_approx", "im_approx", "re_exact", "im_exact", "rel_error"],
            rows: vec![row],
            json: serde_json::to_value(&ev)?,
        },
    )
}

fn cmd_experiment(cli: &Cli, cfg: &ExperimentConfig, name: &str) -> Result<()> {
    let exp: Experiment = name.parse()?;
    let ws = Workspace::new(cfg)?;
    let out = run_in(exp, &ws)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    for path in write_output(&out, Path::new(&cfg.out), format)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if let Command::Experiment { name } = &cli.command {
        return cmd_experiment(cli, &cfg, name);
    }
    let ws = Workspace::new(&cfg)?;
    match &cli.command {
        Command::Model => cmd_model(cli, &ws),
        Command::Moments { dim, noise_sigma } => cmd_moments(cli, &ws, *dim, *noise_sigma),
        Command::Rule(args) => cmd_rule(cli, &ws, args),
        Command::Evaluate { function, rule } => cmd_evaluate(cli, &ws, function, rule),
        Command::Experiment { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}
