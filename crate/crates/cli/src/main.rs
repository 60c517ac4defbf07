//! `torus-ma`: solve, sample and verify from the command line.
//!
//! Every subcommand reads its parameters from flags and, optionally, from a
//! flat JSON object given with `--config` (keys are the flag names with `_`
//! in place of `-`). Flags win over the file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use torus_ma::ctransform::{c_gradient, ma_measure};
use torus_ma::ensemble::{Background, EnsembleSpec};
use torus_ma::sampler::{
    marginal_phi_exact, mcmc_sample, mean_empirical, transport_potential_estimate, ChainParams,
};
use torus_ma::solver::{gamma_density, minimize_f};
use torus_ma::torus::{fmt17, DiscreteMeasure, GridField};
use torus_ma::transport::rate_function;
use torus_ma::verify::{run_suite, Suite, VerifyOptions};
use torus_ma::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_SAMPLER_WARNING: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser)]
#[command(
    name = "torus-ma",
    version,
    about = "Real Monge-Ampère equations on the flat torus"
)]
struct Cli {
    /// JSON object of parameters; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize F and write φ*, MA(φ*) and the solve report.
    Solve(SolveArgs),
    /// Run Metropolis chains for the permanental ensemble.
    Sample(SampleArgs),
    /// Finite-N potentials: the exact marginal or the transport estimate.
    Potential(PotentialArgs),
    /// The grid c-gradient of a potential and its pushforward MA measure.
    TransportMap(TransportMapArgs),
    /// Run the numerical verification suites.
    Verify(VerifyArgs),
    /// Rate function of a grid measure relative to the solver's MA(φ*).
    Rate(RateArgs),
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    /// uniform, gamma, cosine, or a grid CSV of densities.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    /// Grid CSV of a starting potential.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    burn_in: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    thin: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    chains: Option<usize>,
    /// Resolution of mean_empirical.csv.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    /// Treat a sampler warning as an error (exit 4).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    strict: bool,
}

#[derive(Args, Serialize)]
struct PotentialArgs {
    /// marginal (exact first-marginal potential) or transport (both log-integral readings).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

#[derive(Args, Serialize)]
struct TransportMapArgs {
    /// Grid CSV of the potential; without it the potential is solved for.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    suite: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kmax: Option<usize>,
}

#[derive(Args, Serialize)]
struct RateArgs {
    /// Grid CSV of the density of μ.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    mu0: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
}

// ---------------------------------------------------------------- resolved

fn default_mu0() -> String {
    "uniform".into()
}
fn default_grid() -> usize {
    256
}
fn default_dim() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    500
}

#[derive(Deserialize)]
struct SolveParams {
    beta: f64,
    #[serde(default = "default_mu0")]
    mu0: String,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    init: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SampleParams {
    k: usize,
    beta: f64,
    #[serde(default = "default_mu0")]
    mu0: String,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_steps")]
    steps: usize,
    burn_in: Option<usize>,
    thin: Option<usize>,
    sigma: Option<f64>,
    #[serde(default = "default_chains")]
    chains: usize,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    strict: bool,
}

fn default_steps() -> usize {
    100_000
}
fn default_chains() -> usize {
    4
}

#[derive(Deserialize)]
struct PotentialParams {
    #[serde(default = "default_mode")]
    mode: String,
    k: usize,
    beta: Option<f64>,
    #[serde(default = "default_mu0")]
    mu0: String,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_potential_grid")]
    grid: usize,
}

fn default_mode() -> String {
    "marginal".into()
}
fn default_potential_grid() -> usize {
    64
}

#[derive(Deserialize)]
struct TransportMapParams {
    phi: Option<PathBuf>,
    beta: Option<f64>,
    #[serde(default = "default_mu0")]
    mu0: String,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
struct VerifyParams {
    #[serde(default = "default_suite")]
    suite: String,
    #[serde(default = "default_kmax")]
    kmax: usize,
}

fn default_suite() -> String {
    "all".into()
}
fn default_kmax() -> usize {
    64
}

#[derive(Deserialize)]
struct RateParams {
    mu: PathBuf,
    beta: f64,
    #[serde(default = "default_mu0")]
    mu0: String,
    /// Defaults to the resolution of `mu`.
    grid: Option<usize>,
}

/// A command with its merged parameters.
struct RunConfig {
    params: Map<String, Value>,
    output_dir: PathBuf,
    seed: u64,
    /// Directory relative file references in the config resolve against.
    base: PathBuf,
}

impl RunConfig {
    fn typed<T: DeserializeOwned>(&self) -> Result<T, Failure> {
        serde_json::from_value(Value::Object(self.params.clone()))
            .map_err(|e| Failure::Config(format!("invalid parameters: {e}")))
    }

    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.output_dir.join(name);
        let f = File::create(&path)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| Failure::Runtime(format!("writing {name}: {e}")))
    }

    fn write_grid(&self, name: &str, g: &GridField<f64>) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        g.write_csv(&mut w)?;
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))
    }

    fn write_json<S: Serialize>(&self, name: &str, v: &S) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(v).expect("serializable report");
        self.write_text(name, &text)
    }
}

enum Failure {
    Config(String),
    NonConvergence(String),
    SamplerWarning(String),
    Verify(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NewtonDivergence { .. } => Failure::NonConvergence(e.to_string()),
            Error::NonFinite { .. } | Error::EmptySampleSet | Error::NegativeDeterminant { .. } => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn build_config(cli: &Cli, flags: Value) -> Result<RunConfig, Failure> {
    let (mut params, base) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            let Value::Object(m) = v else {
                return Err(Failure::Config(
                    "the config file must hold a JSON object".into(),
                ));
            };
            let base = path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            (m, base)
        }
        None => (Map::new(), PathBuf::from(".")),
    };
    if let Value::Object(f) = flags {
        params.extend(f);
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => match params.get("seed") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| Failure::Config("seed must be a nonnegative integer".into()))?,
            None => 0,
        },
    };
    let output_dir = match &cli.out {
        Some(p) => p.clone(),
        None => match params.get("out") {
            Some(Value::String(s)) => base.join(s),
            Some(_) => return Err(Failure::Config("out must be a string".into())),
            None => PathBuf::from("."),
        },
    };
    std::fs::create_dir_all(&output_dir)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", output_dir.display())))?;
    Ok(RunConfig {
        params,
        output_dir,
        seed,
        base,
    })
}

fn check_grid(dim: usize, grid: usize) -> Result<(), Failure> {
    if !(1..=2).contains(&dim) {
        return Err(Failure::Config(format!("dim must be 1 or 2, got {dim}")));
    }
    if grid < 2 {
        return Err(Failure::Config(format!(
            "grid must be at least 2, got {grid}"
        )));
    }
    Ok(())
}

/// Background measure by name or from a grid CSV of densities.
fn background_measure(
    cfg: &RunConfig,
    name: &str,
    dim: usize,
    res: usize,
) -> Result<DiscreteMeasure<f64>, Failure> {
    let m = match name {
        "uniform" => DiscreteMeasure::uniform_grid(dim, res)?,
        "gamma" => gamma_density(dim, res)?,
        "cosine" => {
            DiscreteMeasure::grid_normalized(GridField::from_fn(dim, res, |x: &[f64]| {
                1.0 + 0.5 * (2.0 * std::f64::consts::PI * x[0]).cos()
            })?)?
        }
        path => {
            let p = cfg.path(Path::new(path));
            if !p.exists() {
                return Err(Failure::Config(format!(
                    "mu0 {path:?} is neither uniform, gamma, cosine nor an existing file"
                )));
            }
            let g = GridField::<f64>::load(&p)?;
            if g.dim() != dim {
                return Err(Failure::Config(format!(
                    "{path}: dimension {} but dim = {dim}",
                    g.dim()
                )));
            }
            if g.res() != res {
                return Err(Failure::Config(format!(
                    "{path}: resolution {} but grid = {res}",
                    g.res()
                )));
            }
            DiscreteMeasure::grid_normalized(g)?
        }
    };
    Ok(m)
}

fn background(
    cfg: &RunConfig,
    name: &str,
    dim: usize,
    res: usize,
) -> Result<Background<f64>, Failure> {
    if name == "uniform" {
        Ok(Background::Uniform)
    } else {
        Ok(Background::from_measure(&background_measure(
            cfg, name, dim, res,
        )?)?)
    }
}

// ---------------------------------------------------------------- commands

#[derive(Serialize)]
struct SolveReport<'a> {
    beta: f64,
    mu0: &'a str,
    dim: usize,
    grid: usize,
    tol: f64,
    #[serde(flatten)]
    result: &'a torus_ma::SolveResultF64,
}

fn cmd_solve(cfg: &RunConfig) -> Result<(), Failure> {
    let p: SolveParams = cfg.typed()?;
    check_grid(p.dim, p.grid)?;
    if p.beta == 0.0 || !p.beta.is_finite() {
        return Err(Failure::Config("beta must be finite and nonzero".into()));
    }
    let mu0 = background_measure(cfg, &p.mu0, p.dim, p.grid)?;
    let init = match &p.init {
        Some(path) => Some(GridField::<f64>::load(cfg.path(path))?),
        None => None,
    };
    let r = minimize_f(p.beta, &mu0, p.grid, p.tol, p.max_iter, init.as_ref())?;
    cfg.write_grid("phi_star.csv", &r.phi)?;
    cfg.write_grid("ma_star.csv", r.ma_measure()?.grid_or_err()?)?;
    cfg.write_json(
        "solve_result.json",
        &SolveReport {
            beta: p.beta,
            mu0: &p.mu0,
            dim: p.dim,
            grid: p.grid,
            tol: p.tol,
            result: &r,
        },
    )?;
    if r.converged {
        Ok(())
    } else {
        Err(Failure::NonConvergence(format!(
            "no convergence after {} iterations (residual {})",
            r.iterations,
            fmt17(r.residual)
        )))
    }
}

#[derive(Serialize)]
struct SampleReport<'a> {
    #[serde(flatten)]
    summary: torus_ma::sampler::SampleSummary,
    k: usize,
    beta: f64,
    mu0: &'a str,
    dim: usize,
    n_chains: usize,
    n_steps: usize,
    burn_in: usize,
    thin: usize,
    proposal_sigma: f64,
}

fn cmd_sample(cfg: &RunConfig) -> Result<(), Failure> {
    let p: SampleParams = cfg.typed()?;
    check_grid(p.dim, p.grid)?;
    let bg = background(cfg, &p.mu0, p.dim, p.grid)?;
    let spec = EnsembleSpec::lattice(p.dim, p.k, p.beta, bg)?;
    let params = ChainParams::new(
        p.steps,
        p.burn_in.unwrap_or(p.steps / 10),
        p.thin.unwrap_or(p.k.max(1)),
        p.sigma.unwrap_or_else(|| ChainParams::default_sigma(p.k)),
        cfg.seed,
        p.chains,
    )?;
    let s = mcmc_sample(&spec, &params)?;
    let mut w = cfg.create("samples.csv")?;
    s.write_csv(&mut w)?;
    w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    let me = mean_empirical(&s, p.grid)?;
    cfg.write_grid("mean_empirical.csv", me.grid_or_err()?)?;
    cfg.write_json(
        "summary.json",
        &SampleReport {
            summary: s.summary(),
            k: p.k,
            beta: p.beta,
            mu0: &p.mu0,
            dim: p.dim,
            n_chains: params.n_chains,
            n_steps: params.n_steps,
            burn_in: params.burn_in,
            thin: params.thin,
            proposal_sigma: params.proposal_sigma,
        },
    )?;
    match (&s.warning, p.strict) {
        (Some(w), true) => Err(Failure::SamplerWarning(w.clone())),
        (Some(w), false) => {
            eprintln!("warning: {w}");
            Ok(())
        }
        (None, _) => Ok(()),
    }
}

fn cmd_potential(cfg: &RunConfig) -> Result<(), Failure> {
    let p: PotentialParams = cfg.typed()?;
    check_grid(p.dim, p.grid)?;
    let bg = background(cfg, &p.mu0, p.dim, p.grid)?;
    match p.mode.as_str() {
        "marginal" => {
            let beta = p
                .beta
                .ok_or_else(|| Failure::Config("marginal mode needs beta".into()))?;
            let spec = EnsembleSpec::lattice(p.dim, p.k, beta, bg)?;
            cfg.write_grid("phi_n.csv", &marginal_phi_exact(&spec, p.grid)?)
        }
        "transport" => {
            // the transport potential is the pure permanental case
            let spec = EnsembleSpec::lattice(p.dim, p.k, p.k as f64, bg)?;
            let est = transport_potential_estimate(&spec, p.grid)?;
            cfg.write_grid("phi_log_integral.csv", &est.log_integral)?;
            cfg.write_grid("phi_per_particle.csv", &est.per_particle)
        }
        other => Err(Failure::Config(format!(
            "unknown mode {other:?} (expected marginal or transport)"
        ))),
    }
}

#[derive(Serialize)]
struct MapSummary {
    dim: usize,
    grid: usize,
    defined_fraction: f64,
}

fn cmd_transport_map(cfg: &RunConfig) -> Result<(), Failure> {
    let p: TransportMapParams = cfg.typed()?;
    let phi = match (&p.phi, p.beta) {
        (Some(path), _) => GridField::<f64>::load(cfg.path(path))?,
        (None, Some(beta)) => {
            check_grid(p.dim, p.grid)?;
            let mu0 = background_measure(cfg, &p.mu0, p.dim, p.grid)?;
            let r = minimize_f(beta, &mu0, p.grid, default_tol(), default_max_iter(), None)?;
            if !r.converged {
                return Err(Failure::NonConvergence("solve did not converge".into()));
            }
            r.phi
        }
        (None, None) => {
            return Err(Failure::Config(
                "transport-map needs --phi or --beta to solve for one".into(),
            ))
        }
    };
    let t = c_gradient(&phi);
    let mut w = cfg.create("transport_map.csv")?;
    let header: Vec<String> = std::iter::once("node".to_string())
        .chain((1..=t.dim).map(|a| format!("x{a}")))
        .chain((1..=t.dim).map(|a| format!("y{a}")))
        .chain(["target".to_string(), "defined".to_string()])
        .collect();
    let io = |e: std::io::Error| Failure::Runtime(e.to_string());
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, y) in t.map.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(phi.node_coords(i).into_iter().map(fmt17));
        row.extend(y.coords().iter().map(|&c| fmt17(c)));
        row.push(t.target[i].to_string());
        row.push(u8::from(t.defined_mask[i]).to_string());
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)?;
    cfg.write_grid("ma_measure.csv", ma_measure(&phi).grid_or_err()?)?;
    cfg.write_json(
        "transport_map.json",
        &MapSummary {
            dim: t.dim,
            grid: t.res,
            defined_fraction: t.defined_fraction(),
        },
    )
}

fn cmd_verify(cfg: &RunConfig) -> Result<(), Failure> {
    let p: VerifyParams = cfg.typed()?;
    let suite: Suite = p.suite.parse()?;
    let opts = VerifyOptions {
        seed: cfg.seed,
        kmax: p.kmax,
        ..VerifyOptions::default()
    };
    let report = run_suite(suite, &opts)?;
    cfg.write_text("verify_report.json", &report.to_json())?;
    for c in &report.checks {
        println!(
            "{} {}: {:.3e} (tolerance {:.1e})",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    for row in &report.mgf_table {
        println!(
            "mgf φ={} k={}: {} vs ξ(-φ) = {}, gap {:.4e}",
            row.phi,
            row.k,
            fmt17(row.mgf),
            fmt17(row.xi_neg_phi),
            row.gap
        );
    }
    let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}

fn cmd_rate(cfg: &RunConfig) -> Result<(), Failure> {
    let p: RateParams = cfg.typed()?;
    if p.beta == 0.0 || !p.beta.is_finite() {
        return Err(Failure::Config("beta must be finite and nonzero".into()));
    }
    let g = GridField::<f64>::load(cfg.path(&p.mu))?;
    let (dim, res) = (g.dim(), g.res());
    check_grid(dim, res)?;
    if p.grid.is_some_and(|r| r != res) {
        return Err(Failure::Config(format!(
            "mu has resolution {res} but grid = {}",
            p.grid.unwrap_or(res)
        )));
    }
    let mu = DiscreteMeasure::grid_normalized(g)?;
    let mu0 = background_measure(cfg, &p.mu0, dim, res)?;
    let r = minimize_f(p.beta, &mu0, res, default_tol(), default_max_iter(), None)?;
    if !r.converged {
        return Err(Failure::NonConvergence("solve did not converge".into()));
    }
    let report = rate_function(&mu, p.beta, &mu0, &r.ma_measure()?)?;
    cfg.write_json("rate.json", &report)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("TORUS_MA_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(format!("TORUS_MA_THREADS={v:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let flags = match &cli.command {
        Command::Solve(a) => serde_json::to_value(a),
        Command::Sample(a) => serde_json::to_value(a),
        Command::Potential(a) => serde_json::to_value(a),
        Command::TransportMap(a) => serde_json::to_value(a),
        Command::Verify(a) => serde_json::to_value(a),
        Command::Rate(a) => serde_json::to_value(a),
    }
    .expect("flag structs serialize");
    let cfg = build_config(&cli, flags)?;
    match &cli.command {
        Command::Solve(_) => cmd_solve(&cfg),
        Command::Sample(_) => cmd_sample(&cfg),
        Command::Potential(_) => cmd_potential(&cfg),
        Command::TransportMap(_) => cmd_transport_map(&cfg),
        Command::Verify(_) => cmd_verify(&cfg),
        Command::Rate(_) => cmd_rate(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Config(m) => (EXIT_CONFIG, "configuration error", m),
                Failure::NonConvergence(m) => (EXIT_NONCONVERGENCE, "non-convergence", m),
                Failure::SamplerWarning(m) => (EXIT_SAMPLER_WARNING, "sampler warning", m),
                Failure::Verify(m) => (EXIT_VERIFY, "verification failed", m),
                Failure::Runtime(m) => (1, "error", m),
            };
            eprintln!("torus-ma: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}
