//! Experiment driver: `solve`, `simulate`, `converge` and `trace` subcommands
//! over a TOML experiment file.

pub mod config;
pub mod error;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use illiquid_core::benchmark::{merton_value, supersolution, DualDensityParams};
use illiquid_core::montecarlo::{convergence_sweep, estimate_expected_utility, write_sweep_csv};
use illiquid_core::rng::derive_seed;
use illiquid_core::{validate_assumptions, PolicySurface, Solution, Solver};
use serde_json::json;

pub use config::{Experiment, ExperimentConfig, LoadedConfig};
pub use error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_K_LIST: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];

#[derive(Debug, Parser)]
#[command(name = "illiquid", version, about = "Optimal investment when trades happen only at random times")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.directory` (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the fixed-point problem; writes the value and policy surfaces and a summary.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the optimal (or a constant) policy and compare with v*.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of paths; overrides `simulation.n_paths`.
        #[arg(long)]
        paths: Option<usize>,
        /// Hold this constant proportion instead of solving.
        #[arg(long)]
        constant_policy: Option<f64>,
    },
    /// Gap to the continuous-trading value as the intensity is scaled by k.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing scales.
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<f64>>,
        /// Record wall-clock seconds per scale (output is then not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// v_m(0, X₀) for m = 0..=m_max next to the upper bound f(0, X₀).
    #[command(alias = "iterate-trace")]
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        m_max: usize,
    },
}

/// Output directory plus the provenance line stamped on every CSV.
struct Artifacts {
    dir: PathBuf,
    header: String,
    sha256: String,
    seed: u64,
}

impl Artifacts {
    fn new(common: &Common, loaded: &LoadedConfig, seed: u64) -> Result<Self, CliError> {
        let dir = output_dir(common, loaded);
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            header: format!("# illiquid {VERSION} config-sha256={} seed={seed}\n", loaded.sha256),
            sha256: loaded.sha256.clone(),
            seed,
        })
    }

    fn csv<F>(&self, name: &str, body: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> illiquid_core::Result<()>,
    {
        let mut bytes = self.header.clone().into_bytes();
        body(&mut bytes)?;
        self.write(name, &bytes)
    }

    fn json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        Ok(path)
    }
}

fn load(common: &Common) -> Result<(LoadedConfig, Experiment), CliError> {
    let loaded = LoadedConfig::read(&common.config)?;
    let mut exp = loaded.config.build()?;
    if let Some(seed) = common.seed {
        exp.seed = seed;
        exp.simulation.seed = seed;
    }
    let report = validate_assumptions(&exp.model, &exp.utility);
    if !report.all_passed() {
        return Err(CliError::Assumption(report.to_string()));
    }
    Ok((loaded, exp))
}

fn format_optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `f(0, X₀)`; unavailable with jumps.
fn upper_bound(exp: &Experiment) -> Option<f64> {
    let dual = DualDensityParams::from_model(&exp.model).ok()?;
    supersolution(&exp.utility, &dual, 0.0, exp.solver.initial_wealth).ok()
}

fn solve(exp: &Experiment) -> Result<(Solver, Solution), CliError> {
    let solver = Solver::new(exp.utility, exp.model.clone(), exp.profile.clone(), exp.solver.clone())?;
    let sol = solver.solve();
    Ok((solver, sol))
}

fn non_convergence(sol: &Solution) -> CliError {
    CliError::NotConverged(format!(
        "value iteration did not converge after {} iterations (last change {:.3e} >= tolerance)",
        sol.iterations, sol.residual
    ))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { common } => run_solve(&common),
        Command::Simulate { common, paths, constant_policy } => run_simulate(&common, paths, constant_policy),
        Command::Converge { common, k_list, timings } => run_converge(&common, k_list, timings),
        Command::Trace { common, m_max } => run_trace(&common, m_max),
    }
}

pub fn run_solve(common: &Common) -> Result<(), CliError> {
    let (loaded, exp) = load(common)?;
    let out = Artifacts::new(common, &loaded, exp.seed)?;
    let (solver, sol) = solve(&exp)?;
    let x0 = exp.solver.initial_wealth;
    let v_star = sol.value_at_start();
    let f0 = upper_bound(&exp);
    let merton = merton_value(&exp.utility, &exp.model, 0.0, x0).ok();

    out.csv("value.csv", |w| sol.value.write_csv(w))?;
    out.csv("policy.csv", |w| sol.policy.write_csv(w))?;
    out.csv("summary.csv", |w| {
        w.extend_from_slice(
            b"v_star,utility_at_x0,iterations,residual,converged,supersolution,merton_value,merton_proportion\n",
        );
        let line = format!(
            "{},{},{},{},{},{},{},{}\n",
            v_star,
            exp.utility.eval(x0),
            sol.iterations,
            sol.residual,
            sol.converged,
            format_optional(f0),
            format_optional(merton.as_ref().map(|m| m.value)),
            format_optional(merton.as_ref().map(|m| m.proportion_at(0.0))),
        );
        w.extend_from_slice(line.as_bytes());
        Ok(())
    })?;
    let grid = solver.time_grid();
    out.json(
        "value.json",
        &json!({
            "artifact": format!("illiquid {VERSION}"),
            "config_sha256": out.sha256,
            "seed": out.seed,
            "utility": exp.utility,
            "intensity": exp.profile.parameters(),
            "warp": "w = 1 - exp(-Lambda_ref(t)), Lambda_ref the cumulative intensity with kappa = 1 and no scaling",
            "time_nodes": grid.intervals() + 1,
            "representation": exp.solver.representation,
            "solver": exp.solver,
            "iterations": sol.iterations,
            "residual": sol.residual,
            "converged": sol.converged,
        }),
    )?;

    println!("v*(0,X0)      = {v_star}");
    println!("U(X0)         = {}", exp.utility.eval(x0));
    println!("iterations    = {}", sol.iterations);
    println!("residual      = {:.3e}", sol.residual);
    println!("f(0,X0)       = {}", format_optional(f0));
    println!("Merton value  = {}", format_optional(merton.as_ref().map(|m| m.value)));
    println!("outputs in {}", out.dir.display());
    if sol.converged {
        Ok(())
    } else {
        Err(non_convergence(&sol))
    }
}

pub fn run_simulate(common: &Common, paths: Option<usize>, constant_policy: Option<f64>) -> Result<(), CliError> {
    let (loaded, mut exp) = load(common)?;
    if let Some(n) = paths {
        exp.simulation.n_paths = n;
        exp.simulation.validate()?;
    }
    let out = Artifacts::new(common, &loaded, exp.seed)?;
    let (policy, reference, label) = match constant_policy {
        Some(p) if !(0.0..=1.0).contains(&p) => {
            return Err(CliError::field("--constant-policy", "must lie in [0, 1]"));
        }
        Some(p) => (PolicySurface::Constant(p), None, format!("constant({p})")),
        None => {
            let (_, sol) = solve(&exp)?;
            if !sol.converged {
                return Err(non_convergence(&sol));
            }
            let v = sol.value_at_start();
            (sol.policy, Some(v), "optimal".to_string())
        }
    };
    let mut sim = exp.simulation.clone();
    sim.seed = derive_seed(exp.seed, "simulation");
    let result = estimate_expected_utility(&policy, &exp.utility, &exp.model, &exp.profile, &sim)?;
    let verdict = match reference {
        Some(v) if result.consistent_with(v) => "PASS",
        Some(_) => "FAIL",
        None => "n/a",
    };

    out.csv("simulation.csv", |w| result.write_csv(w))?;
    out.csv("verdict.csv", |w| {
        w.extend_from_slice(b"policy,reference_value,mean_utility,std_error,abs_error,three_se,verdict\n");
        let line = format!(
            "{label},{},{},{},{},{},{verdict}\n",
            format_optional(reference),
            result.mean_utility,
            result.std_error,
            format_optional(reference.map(|v| (result.mean_utility - v).abs())),
            3.0 * result.std_error,
        );
        w.extend_from_slice(line.as_bytes());
        Ok(())
    })?;

    println!("policy        = {label}");
    println!("E[U(X_T)]     = {} +/- {:.3e}", result.mean_utility, result.std_error);
    println!("reference     = {}", format_optional(reference));
    println!("verdict       = {verdict}");
    println!("outputs in {}", out.dir.display());
    Ok(())
}

pub fn run_converge(common: &Common, k_list: Option<Vec<f64>>, timings: bool) -> Result<(), CliError> {
    let (loaded, exp) = load(common)?;
    let k_list = k_list.unwrap_or_else(|| DEFAULT_K_LIST.to_vec());
    let out = Artifacts::new(common, &loaded, exp.seed)?;
    let rows = convergence_sweep(&exp.utility, &exp.model, &exp.profile, &k_list, &exp.solver, timings)?;
    out.csv("convergence.csv", |w| write_sweep_csv(&rows, w))?;
    for r in &rows {
        println!("k={:<6} V_lambda={} gap={:.3e} rel_gap={:.3e}", r.k, r.v_lambda, r.abs_gap, r.rel_gap);
    }
    println!("outputs in {}", out.dir.display());
    match rows.iter().find(|r| !r.converged) {
        Some(r) => Err(CliError::NotConverged(format!("value iteration did not converge for k = {}", r.k))),
        None => Ok(()),
    }
}

pub fn run_trace(common: &Common, m_max: usize) -> Result<(), CliError> {
    let (loaded, exp) = load(common)?;
    let out = Artifacts::new(common, &loaded, exp.seed)?;
    let solver = Solver::new(exp.utility, exp.model.clone(), exp.profile.clone(), exp.solver.clone())?;
    let values = solver.trace(m_max, 0.0, exp.solver.initial_wealth);
    let f0 = format_optional(upper_bound(&exp));
    out.csv("trace.csv", |w| {
        w.extend_from_slice(b"m,v_m,supersolution\n");
        for (m, v) in values.iter().enumerate() {
            w.extend_from_slice(format!("{m},{v},{f0}\n").as_bytes());
        }
        Ok(())
    })?;
    for (m, v) in values.iter().enumerate() {
        println!("v_{m}(0,X0) = {v}");
    }
    println!("f(0,X0)    = {f0}");
    println!("outputs in {}", out.dir.display());
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn main_with(cli: Cli) -> u8 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn output_dir(common: &Common, loaded: &LoadedConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| loaded.config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}
