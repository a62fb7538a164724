//! Forward simulation under a feedback policy and the intensity-scaling sweep.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arrivals::IntensityProfile;
use crate::benchmark::merton_value;
use crate::dp::{PolicySurface, Solver, SolverConfig};
use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::rng::path_rng;
use crate::utility::UtilitySpec;

/// Terminal wealth below this is clamped before evaluating the utility.
pub const WEALTH_FLOOR: f64 = 1e-300;

/// Probabilities reported in [`SimResult::terminal_wealth_quantiles`].
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub initial_wealth: f64,
    /// A path stops trading once `T − τ_n` falls below this.
    pub horizon_cutoff_years: f64,
    /// ... or once it has seen this many arrivals.
    pub max_arrivals: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 0,
            initial_wealth: 1.0,
            horizon_cutoff_years: 1e-9,
            max_arrivals: 1_000_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("simulation.n_paths", "must be at least 1"));
        }
        if !(self.initial_wealth > 0.0 && self.initial_wealth.is_finite()) {
            return Err(Error::invalid("simulation.initial_wealth", "must be positive and finite"));
        }
        if !(self.horizon_cutoff_years > 0.0) {
            return Err(Error::invalid("simulation.horizon_cutoff_years", "must be positive"));
        }
        if self.max_arrivals == 0 {
            return Err(Error::invalid("simulation.max_arrivals", "must be at least 1"));
        }
        Ok(())
    }
}

/// One simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub terminal_wealth: f64,
    pub arrivals: usize,
    /// Smallest wealth seen along the path, `X₀` included.
    pub min_wealth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub n_paths: usize,
    pub mean_utility: f64,
    pub std_error: f64,
    pub mean_arrivals: f64,
    pub max_arrivals: usize,
    /// `(level, quantile)` of `X_T`.
    pub terminal_wealth_quantiles: Vec<(f64, f64)>,
    pub mean_terminal_wealth: f64,
    pub terminal_wealth_std_error: f64,
    /// Paths whose `X_T` fell below [`WEALTH_FLOOR`].
    pub clamped_paths: usize,
    /// Paths stopped by the arrival-count cap rather than the horizon cutoff.
    pub capped_paths: usize,
}

/// Simulates `X_{τ_{n+1}} = X_{τ_n}(1 + π̂(τ_n, X_{τ_n}) Z_{n+1})` from `τ_0 = 0`.
///
/// After the cutoff the wealth is held in cash, so the path is an admissible
/// strategy that stops trading after finitely many arrivals.
pub fn simulate_path<R: Rng + ?Sized>(
    policy: &PolicySurface,
    model: &MarketModel,
    profile: &IntensityProfile,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<PathOutcome> {
    let horizon = model.horizon();
    let mut tau = 0.0;
    let mut x = cfg.initial_wealth;
    let mut min_wealth = x;
    let mut n = 0;
    while horizon - tau >= cfg.horizon_cutoff_years && n < cfg.max_arrivals {
        let pi = policy.lookup(tau, x);
        let next = profile.sample_next_arrival(tau, rng)?;
        if pi > 0.0 {
            let z = model.return_law(tau, next)?.sample(rng);
            x *= 1.0 + pi * z;
            min_wealth = min_wealth.min(x);
        }
        tau = next;
        n += 1;
    }
    Ok(PathOutcome { terminal_wealth: x, arrivals: n, min_wealth })
}

/// Pairwise (cascade) sum with a fixed tree determined by the slice length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean and standard error; the mean is accumulated as excesses over the first
/// sample so that identical samples give that sample exactly and zero error.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let base = values[0];
    let shifted: Vec<f64> = values.iter().map(|v| v - base).collect();
    let mean = base + pairwise_sum(&shifted) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1) as f64;
    (mean, (variance / n as f64).sqrt())
}

/// Sample mean and standard error of `U(X_T)` over independent paths; path `i`
/// uses stream `i` of the seed, so the result does not depend on scheduling.
pub fn estimate_expected_utility(
    policy: &PolicySurface,
    utility: &UtilitySpec,
    model: &MarketModel,
    profile: &IntensityProfile,
    cfg: &SimConfig,
) -> Result<SimResult> {
    cfg.validate()?;
    if (profile.horizon() - model.horizon()).abs() > 1e-12 * model.horizon() {
        return Err(Error::invalid("intensity.horizon_years", "must equal the model horizon"));
    }
    let outcomes = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(policy, model, profile, cfg, &mut path_rng(cfg.seed, i)))
        .collect::<Result<Vec<_>>>()?;

    let mut clamped = 0;
    let utilities: Vec<f64> = outcomes
        .iter()
        .map(|o| {
            if o.terminal_wealth < WEALTH_FLOOR {
                clamped += 1;
                utility.eval(WEALTH_FLOOR)
            } else {
                utility.eval(o.terminal_wealth)
            }
        })
        .collect();
    let (mean_utility, std_error) = mean_and_standard_error(&utilities);
    let wealth: Vec<f64> = outcomes.iter().map(|o| o.terminal_wealth).collect();
    let (mean_terminal_wealth, terminal_wealth_std_error) = mean_and_standard_error(&wealth);
    let counts: Vec<f64> = outcomes.iter().map(|o| o.arrivals as f64).collect();
    let mean_arrivals = pairwise_sum(&counts) / counts.len() as f64;
    let max_arrivals = outcomes.iter().map(|o| o.arrivals).max().unwrap_or(0);
    let capped_paths = outcomes.iter().filter(|o| o.arrivals >= cfg.max_arrivals).count();

    let mut sorted = wealth;
    sorted.sort_by(f64::total_cmp);
    let terminal_wealth_quantiles = QUANTILE_LEVELS
        .iter()
        .map(|&q| {
            let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
            (q, sorted[rank - 1])
        })
        .collect();

    Ok(SimResult {
        n_paths: cfg.n_paths,
        mean_utility,
        std_error,
        mean_arrivals,
        max_arrivals,
        terminal_wealth_quantiles,
        mean_terminal_wealth,
        terminal_wealth_std_error,
        clamped_paths: clamped,
        capped_paths,
    })
}

impl SimResult {
    /// `|mean − target| ≤ 3·SE`.
    pub fn consistent_with(&self, target: f64) -> bool {
        (self.mean_utility - target).abs() <= 3.0 * self.std_error
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "n_paths",
            "mean_utility",
            "std_error",
            "mean_terminal_wealth",
            "terminal_wealth_std_error",
            "mean_arrivals",
            "max_arrivals",
            "clamped_paths",
            "capped_paths",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(self.terminal_wealth_quantiles.iter().map(|(q, _)| format!("q{}", q)));
        wtr.write_record(&header)?;
        let mut row = vec![
            self.n_paths.to_string(),
            self.mean_utility.to_string(),
            self.std_error.to_string(),
            self.mean_terminal_wealth.to_string(),
            self.terminal_wealth_std_error.to_string(),
            self.mean_arrivals.to_string(),
            self.max_arrivals.to_string(),
            self.clamped_paths.to_string(),
            self.capped_paths.to_string(),
        ];
        row.extend(self.terminal_wealth_quantiles.iter().map(|(_, v)| v.to_string()));
        wtr.write_record(&row)?;
        wtr.flush()?;
        Ok(())
    }
}

/// One row of the intensity-scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub v_lambda: f64,
    pub v_merton: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub dp_iterations: usize,
    pub dp_residual: f64,
    pub converged: bool,
    /// Only filled when timing is requested, so that output stays reproducible.
    pub wall_seconds: Option<f64>,
}

/// For each scale `k` solves with intensity `k·λ` and records the gap to the
/// continuous-trading value at `(0, X₀)`.
///
/// The scaled family satisfies the summability condition whenever the base
/// profile has finite cumulative intensity before `T`; this is checked on the
/// window `[0, T/2]` before solving.
pub fn convergence_sweep(
    utility: &UtilitySpec,
    model: &MarketModel,
    base_profile: &IntensityProfile,
    k_list: &[f64],
    solver_cfg: &SolverConfig,
    record_timings: bool,
) -> Result<Vec<SweepRow>> {
    if k_list.is_empty() {
        return Err(Error::invalid("k_list", "must not be empty"));
    }
    if k_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("k_list", "must be strictly increasing"));
    }
    let tail = base_profile.scaled_family_tail_sum(0.0, 0.5 * base_profile.horizon())?;
    if !tail.is_finite() {
        return Err(Error::invalid("intensity", "scaled family is not summable"));
    }
    let x0 = solver_cfg.initial_wealth;
    let v_merton = merton_value(utility, model, 0.0, x0)?.value;
    k_list
        .iter()
        .map(|&k| {
            let start = Instant::now();
            let profile = base_profile.clone().scaled(k)?;
            let sol = Solver::new(*utility, model.clone(), profile, solver_cfg.clone())?.solve();
            let v_lambda = sol.value_at_start();
            let abs_gap = (v_merton - v_lambda).abs();
            Ok(SweepRow {
                k,
                v_lambda,
                v_merton,
                abs_gap,
                rel_gap: abs_gap / v_merton.abs(),
                dp_iterations: sol.iterations,
                dp_residual: sol.residual,
                converged: sol.converged,
                wall_seconds: record_timings.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k", "V_lambda", "V_merton", "abs_gap", "rel_gap", "dp_iterations", "dp_residual", "wall_seconds"])?;
    for r in rows {
        wtr.write_record([
            r.k.to_string(),
            r.v_lambda.to_string(),
            r.v_merton.to_string(),
            r.abs_gap.to_string(),
            r.rel_gap.to_string(),
            r.dp_iterations.to_string(),
            r.dp_residual.to_string(),
            r.wall_seconds.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
