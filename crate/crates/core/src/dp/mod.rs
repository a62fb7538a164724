//! Fixed-point dynamic programming over the next trading time.
//!
//! The operator is
//! `𝓛w(t,x) = sup_{π∈[0,1]} ∫_t^T λ(s) e^{−∫_t^s λ} E[w(s, x(1 + πZ_{t,s}))] ds`
//! and the value function is the limit of `v₀ = U`, `v_{m+1} = 𝓛v_m`.

mod grid;
mod search;
mod solver;
mod surface;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{TimeGrid, WealthGrid, WealthPosition};
pub use search::maximize_concave;
pub use solver::{finite_horizon_value, value_iterate, Solution, Solver};
pub use surface::{policy_lookup, PolicySurface, Representation, ValueFunction, ValueSurface};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub representation: Representation,
    /// Number of intervals `N` of the warped-time grid.
    pub time_intervals: usize,
    /// Wealth nodes in grid mode.
    pub wealth_nodes: usize,
    /// Grid-mode wealth range; defaults to `[X₀/100, 100·X₀]`.
    pub wealth_min: Option<f64>,
    pub wealth_max: Option<f64>,
    /// Reference wealth `X₀`; also where separable residuals are measured.
    pub initial_wealth: f64,
    pub time_quadrature: usize,
    pub return_quadrature: usize,
    /// Stopping threshold on `‖v_{m+1} − v_m‖ / (1 + ‖v_m‖)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub pi_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            representation: Representation::Separable,
            time_intervals: 100,
            wealth_nodes: 61,
            wealth_min: None,
            wealth_max: None,
            initial_wealth: 1.0,
            time_quadrature: crate::arrivals::TIME_QUADRATURE_ORDER,
            return_quadrature: crate::market::RETURN_QUADRATURE_ORDER,
            tolerance: 1e-6,
            max_iterations: 500,
            pi_tolerance: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("solver.{field}"), "must be positive and finite"))
            }
        };
        for (v, field) in [
            (self.time_intervals, "time_intervals"),
            (self.time_quadrature, "time_quadrature"),
            (self.return_quadrature, "return_quadrature"),
            (self.max_iterations, "max_iterations"),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("solver.{field}"), "must be positive"));
            }
        }
        if self.representation == Representation::Grid && self.wealth_nodes < 2 {
            return Err(Error::invalid("solver.wealth_nodes", "need at least 2 nodes"));
        }
        positive(self.initial_wealth, "initial_wealth")?;
        positive(self.tolerance, "tolerance")?;
        positive(self.pi_tolerance, "pi_tolerance")?;
        if self.pi_tolerance >= 0.5 {
            return Err(Error::invalid("solver.pi_tolerance", "must be below 0.5"));
        }
        let (lo, hi) = self.wealth_bounds();
        positive(lo, "wealth_min")?;
        positive(hi, "wealth_max")?;
        if hi <= lo {
            return Err(Error::invalid("solver.wealth_max", "must exceed wealth_min"));
        }
        Ok(())
    }

    pub fn wealth_bounds(&self) -> (f64, f64) {
        (
            self.wealth_min.unwrap_or(self.initial_wealth / 100.0),
            self.wealth_max.unwrap_or(self.initial_wealth * 100.0),
        )
    }
}
