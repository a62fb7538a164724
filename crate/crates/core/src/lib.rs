//! Optimal investment in a market that can only be traded at the arrival times
//! of an inhomogeneous Poisson process whose intensity explodes at the horizon.
//!
//! The value function is the fixed point of a one-step operator over the next
//! arrival; it is computed by monotone value iteration ([`dp`]), compared with
//! the continuous-trading optimum and a dual upper bound ([`benchmark`]) and
//! checked by simulation ([`montecarlo`]).

// `!(a > b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrivals;
pub mod benchmark;
pub mod dp;
pub mod error;
pub mod market;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod utility;

pub use arrivals::IntensityProfile;
pub use benchmark::{merton_value, supersolution, DualDensityParams, MertonSolution};
pub use dp::{PolicySurface, Representation, Solution, Solver, SolverConfig, ValueSurface};
pub use error::{Error, Result};
pub use market::{validate_assumptions, AssumptionReport, JumpSpec, MarketModel, ReturnLaw, SizeLaw};
pub use montecarlo::{convergence_sweep, estimate_expected_utility, simulate_path, SimConfig, SimResult, SweepRow};
pub use utility::UtilitySpec;
