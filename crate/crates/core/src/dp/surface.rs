//! Value and policy surfaces on a warped-time support.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::grid::{TimeGrid, WealthGrid, WealthPosition};
use crate::error::{Error, Result};
use crate::utility::UtilitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// `v = φ(t)·U(x)` (power) or `v = U(x) + φ(t)` (log).
    #[default]
    Separable,
    /// Values on warped time × log-spaced wealth.
    Grid,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Separable => "separable",
            Representation::Grid => "grid",
        })
    }
}

/// Anything the one-step operator can be applied to.
pub trait ValueFunction {
    /// `w(t, x)` for `0 ≤ t ≤ T`, `x > 0`.
    fn value_at(&self, t: f64, x: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> ValueFunction for F {
    fn value_at(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SurfaceData {
    Separable { phi: Vec<f64> },
    /// Row-major `(N+1) × n_x` normalized excess `q = (v − U(x)) / (x·U'(x))`.
    Grid { wealth: WealthGrid, excess: Vec<f64> },
}

/// A candidate value function stored on a time grid.
///
/// Grid mode interpolates the normalized excess `q = (v − U)/(x U')` bilinearly
/// in (warped time, ln x) and holds it constant outside the wealth range, which
/// reproduces CRRA-separable functions exactly at every wealth.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    utility: UtilitySpec,
    grid: TimeGrid,
    pub(crate) data: SurfaceData,
}

/// `x·U'(x)`: `x^γ` for power utility, `1` for log.
#[inline]
pub(crate) fn wealth_scale(utility: &UtilitySpec, x: f64) -> f64 {
    match *utility {
        UtilitySpec::Power { gamma } => x.powf(gamma),
        UtilitySpec::Log => 1.0,
    }
}

#[inline]
fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else if f == 1.0 {
        b
    } else {
        // convex-combination form keeps the result monotone in both node values
        (1.0 - f) * a + f * b
    }
}

impl ValueSurface {
    /// `v₀ = U` on the given support.
    pub fn terminal(utility: UtilitySpec, grid: TimeGrid, wealth: Option<WealthGrid>) -> Self {
        let data = match wealth {
            None => SurfaceData::Separable {
                phi: vec![neutral_phi(&utility); grid.intervals() + 1],
            },
            Some(wealth) => SurfaceData::Grid {
                excess: vec![0.0; (grid.intervals() + 1) * wealth.len()],
                wealth,
            },
        };
        Self { utility, grid, data }
    }

    /// Separable surface from node values `φ(t_j)`, `j = 0..=N`.
    pub fn separable(utility: UtilitySpec, grid: TimeGrid, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != grid.intervals() + 1 {
            return Err(Error::invalid("phi", format!("expected {} values, got {}", grid.intervals() + 1, phi.len())));
        }
        Ok(Self { utility, grid, data: SurfaceData::Separable { phi } })
    }

    /// Grid surface from node values `v(t_j, x_i)` in row-major order.
    pub fn from_grid_values(utility: UtilitySpec, grid: TimeGrid, wealth: WealthGrid, values: &[f64]) -> Result<Self> {
        let nx = wealth.len();
        if values.len() != (grid.intervals() + 1) * nx {
            return Err(Error::invalid("values", "length must be (N+1)·n_x"));
        }
        let excess = values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let x = wealth.nodes()[k % nx];
                (v - utility.eval(x)) / wealth_scale(&utility, x)
            })
            .collect();
        Ok(Self { utility, grid, data: SurfaceData::Grid { wealth, excess } })
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        match self.data {
            SurfaceData::Separable { .. } => Representation::Separable,
            SurfaceData::Grid { .. } => Representation::Grid,
        }
    }

    /// `φ(t_j)` in separable mode.
    pub fn phi(&self) -> Option<&[f64]> {
        match &self.data {
            SurfaceData::Separable { phi } => Some(phi),
            SurfaceData::Grid { .. } => None,
        }
    }

    pub fn wealth_grid(&self) -> Option<&WealthGrid> {
        match &self.data {
            SurfaceData::Grid { wealth, .. } => Some(wealth),
            SurfaceData::Separable { .. } => None,
        }
    }

    /// `v(t_j, x_i)` on the grid support, row-major.
    pub fn grid_values(&self) -> Option<Vec<f64>> {
        match &self.data {
            SurfaceData::Grid { wealth, excess } => {
                let nx = wealth.len();
                Some(
                    excess
                        .iter()
                        .enumerate()
                        .map(|(k, q)| self.combine_excess(wealth.nodes()[k % nx], *q))
                        .collect(),
                )
            }
            SurfaceData::Separable { .. } => None,
        }
    }

    /// Checked evaluation of `v(t, x)`.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("surface evaluation needs x > 0, got {x}")));
        }
        if !(t >= 0.0 && t <= self.grid.profile().horizon()) {
            return Err(Error::domain(format!("surface evaluation needs 0 <= t <= T, got {t}")));
        }
        Ok(self.eval(t, x))
    }

    #[inline]
    pub(crate) fn eval(&self, t: f64, x: f64) -> f64 {
        let (j, f) = self.grid.locate(t);
        self.eval_in_cell(j, f, x.ln(), x)
    }

    /// Value at wealth `x` (with `ln x` precomputed) inside time cell `j`.
    #[inline]
    pub(crate) fn eval_in_cell(&self, j: usize, f: f64, log_x: f64, x: f64) -> f64 {
        match &self.data {
            SurfaceData::Separable { phi } => combine_phi(&self.utility, lerp(phi[j], phi[j + 1], f), x),
            SurfaceData::Grid { wealth, excess } => {
                let q = grid_excess(wealth, excess, j, f, log_x);
                self.combine_excess(x, q)
            }
        }
    }

    #[inline]
    fn combine_excess(&self, x: f64, q: f64) -> f64 {
        let u = self.utility.eval(x);
        if q == 0.0 {
            u
        } else {
            u + q * wealth_scale(&self.utility, x)
        }
    }

    /// Values on the support used for residuals: every grid node, or
    /// `v(t_j, x_ref)` in separable mode.
    pub fn support_values(&self, x_ref: f64) -> Vec<f64> {
        match &self.data {
            SurfaceData::Separable { phi } => phi.iter().map(|&p| combine_phi(&self.utility, p, x_ref)).collect(),
            SurfaceData::Grid { .. } => self.grid_values().unwrap_or_default(),
        }
    }

    /// Writes one row per warped-time node: `w, t` then `phi` or one column per wealth node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let times = self.grid.times();
        match &self.data {
            SurfaceData::Separable { phi } => {
                wtr.write_record(["w", "t", "phi"])?;
                for (j, p) in phi.iter().enumerate() {
                    wtr.write_record([self.grid.warped(j).to_string(), times[j].to_string(), p.to_string()])?;
                }
            }
            SurfaceData::Grid { wealth, .. } => {
                let nx = wealth.len();
                let mut header = vec!["w".to_string(), "t".to_string()];
                header.extend(wealth.nodes().iter().map(|x| x.to_string()));
                wtr.write_record(&header)?;
                let values = self.grid_values().unwrap_or_default();
                for (j, row) in values.chunks(nx).enumerate() {
                    let mut rec = vec![self.grid.warped(j).to_string(), times[j].to_string()];
                    rec.extend(row.iter().map(|v| v.to_string()));
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

impl ValueFunction for ValueSurface {
    fn value_at(&self, t: f64, x: f64) -> f64 {
        self.eval(t, x)
    }
}

pub(crate) fn neutral_phi(utility: &UtilitySpec) -> f64 {
    match utility {
        UtilitySpec::Power { .. } => 1.0,
        UtilitySpec::Log => 0.0,
    }
}

#[inline]
pub(crate) fn combine_phi(utility: &UtilitySpec, phi: f64, x: f64) -> f64 {
    match utility {
        UtilitySpec::Power { .. } => phi * utility.eval(x),
        UtilitySpec::Log => x.ln() + phi,
    }
}

#[inline]
pub(crate) fn grid_excess(wealth: &WealthGrid, excess: &[f64], j: usize, f: f64, log_x: f64) -> f64 {
    let nx = wealth.len();
    let row = |r: usize, i: usize| excess[r * nx + i];
    let along = |i: usize| lerp(row(j, i), row(j + 1, i), f);
    match wealth.locate_log(log_x) {
        WealthPosition::Below => along(0),
        WealthPosition::Above => along(nx - 1),
        WealthPosition::Inside(i, g) => lerp(along(i), along(i + 1), g),
    }
}

/// Optimal proportions `π̂ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySurface {
    Constant(f64),
    /// One proportion per time node `j < N`.
    Separable { grid: TimeGrid, pi: Vec<f64> },
    /// Row-major `N × n_x` proportions.
    Grid { grid: TimeGrid, wealth: WealthGrid, pi: Vec<f64> },
}

impl PolicySurface {
    /// `π̂(t, x)`: linear in warped time (nearest time slice in grid mode) and
    /// linear in `ln x` between wealth nodes, constant beyond them.
    pub fn lookup(&self, t: f64, x: f64) -> f64 {
        let raw = match self {
            PolicySurface::Constant(p) => *p,
            PolicySurface::Separable { grid, pi } => {
                let (j, f) = grid.locate(t);
                if j + 1 < pi.len() {
                    lerp(pi[j], pi[j + 1], f)
                } else {
                    pi[pi.len() - 1]
                }
            }
            PolicySurface::Grid { grid, wealth, pi } => {
                let (j, f) = grid.locate(t);
                let rows = pi.len() / wealth.len();
                let slice = if f >= 0.5 { j + 1 } else { j }.min(rows - 1);
                let nx = wealth.len();
                let row = &pi[slice * nx..(slice + 1) * nx];
                match wealth.locate_log(x.ln()) {
                    WealthPosition::Below => row[0],
                    WealthPosition::Above => row[nx - 1],
                    WealthPosition::Inside(i, g) => lerp(row[i], row[i + 1], g),
                }
            }
        };
        raw.clamp(0.0, 1.0)
    }

    /// Node proportions, for inspection.
    pub fn values(&self) -> &[f64] {
        match self {
            PolicySurface::Constant(p) => std::slice::from_ref(p),
            PolicySurface::Separable { pi, .. } | PolicySurface::Grid { pi, .. } => pi,
        }
    }

    /// Same layout as [`ValueSurface::write_csv`], without the terminal row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        match self {
            PolicySurface::Constant(p) => {
                wtr.write_record(["w", "t", "pi"])?;
                wtr.write_record(["0".to_string(), "0".to_string(), p.to_string()])?;
            }
            PolicySurface::Separable { grid, pi } => {
                wtr.write_record(["w", "t", "pi"])?;
                for (j, p) in pi.iter().enumerate() {
                    wtr.write_record([grid.warped(j).to_string(), grid.times()[j].to_string(), p.to_string()])?;
                }
            }
            PolicySurface::Grid { grid, wealth, pi } => {
                let mut header = vec!["w".to_string(), "t".to_string()];
                header.extend(wealth.nodes().iter().map(|x| x.to_string()));
                wtr.write_record(&header)?;
                for (j, row) in pi.chunks(wealth.len()).enumerate() {
                    let mut rec = vec![grid.warped(j).to_string(), grid.times()[j].to_string()];
                    rec.extend(row.iter().map(|v| v.to_string()));
                    wtr.write_record(&rec)?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `π̂(t, x)` clamped to `[0, 1]`.
pub fn policy_lookup(policy: &PolicySurface, t: f64, x: f64) -> f64 {
    policy.lookup(t, x)
}
