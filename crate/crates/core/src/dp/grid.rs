//! Supports of the value and policy surfaces.

use crate::arrivals::IntensityProfile;
use crate::error::{Error, Result};

/// Uniform grid `w_j = j/N`, `j = 0..=N`, in the warped time of a profile; the
/// last node is the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    profile: IntensityProfile,
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(profile: IntensityProfile, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::invalid("solver.time_intervals", "must be positive"));
        }
        let mut times: Vec<f64> = (0..intervals).map(|j| profile.unwarp(j as f64 / intervals as f64)).collect();
        times.push(profile.horizon());
        Ok(Self { profile, times })
    }

    pub fn profile(&self) -> &IntensityProfile {
        &self.profile
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn warped(&self, j: usize) -> f64 {
        j as f64 / self.intervals() as f64
    }

    /// Cell `j < N` and fraction in `[0, 1]` of `t` along warped time.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.intervals();
        let pos = self.profile.warp(t) * n as f64;
        let j = (pos.floor().max(0.0) as usize).min(n - 1);
        (j, (pos - j as f64).clamp(0.0, 1.0))
    }

    /// Two grids agree when they have the same node count over the same warp
    /// shape; the scale of the intensity does not enter the warp.
    pub(crate) fn compatible(&self, other: &TimeGrid) -> bool {
        self.times == other.times
    }
}

/// Log-spaced wealth grid on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthGrid {
    log_min: f64,
    log_step: f64,
    nodes: Vec<f64>,
}

/// Position of a wealth level relative to a [`WealthGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WealthPosition {
    Below,
    Above,
    Inside(usize, f64),
}

impl WealthGrid {
    pub fn new(x_min: f64, x_max: f64, count: usize) -> Result<Self> {
        if !(x_min > 0.0 && x_min.is_finite()) {
            return Err(Error::invalid("solver.wealth_min", "must be positive and finite"));
        }
        if !(x_max > x_min && x_max.is_finite()) {
            return Err(Error::invalid("solver.wealth_max", "must exceed wealth_min and be finite"));
        }
        if count < 2 {
            return Err(Error::invalid("solver.wealth_nodes", "need at least 2 nodes"));
        }
        let log_min = x_min.ln();
        let log_step = (x_max.ln() - log_min) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| (log_min + log_step * i as f64).exp()).collect();
        nodes[0] = x_min;
        nodes[count - 1] = x_max;
        Ok(Self { log_min, log_step, nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn locate_log(&self, log_x: f64) -> WealthPosition {
        let pos = (log_x - self.log_min) / self.log_step;
        let last = self.nodes.len() - 1;
        if !(pos >= 0.0) {
            WealthPosition::Below
        } else if pos >= last as f64 {
            WealthPosition::Above
        } else {
            let i = (pos.floor() as usize).min(last - 1);
            WealthPosition::Inside(i, pos - i as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_grid_is_uniform_in_warp() {
        let prof = IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap();
        let g = TimeGrid::new(prof.clone(), 10).unwrap();
        assert_eq!(g.times().len(), 11);
        assert_eq!(g.times()[0], 0.0);
        assert_eq!(g.times()[10], 1.0);
        // β = 1: the warp is t/T
        for (j, t) in g.times().iter().enumerate() {
            assert!((t - j as f64 / 10.0).abs() < 1e-14);
        }
        let (j, f) = g.locate(0.35);
        assert_eq!(j, 3);
        assert!((f - 0.5).abs() < 1e-12);
        assert_eq!(g.locate(1.0), (9, 1.0));
        // scaling the intensity leaves the grid unchanged
        let scaled = TimeGrid::new(prof.scaled(64.0).unwrap(), 10).unwrap();
        assert!(g.compatible(&scaled));
    }

    #[test]
    fn wealth_grid_locates() {
        let g = WealthGrid::new(0.01, 100.0, 5).unwrap();
        assert!((g.nodes()[2] - 1.0).abs() < 1e-14);
        assert_eq!(g.locate_log(0.001f64.ln()), WealthPosition::Below);
        assert_eq!(g.locate_log(1000f64.ln()), WealthPosition::Above);
        match g.locate_log(1.0f64.ln()) {
            WealthPosition::Inside(i, f) => assert!((i == 2 && f.abs() < 1e-12) || (i == 1 && (f - 1.0).abs() < 1e-12)),
            other => panic!("{other:?}"),
        }
        assert!(WealthGrid::new(0.0, 1.0, 5).is_err());
        assert!(WealthGrid::new(1.0, 1.0, 5).is_err());
    }
}
