//! Arrival intensities exploding at the horizon, and the inhomogeneous Poisson
//! machinery built on them: `N_t = M_{Λ(t)}` with `M` a unit-rate process.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::UnitIntervalRule;

/// Default number of Gauss–Legendre nodes for the arrival-time integral.
pub const TIME_QUADRATURE_ORDER: usize = 64;

/// Sampled arrivals closer than this to the horizon are not resolved.
pub const HORIZON_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum IntensityProfile {
    /// `λ(t) = κ / (T − t)^β`, `κ > 0`, `β ≥ 1`.
    PowerBlowup { horizon: f64, kappa: f64, beta: f64 },
    /// `λ(t) = k · λ_inner(t)`, `k ≥ 1`.
    Scaled { scale: f64, inner: Box<IntensityProfile> },
}

/// `λ(t) = scale · κ / (T − t)^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileParameters {
    pub horizon: f64,
    pub kappa: f64,
    pub beta: f64,
    pub scale: f64,
}

impl IntensityProfile {
    pub fn power_blowup(horizon: f64, kappa: f64, beta: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("intensity.horizon_years", "must be positive and finite"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("intensity.kappa", "must be positive and finite"));
        }
        if !(beta >= 1.0 && beta.is_finite()) {
            return Err(Error::invalid("intensity.beta", "must be >= 1 so that the total mass is infinite"));
        }
        Ok(IntensityProfile::PowerBlowup { horizon, kappa, beta })
    }

    pub fn scaled(self, scale: f64) -> Result<Self> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::invalid("intensity.scale", "must be >= 1 and finite"));
        }
        Ok(IntensityProfile::Scaled { scale, inner: Box::new(self) })
    }

    pub fn horizon(&self) -> f64 {
        match self {
            IntensityProfile::PowerBlowup { horizon, .. } => *horizon,
            IntensityProfile::Scaled { inner, .. } => inner.horizon(),
        }
    }

    /// Flattened description: base `κ`, `β`, horizon and the product of all scales.
    pub fn parameters(&self) -> ProfileParameters {
        match self {
            IntensityProfile::PowerBlowup { horizon, kappa, beta } => ProfileParameters {
                horizon: *horizon,
                kappa: *kappa,
                beta: *beta,
                scale: 1.0,
            },
            IntensityProfile::Scaled { scale, inner } => {
                let mut p = inner.parameters();
                p.scale *= scale;
                p
            }
        }
    }

    /// Total multiplicative factor in front of the unit-κ shape.
    fn factor(&self) -> f64 {
        match self {
            IntensityProfile::PowerBlowup { kappa, .. } => *kappa,
            IntensityProfile::Scaled { scale, inner } => scale * inner.factor(),
        }
    }

    fn shape(&self) -> (f64, f64) {
        match self {
            IntensityProfile::PowerBlowup { horizon, beta, .. } => (*horizon, *beta),
            IntensityProfile::Scaled { inner, .. } => inner.shape(),
        }
    }

    /// `λ(t)`; infinite at `t = T`.
    pub fn intensity(&self, t: f64) -> f64 {
        let (horizon, beta) = self.shape();
        self.factor() / (horizon - t).powf(beta)
    }

    /// Cumulative intensity of the unit-κ shape, `Λ(t)/factor`.
    fn unit_cumulative(&self, t: f64) -> f64 {
        let (horizon, beta) = self.shape();
        if beta == 1.0 {
            // ln(T/(T−t)), written to stay accurate for small t
            -(-t / horizon).ln_1p()
        } else {
            ((horizon - t).powf(1.0 - beta) - horizon.powf(1.0 - beta)) / (beta - 1.0)
        }
    }

    /// Time to the horizon, `T − t`, at which the unit-κ cumulative reaches `level`.
    fn unit_remaining(&self, level: f64) -> f64 {
        let (horizon, beta) = self.shape();
        if beta == 1.0 {
            horizon * (-level).exp()
        } else {
            (level * (beta - 1.0) + horizon.powf(1.0 - beta)).powf(1.0 / (1.0 - beta))
        }
    }

    /// `Λ(t) = ∫_0^t λ(u) du` in closed form.
    pub fn cumulative_intensity(&self, t: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t < horizon) {
            return Err(Error::domain(format!("cumulative intensity needs 0 <= t < T, got t={t}, T={horizon}")));
        }
        Ok(self.factor() * self.unit_cumulative(t))
    }

    /// The time `t` with `Λ(t) = level`.
    pub fn inverse_cumulative(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0) {
            return Err(Error::domain(format!("inverse cumulative needs level >= 0, got {level}")));
        }
        Ok(self.horizon() - self.remaining_at_level(level))
    }

    /// `T − Λ⁻¹(level)`, computed without cancellation.
    pub fn remaining_at_level(&self, level: f64) -> f64 {
        if level == 0.0 {
            return self.horizon();
        }
        self.unit_remaining(level / self.factor())
    }

    /// Density of the next arrival at `s` given an arrival at `t`:
    /// `λ(s) exp(−∫_t^s λ)`.
    pub fn arrival_density(&self, t: f64, s: f64) -> Result<f64> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= s && s < horizon) {
            return Err(Error::domain(format!("arrival density needs 0 <= t <= s < T, got t={t}, s={s}")));
        }
        let gap = self.cumulative_intensity(s)? - self.cumulative_intensity(t)?;
        Ok(self.intensity(s) * (-gap).exp())
    }

    /// CDF of the next arrival: `1 − exp(−(Λ(s) − Λ(t)))`.
    pub fn arrival_cdf(&self, t: f64, s: f64) -> Result<f64> {
        let gap = self.cumulative_intensity(s)? - self.cumulative_intensity(t)?;
        Ok(-(-gap).exp_m1())
    }

    /// Next arrival after `t` for a given unit-exponential draw.
    pub fn next_arrival_from_exponential(&self, t: f64, exponential: f64) -> Result<f64> {
        let level = self.cumulative_intensity(t)? + exponential;
        let horizon = self.horizon();
        let s = horizon - self.remaining_at_level(level);
        Ok(s.clamp(t, horizon.next_down()))
    }

    /// Samples the next arrival after `t`; always lies in `(t, T)` up to the
    /// resolution [`HORIZON_RESOLUTION`].
    pub fn sample_next_arrival<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        let e: f64 = Exp1.sample(rng);
        self.next_arrival_from_exponential(t, e)
    }

    /// Nodes `(s_i, w_i)` with `Σ w_i g(s_i) ≈ ∫_t^T λ(s) e^{−∫_t^s λ} g(s) ds`,
    /// from the substitution `u = 1 − e^{−(Λ(s) − Λ(t))}` and Gauss–Legendre in `u`.
    pub fn time_quadrature(&self, t: f64, n_nodes: usize) -> Result<Vec<(f64, f64)>> {
        let rule = UnitIntervalRule::new(n_nodes)?;
        self.time_quadrature_with(t, &rule)
    }

    pub fn time_quadrature_with(&self, t: f64, rule: &UnitIntervalRule) -> Result<Vec<(f64, f64)>> {
        let base = self.cumulative_intensity(t)?;
        let horizon = self.horizon();
        Ok(rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&u, &w)| {
                let level = base - (-u).ln_1p();
                (horizon - self.remaining_at_level(level), w)
            })
            .collect())
    }

    /// Reference cumulative intensity `Λ(t)/(κ·k)` of the unit-κ, unscaled shape.
    /// It defines the warped time coordinate used by value surfaces.
    pub fn reference_cumulative(&self, t: f64) -> f64 {
        self.unit_cumulative(t)
    }

    /// Warped time `w = 1 − exp(−Λ_ref(t))`, mapping `[0, T)` onto `[0, 1)`.
    pub fn warp(&self, t: f64) -> f64 {
        if t >= self.horizon() {
            return 1.0;
        }
        -(-self.unit_cumulative(t)).exp_m1()
    }

    /// Inverse of [`warp`](Self::warp); `w = 1` maps to `T`.
    pub fn unwarp(&self, w: f64) -> f64 {
        if w >= 1.0 {
            return self.horizon();
        }
        let level = -(-w).ln_1p();
        self.horizon() - self.unit_remaining(level)
    }

    /// Checks `Σ_k exp(−∫_t^s λ_k) < ∞` for the family `λ_k = k·λ`: the terms are
    /// `exp(−k·(Λ(s) − Λ(t)))`, a geometric series with ratio `exp(−(Λ(s) − Λ(t))) < 1`.
    /// Returns the series sum over `k ≥ 1` for the given window.
    pub fn scaled_family_tail_sum(&self, t: f64, s: f64) -> Result<f64> {
        let gap = self.cumulative_intensity(s)? - self.cumulative_intensity(t)?;
        if !(gap > 0.0) {
            return Ok(f64::INFINITY);
        }
        let ratio = (-gap).exp();
        Ok(ratio / (1.0 - ratio))
    }
}
