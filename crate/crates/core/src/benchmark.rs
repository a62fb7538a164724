//! Closed-form references for the diffusive case: the dual supersolution
//! `f(t,x) = inf_y { E[Ũ(y·Y_{t,T})] + xy }` and the continuous-trading value
//! under the no-short-sale constraint.

use crate::error::{Error, Result};
use crate::market::MarketModel;
use crate::utility::UtilitySpec;

/// Market price of risk `θ = b/c` of the dual density
/// `Y_{t,T} = exp(−∫θ dW − ½∫θ² du)`.
#[derive(Debug, Clone)]
pub struct DualDensityParams {
    model: MarketModel,
}

impl DualDensityParams {
    pub fn from_model(model: &MarketModel) -> Result<Self> {
        if model.has_jumps() {
            return Err(Error::Unsupported("the dual supersolution is only available without jumps".into()));
        }
        let total = model.integrated_sharpe_squared(0.0, model.horizon());
        if !total.is_finite() {
            return Err(Error::invalid("model.volatility_per_sqrt_year", "∫(b/c)² must be finite"));
        }
        Ok(Self { model: model.clone() })
    }

    pub fn theta(&self, t: f64) -> f64 {
        self.model.drift_at(t) / self.model.volatility_at(t)
    }

    /// `∫_t^T θ²(u) du`.
    pub fn integrated_theta_sq(&self, t: f64) -> f64 {
        self.model.integrated_sharpe_squared(t, self.model.horizon())
    }

    pub fn horizon(&self) -> f64 {
        self.model.horizon()
    }
}

/// Dual upper bound for the value function.
///
/// Power: `U(x)·exp(γ/(2(1−γ)) ∫_t^T θ²)`; log: `ln x + ½∫_t^T θ²`.
pub fn supersolution(utility: &UtilitySpec, params: &DualDensityParams, t: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("supersolution needs x > 0, got {x}")));
    }
    if !(t >= 0.0 && t <= params.horizon()) {
        return Err(Error::domain(format!("supersolution needs 0 <= t <= T, got {t}")));
    }
    let theta_sq = params.integrated_theta_sq(t);
    Ok(match *utility {
        UtilitySpec::Power { gamma } => utility.eval(x) * (gamma / (2.0 * (1.0 - gamma)) * theta_sq).exp(),
        UtilitySpec::Log => x.ln() + 0.5 * theta_sq,
    })
}

/// Continuous-trading optimum with proportions constrained to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MertonSolution {
    pub value: f64,
    /// Optimal proportion on each piece of the model mesh.
    pub policy: Vec<f64>,
    mesh: Vec<f64>,
}

impl MertonSolution {
    pub fn proportion_at(&self, t: f64) -> f64 {
        let i = match self.mesh.partition_point(|&m| m <= t) {
            0 => 0,
            k => (k - 1).min(self.policy.len() - 1),
        };
        self.policy[i]
    }
}

/// `π*(s) = clamp(b/((1−γ)c²), 0, 1)` and the value obtained by integrating
/// the maximized Hamiltonian from `t` to `T`.
pub fn merton_value(utility: &UtilitySpec, model: &MarketModel, t: f64, x: f64) -> Result<MertonSolution> {
    if model.has_jumps() {
        return Err(Error::Unsupported("the Merton reference is only available without jumps".into()));
    }
    if !(x > 0.0) {
        return Err(Error::domain(format!("merton value needs x > 0, got {x}")));
    }
    if !(t >= 0.0 && t <= model.horizon()) {
        return Err(Error::domain(format!("merton value needs 0 <= t <= T, got {t}")));
    }
    let risk_aversion = 1.0 - utility.gamma();
    let proportion = |b: f64, c: f64| -> f64 {
        if c > 0.0 {
            (b / (risk_aversion * c * c)).clamp(0.0, 1.0)
        } else if b > 0.0 {
            1.0
        } else {
            0.0
        }
    };
    // growth rate of E[X^γ] (power) or E[ln X] (log) under the optimal proportion
    let rate = |b: f64, c: f64| -> f64 {
        let pi = proportion(b, c);
        pi * b - 0.5 * risk_aversion * pi * pi * c * c
    };
    let integrated = model.integrate(t, model.horizon(), |p| rate(p.drift, p.volatility));
    let value = match *utility {
        UtilitySpec::Power { gamma } => utility.eval(x) * (gamma * integrated).exp(),
        UtilitySpec::Log => x.ln() + integrated,
    };
    let mesh = model.mesh().to_vec();
    let policy = mesh
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            proportion(model.drift_at(mid), model.volatility_at(mid))
        })
        .collect();
    Ok(MertonSolution { value, policy, mesh })
}
