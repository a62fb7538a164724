//! Exponential-Lévy fundamental price with piecewise-constant characteristics.
//!
//! The log-return of the continuous part over `[t, s]` is Gaussian with mean
//! `∫(b − c²/2)` and variance `∫c²`. The optional jump part is compound Poisson;
//! expectations condition on the jump count, truncated where the Poisson tail
//! drops below [`JUMP_TAIL_MASS`].

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::quadrature::NormalRule;
use crate::utility::UtilitySpec;

/// Poisson tail mass below which the jump-count mixture is truncated.
pub const JUMP_TAIL_MASS: f64 = 1e-12;

/// Default Gauss–Hermite order for return expectations.
pub const RETURN_QUADRATURE_ORDER: usize = 40;

fn default_rule() -> &'static NormalRule {
    static RULE: OnceLock<NormalRule> = OnceLock::new();
    RULE.get_or_init(|| NormalRule::new(RETURN_QUADRATURE_ORDER).expect("valid order"))
}

/// Law of a single relative jump `Y > −1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeLaw {
    /// `ln(1 + Y) ~ N(log_mean, log_std²)`.
    LogNormal { log_mean: f64, log_std: f64 },
    /// `Y` uniform on `(lower, upper)` with `lower ≥ −1`.
    Uniform { lower: f64, upper: f64 },
}

impl SizeLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            SizeLaw::LogNormal { log_mean, log_std } => (log_mean + 0.5 * log_std * log_std).exp() - 1.0,
            SizeLaw::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SizeLaw::LogNormal { log_mean, log_std } => {
                if !log_mean.is_finite() || !log_std.is_finite() || log_std < 0.0 {
                    return Err(Error::invalid("model.jumps.log_std", "log-normal jump law needs finite mean and std >= 0"));
                }
            }
            SizeLaw::Uniform { lower, upper } => {
                if !(lower >= -1.0) || !upper.is_finite() || upper <= lower {
                    return Err(Error::invalid("model.jumps.lower", "uniform jump law needs -1 <= lower < upper < inf"));
                }
            }
        }
        Ok(())
    }

    /// `E[g(Y); a < Y < b]` for the moment integrands of the integrability checks.
    /// Uniform laws use the closed form (and report divergence as `+∞`); log-normal
    /// laws use a composite Gauss–Legendre rule over ±12 standard deviations.
    fn truncated_moment(&self, order: f64, a: f64, b: f64) -> f64 {
        // integrand (1+y)^l − 1 − l·y
        match *self {
            SizeLaw::Uniform { lower, upper } => {
                let lo = lower.max(a);
                let hi = upper.min(b);
                if hi <= lo {
                    return 0.0;
                }
                let antideriv = |y: f64| -> f64 {
                    let base = 1.0 + y;
                    let power_part = if (order + 1.0).abs() < 1e-15 {
                        base.ln()
                    } else {
                        base.powf(order + 1.0) / (order + 1.0)
                    };
                    power_part - y - 0.5 * order * y * y
                };
                let at_lo = antideriv(lo);
                if !at_lo.is_finite() {
                    return f64::INFINITY;
                }
                (antideriv(hi) - at_lo) / (upper - lower)
            }
            SizeLaw::LogNormal { log_mean, log_std } => {
                let g = |y: f64| (1.0 + y).powf(order) - 1.0 - order * y;
                if log_std == 0.0 {
                    let y = log_mean.exp() - 1.0;
                    return if y > a && y < b { g(y) } else { 0.0 };
                }
                let rule = crate::quadrature::UnitIntervalRule::new(32).expect("valid order");
                let panels = 48;
                let width = 24.0 / panels as f64;
                let mut total = 0.0;
                for k in 0..panels {
                    let left = -12.0 + k as f64 * width;
                    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
                        let xi: f64 = left + width * u;
                        let y = (log_mean + log_std * xi).exp() - 1.0;
                        if y > a && y < b {
                            let density = (-0.5 * xi * xi).exp() / (2.0 * std::f64::consts::PI).sqrt();
                            total += w * width * density * g(y);
                        }
                    }
                }
                total
            }
        }
    }
}

/// Compound-Poisson jump component.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSpec {
    /// Jump arrival rate on each mesh piece (per year).
    pub rate: Vec<f64>,
    pub size_law: SizeLaw,
    /// Upper moment order `q > 1`.
    pub q: f64,
    /// Lower moment order `r < 0`, needed when the utility is unbounded below.
    pub r: Option<f64>,
}

/// One piece of the piecewise-constant characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub drift: f64,
    pub volatility: f64,
    pub jump_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    horizon: f64,
    mesh: Vec<f64>,
    drift: Vec<f64>,
    volatility: Vec<f64>,
    jumps: Option<JumpSpec>,
}

impl MarketModel {
    /// Constant drift `b` and volatility `c` on `[0, T]`.
    pub fn constant(horizon: f64, drift: f64, volatility: f64) -> Result<Self> {
        Self::piecewise(vec![0.0, horizon], vec![drift], vec![volatility])
    }

    /// Piecewise-constant characteristics: `drift[i]`, `volatility[i]` hold on
    /// `[mesh[i], mesh[i+1])`, with `mesh[0] = 0` and `mesh[n] = T`.
    pub fn piecewise(mesh: Vec<f64>, drift: Vec<f64>, volatility: Vec<f64>) -> Result<Self> {
        if mesh.len() < 2 {
            return Err(Error::invalid("model.mesh_years", "need at least two mesh points"));
        }
        if mesh[0] != 0.0 {
            return Err(Error::invalid("model.mesh_years", "mesh must start at 0"));
        }
        if mesh.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::invalid("model.mesh_years", "mesh must be finite and strictly increasing"));
        }
        let pieces = mesh.len() - 1;
        if drift.len() != pieces {
            return Err(Error::invalid("model.drift_per_year", format!("expected {pieces} values, got {}", drift.len())));
        }
        if volatility.len() != pieces {
            return Err(Error::invalid(
                "model.volatility_per_sqrt_year",
                format!("expected {pieces} values, got {}", volatility.len()),
            ));
        }
        if let Some(i) = drift.iter().position(|b| !b.is_finite()) {
            return Err(Error::invalid(format!("model.drift_per_year[{i}]"), "must be finite"));
        }
        if let Some(i) = volatility.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid(
                format!("model.volatility_per_sqrt_year[{i}]"),
                format!("must be finite and nonnegative, got {}", volatility[i]),
            ));
        }
        Ok(Self {
            horizon: *mesh.last().unwrap(),
            mesh,
            drift,
            volatility,
            jumps: None,
        })
    }

    pub fn with_jumps(mut self, jumps: JumpSpec) -> Result<Self> {
        if jumps.rate.len() != self.drift.len() {
            return Err(Error::invalid(
                "model.jumps.rate_per_year",
                format!("expected {} values, got {}", self.drift.len(), jumps.rate.len()),
            ));
        }
        if let Some(i) = jumps.rate.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid(format!("model.jumps.rate_per_year[{i}]"), "must be finite and nonnegative"));
        }
        jumps.size_law.validate()?;
        if !(jumps.q > 1.0) {
            return Err(Error::invalid("model.jumps.q", "upper moment order must exceed 1"));
        }
        if let Some(r) = jumps.r {
            if !(r < 0.0) {
                return Err(Error::invalid("model.jumps.r", "lower moment order must be negative"));
            }
        }
        self.jumps = Some(jumps);
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn jumps(&self) -> Option<&JumpSpec> {
        self.jumps.as_ref()
    }

    pub fn has_jumps(&self) -> bool {
        self.jumps.as_ref().is_some_and(|j| j.rate.iter().any(|&r| r > 0.0))
    }

    fn piece(&self, i: usize) -> Piece {
        Piece {
            drift: self.drift[i],
            volatility: self.volatility[i],
            jump_rate: self.jumps.as_ref().map_or(0.0, |j| j.rate[i]),
        }
    }

    pub fn piece_at(&self, t: f64) -> Piece {
        let i = match self.mesh.partition_point(|&m| m <= t) {
            0 => 0,
            k => (k - 1).min(self.drift.len() - 1),
        };
        self.piece(i)
    }

    pub fn drift_at(&self, t: f64) -> f64 {
        self.piece_at(t).drift
    }

    pub fn volatility_at(&self, t: f64) -> f64 {
        self.piece_at(t).volatility
    }

    /// `∫_a^b f(piece(u)) du`, exact for piecewise-constant integrands.
    pub fn integrate<F: Fn(Piece) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mut total = 0.0;
        for i in 0..self.drift.len() {
            let lo = self.mesh[i].max(a);
            let hi = self.mesh[i + 1].min(b);
            if hi > lo {
                total += f(self.piece(i)) * (hi - lo);
            }
        }
        total
    }

    pub fn integrated_drift(&self, a: f64, b: f64) -> f64 {
        self.integrate(a, b, |p| p.drift)
    }

    pub fn integrated_variance(&self, a: f64, b: f64) -> f64 {
        self.integrate(a, b, |p| p.volatility * p.volatility)
    }

    /// `∫_a^b (b/c)² du`; infinite when a piece with `c = 0` is crossed.
    pub fn integrated_sharpe_squared(&self, a: f64, b: f64) -> f64 {
        self.integrate(a, b, |p| {
            if p.volatility > 0.0 {
                (p.drift / p.volatility).powi(2)
            } else {
                f64::INFINITY
            }
        })
    }

    /// The law of `Z_{t,s} = S_s/S_t − 1`.
    pub fn return_law(&self, t: f64, s: f64) -> Result<ReturnLaw> {
        if !(t >= 0.0) || !(s < self.horizon) || t > s {
            return Err(Error::domain(format!(
                "return law needs 0 <= t <= s < T, got t={t}, s={s}, T={}",
                self.horizon
            )));
        }
        let log_var = self.integrated_variance(t, s);
        let log_mean = self.integrated_drift(t, s) - 0.5 * log_var;
        let jumps = match &self.jumps {
            Some(spec) if s > t => {
                let expected_count = self.integrate(t, s, |p| p.jump_rate);
                if expected_count > 0.0 {
                    Some(JumpMixture::new(expected_count, spec.size_law)?)
                } else {
                    None
                }
            }
            _ => None,
        };
        Ok(ReturnLaw {
            t,
            s,
            log_mean,
            log_var,
            jumps,
        })
    }
}

/// Poisson mixture over the number of jumps in `(t, s]` with log-normal sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMixture {
    pub expected_count: f64,
    pub size_log_mean: f64,
    pub size_log_var: f64,
    /// `expected_count · E[Y]`, removed from the drift so that `E[1+Z] = e^{∫b}`.
    pub compensator: f64,
    /// Poisson probabilities of `0..=K` jumps.
    pub count_weights: Vec<f64>,
}

impl JumpMixture {
    fn new(expected_count: f64, law: SizeLaw) -> Result<Self> {
        let SizeLaw::LogNormal { log_mean, log_std } = law else {
            return Err(Error::Unsupported(
                "return-law quadrature and sampling need log-normal jump sizes".to_string(),
            ));
        };
        let mut weights = Vec::new();
        let mut pmf = (-expected_count).exp();
        let mut cdf = 0.0;
        let mut n = 0usize;
        loop {
            weights.push(pmf);
            cdf += pmf;
            if 1.0 - cdf < JUMP_TAIL_MASS || n > 10_000 {
                break;
            }
            n += 1;
            pmf *= expected_count / n as f64;
        }
        Ok(Self {
            expected_count,
            size_log_mean: log_mean,
            size_log_var: log_std * log_std,
            compensator: expected_count * law.mean(),
            count_weights: weights,
        })
    }
}

/// Law of the return between two observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnLaw {
    pub t: f64,
    pub s: f64,
    /// Mean of the diffusive log-return, `∫(b − c²/2)`.
    pub log_mean: f64,
    /// Variance of the diffusive log-return, `∫c²`.
    pub log_var: f64,
    pub jumps: Option<JumpMixture>,
}

impl ReturnLaw {
    /// Lognormal law without jumps, from its log-moments.
    pub fn lognormal(log_mean: f64, log_var: f64) -> Self {
        Self {
            t: 0.0,
            s: 0.0,
            log_mean,
            log_var,
            jumps: None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.log_var == 0.0 && self.log_mean == 0.0 && self.jumps.is_none()
    }

    /// Gaussian components `(weight, mean, variance)` of `ln(1 + Z)`.
    pub fn components(&self) -> Vec<(f64, f64, f64)> {
        match &self.jumps {
            None => vec![(1.0, self.log_mean, self.log_var)],
            Some(m) => m
                .count_weights
                .iter()
                .enumerate()
                .map(|(n, &p)| {
                    let n = n as f64;
                    (
                        p,
                        self.log_mean - m.compensator + n * m.size_log_mean,
                        self.log_var + n * m.size_log_var,
                    )
                })
                .collect(),
        }
    }

    /// Flattened quadrature nodes `(weight, 1 + z)` for `E[g(Z)]`.
    pub fn growth_nodes(&self, rule: &NormalRule) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(rule.len() * self.components().len());
        for (p, mean, var) in self.components() {
            let sd = var.sqrt();
            if sd == 0.0 {
                out.push((p, mean.exp()));
                continue;
            }
            for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((p * w, (mean + sd * xi).exp()));
            }
        }
        out
    }

    /// `E[(1 + πZ)^γ]` with the default rule; `+∞` when `γ < 0` and a node hits `1 + πz ≤ 0`.
    pub fn expected_power_return(&self, pi: f64, gamma: f64) -> f64 {
        expected_power_from_nodes(&self.growth_nodes(default_rule()), pi, gamma)
    }

    /// `E[ln(1 + πZ)]` with the default rule; `−∞` when a node hits `1 + πz ≤ 0`.
    pub fn expected_log_return(&self, pi: f64) -> f64 {
        expected_log_from_nodes(&self.growth_nodes(default_rule()), pi)
    }

    /// Draws `Z`; the jump count is drawn exactly (no truncation).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (mean, var) = match &self.jumps {
            None => (self.log_mean, self.log_var),
            Some(m) => {
                let n: f64 = Poisson::new(m.expected_count).map(|d| d.sample(rng)).unwrap_or(0.0);
                (
                    self.log_mean - m.compensator + n * m.size_log_mean,
                    self.log_var + n * m.size_log_var,
                )
            }
        };
        if var == 0.0 {
            return mean.exp_m1();
        }
        let xi: f64 = StandardNormal.sample(rng);
        (mean + var.sqrt() * xi).exp_m1()
    }
}

/// `E[(1+πZ)^γ]` as `1 + Σ w((1+πz)^γ − 1)`, exactly one at `π = 0`.
pub fn expected_power_from_nodes(nodes: &[(f64, f64)], pi: f64, gamma: f64) -> f64 {
    if pi == 0.0 {
        return 1.0;
    }
    let mut excess = 0.0;
    for &(w, g) in nodes {
        let base = 1.0 + pi * (g - 1.0);
        if base <= 0.0 {
            if gamma < 0.0 {
                return f64::INFINITY;
            }
            // (0⁺)^γ = 0 for γ > 0
            excess -= w;
            continue;
        }
        excess += w * (base.powf(gamma) - 1.0);
    }
    1.0 + excess
}

pub fn expected_log_from_nodes(nodes: &[(f64, f64)], pi: f64) -> f64 {
    if pi == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for &(w, g) in nodes {
        let base = 1.0 + pi * (g - 1.0);
        if base <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += w * base.ln();
    }
    total
}

/// One line of an [`AssumptionReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The computed integral or constant backing the verdict.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, passed: bool, value: f64, detail: impl Into<String>) {
        self.checks.push(AssumptionCheck {
            name,
            passed,
            value,
            detail: detail.into(),
        });
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<10} {}  value={:.6e}  {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.value,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Checks the regularity (HL), no-arbitrage (NA), utility growth (HU) and
/// jump integrability (HI) conditions. Failures are reported, not raised.
pub fn validate_assumptions(model: &MarketModel, utility: &UtilitySpec) -> AssumptionReport {
    let mut report = AssumptionReport::default();
    let horizon = model.horizon();

    let abs_drift = model.integrate(0.0, horizon, |p| p.drift.abs());
    report.push("HL.drift", abs_drift.is_finite(), abs_drift, "∫|b| over [0,T]");
    let var = model.integrated_variance(0.0, horizon);
    report.push("HL.vol", var.is_finite(), var, "∫c² over [0,T]");

    let sharpe = model.integrated_sharpe_squared(0.0, horizon);
    let na_detail = if sharpe.is_finite() {
        "∫(b/c)² over [0,T]".to_string()
    } else {
        "volatility vanishes on a piece: (b/c)² undefined".to_string()
    };
    report.push("NA", sharpe.is_finite(), sharpe, na_detail);

    let growth = utility.growth();
    report.push(
        "HU.i",
        utility.validate().is_ok() && growth.p > 0.0 && growth.p < 1.0,
        growth.p,
        format!("U+(x) <= {:.4}(1 + x^{:.4})", growth.c, growth.p),
    );
    if let Some((c, p)) = growth.lower {
        report.push("HU.ii", p < 0.0, p, format!("U-(x) <= {c:.4}(1 + x^{p:.4})"));
    }

    if let Some(spec) = model.jumps() {
        let law = spec.size_law;
        let (lower_support, mean_ok) = match law {
            SizeLaw::LogNormal { .. } => (-1.0, true),
            SizeLaw::Uniform { lower, .. } => (lower, true),
        };
        report.push(
            "HL.jumps",
            lower_support >= -1.0 && mean_ok && law.mean().is_finite(),
            law.mean(),
            "jump sizes > -1 with finite mean",
        );
        let total_rate = model.integrate(0.0, horizon, |p| p.jump_rate);
        let upper = total_rate * law.truncated_moment(spec.q, 0.0, f64::INFINITY);
        report.push(
            "HI.i",
            spec.q > 1.0 && upper.is_finite(),
            upper,
            format!("∫∫_(y>0) ((1+y)^q - 1 - qy) ν(dt,dy) with q={}", spec.q),
        );
        if utility.unbounded_below() {
            match spec.r {
                Some(r) => {
                    let lower = total_rate * law.truncated_moment(r, -1.0, 0.0);
                    let order_ok = utility.admits_lower_moment_order(r);
                    let detail = if order_ok {
                        format!("∫∫_(-1<y<0) ((1+y)^r - 1 - ry) ν(dt,dy) with r={r}")
                    } else {
                        format!("moment order r={r} does not satisfy r < p'")
                    };
                    report.push("HI.ii", order_ok && lower.is_finite(), lower, detail);
                }
                None => report.push(
                    "HI.ii",
                    false,
                    f64::NAN,
                    "utility unbounded below: a lower moment order r is required",
                ),
            }
        }
        report.push("HI.iii", true, 0.0, "piecewise-constant jump rate has no atoms in time");
    }
    report
}
