//! The one-step operator on precomputed quadrature kernels, and value iteration.

use std::borrow::Cow;
use std::ops::Range;

use rayon::prelude::*;

use super::grid::{TimeGrid, WealthGrid};
use super::search::maximize_concave;
use super::surface::{grid_excess, neutral_phi, wealth_scale, PolicySurface, SurfaceData, ValueFunction, ValueSurface};
use super::{Representation, SolverConfig};
use crate::arrivals::IntensityProfile;
use crate::error::{Error, Result};
use crate::market::{expected_log_from_nodes, expected_power_from_nodes, MarketModel};
use crate::quadrature::{NormalRule, UnitIntervalRule};
use crate::utility::UtilitySpec;

/// One arrival-time node: its weight, the time cell holding it, and the slice
/// of growth factors `(weight, 1 + z)` of the return over `[t, s]`.
#[derive(Debug, Clone)]
struct ArrivalNode {
    weight: f64,
    time: f64,
    cell: usize,
    frac: f64,
    growth: Range<usize>,
}

#[derive(Debug, Clone)]
struct NodeKernel {
    arrivals: Vec<ArrivalNode>,
    growth: Vec<(f64, f64)>,
    /// Per-arrival moments at the fixed probe proportions `δ`, `1 − δ`, `1`
    /// (separable mode only).
    probes: Vec<(f64, Vec<f64>)>,
}

/// Converged (or last) iterate with its greedy policy.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueSurface,
    pub policy: PolicySurface,
    /// Operator applications performed, including the final residual check.
    pub iterations: usize,
    /// `‖𝓛v − v‖ / (1 + ‖v‖)` for the returned `v`.
    pub residual: f64,
    pub converged: bool,
    initial_wealth: f64,
}

impl Solution {
    /// `v*(0, X₀)`.
    pub fn value_at_start(&self) -> f64 {
        self.value.eval(0.0, self.initial_wealth)
    }

    /// The reference wealth `X₀` the solve was configured with.
    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }
}

/// Value iteration for one (utility, market, intensity) triple.
#[derive(Debug, Clone)]
pub struct Solver {
    utility: UtilitySpec,
    model: MarketModel,
    grid: TimeGrid,
    wealth: Option<WealthGrid>,
    cfg: SolverConfig,
    time_rule: UnitIntervalRule,
    return_rule: NormalRule,
    kernels: Vec<NodeKernel>,
}

fn relative_change(next: &[f64], prev: &[f64]) -> f64 {
    let diff = next.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = prev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / (1.0 + scale)
}

impl Solver {
    pub fn new(utility: UtilitySpec, model: MarketModel, profile: IntensityProfile, cfg: SolverConfig) -> Result<Self> {
        utility.validate()?;
        cfg.validate()?;
        if (profile.horizon() - model.horizon()).abs() > 1e-12 * model.horizon() {
            return Err(Error::invalid(
                "intensity.horizon_years",
                format!("must equal the model horizon {}", model.horizon()),
            ));
        }
        let grid = TimeGrid::new(profile, cfg.time_intervals)?;
        let wealth = match cfg.representation {
            Representation::Separable => None,
            Representation::Grid => {
                let (lo, hi) = cfg.wealth_bounds();
                Some(WealthGrid::new(lo, hi, cfg.wealth_nodes)?)
            }
        };
        let time_rule = UnitIntervalRule::new(cfg.time_quadrature)?;
        let return_rule = NormalRule::new(cfg.return_quadrature)?;
        let mut solver = Self {
            utility,
            model,
            grid,
            wealth,
            cfg,
            time_rule,
            return_rule,
            kernels: Vec::new(),
        };
        let n = solver.grid.intervals();
        let kernels = (0..n)
            .into_par_iter()
            .map(|j| solver.build_kernel(solver.grid.times()[j], solver.cfg.representation == Representation::Separable))
            .collect::<Result<Vec<_>>>()?;
        solver.kernels = kernels;
        Ok(solver)
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    pub fn model(&self) -> &MarketModel {
        &self.model
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn profile(&self) -> &IntensityProfile {
        self.grid.profile()
    }

    /// `v₀ = U` on this solver's support.
    pub fn initial(&self) -> ValueSurface {
        ValueSurface::terminal(self.utility, self.grid.clone(), self.wealth.clone())
    }

    fn build_kernel(&self, t: f64, with_probes: bool) -> Result<NodeKernel> {
        let horizon = self.model.horizon();
        let mut arrivals = Vec::with_capacity(self.time_rule.len());
        let mut growth = Vec::new();
        for (s, weight) in self.grid.profile().time_quadrature_with(t, &self.time_rule)? {
            let s = s.clamp(t, horizon.next_down());
            let law = self.model.return_law(t, s)?;
            let start = growth.len();
            growth.extend(law.growth_nodes(&self.return_rule));
            let (cell, frac) = self.grid.locate(s);
            arrivals.push(ArrivalNode {
                weight,
                time: s,
                cell,
                frac,
                growth: start..growth.len(),
            });
        }
        let mut kernel = NodeKernel { arrivals, growth, probes: Vec::new() };
        if with_probes {
            let delta = self.cfg.pi_tolerance;
            kernel.probes = [delta, 1.0 - delta, 1.0]
                .into_iter()
                .map(|pi| (pi, self.moments(&kernel, pi)))
                .collect();
        }
        Ok(kernel)
    }

    /// Per-arrival `E[(1+πZ)^γ]` (power) or `E[ln(1+πZ)]` (log).
    fn moments(&self, kernel: &NodeKernel, pi: f64) -> Vec<f64> {
        kernel
            .arrivals
            .iter()
            .map(|a| {
                let nodes = &kernel.growth[a.growth.clone()];
                match self.utility {
                    UtilitySpec::Power { gamma } => expected_power_from_nodes(nodes, pi, gamma),
                    UtilitySpec::Log => expected_log_from_nodes(nodes, pi),
                }
            })
            .collect()
    }

    fn cached_moments<'a>(&self, kernel: &'a NodeKernel, pi: f64) -> Cow<'a, [f64]> {
        match kernel.probes.iter().find(|(p, _)| *p == pi) {
            Some((_, m)) => Cow::Borrowed(m),
            None => Cow::Owned(self.moments(kernel, pi)),
        }
    }

    /// New `φ` and proportion at one separable node.
    fn separable_node(&self, kernel: &NodeKernel, phi: &[f64], hint: Option<f64>) -> (f64, f64) {
        let phis: Vec<f64> = kernel
            .arrivals
            .iter()
            .map(|a| match a.frac {
                0.0 => phi[a.cell],
                1.0 => phi[a.cell + 1],
                f => (1.0 - f) * phi[a.cell] + f * phi[a.cell + 1],
            })
            .collect();
        let weights = kernel.arrivals.iter().map(|a| a.weight);
        match self.utility {
            UtilitySpec::Power { gamma } => {
                let sign = gamma.signum();
                // homogeneous in φ, so the maximizer is invariant under scaling of φ
                let score = |pi: f64| -> f64 {
                    if pi == 0.0 {
                        return 0.0;
                    }
                    let m = self.cached_moments(kernel, pi);
                    sign * weights.clone().zip(&phis).zip(m.iter()).map(|((w, p), g)| w * p * (g - 1.0)).sum::<f64>()
                };
                let objective = |pi: f64| -> f64 {
                    if pi == 0.0 {
                        return 1.0 + weights.clone().zip(&phis).map(|(w, p)| w * (p - 1.0)).sum::<f64>();
                    }
                    let m = self.cached_moments(kernel, pi);
                    1.0 + weights.clone().zip(&phis).zip(m.iter()).map(|((w, p), g)| w * (p * g - 1.0)).sum::<f64>()
                };
                let (pi, _) = maximize_concave(score, self.cfg.pi_tolerance, hint);
                let mut value = objective(pi);
                if let Some(h) = hint.filter(|h| *h != pi) {
                    let alt = objective(h);
                    if sign * alt > sign * value {
                        value = alt;
                    }
                }
                (value, pi)
            }
            UtilitySpec::Log => {
                let score = |pi: f64| -> f64 {
                    if pi == 0.0 {
                        return 0.0;
                    }
                    let m = self.cached_moments(kernel, pi);
                    weights.clone().zip(m.iter()).map(|(w, f)| w * f).sum::<f64>()
                };
                let objective = |pi: f64| -> f64 {
                    if pi == 0.0 {
                        return weights.clone().zip(&phis).map(|(w, p)| w * p).sum::<f64>();
                    }
                    let m = self.cached_moments(kernel, pi);
                    weights.clone().zip(&phis).zip(m.iter()).map(|((w, p), f)| w * (p + f)).sum::<f64>()
                };
                let (pi, _) = maximize_concave(score, self.cfg.pi_tolerance, hint);
                let mut value = objective(pi);
                if let Some(h) = hint.filter(|h| *h != pi) {
                    value = value.max(objective(h));
                }
                (value, pi)
            }
        }
    }

    /// `Σ_a w_a Σ_h w_h (v(s_a, x(1 + π z_h)) − U(x))` on a grid surface.
    fn grid_excess_objective(&self, kernel: &NodeKernel, wealth: &WealthGrid, excess: &[f64], x: f64, ux: f64, pi: f64) -> f64 {
        let log_x = x.ln();
        let mut total = 0.0;
        for a in &kernel.arrivals {
            let mut inner = 0.0;
            for &(w, g) in &kernel.growth[a.growth.clone()] {
                let factor = if pi == 0.0 { 1.0 } else { 1.0 + pi * (g - 1.0) };
                let v = if factor <= 0.0 {
                    if self.utility.unbounded_below() {
                        return f64::NEG_INFINITY;
                    }
                    0.0
                } else {
                    let log_y = log_x + if pi == 0.0 { 0.0 } else { (pi * (g - 1.0)).ln_1p() };
                    let y = x * factor;
                    let q = grid_excess(wealth, excess, a.cell, a.frac, log_y);
                    let u = self.utility.eval(y);
                    if q == 0.0 {
                        u
                    } else {
                        u + q * wealth_scale(&self.utility, y)
                    }
                };
                inner += w * (v - ux);
            }
            total += a.weight * inner;
        }
        total
    }

    /// `(𝓛w, π̂)` on the support; `hint` supplies the previous maximizers.
    fn apply_hinted(&self, w: &ValueSurface, hint: Option<&PolicySurface>) -> (ValueSurface, PolicySurface) {
        let n = self.grid.intervals();
        match &w.data {
            SurfaceData::Separable { phi } => {
                let hints: Option<&[f64]> = match hint {
                    Some(PolicySurface::Separable { pi, .. }) => Some(pi),
                    _ => None,
                };
                let results: Vec<(f64, f64)> = self
                    .kernels
                    .par_iter()
                    .enumerate()
                    .map(|(j, k)| self.separable_node(k, phi, hints.map(|h| h[j])))
                    .collect();
                let mut new_phi: Vec<f64> = results.iter().map(|r| r.0).collect();
                new_phi.push(neutral_phi(&self.utility));
                let pi = results.iter().map(|r| r.1).collect();
                (
                    ValueSurface::separable(self.utility, self.grid.clone(), new_phi).expect("length matches grid"),
                    PolicySurface::Separable { grid: self.grid.clone(), pi },
                )
            }
            SurfaceData::Grid { wealth, excess } => {
                let nx = wealth.len();
                let hints: Option<&[f64]> = match hint {
                    Some(PolicySurface::Grid { pi, .. }) => Some(pi),
                    _ => None,
                };
                let results: Vec<(f64, f64)> = (0..n * nx)
                    .into_par_iter()
                    .map(|idx| {
                        let (j, i) = (idx / nx, idx % nx);
                        let x = wealth.nodes()[i];
                        let ux = self.utility.eval(x);
                        let kernel = &self.kernels[j];
                        let objective = |pi: f64| ux + self.grid_excess_objective(kernel, wealth, excess, x, ux, pi);
                        let h = hints.map(|h| h[idx]);
                        let (pi, mut value) = maximize_concave(objective, self.cfg.pi_tolerance, h);
                        if let Some(h) = h.filter(|h| *h != pi) {
                            value = value.max(objective(h));
                        }
                        ((value - ux) / wealth_scale(&self.utility, x), pi)
                    })
                    .collect();
                let mut new_excess: Vec<f64> = results.iter().map(|r| r.0).collect();
                new_excess.extend(std::iter::repeat_n(0.0, nx));
                let pi = results.iter().map(|r| r.1).collect();
                let mut value = w.clone();
                value.data = SurfaceData::Grid { wealth: wealth.clone(), excess: new_excess };
                (value, PolicySurface::Grid { grid: self.grid.clone(), wealth: wealth.clone(), pi })
            }
        }
    }

    fn check_surface(&self, w: &ValueSurface) -> Result<()> {
        if !w.time_grid().compatible(&self.grid) || w.utility() != &self.utility {
            return Err(Error::invalid("surface", "time grid or utility differs from the solver's"));
        }
        if w.wealth_grid() != self.wealth.as_ref() {
            return Err(Error::invalid("surface", "representation differs from the solver's"));
        }
        Ok(())
    }

    /// `𝓛w` on the support together with the per-node maximizers.
    pub fn apply(&self, w: &ValueSurface) -> Result<(ValueSurface, PolicySurface)> {
        self.check_surface(w)?;
        Ok(self.apply_hinted(w, None))
    }

    /// `∫_t^T λ(s) e^{−∫_t^s λ} E[w(s, x(1 + πZ_{t,s}))] ds` by time × return quadrature.
    pub fn inner_objective<W: ValueFunction + ?Sized>(&self, w: &W, t: f64, x: f64, pi: f64) -> Result<f64> {
        let kernel = self.kernel_at(t, x, pi)?;
        Ok(self.generic_objective(&kernel, w, x, pi))
    }

    /// Maximizer over `[0, 1]` of [`inner_objective`](Self::inner_objective) and the maximum.
    pub fn maximize_over_pi<W: ValueFunction + ?Sized>(&self, w: &W, t: f64, x: f64) -> Result<(f64, f64)> {
        let kernel = self.kernel_at(t, x, 0.0)?;
        Ok(maximize_concave(|pi| self.generic_objective(&kernel, w, x, pi), self.cfg.pi_tolerance, None))
    }

    fn kernel_at(&self, t: f64, x: f64, pi: f64) -> Result<NodeKernel> {
        if !(t >= 0.0 && t < self.model.horizon()) {
            return Err(Error::domain(format!("objective needs 0 <= t < T, got {t}")));
        }
        if !(x > 0.0) {
            return Err(Error::domain(format!("objective needs x > 0, got {x}")));
        }
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::domain(format!("objective needs pi in [0, 1], got {pi}")));
        }
        self.build_kernel(t, false)
    }

    fn generic_objective<W: ValueFunction + ?Sized>(&self, kernel: &NodeKernel, w: &W, x: f64, pi: f64) -> f64 {
        let ux = self.utility.eval(x);
        let mut total = 0.0;
        for a in &kernel.arrivals {
            let mut inner = 0.0;
            for &(wt, g) in &kernel.growth[a.growth.clone()] {
                let factor = 1.0 + pi * (g - 1.0);
                let v = if factor > 0.0 {
                    w.value_at(a.time, x * factor)
                } else if self.utility.unbounded_below() {
                    return f64::NEG_INFINITY;
                } else {
                    0.0
                };
                inner += wt * (v - ux);
            }
            total += a.weight * inner;
        }
        ux + total
    }

    /// Value iteration from `v₀ = U`; `observer` sees every iterate `(m, v_m)`,
    /// including `v₀` and the final residual check.
    pub fn solve_observed<F: FnMut(usize, &ValueSurface)>(&self, mut observer: F) -> Solution {
        let x_ref = self.cfg.initial_wealth;
        let mut v = self.initial();
        observer(0, &v);
        let mut hint: Option<PolicySurface> = None;
        let mut m = 0;
        loop {
            let (next, policy) = self.apply_hinted(&v, hint.as_ref());
            m += 1;
            observer(m, &next);
            let change = relative_change(&next.support_values(x_ref), &v.support_values(x_ref));
            v = next;
            hint = Some(policy);
            if change < self.cfg.tolerance {
                let (check, policy) = self.apply_hinted(&v, hint.as_ref());
                m += 1;
                observer(m, &check);
                let residual = relative_change(&check.support_values(x_ref), &v.support_values(x_ref));
                return Solution { value: v, policy, iterations: m, residual, converged: true, initial_wealth: x_ref };
            }
            if m >= self.cfg.max_iterations {
                return Solution {
                    value: v,
                    policy: hint.expect("at least one application"),
                    iterations: m,
                    residual: change,
                    converged: false,
                    initial_wealth: x_ref,
                };
            }
        }
    }

    pub fn solve(&self) -> Solution {
        self.solve_observed(|_, _| {})
    }

    /// Like [`solve`](Self::solve) but reports non-convergence as an error.
    pub fn value_iterate(&self) -> Result<Solution> {
        let sol = self.solve();
        if sol.converged {
            Ok(sol)
        } else {
            Err(Error::NotConverged { iterations: sol.iterations, residual: sol.residual })
        }
    }

    /// `v_m = 𝓛^m U`: the value when wealth is held in cash after the `m`-th arrival.
    pub fn finite_horizon_value(&self, m: usize) -> ValueSurface {
        let mut v = self.initial();
        let mut hint = None;
        for _ in 0..m {
            let (next, policy) = self.apply_hinted(&v, hint.as_ref());
            v = next;
            hint = Some(policy);
        }
        v
    }

    /// `v_m(t, x)` for `m = 0..=m_max`.
    pub fn trace(&self, m_max: usize, t: f64, x: f64) -> Vec<f64> {
        let mut v = self.initial();
        let mut hint = None;
        let mut out = vec![v.eval(t, x)];
        for _ in 0..m_max {
            let (next, policy) = self.apply_hinted(&v, hint.as_ref());
            v = next;
            hint = Some(policy);
            out.push(v.eval(t, x));
        }
        out
    }
}

/// Solves the fixed-point problem; errors when the iteration cap is reached.
pub fn value_iterate(utility: UtilitySpec, model: &MarketModel, profile: &IntensityProfile, cfg: &SolverConfig) -> Result<Solution> {
    Solver::new(utility, model.clone(), profile.clone(), cfg.clone())?.value_iterate()
}

pub fn finite_horizon_value(
    m: usize,
    utility: UtilitySpec,
    model: &MarketModel,
    profile: &IntensityProfile,
    cfg: &SolverConfig,
) -> Result<ValueSurface> {
    Ok(Solver::new(utility, model.clone(), profile.clone(), cfg.clone())?.finite_horizon_value(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard(b: f64) -> (MarketModel, IntensityProfile) {
        (
            MarketModel::constant(1.0, b, 0.2).unwrap(),
            IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap(),
        )
    }

    fn small_cfg() -> SolverConfig {
        SolverConfig { time_intervals: 20, time_quadrature: 32, return_quadrature: 20, ..Default::default() }
    }

    #[test]
    fn zero_drift_is_a_fixed_point() {
        let (m, p) = standard(0.0);
        for u in [UtilitySpec::power(0.5).unwrap(), UtilitySpec::log(), UtilitySpec::power(-1.0).unwrap()] {
            let s = Solver::new(u, m.clone(), p.clone(), small_cfg()).unwrap();
            let sol = s.value_iterate().unwrap();
            assert_eq!(sol.iterations, 2);
            assert_eq!(sol.value.phi().unwrap(), s.initial().phi().unwrap());
            assert!(sol.policy.values().iter().all(|&pi| pi == 0.0));
        }
    }

    #[test]
    fn constant_candidate_passes_through() {
        let (m, p) = standard(0.05);
        let s = Solver::new(UtilitySpec::power(0.5).unwrap(), m, p, small_cfg()).unwrap();
        let c = |_: f64, _: f64| 3.25;
        for pi in [0.0, 0.4, 1.0] {
            assert!((s.inner_objective(&c, 0.2, 1.5, pi).unwrap() - 3.25).abs() < 1e-12);
        }
        assert!(s.inner_objective(&c, 1.0, 1.0, 0.5).is_err());
        assert!(s.inner_objective(&c, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn hinted_and_plain_application_agree_on_policy() {
        let (m, p) = standard(0.03);
        let s = Solver::new(UtilitySpec::log(), m, p, small_cfg()).unwrap();
        let (v1, p1) = s.apply(&s.initial()).unwrap();
        let (_, p2) = s.apply_hinted(&v1, Some(&p1));
        // log maximizers do not depend on φ; near the continuous ratio b/c² = 0.75
        for (&a, &b) in p1.values().iter().zip(p2.values()) {
            assert_eq!(a, b);
            assert!((a - 0.75).abs() < 1e-2, "{a}");
        }
    }

    #[test]
    fn mismatched_surface_is_rejected() {
        let (m, p) = standard(0.05);
        let s = Solver::new(UtilitySpec::log(), m.clone(), p.clone(), small_cfg()).unwrap();
        let other = Solver::new(UtilitySpec::log(), m, p, SolverConfig { time_intervals: 10, ..small_cfg() }).unwrap();
        assert!(s.apply(&other.initial()).is_err());
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let m = MarketModel::constant(2.0, 0.05, 0.2).unwrap();
        let p = IntensityProfile::power_blowup(1.0, 1.0, 1.0).unwrap();
        assert!(Solver::new(UtilitySpec::log(), m, p, small_cfg()).is_err());
    }
}
