//! CRRA utilities: power `x^γ/γ` and logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UtilitySpec {
    /// `U(x) = x^γ / γ` with `γ < 1`, `γ ≠ 0`.
    Power { gamma: f64 },
    /// `U(x) = ln x`.
    Log,
}

/// Constants of the growth conditions `U⁺(x) ≤ C(1 + x^p)` and, when
/// `U(0) = −∞`, `U⁻(x) ≤ C'(1 + x^{p'})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub c: f64,
    pub p: f64,
    pub lower: Option<(f64, f64)>,
}

impl UtilitySpec {
    pub fn power(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma >= 1.0 || gamma == 0.0 {
            return Err(Error::invalid("utility.gamma", format!("need gamma < 1 and gamma != 0, got {gamma}")));
        }
        Ok(UtilitySpec::Power { gamma })
    }

    pub fn log() -> Self {
        UtilitySpec::Log
    }

    /// Re-checks the parameter of a value built directly from the enum.
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Power { gamma } => UtilitySpec::power(gamma).map(|_| ()),
            UtilitySpec::Log => Ok(()),
        }
    }

    /// Relative risk aversion index `γ` of the power family, `0` for the logarithm.
    pub fn gamma(&self) -> f64 {
        match *self {
            UtilitySpec::Power { gamma } => gamma,
            UtilitySpec::Log => 0.0,
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(format!("utility needs positive wealth, got {x}")));
        }
        Ok(self.eval(x))
    }

    /// Unchecked evaluation; `x = 0` gives `U(0⁺)` and negative `x` gives NaN.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Power { gamma } => x.powf(gamma) / gamma,
            UtilitySpec::Log => x.ln(),
        }
    }

    /// `U'(x)`.
    #[inline]
    pub fn marginal(&self, x: f64) -> f64 {
        match *self {
            UtilitySpec::Power { gamma } => x.powf(gamma - 1.0),
            UtilitySpec::Log => 1.0 / x,
        }
    }

    /// Fenchel–Legendre transform `Ũ(y) = sup_{x>0} [U(x) − xy]`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("conjugate needs y > 0, got {y}")));
        }
        Ok(match *self {
            UtilitySpec::Power { gamma } => (1.0 - gamma) / gamma * y.powf(gamma / (gamma - 1.0)),
            UtilitySpec::Log => -y.ln() - 1.0,
        })
    }

    pub fn unbounded_below(&self) -> bool {
        match *self {
            UtilitySpec::Power { gamma } => gamma < 0.0,
            UtilitySpec::Log => true,
        }
    }

    pub fn growth(&self) -> GrowthConstants {
        match *self {
            UtilitySpec::Power { gamma } if gamma > 0.0 => GrowthConstants { c: 1.0 / gamma, p: gamma, lower: None },
            // U ≤ 0, so any (C, p) bounds U⁺; U⁻(x) = x^γ/|γ|.
            UtilitySpec::Power { gamma } => GrowthConstants {
                c: 1.0,
                p: 0.5,
                lower: Some((1.0 / gamma.abs(), gamma)),
            },
            // ln x ≤ x^p/(e·p) for every p > 0, and −ln x ≤ x^{p'}/(e·|p'|) for every p' < 0.
            UtilitySpec::Log => {
                let p = 0.5;
                let p_lower: f64 = -0.5;
                GrowthConstants {
                    c: 1.0 / (std::f64::consts::E * p),
                    p,
                    lower: Some((1.0 / (std::f64::consts::E * p_lower.abs()), p_lower)),
                }
            }
        }
    }

    /// Whether a jump moment order `r` is admissible for the lower-tail integrability
    /// condition: `r < p'` for power utilities, any `r < 0` for the logarithm (where
    /// `p'` can be taken arbitrarily close to zero).
    pub fn admits_lower_moment_order(&self, r: f64) -> bool {
        match *self {
            UtilitySpec::Power { gamma } => gamma < 0.0 && r < gamma,
            UtilitySpec::Log => r < 0.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            UtilitySpec::Power { gamma } => format!("power(gamma={gamma})"),
            UtilitySpec::Log => "log".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluates_reference_points() {
        assert_eq!(UtilitySpec::power(0.5).unwrap().evaluate(1.0).unwrap(), 2.0);
        assert_eq!(UtilitySpec::log().evaluate(1.0).unwrap(), 0.0);
        assert_eq!(UtilitySpec::power(-1.0).unwrap().evaluate(2.0).unwrap(), -0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(UtilitySpec::power(1.0).is_err());
        assert!(UtilitySpec::power(0.0).is_err());
        assert!(UtilitySpec::power(f64::NAN).is_err());
        let u = UtilitySpec::power(0.5).unwrap();
        assert!(matches!(u.evaluate(0.0), Err(Error::Domain(_))));
        assert!(matches!(u.evaluate(-1.0), Err(Error::Domain(_))));
        assert!(matches!(u.conjugate(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn conjugate_closed_forms() {
        let u = UtilitySpec::power(0.5).unwrap();
        assert!((u.conjugate(2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((UtilitySpec::log().conjugate(1.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_matches_brute_force_supremum() {
        // sup over a log-spaced grid of 1e5 points in [1e-4, 1e4]
        let u = UtilitySpec::power(0.5).unwrap();
        let n = 100_000;
        let (lo, hi) = (1e-4f64.ln(), 1e4f64.ln());
        let brute = (0..n)
            .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
            .map(|x| u.eval(x) - x)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((brute - 1.0).abs() < 1e-6, "brute {brute}");
        assert!((u.conjugate(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn growth_bounds_hold_on_grid() {
        for u in [
            UtilitySpec::power(0.5).unwrap(),
            UtilitySpec::power(-2.0).unwrap(),
            UtilitySpec::log(),
        ] {
            let g = u.growth();
            assert!(g.p > 0.0 && g.p < 1.0);
            for i in 0..400 {
                let x = (-10.0 + 0.05 * i as f64).exp();
                let v = u.eval(x);
                assert!(v.max(0.0) <= g.c * (1.0 + x.powf(g.p)) + 1e-12, "{u:?} upper at {x}");
                if let Some((c, p)) = g.lower {
                    assert!(p < 0.0);
                    assert!((-v).max(0.0) <= c * (1.0 + x.powf(p)) + 1e-12, "{u:?} lower at {x}");
                }
            }
            assert_eq!(g.lower.is_some(), u.unbounded_below());
        }
    }

    #[test]
    fn marginal_is_decreasing_and_inada() {
        for u in [UtilitySpec::power(0.3).unwrap(), UtilitySpec::power(-1.0).unwrap(), UtilitySpec::log()] {
            assert!(u.marginal(1e-12) > 1e5);
            assert!(u.marginal(1e12) < 1e-3);
            assert!(u.marginal(1.0) > u.marginal(2.0));
        }
    }

    fn utilities() -> impl Strategy<Value = UtilitySpec> {
        prop_oneof![
            (-3.0f64..0.95).prop_filter("nonzero", |g| g.abs() > 0.05).prop_map(|g| UtilitySpec::Power { gamma: g }),
            Just(UtilitySpec::Log),
        ]
    }

    proptest! {
        #[test]
        fn fenchel_inequality(u in utilities(), lx in -5.0f64..5.0, ly in -5.0f64..5.0) {
            let (x, y) = (lx.exp(), ly.exp());
            let lhs = u.eval(x);
            let rhs = u.conjugate(y).unwrap() + x * y;
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn biconjugate_recovers_utility(u in utilities(), lx in -3.0f64..3.0) {
            // 1-D golden-section minimization of Ũ(y) + xy over ln y
            let x = lx.exp();
            let h = |ly: f64| { let y: f64 = ly.exp(); u.conjugate(y).unwrap() + x * y };
            let (mut a, mut b) = (-40.0f64, 40.0f64);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..200 {
                let c = b - r * (b - a);
                let d = a + r * (b - a);
                if h(c) < h(d) { b = d } else { a = c }
            }
            let inf = h(0.5 * (a + b));
            prop_assert!((inf - u.eval(x)).abs() < 1e-8 * (1.0 + u.eval(x).abs()));
        }
    }
}
