//! Fixed-order quadrature rules, normalized as probability expectations.

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

/// Nodes and weights approximating `E[g(ξ)]` for `ξ ~ N(0, 1)`.
///
/// Built from Gauss–Hermite with the change of variable `ξ = √2·x`; the
/// weights sum to one up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussHermite::new(order)
            .map_err(|_| Error::invalid("return_quadrature", "Gauss-Hermite order must be >= 2"))?;
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / std::f64::consts::PI.sqrt()))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre on `(0, 1)` with weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitIntervalRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitIntervalRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|_| Error::invalid("time_quadrature", "Gauss-Legendre order must be >= 2"))?;
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_rule_reproduces_gaussian_moments() {
        let rule = NormalRule::new(40).unwrap();
        let m0: f64 = rule.weights.iter().sum();
        let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
        let m4: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
        // E[e^{aξ}] = e^{a²/2}
        let mgf: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * (0.3 * x).exp()).sum();
        assert!((mgf - (0.045f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn unit_rule_integrates_polynomials() {
        let rule = UnitIntervalRule::new(64).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let cube: f64 = rule.nodes.iter().zip(&rule.weights).map(|(u, w)| w * u.powi(3)).sum();
        assert!((cube - 0.25).abs() < 1e-14);
        assert!(rule.nodes.iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn rejects_degenerate_orders() {
        assert!(NormalRule::new(1).is_err());
        assert!(UnitIntervalRule::new(0).is_err());
    }
}
