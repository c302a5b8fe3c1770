//! Inverse Fourier transforms of the cutoffs and their norms.
//!
//! Convention: `f̂(u) = ∫ f(y) e^{−2πi u·y} dy`, `f̌(x) = ∫ f(ξ) e^{+2πi x·ξ} dξ`,
//! so Plancherel holds with constant 1.

pub mod atom;
pub mod chart;
pub mod l1;
pub mod lp;
pub mod total;

use serde::{Deserialize, Serialize};

pub use atom::{AtomResolution, TubeAtom};
pub use chart::{tube_integral_in_chart, ChartQuadrature, ChartResolution, CurveChart};
pub use l1::{l1_norm_tube, L1Options};
pub use lp::{lp_norm_total, lp_norms_total, lp_norms_with_chart, LpOptions, LpReport};
pub use total::{inverse_ft_total, inverse_ft_total_batch, l2_norm_eta, sum_l1_tubes, sum_over_tubes, TubeSum, TubeSumOptions};

pub(crate) const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative error above which a measurement is not admitted into a fit.
pub const ADMISSIBLE_REL_ERROR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "exponent")]
pub enum NormKind {
    L1,
    L2,
    /// `L^{p′}` with the given exponent.
    Lp(f64),
}

/// A measured norm with its error budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMeasurement {
    pub value: f64,
    pub kind: NormKind,
    /// Truncation radius of the integration domain (meaning depends on the
    /// measurement: a dual-box half-width or a spatial radius).
    pub truncation: f64,
    pub nodes: usize,
    pub rel_error: f64,
}

impl NormMeasurement {
    pub fn admissible(&self) -> bool {
        self.value > 0.0 && self.rel_error.is_finite() && self.rel_error <= ADMISSIBLE_REL_ERROR
    }

    pub fn abs_error(&self) -> f64 {
        self.value * self.rel_error
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::composite_rule;
    use num_complex::Complex64;

    /// Plancherel with constant 1 for `f(y) = e^{−π y²} (1 + y)`.
    #[test]
    fn plancherel_is_constant_free() {
        let rule = composite_rule(&[-8.0, 8.0], 0.25, 12);
        let f = |y: f64| (-std::f64::consts::PI * y * y).exp() * (1.0 + y);
        let space: f64 = rule.integrate(|y| f(y) * f(y));
        let ft = |u: f64| -> Complex64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&y, &w)| Complex64::from_polar(w * f(y), -TWO_PI * u * y))
                .sum()
        };
        let freq: f64 = rule.integrate(|u| ft(u).norm_sqr());
        assert!((space - freq).abs() < 1e-6 * space, "{space} vs {freq}");
        // The Gaussian is its own transform under this convention.
        let g = |y: f64| (-std::f64::consts::PI * y * y).exp();
        let at = |u: f64| -> Complex64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&y, &w)| Complex64::from_polar(w * g(y), -TWO_PI * u * y))
                .sum()
        };
        assert!((at(0.7).re - g(0.7)).abs() < 1e-10);
    }

    #[test]
    fn admissibility() {
        let m = NormMeasurement {
            value: 1.0,
            kind: NormKind::L2,
            truncation: 0.0,
            nodes: 1,
            rel_error: 0.04,
        };
        assert!(m.admissible());
        assert!(!NormMeasurement { rel_error: 0.06, ..m.clone() }.admissible());
        assert!(!NormMeasurement { value: 0.0, ..m }.admissible());
    }
}
