//! Smooth cutoff profiles: the box bump `φ(y) = Π ψ(y_j)` and the radial
//! profile behind `φ̃`.

use crate::error::{invalid, Result};

/// Inner half-width of the box bump.
pub const INNER_HALFWIDTH: f64 = 1e-2;
/// Outer half-width (support) of the box bump.
pub const OUTER_HALFWIDTH: f64 = 2e-2;
/// `φ̃ = 1` within this distance of the curve.
pub const TILDE_INNER_RADIUS: f64 = 1e-4;
/// `φ̃ = 0` beyond this distance.
pub const TILDE_OUTER_RADIUS: f64 = 2e-4;

#[inline]
fn h(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// C^∞ step: 0 for `u ≤ 0`, 1 for `u ≥ 1`.
#[inline]
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = h(u);
        a / (a + h(1.0 - u))
    }
}

/// One-dimensional plateau profile `ψ`: 1 on `[-a, a]`, 0 outside `(-2a, 2a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    a: f64,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self { a: INNER_HALFWIDTH }
    }
}

impl BumpProfile {
    pub fn new(inner_halfwidth: f64) -> Result<Self> {
        if !(inner_halfwidth > 0.0 && inner_halfwidth.is_finite()) {
            return Err(invalid("inner_halfwidth", "must be positive and finite"));
        }
        Ok(Self { a: inner_halfwidth })
    }

    pub fn inner_halfwidth(&self) -> f64 {
        self.a
    }

    pub fn outer_halfwidth(&self) -> f64 {
        2.0 * self.a
    }

    #[inline]
    pub fn psi(&self, s: f64) -> f64 {
        smooth_step((2.0 * self.a - s.abs()) / self.a)
    }

    /// Tensor bump `φ(y) = Π_j ψ(y_j)`.
    #[inline]
    pub fn phi(&self, y: &[f64]) -> f64 {
        let mut v = 1.0;
        for &c in y {
            if c.abs() >= 2.0 * self.a {
                return 0.0;
            }
            v *= self.psi(c);
        }
        v
    }
}

/// Radial profile of `φ̃` as a function of the distance to the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeBump {
    inner: f64,
    outer: f64,
}

impl Default for TildeBump {
    fn default() -> Self {
        Self {
            inner: TILDE_INNER_RADIUS,
            outer: TILDE_OUTER_RADIUS,
        }
    }
}

impl TildeBump {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner && outer.is_finite()) {
            return Err(invalid("tilde radii", format!("need 0 < inner < outer, got {inner}, {outer}")));
        }
        Ok(Self { inner, outer })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer
    }

    #[inline]
    pub fn profile(&self, distance: f64) -> f64 {
        smooth_step((self.outer - distance) / (self.outer - self.inner))
    }
}
