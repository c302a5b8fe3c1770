//! Exponent arithmetic, power-law fits over ε-ladders, and the vanishing
//! certificate.
//!
//! All exponent formulas are exact rationals so that threshold cases
//! (`α = 0` at `p = p_c`) compare exactly.

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fourier::{NormKind, NormMeasurement};

fn check_k(k: u32) -> Result<i64> {
    if !(2..=1_000_000).contains(&k) {
        return Err(invalid("k", "must be at least 2"));
    }
    Ok(k as i64)
}

/// `p_c(k) = (k² + k + 2)/2`.
pub fn critical_exponent(k: u32) -> Result<Rational64> {
    let k = check_k(k)?;
    Ok(Rational64::new(k * k + k + 2, 2))
}

/// `k(k+1)/4 − 1/2`, the exponent of `‖η‖₂`.
pub fn l2_exponent_theory(k: u32) -> Result<Rational64> {
    let k = check_k(k)?;
    Ok(Rational64::new(k * (k + 1), 4) - Rational64::new(1, 2))
}

/// Exponents of the interpolation between the `L¹` bound (`ε⁻¹`) and the
/// `L²` bound at `p′ = p/(p−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpolation {
    pub p: Rational64,
    /// `None` at `p = 1` (`p′ = ∞`).
    pub p_prime: Option<Rational64>,
    pub theta: Rational64,
    pub alpha: Rational64,
    /// `p ≤ 1`: the `L¹` endpoint itself, `α = −1`.
    pub l1_endpoint: bool,
    /// `θ = 2/p ∈ [0, 1]`, i.e. `p ≥ 2`, where Riesz–Thorin between `L¹` and
    /// `L²` applies.
    pub riesz_thorin: bool,
}

/// `α(k, p) = (1−θ)(−1) + θ(k(k+1)/4 − 1/2) = (k²+k+2)/(2p) − 1`, `θ = 2/p`.
pub fn interpolation_exponent(k: u32, p: Rational64) -> Result<Interpolation> {
    let kk = check_k(k)?;
    if !p.is_positive() {
        return Err(invalid("p", "must be positive"));
    }
    if p <= Rational64::one() {
        return Ok(Interpolation {
            p,
            p_prime: None,
            theta: Rational64::zero(),
            alpha: -Rational64::one(),
            l1_endpoint: true,
            riesz_thorin: false,
        });
    }
    let theta = Rational64::new(2, 1) / p;
    let alpha = Rational64::new(kk * kk + kk + 2, 2) / p - Rational64::one();
    debug_assert_eq!(
        alpha,
        (Rational64::one() - theta) * -Rational64::one() + theta * l2_exponent_theory(k)?
    );
    Ok(Interpolation {
        p,
        p_prime: Some(p / (p - Rational64::one())),
        theta,
        alpha,
        l1_endpoint: false,
        riesz_thorin: theta <= Rational64::one(),
    })
}

/// Rational approximation of a decimal `p` such as 3.5 (denominators ≤ 10⁴).
pub fn rational_from_f64(p: f64) -> Result<Rational64> {
    if !p.is_finite() {
        return Err(invalid("p", "must be finite"));
    }
    let den = 10_000i64;
    let num = (p * den as f64).round() as i64;
    if ((num as f64) / den as f64 - p).abs() > 1e-12 * p.abs().max(1.0) {
        return Err(invalid("p", format!("{p} is not a decimal with at most four places")));
    }
    Ok(Rational64::new(num, den))
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Dyadic scales `ε_i = 2^{−m_i}`, strictly decreasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpsLadder {
    exponents: Vec<u32>,
}

impl EpsLadder {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.len() < 4 {
            return Err(invalid("ladder", "needs at least 4 scales"));
        }
        if exponents.iter().any(|&m| !(2..=40).contains(&m)) {
            return Err(invalid("ladder", "exponents must satisfy 2 ≤ m ≤ 40 (ε ≤ 1/4)"));
        }
        if exponents.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("ladder", "scales must be strictly decreasing"));
        }
        Ok(Self { exponents })
    }

    /// `2^{−lo}, …, 2^{−hi}`.
    pub fn range(lo: u32, hi: u32) -> Result<Self> {
        Self::new((lo..=hi).collect())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.exponents.iter().map(|&m| (-(m as f64)).exp2()).collect()
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

/// Least-squares line through `(log₂ ε, log₂ value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    /// `log₂` of the fitted constant.
    pub intercept: f64,
    pub residual_max: f64,
    /// Half the spread of the leave-one-out slopes.
    pub loo_halfwidth: f64,
    pub points: usize,
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 4 {
        return Err(invalid("points", "a fit needs at least 4 points"));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 > 0.0) || !p.1.is_finite()) {
        return Err(Error::Domain(format!("power fit needs positive data, got ({}, {})", p.0, p.1)));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(e, v)| (e.log2(), v.log2())).collect();
    if logs.iter().all(|p| (p.0 - logs[0].0).abs() < 1e-12) {
        return Err(Error::Domain("power fit needs at least two distinct scales".into()));
    }
    let (slope, intercept) = least_squares(&logs);
    let residual_max = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).abs())
        .fold(0.0, f64::max);
    let loo: Vec<f64> = (0..logs.len())
        .map(|i| {
            let rest: Vec<(f64, f64)> = logs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
            least_squares(&rest).0
        })
        .collect();
    let lo = loo.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = loo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerFit {
        slope,
        intercept,
        residual_max,
        loo_halfwidth: 0.5 * (hi - lo),
        points: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    VanishingCertified,
    NotCertified,
}

/// What the certificate was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Measured `‖η̌_total‖_{p′}`.
    Direct,
    /// `(Σ_ι ‖η̌_ι‖₁)^{1−θ} · ‖η‖₂^θ`, an upper bound for `‖η̌_total‖_{p′}`.
    Interpolated,
    /// `α ≤ 0`: no decay to look for.
    None,
}

/// Inputs per scale.
#[derive(Debug, Clone, Copy)]
pub enum CertificateInput<'a> {
    /// `(ε, ‖η̌_total‖_{p′})`.
    Direct(&'a [(f64, NormMeasurement)]),
    /// `(ε, Σ_ι ‖η̌_ι‖₁)` and `(ε, ‖η‖₂)`.
    Interpolated { l1: &'a [(f64, f64)], l2: &'a [(f64, f64)] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub k: u32,
    pub p: Rational64,
    pub p_prime: Option<Rational64>,
    pub theta: Rational64,
    pub alpha: Rational64,
    pub p_critical: Rational64,
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub fit: Option<PowerFit>,
    /// Slope the fit must reach: `α/2`.
    pub required_slope: f64,
    pub explanation: String,
}

fn lookup<T: Clone>(data: &[(f64, T)], eps: f64, what: &str) -> Result<T> {
    data.iter()
        .find(|(e, _)| (e / eps - 1.0).abs() < 1e-9)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::MissingMeasurement(format!("{what} at epsilon = {eps}")))
}

/// Certify `‖η̌_{Γ_ε}‖_{p′} → 0` from ladder measurements: the fitted slope
/// (direct or via the interpolated bound) must reach `α(k, p)/2 > 0`. Then
/// `‖f‖_∞ ≤ ‖f‖_p ‖η̌_{Γ_ε}‖_{p′} → 0` for `f ∈ L^p` with Fourier support on
/// the curve.
pub fn vanishing_certificate(
    k: u32,
    p: Rational64,
    ladder: &EpsLadder,
    input: CertificateInput<'_>,
) -> Result<ThresholdReport> {
    let interp = interpolation_exponent(k, p)?;
    let p_critical = critical_exponent(k)?;
    if interp.l1_endpoint {
        return Err(invalid("p", "p must exceed 1"));
    }
    let alpha = interp.alpha;
    let mut report = ThresholdReport {
        k,
        p,
        p_prime: interp.p_prime,
        theta: interp.theta,
        alpha,
        p_critical,
        verdict: Verdict::NotCertified,
        evidence: Evidence::None,
        fit: None,
        required_slope: 0.5 * to_f64(alpha),
        explanation: String::new(),
    };
    if !alpha.is_positive() {
        report.explanation = format!(
            "alpha = {alpha} <= 0 since p = {p} >= p_c = {p_critical}: no decay of the dual norm is expected at or above the threshold"
        );
        return Ok(report);
    }
    let p_prime = to_f64(interp.p_prime.expect("p > 1"));
    let points: Vec<(f64, f64)> = match input {
        CertificateInput::Direct(data) => {
            report.evidence = Evidence::Direct;
            let mut pts = Vec::new();
            for eps in ladder.epsilons() {
                let m = lookup(data, eps, "dual norm")?;
                let matches = match m.kind {
                    NormKind::Lp(q) => (q - p_prime).abs() < 1e-9,
                    NormKind::L2 => (p_prime - 2.0).abs() < 1e-12,
                    NormKind::L1 => false,
                };
                if !matches {
                    return Err(invalid("measurements", format!("expected an L^{p_prime} norm, got {:?}", m.kind)));
                }
                if m.admissible() {
                    pts.push((eps, m.value));
                }
            }
            pts
        }
        CertificateInput::Interpolated { l1, l2 } => {
            if !interp.riesz_thorin {
                return Err(invalid("p", "the interpolated bound needs p >= 2"));
            }
            report.evidence = Evidence::Interpolated;
            let theta = to_f64(interp.theta);
            ladder
                .epsilons()
                .into_iter()
                .map(|eps| {
                    let a = lookup(l1, eps, "summed L1 norm")?;
                    let b = lookup(l2, eps, "L2 norm")?;
                    Ok((eps, a.powf(1.0 - theta) * b.powf(theta)))
                })
                .collect::<Result<_>>()?
        }
    };
    if points.len() < 4 {
        return Err(Error::MissingMeasurement(format!(
            "only {} admissible measurements on the ladder; a fit needs 4",
            points.len()
        )));
    }
    let fit = fit_power_law(&points)?;
    report.fit = Some(fit);
    if fit.slope >= report.required_slope {
        report.verdict = Verdict::VanishingCertified;
        report.explanation = format!(
            "fitted slope {:.4} >= alpha/2 = {:.4}: ||f||_inf <= ||f||_p * ||eta_check||_(p') -> 0",
            fit.slope, report.required_slope
        );
    } else {
        report.explanation = format!(
            "fitted slope {:.4} < alpha/2 = {:.4}: decay not established",
            fit.slope, report.required_slope
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn critical_exponents() {
        let got: Vec<Rational64> = (2..=6).map(|k| critical_exponent(k).unwrap()).collect();
        assert_eq!(got, vec![r(4, 1), r(7, 1), r(11, 1), r(16, 1), r(22, 1)]);
        assert!(critical_exponent(1).is_err());
    }

    #[test]
    fn l2_exponents() {
        assert_eq!(l2_exponent_theory(2).unwrap(), r(1, 1));
        assert_eq!(l2_exponent_theory(3).unwrap(), r(5, 2));
        assert_eq!(l2_exponent_theory(4).unwrap(), r(9, 2));
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolation_exponent(2, r(4, 1)).unwrap().alpha, r(0, 1));
        assert_eq!(interpolation_exponent(2, r(2, 1)).unwrap().alpha, r(1, 1));
        assert_eq!(interpolation_exponent(3, r(7, 1)).unwrap().alpha, r(0, 1));
        assert_eq!(interpolation_exponent(2, r(3, 1)).unwrap().alpha, r(1, 3));
        assert_eq!(interpolation_exponent(2, r(5, 1)).unwrap().alpha, r(-1, 5));
        let e = interpolation_exponent(2, r(1, 1)).unwrap();
        assert!(e.l1_endpoint);
        assert_eq!(e.alpha, r(-1, 1));
    }

    #[test]
    fn alpha_vanishes_at_threshold() {
        for k in 2..=10 {
            let pc = critical_exponent(k).unwrap();
            assert_eq!(interpolation_exponent(k, pc).unwrap().alpha, Rational64::zero());
            assert_eq!(interpolation_exponent(k, r(2, 1)).unwrap().alpha, l2_exponent_theory(k).unwrap());
        }
    }

    #[test]
    fn fit_exact_on_synthetic_power_laws() {
        let eps: Vec<f64> = (4..=9).map(|m| (-(m as f64)).exp2()).collect();
        let f = fit_power_law(&eps.iter().map(|&e| (e, e * e)).collect::<Vec<_>>()).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && f.residual_max < 1e-12);
        let g = fit_power_law(&eps.iter().map(|&e| (e, 3.0 * e.powf(1.0 / 3.0))).collect::<Vec<_>>()).unwrap();
        assert!((g.slope - 1.0 / 3.0).abs() < 1e-12);
        assert!((g.intercept - 3f64.log2()).abs() < 1e-12);
        assert!(g.loo_halfwidth < 1e-12);
    }

    #[test]
    fn fit_rejects_nonpositive() {
        let pts = [(0.5, 1.0), (0.25, 0.0), (0.125, 1.0), (0.0625, 1.0)];
        assert!(matches!(fit_power_law(&pts), Err(Error::Domain(_))));
        assert!(fit_power_law(&pts[..3]).is_err());
    }

    #[test]
    fn ladder_validation() {
        assert!(EpsLadder::range(4, 9).is_ok());
        assert!(EpsLadder::new(vec![4, 5, 6]).is_err());
        assert!(EpsLadder::new(vec![1, 2, 3, 4]).is_err());
        assert!(EpsLadder::new(vec![4, 6, 5, 7]).is_err());
    }

    fn synthetic(ladder: &EpsLadder, p_prime: f64, slope: f64) -> Vec<(f64, NormMeasurement)> {
        ladder
            .epsilons()
            .into_iter()
            .map(|e| {
                (
                    e,
                    NormMeasurement {
                        value: 0.7 * e.powf(slope),
                        kind: NormKind::Lp(p_prime),
                        truncation: 0.0,
                        nodes: 1,
                        rel_error: 0.01,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn certificate_verdicts() {
        let ladder = EpsLadder::range(4, 9).unwrap();
        let data = synthetic(&ladder, 1.5, 0.33);
        let rep = vanishing_certificate(2, r(3, 1), &ladder, CertificateInput::Direct(&data)).unwrap();
        assert_eq!(rep.verdict, Verdict::VanishingCertified);
        assert_eq!(rep.alpha, r(1, 3));
        let slow = synthetic(&ladder, 1.5, 0.1);
        let rep = vanishing_certificate(2, r(3, 1), &ladder, CertificateInput::Direct(&slow)).unwrap();
        assert_eq!(rep.verdict, Verdict::NotCertified);
        for (p, alpha) in [(r(4, 1), r(0, 1)), (r(5, 1), r(-1, 5))] {
            let rep = vanishing_certificate(2, p, &ladder, CertificateInput::Direct(&[])).unwrap();
            assert_eq!(rep.verdict, Verdict::NotCertified);
            assert_eq!(rep.alpha, alpha);
        }
    }

    #[test]
    fn certificate_reports_missing_scales() {
        let ladder = EpsLadder::range(4, 9).unwrap();
        let mut data = synthetic(&ladder, 1.5, 0.33);
        data.pop();
        assert!(matches!(
            vanishing_certificate(2, r(3, 1), &ladder, CertificateInput::Direct(&data)),
            Err(Error::MissingMeasurement(_))
        ));
    }

    #[test]
    fn interpolated_certificate() {
        let ladder = EpsLadder::range(4, 9).unwrap();
        let eps = ladder.epsilons();
        let l1: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 150.0 / e)).collect();
        let l2: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 0.02 * e)).collect();
        let input = CertificateInput::Interpolated { l1: &l1, l2: &l2 };
        for (p, ok) in [(r(2, 1), true), (r(3, 1), true), (r(7, 2), true), (r(4, 1), false), (r(5, 1), false)] {
            let rep = vanishing_certificate(2, p, &ladder, input).unwrap();
            assert_eq!(rep.verdict == Verdict::VanishingCertified, ok, "p = {p}");
        }
    }

    proptest! {
        #[test]
        fn alpha_monotone(k in 2u32..10, a in 3i64..60, b in 3i64..60) {
            prop_assume!(a != b);
            let (lo, hi) = (a.min(b), a.max(b));
            let x = interpolation_exponent(k, r(lo, 2)).unwrap().alpha;
            let y = interpolation_exponent(k, r(hi, 2)).unwrap().alpha;
            prop_assert!(x > y);
            let z = interpolation_exponent(k + 1, r(lo, 2)).unwrap().alpha;
            prop_assert!(z > x);
        }

        #[test]
        fn alpha_sign_matches_threshold(k in 2u32..10, num in 5i64..200) {
            let p = r(num, 4);
            let e = interpolation_exponent(k, p).unwrap();
            let pc = critical_exponent(k).unwrap();
            prop_assert_eq!(e.alpha.is_positive(), p < pc);
        }

        #[test]
        fn holder_exponents(k in 2u32..10, num in 5i64..200) {
            let p = r(num, 4);
            let e = interpolation_exponent(k, p).unwrap();
            let pp = e.p_prime.unwrap();
            // 1/p′ = (1 − θ)·1 + θ·(1/2)
            prop_assert_eq!(pp.recip(), (Rational64::one() - e.theta) + e.theta * r(1, 2));
            prop_assert_eq!(p.recip() + pp.recip(), Rational64::one());
        }

        #[test]
        fn fit_equivariant(c in 0.01f64..100.0, s in -3.0f64..3.0) {
            let eps: Vec<f64> = (4..=9).map(|m| (-(m as f64)).exp2()).collect();
            let base: Vec<(f64, f64)> = eps.iter().map(|&e| (e, e.powf(s) * (1.0 + 0.1 * e))).collect();
            let scaled: Vec<(f64, f64)> = base.iter().map(|&(e, v)| (e, c * v)).collect();
            let a = fit_power_law(&base).unwrap();
            let b = fit_power_law(&scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - c.log2()).abs() < 1e-9);
        }

        #[test]
        fn certificate_monotone_in_p(num in 8i64..16) {
            // Certified at p₀ ⇒ certified at every smaller p ≥ 2 on the same data.
            let ladder = EpsLadder::range(4, 9).unwrap();
            let eps = ladder.epsilons();
            let l1: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 150.0 / e)).collect();
            let l2: Vec<(f64, f64)> = eps.iter().map(|&e| (e, 0.02 * e)).collect();
            let input = CertificateInput::Interpolated { l1: &l1, l2: &l2 };
            let p0 = r(num, 4);
            let top = vanishing_certificate(2, p0, &ladder, input).unwrap();
            if top.verdict == Verdict::VanishingCertified {
                for m in 8..num {
                    let rep = vanishing_certificate(2, r(m, 4), &ladder, input).unwrap();
                    prop_assert_eq!(rep.verdict, Verdict::VanishingCertified);
                }
            }
        }
    }
}
