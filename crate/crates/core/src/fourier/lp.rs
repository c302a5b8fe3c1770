//! `‖η̌_total‖_{p′}` by stratified Monte Carlo in space.
//!
//! Strata are polar cells of the half-plane `θ ∈ [0, π)` (the other half
//! follows from `|η̌(−x)| = |η̌(x)|`): angular sectors times dyadic radial
//! shells from an inner disk of radius `1/ε` out to `ε²|x| = U`. A pilot pass
//! sizes a Neyman allocation of the remaining budget. Every requested `p′` is
//! estimated from the same samples. The mass beyond the last shell is
//! extrapolated geometrically from the last two shells.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chart::{ChartResolution, CurveChart};
use super::{NormKind, NormMeasurement, ADMISSIBLE_REL_ERROR};
use crate::cover::TubeCover;
use crate::error::{invalid, Error, Result};
use crate::mc::{mean_variance, neyman_allocation, stratum_rng};
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    /// Total number of evaluations of `η̌_total`, pilot included.
    pub samples: usize,
    /// Pilot evaluations per stratum.
    pub pilot: usize,
    pub sectors: usize,
    /// Outer radius in normal-dual units: `ε²|x| ≤ u_max`.
    pub u_max: f64,
    /// Index into the `p′` list whose variance drives the allocation.
    pub allocate_for: usize,
    pub seed: u64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            samples: 16_384,
            pilot: 4,
            sectors: 32,
            u_max: 131_072.0,
            allocate_for: 0,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpReport {
    pub epsilon: f64,
    pub p_primes: Vec<f64>,
    pub measurements: Vec<NormMeasurement>,
    /// `∫ |η̌|^{p′}` over the sampled region.
    pub integrals: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Extrapolated mass beyond the outer radius.
    pub tails: Vec<f64>,
    /// Outer radius of each shell (the first "shell" is the inner disk).
    pub shell_radii: Vec<f64>,
    /// Per `p′`, the estimated mass of each shell.
    pub shell_masses: Vec<Vec<f64>>,
    pub samples: usize,
    pub strata: usize,
}

#[derive(Debug, Clone, Copy)]
struct Stratum {
    r_lo: f64,
    r_hi: f64,
    th_lo: f64,
    th_hi: f64,
    shell: usize,
}

impl Stratum {
    fn area(&self) -> f64 {
        0.5 * (self.r_hi * self.r_hi - self.r_lo * self.r_lo) * (self.th_hi - self.th_lo)
    }
}

/// `|η̌|` at `n` uniform points of one stratum.
fn sample(chart: &CurveChart, st: &Stratum, n: usize, seed: u64, stream: u64) -> Result<Vec<f64>> {
    let mut rng = stratum_rng(seed, stream);
    let (a2, b2) = (st.r_lo * st.r_lo, st.r_hi * st.r_hi);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            let v: f64 = rng.gen();
            let r = (a2 + u * (b2 - a2)).sqrt();
            let th = st.th_lo + v * (st.th_hi - st.th_lo);
            let x = [r * th.cos(), r * th.sin()];
            Ok(chart.inverse_ft(&x)?.norm())
        })
        .collect()
}

fn geometric_tail(prev: f64, last: f64) -> f64 {
    if last <= 0.0 {
        return 0.0;
    }
    let r = last / prev;
    if !(prev > 0.0) || r >= 0.9 {
        f64::INFINITY
    } else {
        last * r / (1.0 - r)
    }
}

/// `‖η̌_total‖_{p′}` for each requested `p′ ∈ [1, 2]` (planar curves).
pub fn lp_norms_total(cover: &TubeCover, p_primes: &[f64], opts: &LpOptions) -> Result<LpReport> {
    if cover.k() != 2 {
        return Err(invalid("k", "spatial Monte Carlo is implemented for planar curves (k = 2)"));
    }
    if p_primes.is_empty() || p_primes.iter().any(|p| !(1.0..=2.0).contains(p)) {
        return Err(invalid("p_prime", "each exponent must lie in [1, 2]"));
    }
    if opts.allocate_for >= p_primes.len() || opts.sectors == 0 || opts.pilot < 2 {
        return Err(invalid("budget", "need a valid allocation exponent, sectors ≥ 1, pilot ≥ 2"));
    }
    let chart = CurveChart::build(cover, ChartResolution::new(opts.u_max))?;
    lp_norms_with_chart(&chart, p_primes, opts)
}

pub fn lp_norms_with_chart(chart: &CurveChart, p_primes: &[f64], opts: &LpOptions) -> Result<LpReport> {
    let eps = chart.epsilon();
    let r_in = 1.0 / eps;
    let r_out = opts.u_max / (eps * eps);
    let mut radii = vec![0.0, r_in];
    while *radii.last().unwrap() < r_out * (1.0 - 1e-12) {
        let next = (2.0 * radii.last().unwrap()).min(r_out);
        radii.push(next);
    }
    let shells = radii.len() - 1;
    let dth = std::f64::consts::PI / opts.sectors as f64;
    let strata: Vec<Stratum> = (0..shells)
        .flat_map(|s| {
            let (lo, hi) = (radii[s], radii[s + 1]);
            (0..opts.sectors).map(move |a| Stratum {
                r_lo: lo,
                r_hi: hi,
                th_lo: a as f64 * dth,
                th_hi: (a + 1) as f64 * dth,
                shell: s,
            })
        })
        .collect();
    let pilot_total = opts.pilot * strata.len();
    if opts.samples < pilot_total {
        return Err(invalid("budget", format!("at least {pilot_total} samples needed for the pilot pass")));
    }
    let pilot: Vec<Vec<f64>> = strata
        .par_iter()
        .enumerate()
        .map(|(i, st)| sample(chart, st, opts.pilot, opts.seed, 2 * i as u64))
        .collect::<Result<_>>()?;
    let q = p_primes[opts.allocate_for];
    let scores: Vec<f64> = strata
        .iter()
        .zip(&pilot)
        .map(|(st, v)| {
            let f: Vec<f64> = v.iter().map(|a| a.powf(q)).collect();
            let (m, var) = mean_variance(&f);
            // A stratum whose pilot saw nothing still gets weight via its mean.
            st.area() * var.sqrt().max(0.1 * m)
        })
        .collect();
    let extra = neyman_allocation(&scores, opts.samples - pilot_total, 0);
    let main: Vec<Vec<f64>> = strata
        .par_iter()
        .enumerate()
        .map(|(i, st)| sample(chart, st, extra[i], opts.seed, 2 * i as u64 + 1))
        .collect::<Result<_>>()?;

    let np = p_primes.len();
    let mut shell_masses = vec![vec![0.0; shells]; np];
    let mut integrals = Vec::with_capacity(np);
    let mut std_errors = Vec::with_capacity(np);
    let mut tails = Vec::with_capacity(np);
    let mut measurements = Vec::with_capacity(np);
    for (j, &p) in p_primes.iter().enumerate() {
        let mut terms = Vec::with_capacity(strata.len());
        let mut var_terms = Vec::with_capacity(strata.len());
        for (i, st) in strata.iter().enumerate() {
            let f: Vec<f64> = pilot[i].iter().chain(&main[i]).map(|a| a.powf(p)).collect();
            let (m, var) = mean_variance(&f);
            // Both half-planes.
            let w = 2.0 * st.area();
            terms.push(w * m);
            var_terms.push(w * w * var / f.len() as f64);
            shell_masses[j][st.shell] += w * m;
        }
        let integral = pairwise_sum(&terms);
        let se = pairwise_sum(&var_terms).sqrt();
        let tail = if shells >= 3 {
            geometric_tail(shell_masses[j][shells - 2], shell_masses[j][shells - 1])
        } else {
            0.0
        };
        let rel = (se + tail) / integral / p;
        integrals.push(integral);
        std_errors.push(se);
        tails.push(tail);
        measurements.push(NormMeasurement {
            value: (integral + tail).powf(1.0 / p),
            kind: NormKind::Lp(p),
            truncation: r_out,
            nodes: opts.samples,
            rel_error: rel,
        });
    }
    Ok(LpReport {
        epsilon: eps,
        p_primes: p_primes.to_vec(),
        measurements,
        integrals,
        std_errors,
        tails,
        shell_radii: radii[1..].to_vec(),
        shell_masses,
        samples: opts.samples,
        strata: strata.len(),
    })
}

/// `‖η̌_total‖_{p′}`; an accuracy error when the estimate is not admissible.
pub fn lp_norm_total(cover: &TubeCover, p_prime: f64, budget: &LpOptions) -> Result<NormMeasurement> {
    let report = lp_norms_total(cover, &[p_prime], budget)?;
    let m = report.measurements.into_iter().next().expect("one exponent");
    if m.rel_error > ADMISSIBLE_REL_ERROR || !m.rel_error.is_finite() {
        return Err(Error::Accuracy {
            what: format!("L^{p_prime} norm of the inverse transform"),
            estimate: m.value,
            bound: m.rel_error * m.value,
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_extrapolation() {
        assert_eq!(geometric_tail(1.0, 0.0), 0.0);
        assert!((geometric_tail(1.0, 0.25) - 0.25 / 3.0).abs() < 1e-15);
        assert!(geometric_tail(1.0, 0.95).is_infinite());
    }

    #[test]
    fn rejects_exponents_outside_conjugate_range() {
        let cover = TubeCover::new(&crate::curve::CurveSpec::moment(2).unwrap(), 0.25, 16).unwrap();
        assert!(lp_norms_total(&cover, &[2.5], &LpOptions::default()).is_err());
        assert!(lp_norms_total(&cover, &[0.5], &LpOptions::default()).is_err());
    }
}
