//! The extension integral `I(x) = ∫₀¹ e^{i P_x(t)} dt`, `P_x(t) = Σ_j x_j t^j`,
//! and dyadic-shell masses `S_j = ∫_{2^j ≤ ‖x‖_∞ < 2^{j+1}} |I(x)|^p dx`.

use num_complex::Complex64;
use num_rational::Rational64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mc::{mean_variance, stratum_rng};
use crate::quadrature::{gauss_legendre, pairwise_sum, pairwise_sum_complex};
use crate::scaling::{critical_exponent, to_f64};

/// Largest number of panels a single evaluation may use.
const PANEL_BUDGET: usize = 1 << 22;
const LOW_ORDER: usize = 6;
const HIGH_ORDER: usize = 10;
/// Sampling boost in cells where `P′_x` can vanish on `[0, 1]`.
const STATIONARY_BOOST: f64 = 8.0;

/// Coefficients `x₁, …, x_k` of `P_x(t) = Σ_j x_j t^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    x: Vec<f64>,
}

impl PhaseVector {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x", "need at least one finite coefficient"));
        }
        Ok(Self { x })
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.x
    }

    pub fn phase(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.x.iter().rev() {
            acc = (acc + c) * t;
        }
        acc
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &c) in self.x.iter().enumerate().rev() {
            acc = acc * t + (j + 1) as f64 * c;
        }
        acc
    }

    /// `max_{[0,1]} |P″| ≤ Σ_j j(j−1)|x_j|`.
    fn curvature_bound(&self) -> f64 {
        self.x.iter().enumerate().map(|(i, c)| ((i + 1) * i) as f64 * c.abs()).sum()
    }
}

/// A certified value of `I(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckValue {
    pub value: Complex64,
    /// `|I_high − I_low|` summed over panels.
    pub error: f64,
    pub panels: usize,
}

/// Breakpoints with phase variation `≤ π/(2·refine)` per panel, plus the
/// sign changes of `P′`.
fn panels(x: &PhaseVector, refine: f64) -> Result<Vec<f64>> {
    let target = std::f64::consts::FRAC_PI_2 / refine;
    let m2 = x.curvature_bound();
    let mut breaks = vec![0.0];
    let mut t = 0.0;
    while t < 1.0 {
        let d = x.derivative(t).abs();
        // Largest h with h (|P′(t)| + M₂ h) ≤ target.
        let h = if m2 > 0.0 {
            2.0 * target / (d + (d * d + 4.0 * m2 * target).sqrt())
        } else if d > 0.0 {
            target / d
        } else {
            1.0
        };
        let next = (t + h).min(1.0);
        let (a, b) = (x.derivative(t), x.derivative(next));
        if a * b < 0.0 {
            // Split at the stationary point so it sits on a panel edge.
            let (mut lo, mut hi) = (t, next);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if x.derivative(mid) * a > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            if root > t && root < next {
                breaks.push(root);
            }
        }
        breaks.push(next);
        t = next;
        if breaks.len() > PANEL_BUDGET {
            return Err(Error::Accuracy {
                what: "panel budget for the extension integral".into(),
                estimate: f64::NAN,
                bound: f64::INFINITY,
            });
        }
    }
    Ok(breaks)
}

fn integrate(x: &PhaseVector, breaks: &[f64]) -> (Complex64, f64) {
    let (n_lo, w_lo) = gauss_legendre(LOW_ORDER);
    let (n_hi, w_hi) = gauss_legendre(HIGH_ORDER);
    let mut hi_parts = Vec::with_capacity(breaks.len());
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        let rule = |nodes: &[f64], weights: &[f64]| -> Complex64 {
            nodes
                .iter()
                .zip(weights)
                .map(|(r, wt)| Complex64::from_polar(h * wt, x.phase(c + h * r)))
                .sum()
        };
        let hi = rule(&n_hi, &w_hi);
        err += (hi - rule(&n_lo, &w_lo)).norm();
        hi_parts.push(hi);
    }
    (pairwise_sum_complex(&hi_parts), err)
}

/// `I(x)` to relative tolerance `tol` (≥ 10⁻¹⁰), refining the panels until the
/// two Gauss orders agree.
pub fn ack_integral(x: &PhaseVector, tol: f64) -> Result<AckValue> {
    if !(tol >= 1e-10) {
        return Err(invalid("tol", "relative tolerance must be at least 1e-10"));
    }
    let mut refine = 1.0;
    loop {
        let breaks = panels(x, refine)?;
        let (value, error) = integrate(x, &breaks);
        if error <= tol * value.norm() {
            return Ok(AckValue {
                value,
                error,
                panels: breaks.len() - 1,
            });
        }
        refine *= 2.0;
        if breaks.len() * 2 > PANEL_BUDGET {
            return Err(Error::Accuracy {
                what: "extension integral".into(),
                estimate: value.norm(),
                bound: error,
            });
        }
    }
}

/// `|I(x)|` at the default working tolerance.
fn ack_abs(x: &[f64]) -> Result<f64> {
    Ok(ack_integral(&PhaseVector::new(x.to_vec())?, 1e-8)?.value.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellMass {
    pub j: u32,
    pub p: f64,
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl ShellMass {
    pub fn volume(k: usize, j: u32) -> f64 {
        let outer = (2.0f64).powi(j as i32 + 2);
        let inner = (2.0f64).powi(j as i32 + 1);
        outer.powi(k as i32) - inner.powi(k as i32)
    }

    pub fn rel_error(&self) -> f64 {
        self.std_error / self.value
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lo: [f64; 3],
    hi: [f64; 3],
    boosted: bool,
}

/// Grid cells of the upper half (`x_k ≥ 0`) of the shell; `|I(−x)| = |I(x)|`
/// supplies the rest.
fn shell_cells(k: usize, j: u32, per_unit: usize) -> Vec<Cell> {
    let unit = (2.0f64).powi(j as i32);
    let g = 4 * per_unit;
    let w = 4.0 * unit / g as f64;
    let edge = |i: usize| -2.0 * unit + i as f64 * w;
    let mut cells = Vec::new();
    let total = g.pow(k as u32 - 1) * (g / 2);
    for flat in 0..total {
        let mut idx = [0usize; 3];
        let mut rest = flat;
        for (d, slot) in idx.iter_mut().enumerate().take(k) {
            let n = if d == k - 1 { g / 2 } else { g };
            *slot = rest % n;
            rest /= n;
        }
        idx[k - 1] += g / 2;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for d in 0..k {
            lo[d] = edge(idx[d]);
            hi[d] = edge(idx[d] + 1);
        }
        // Inside the inner cube [−2^j, 2^j]^k: not part of the shell.
        if (0..k).all(|d| lo[d] >= -unit - 1e-9 && hi[d] <= unit + 1e-9) {
            continue;
        }
        let boosted = may_be_stationary(&lo[..k], &hi[..k]);
        cells.push(Cell { lo, hi, boosted });
    }
    cells
}

/// Whether `P′_x` can vanish on `[0, 1]` for some `x` in the box: the signs of
/// `P′(0) = x₁` and `P′(1) = Σ j x_j` differ somewhere on its corners.
fn may_be_stationary(lo: &[f64], hi: &[f64]) -> bool {
    let k = lo.len();
    let mut seen = [false; 4];
    for corner in 0..(1usize << k) {
        let x: Vec<f64> = (0..k).map(|d| if corner >> d & 1 == 1 { hi[d] } else { lo[d] }).collect();
        let a = x[0];
        let b: f64 = x.iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).sum();
        seen[(a >= 0.0) as usize * 2 + (b >= 0.0) as usize] = true;
        if a * b <= 0.0 {
            return true;
        }
    }
    seen.iter().filter(|&&s| s).count() > 1
}

/// `S_j` for each `p` from one set of samples.
pub fn shell_masses(k: usize, ps: &[f64], j: u32, budget: usize, seed: u64) -> Result<Vec<ShellMass>> {
    if !(2..=3).contains(&k) {
        return Err(invalid("k", "shell masses are implemented for k = 2 and k = 3"));
    }
    if ps.is_empty() || ps.iter().any(|p| !(2.0..=8.0).contains(p)) {
        return Err(invalid("p", "each exponent must lie in [2, 8]"));
    }
    if j > 14 {
        return Err(invalid("j", "shell index must be at most 14"));
    }
    let cells = shell_cells(k, j, if k == 2 { 4 } else { 1 });
    let vol = |c: &Cell| (0..k).map(|d| c.hi[d] - c.lo[d]).product::<f64>();
    let weights: Vec<f64> = cells
        .iter()
        .map(|c| vol(c) * if c.boosted { STATIONARY_BOOST } else { 1.0 })
        .collect();
    let wsum: f64 = weights.iter().sum();
    if budget < 2 * cells.len() {
        return Err(invalid("budget", format!("need at least {} samples for shell {j}", 2 * cells.len())));
    }
    let counts: Vec<usize> = weights
        .iter()
        .map(|w| ((budget as f64 * w / wsum).round() as usize).max(2))
        .collect();
    let values: Vec<Vec<f64>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut rng = stratum_rng(seed ^ ((j as u64) << 48), i as u64);
            (0..counts[i])
                .map(|_| {
                    let x: Vec<f64> = (0..k).map(|d| c.lo[d] + rng.gen::<f64>() * (c.hi[d] - c.lo[d])).collect();
                    ack_abs(&x)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let samples: usize = counts.iter().sum();
    Ok(ps
        .iter()
        .map(|&p| {
            let mut terms = Vec::with_capacity(cells.len());
            let mut var_terms = Vec::with_capacity(cells.len());
            for (c, v) in cells.iter().zip(&values) {
                let f: Vec<f64> = v.iter().map(|a| a.powf(p)).collect();
                let (m, var) = mean_variance(&f);
                let w = 2.0 * vol(c);
                terms.push(w * m);
                var_terms.push(w * w * var / f.len() as f64);
            }
            ShellMass {
                j,
                p,
                value: pairwise_sum(&terms),
                std_error: pairwise_sum(&var_terms).sqrt(),
                samples,
            }
        })
        .collect())
}

/// `S_j` for one `p`; an accuracy error when the standard error exceeds 10%.
pub fn shell_mass(k: usize, p: f64, j: u32, budget: usize, seed: u64) -> Result<ShellMass> {
    let m = shell_masses(k, &[p], j, budget, seed)?.remove(0);
    if m.rel_error() > 0.1 {
        return Err(Error::Accuracy {
            what: format!("shell mass j = {j}, p = {p}"),
            estimate: m.value,
            bound: m.std_error,
        });
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellVerdict {
    Convergent,
    NearCritical,
    Divergent,
}

impl ShellVerdict {
    pub fn from_slope(beta: f64) -> Self {
        if beta < -0.1 {
            Self::Convergent
        } else if beta > 0.1 {
            Self::Divergent
        } else {
            Self::NearCritical
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub p: f64,
    /// Least-squares slope of `log₂ S_j` against `j`.
    pub beta: f64,
    pub beta_error: f64,
    pub verdict: ShellVerdict,
    pub shells: Vec<ShellMass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub k: usize,
    pub p_critical: Rational64,
    pub rows: Vec<ProbeRow>,
    /// Where `β(p)` crosses zero (linear interpolation between rows).
    pub crossing: Option<f64>,
    /// Verdicts run divergent → near-critical → convergent with increasing p.
    pub ordered: bool,
}

/// Slope and its standard error for a line through `(x, y)` with weights
/// `1/σ²`.
fn weighted_slope(pts: &[(f64, f64, f64)]) -> (f64, f64) {
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / (p.2 * p.2).max(1e-12)).collect();
    let sw: f64 = w.iter().sum();
    let mx = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mx) * (p.1 - my)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Fit `β(p)` over the shells `j_range` for each `p` and place the sign change
/// against `p_c(k)`.
pub fn threshold_probe(k: usize, ps: &[f64], j_range: (u32, u32), budget: usize, seed: u64) -> Result<ProbeTable> {
    let (j0, j1) = j_range;
    if j1 < j0 || j1 - j0 + 1 < 5 {
        return Err(invalid("j_range", "need at least 5 shells"));
    }
    let mut sorted = ps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let per_shell: Vec<Vec<ShellMass>> = (j0..=j1)
        .map(|j| shell_masses(k, &sorted, j, budget, seed))
        .collect::<Result<_>>()?;
    let rows: Vec<ProbeRow> = sorted
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let shells: Vec<ShellMass> = per_shell.iter().map(|s| s[i].clone()).collect();
            let pts: Vec<(f64, f64, f64)> = shells
                .iter()
                .map(|s| (s.j as f64, s.value.log2(), s.rel_error() / std::f64::consts::LN_2))
                .collect();
            let (beta, beta_error) = weighted_slope(&pts);
            ProbeRow {
                p,
                beta,
                beta_error,
                verdict: ShellVerdict::from_slope(beta),
                shells,
            }
        })
        .collect();
    let crossing = rows.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.beta > 0.0 && b.beta <= 0.0).then(|| a.p + (b.p - a.p) * a.beta / (a.beta - b.beta))
    });
    let rank = |v: ShellVerdict| match v {
        ShellVerdict::Divergent => 0,
        ShellVerdict::NearCritical => 1,
        ShellVerdict::Convergent => 2,
    };
    let ordered = rows.windows(2).all(|w| rank(w[0].verdict) <= rank(w[1].verdict));
    let p_critical = critical_exponent(k as u32)?;
    let _ = to_f64(p_critical);
    Ok(ProbeTable {
        k,
        p_critical,
        rows,
        crossing,
        ordered,
    })
}
