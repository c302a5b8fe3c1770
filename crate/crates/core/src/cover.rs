//! Tube cover of the curve: centers `t_ι = ι ε / C0`, per-tube cutoffs
//! `χ`, `χ̃`, the partition of unity `η_ι`, and the calibration of `C0`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bump::{smooth_step, BumpProfile, TildeBump, OUTER_HALFWIDTH};
use crate::curve::{coords_raw, dot, frame_at, AnisotropicScaling, CurveSpec, FrenetFrame, Vector, MAX_DIM};
use crate::error::{invalid, Error, Result};
use crate::mc::stratum_rng;

/// Candidate values tried by [`calibrate_c0`].
pub const C0_CANDIDATES: [u32; 10] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024];

/// Required lower bound for `Σ_ι χ_ι` on the thin tube.
pub const SUM_CHI_THRESHOLD: f64 = 0.5;

/// Tolerance for the absorption identity `χ χ̃ = χ` on the thin tube.
pub const ABSORPTION_TOL: f64 = 1e-8;

/// Default number of stratified samples used for calibration and checks.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// How `η_ι = χ_ι χ̃_ι / Σχ` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum QuotientRule {
    /// The bare quotient (zero where the numerator vanishes).
    Literal,
    /// The quotient multiplied by a smooth step in `Σχ` rising from 0 at 1/4
    /// to 1 at 1/2. Identical to `Literal` wherever `Σχ ≥ 1/2`, in particular
    /// on the thin tube, but smooth across the outer fringe where the bare
    /// quotient jumps.
    #[default]
    Guarded,
}

impl QuotientRule {
    #[inline]
    pub fn apply(self, numerator: f64, sum_chi: f64) -> f64 {
        if numerator == 0.0 {
            return 0.0;
        }
        match self {
            QuotientRule::Literal => numerator / sum_chi,
            QuotientRule::Guarded => numerator * smooth_step((sum_chi - 0.25) / 0.25) / sum_chi,
        }
    }
}

/// Values of the cover at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverEval {
    pub sum_chi: f64,
    pub eta_total: f64,
    /// Number of tubes with `χ_ι > 0`.
    pub overlap: usize,
    /// `max_ι |χ_ι χ̃_ι − χ_ι|`.
    pub absorption_defect: f64,
}

#[derive(Debug, Clone)]
pub struct TubeCover {
    spec: CurveSpec,
    epsilon: f64,
    c0: u32,
    scaling: AnisotropicScaling,
    centers: Vec<f64>,
    points: Vec<Vector>,
    frames: Vec<FrenetFrame>,
    bump: BumpProfile,
    tilde: TildeBump,
    rule: QuotientRule,
    window: f64,
}

impl TubeCover {
    pub fn new(spec: &CurveSpec, epsilon: f64, c0: u32) -> Result<Self> {
        Self::with_rule(spec, epsilon, c0, QuotientRule::default())
    }

    pub fn with_rule(spec: &CurveSpec, epsilon: f64, c0: u32, rule: QuotientRule) -> Result<Self> {
        if c0 < 2 || c0 % 2 != 0 {
            return Err(invalid("c0", format!("must be a positive even integer, got {c0}")));
        }
        let k = spec.k();
        let scaling = AnisotropicScaling::new(epsilon, k)?;
        let step = epsilon / c0 as f64;
        let ratio = c0 as f64 / epsilon;
        let last = (ratio * (1.0 - 1e-12)).ceil() as usize;
        let centers: Vec<f64> = (0..=last).map(|i| (i as f64 * step).min(1.0)).collect();
        let frames = centers
            .par_iter()
            .map(|&t| frame_at(spec, t))
            .collect::<Result<Vec<_>>>()?;
        let points = centers.iter().map(|&t| spec.point(t)).collect();
        let (_, slope) = spec.first_component_slack();
        let reach: f64 = scaling.diagonal().iter().sum::<f64>() * OUTER_HALFWIDTH * 1.01;
        let window = reach / (1.0 - slope).max(0.5);
        Ok(Self {
            spec: spec.clone(),
            epsilon,
            c0,
            scaling,
            centers,
            points,
            frames,
            bump: BumpProfile::default(),
            tilde: TildeBump::default(),
            rule,
            window,
        })
    }

    pub fn spec(&self) -> &CurveSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.spec.k()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c0(&self) -> u32 {
        self.c0
    }

    pub fn rule(&self) -> QuotientRule {
        self.rule
    }

    pub fn scaling(&self) -> &AnisotropicScaling {
        &self.scaling
    }

    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }

    pub fn tilde(&self) -> &TildeBump {
        &self.tilde
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, iota: usize) -> Result<f64> {
        self.check(iota)?;
        Ok(self.centers[iota])
    }

    pub fn frame(&self, iota: usize) -> Result<&FrenetFrame> {
        self.check(iota)?;
        Ok(&self.frames[iota])
    }

    pub(crate) fn point_ref(&self, iota: usize) -> &Vector {
        &self.points[iota]
    }

    /// Half-width in `t` of the window of tubes that can contain a point.
    pub fn window(&self) -> f64 {
        self.window
    }

    fn check(&self, iota: usize) -> Result<()> {
        if iota >= self.len() {
            return Err(Error::IndexOutOfRange { iota, len: self.len() });
        }
        Ok(())
    }

    fn vector(&self, xi: &[f64]) -> Result<Vector> {
        let k = self.k();
        if xi.len() != k {
            return Err(Error::Domain(format!("point has length {} but k = {k}", xi.len())));
        }
        let mut v = [0.0; MAX_DIM];
        v[..k].copy_from_slice(xi);
        Ok(v)
    }

    /// Anisotropic coordinates of `xi` relative to tube `iota`.
    #[inline]
    pub(crate) fn coords(&self, iota: usize, xi: &Vector) -> Vector {
        coords_raw(&self.frames[iota], self.scaling.diag(), &self.points[iota], xi)
    }

    /// Inclusive index range of tubes whose support may contain `xi`.
    pub(crate) fn active_range(&self, xi: &Vector) -> Option<(usize, usize)> {
        let t_star = self.spec.invert_first_component(xi[0]);
        let lo_t = t_star - self.window;
        let hi_t = t_star + self.window;
        let n = self.len();
        if hi_t < 0.0 || lo_t > 1.0 || !t_star.is_finite() {
            return None;
        }
        let ratio = self.c0 as f64 / self.epsilon;
        let lo = (lo_t * ratio).ceil().max(0.0) as usize;
        let hi = if hi_t >= self.centers[n - 1] {
            n - 1
        } else {
            ((hi_t * ratio).floor().max(0.0) as usize).min(n - 1)
        };
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    #[inline]
    pub(crate) fn chi_at(&self, iota: usize, xi: &Vector) -> (f64, Vector) {
        let y = self.coords(iota, xi);
        (self.bump.phi(&y[..self.k()]), y)
    }

    /// Rescaled curve `Y(s) = D⁻¹ M_ιᵀ (γ(s) − γ(t_ι))` (polynomial
    /// continuation outside [0, 1]).
    #[inline]
    pub(crate) fn rescaled_curve(&self, iota: usize, s: f64) -> Vector {
        let p = self.spec.point(s);
        coords_raw(&self.frames[iota], self.scaling.diag(), &self.points[iota], &p)
    }

    /// Parameter `s` with `Y₁(s) = y₁`.
    pub(crate) fn rescaled_first_inverse(&self, iota: usize, y1: f64) -> f64 {
        let k = self.k();
        let frame = &self.frames[iota];
        let e1 = frame.col(0);
        let mut deriv = [0.0; MAX_DIM];
        self.spec.eval(self.centers[iota], 1, &mut deriv);
        let speed = dot(&deriv, &deriv, k).sqrt();
        let mut s = self.centers[iota] + self.epsilon * y1 / speed;
        for _ in 0..3 {
            let y = self.rescaled_curve(iota, s);
            self.spec.eval(s, 1, &mut deriv);
            let slope = dot(e1, &deriv, k) / self.epsilon;
            let step = (y[0] - y1) / slope;
            s -= step;
            if step.abs() <= 1e-16 * self.epsilon {
                break;
            }
        }
        s
    }

    /// Distance from `y` (tube coordinates) to the rescaled curve inside the
    /// unit ball; `INFINITY` when no curve point within `φ̃`'s support exists.
    ///
    /// `|Y(s) − y| ≥ |Y₁(s) − y₁|`, so only a short window around the foot
    /// `Y₁(s₀) = y₁` can come within the outer radius. The minimum there is
    /// found by safeguarded Newton on `d/ds |Y(s) − y|²`, falling back to a
    /// grid plus golden-section search if Newton stalls.
    pub(crate) fn tilde_distance(&self, iota: usize, y: &Vector) -> f64 {
        let k = self.k();
        let outer = self.tilde.outer_radius();
        let s0 = self.rescaled_first_inverse(iota, y[0]);
        let frame = &self.frames[iota];
        let diag = self.scaling.diag();
        let mut d1 = [0.0; MAX_DIM];
        let mut d2 = [0.0; MAX_DIM];
        self.spec.eval(s0, 1, &mut d1);
        let slope = dot(frame.col(0), &d1, k) / self.epsilon;
        if !(slope > 0.0) {
            return f64::INFINITY;
        }
        let half = 2.0 * outer / slope;
        let (lo, hi) = (s0 - half, s0 + half);
        let mut s = s0;
        let mut converged = false;
        for _ in 0..12 {
            let c = self.rescaled_curve(iota, s);
            self.spec.eval(s, 1, &mut d1);
            self.spec.eval(s, 2, &mut d2);
            let (mut g, mut h) = (0.0, 0.0);
            for j in 0..k {
                let r = c[j] - y[j];
                let y1 = dot(frame.col(j), &d1, k) / diag[j];
                let y2 = dot(frame.col(j), &d2, k) / diag[j];
                g += y1 * r;
                h += y1 * y1 + y2 * r;
            }
            if !(h > 0.0) {
                break;
            }
            let next = (s - g / h).clamp(lo, hi);
            let moved = (next - s).abs();
            s = next;
            if moved <= 1e-13 * self.epsilon {
                converged = true;
                break;
            }
        }
        if !converged {
            s = self.tilde_foot_search(iota, y, lo, hi);
        }
        let foot = self.rescaled_curve(iota, s);
        if dot(&foot, &foot, k) > 1.0 {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for j in 0..k {
            acc += (foot[j] - y[j]) * (foot[j] - y[j]);
        }
        acc.sqrt()
    }

    /// Derivative-free minimizer of `|Y(s) − y|` on `[lo, hi]`.
    fn tilde_foot_search(&self, iota: usize, y: &Vector, lo: f64, hi: f64) -> f64 {
        let k = self.k();
        let dist2 = |s: f64| {
            let c = self.rescaled_curve(iota, s);
            (0..k).map(|i| (c[i] - y[i]) * (c[i] - y[i])).sum::<f64>()
        };
        const GRID: usize = 9;
        let step = (hi - lo) / (GRID - 1) as f64;
        let mut best = (0usize, f64::INFINITY);
        for g in 0..GRID {
            let v = dist2(lo + g as f64 * step);
            if v < best.1 {
                best = (g, v);
            }
        }
        let centre = lo + best.0 as f64 * step;
        let (mut a, mut b) = ((centre - step).max(lo), (centre + step).min(hi));
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let tol = 1e-9 * self.epsilon;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = dist2(c);
        let mut fd = dist2(d);
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = dist2(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = dist2(d);
            }
        }
        0.5 * (a + b)
    }

    #[inline]
    pub(crate) fn chi_tilde_at(&self, iota: usize, y: &Vector) -> f64 {
        let d = self.tilde_distance(iota, y);
        if d.is_finite() {
            self.tilde.profile(d)
        } else {
            0.0
        }
    }

    /// `Σ_ι χ_ι(ξ)` over the active window.
    pub(crate) fn sum_chi_at(&self, xi: &Vector) -> f64 {
        let Some((lo, hi)) = self.active_range(xi) else {
            return 0.0;
        };
        (lo..=hi).map(|i| self.chi_at(i, xi).0).sum()
    }

    pub(crate) fn eta_at(&self, iota: usize, xi: &Vector) -> f64 {
        let (chi, y) = self.chi_at(iota, xi);
        if chi == 0.0 {
            return 0.0;
        }
        let numerator = chi * self.chi_tilde_at(iota, &y);
        if numerator == 0.0 {
            return 0.0;
        }
        self.rule.apply(numerator, self.sum_chi_at(xi))
    }

    /// Every quantity of the cover at `xi` in one pass over the active tubes.
    pub(crate) fn evaluate_at(&self, xi: &Vector) -> CoverEval {
        let Some((lo, hi)) = self.active_range(xi) else {
            return CoverEval::default();
        };
        let mut out = CoverEval::default();
        let mut numerator = 0.0;
        for i in lo..=hi {
            let (chi, y) = self.chi_at(i, xi);
            if chi == 0.0 {
                continue;
            }
            let ct = self.chi_tilde_at(i, &y);
            out.sum_chi += chi;
            out.overlap += 1;
            out.absorption_defect = out.absorption_defect.max((chi * ct - chi).abs());
            numerator += chi * ct;
        }
        out.eta_total = self.rule.apply(numerator, out.sum_chi);
        out
    }

    /// `(η_ι(ξ), η_total(ξ))` sharing one pass over the active tubes.
    pub(crate) fn eta_pair_at(&self, iota: usize, xi: &Vector) -> (f64, f64) {
        let Some((lo, hi)) = self.active_range(xi) else {
            return (0.0, 0.0);
        };
        let (mut sum_chi, mut numerator, mut own) = (0.0, 0.0, 0.0);
        for i in lo..=hi {
            let (chi, y) = self.chi_at(i, xi);
            if chi == 0.0 {
                continue;
            }
            let v = chi * self.chi_tilde_at(i, &y);
            sum_chi += chi;
            numerator += v;
            if i == iota {
                own = v;
            }
        }
        (self.rule.apply(own, sum_chi), self.rule.apply(numerator, sum_chi))
    }

    /// `η_total(ξ) = Σ_ι η_ι(ξ)`.
    pub(crate) fn eta_total_at(&self, xi: &Vector) -> f64 {
        self.evaluate_at(xi).eta_total
    }

    pub fn chi(&self, iota: usize, xi: &[f64]) -> Result<f64> {
        self.check(iota)?;
        Ok(self.chi_at(iota, &self.vector(xi)?).0)
    }

    pub fn chi_tilde(&self, iota: usize, xi: &[f64]) -> Result<f64> {
        self.check(iota)?;
        let y = self.coords(iota, &self.vector(xi)?);
        Ok(self.chi_tilde_at(iota, &y))
    }

    pub fn eta(&self, iota: usize, xi: &[f64]) -> Result<f64> {
        self.check(iota)?;
        Ok(self.eta_at(iota, &self.vector(xi)?))
    }

    pub fn eta_total(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.eta_total_at(&self.vector(xi)?))
    }

    pub fn sum_chi(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.sum_chi_at(&self.vector(xi)?))
    }

    pub fn evaluate(&self, xi: &[f64]) -> Result<CoverEval> {
        Ok(self.evaluate_at(&self.vector(xi)?))
    }

    /// Stratified sample of `Γ_{ε·scale}`: stratum `i` draws `t` from
    /// `[i/n, (i+1)/n]` and a uniform point of the box `Γ_{ε·scale, t}`.
    pub fn sample_tube(&self, scale: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_tube_raw(scale, n, seed)
            .into_iter()
            .map(|v| v[..self.k()].to_vec())
            .collect()
    }

    pub(crate) fn sample_tube_raw(&self, scale: f64, n: usize, seed: u64) -> Vec<Vector> {
        let k = self.k();
        let eps = self.epsilon * scale;
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stratum_rng(seed, i as u64);
                let t = ((i as f64 + rng.gen::<f64>()) / n as f64).clamp(0.0, 1.0);
                let frame = frame_at(&self.spec, t).expect("frame exists on [0, 1]");
                let mut offset = [0.0; MAX_DIM];
                let mut p = 1.0;
                for o in offset.iter_mut().take(k) {
                    p *= eps;
                    *o = p * rng.gen_range(-1.0..=1.0);
                }
                let base = self.spec.point(t);
                let shift = frame.apply(&offset);
                let mut xi = [0.0; MAX_DIM];
                for j in 0..k {
                    xi[j] = base[j] + shift[j];
                }
                xi
            })
            .collect()
    }

    /// Checks the partition-of-unity properties on samples of the thin tube
    /// `Γ_{ε/C0}` and the fringe `Γ_ε`.
    pub fn check_partition(&self, samples: usize, seed: u64) -> PartitionReport {
        let thin = self.sample_tube_raw(1.0 / self.c0 as f64, samples, seed);
        let fringe = self.sample_tube_raw(1.0, samples, seed ^ 0x9e37_79b9_7f4a_7c15);
        let thin_evals: Vec<CoverEval> = thin.par_iter().map(|x| self.evaluate_at(x)).collect();
        let fringe_evals: Vec<CoverEval> = fringe.par_iter().map(|x| self.evaluate_at(x)).collect();
        let mut r = PartitionReport {
            epsilon: self.epsilon,
            c0: self.c0,
            samples,
            min_sum_chi: f64::INFINITY,
            absorption_defect: 0.0,
            partition_defect: 0.0,
            max_overlap: 0,
            fringe_eta_min: f64::INFINITY,
            fringe_eta_max: f64::NEG_INFINITY,
        };
        for e in &thin_evals {
            r.min_sum_chi = r.min_sum_chi.min(e.sum_chi);
            r.absorption_defect = r.absorption_defect.max(e.absorption_defect);
            r.partition_defect = r.partition_defect.max((e.eta_total - 1.0).abs());
            r.max_overlap = r.max_overlap.max(e.overlap);
        }
        for e in &fringe_evals {
            r.max_overlap = r.max_overlap.max(e.overlap);
            r.fringe_eta_min = r.fringe_eta_min.min(e.eta_total);
            r.fringe_eta_max = r.fringe_eta_max.max(e.eta_total);
        }
        r
    }
}

/// Outcome of [`TubeCover::check_partition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub epsilon: f64,
    pub c0: u32,
    pub samples: usize,
    pub min_sum_chi: f64,
    pub absorption_defect: f64,
    /// `max |Σ_ι η_ι − 1|` on the thin tube.
    pub partition_defect: f64,
    pub max_overlap: usize,
    pub fringe_eta_min: f64,
    pub fringe_eta_max: f64,
}

impl PartitionReport {
    pub fn calibrated(&self) -> bool {
        self.min_sum_chi >= SUM_CHI_THRESHOLD && self.absorption_defect <= ABSORPTION_TOL
    }
}

/// Result of [`calibrate_c0`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c0: u32,
    pub report: PartitionReport,
    /// `(C0, min Σχ, absorption defect)` for every candidate tried.
    pub trials: Vec<(u32, f64, f64)>,
}

/// Smallest `C0` among [`C0_CANDIDATES`] for which the thin tube `Γ_{ε/C0}`
/// satisfies `Σχ ≥ 1/2` and `χ χ̃ = χ` on a stratified sample.
pub fn calibrate_c0(spec: &CurveSpec, epsilon: f64) -> Result<(TubeCover, Calibration)> {
    calibrate_c0_with(spec, epsilon, DEFAULT_SAMPLES, 0)
}

pub fn calibrate_c0_with(
    spec: &CurveSpec,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<(TubeCover, Calibration)> {
    AnisotropicScaling::new(epsilon, spec.k())?;
    let mut trials = Vec::new();
    let mut best: Option<(u32, f64, f64)> = None;
    for &c0 in &C0_CANDIDATES {
        let cover = TubeCover::new(spec, epsilon, c0)?;
        let report = cover.check_partition(samples, seed);
        trials.push((c0, report.min_sum_chi, report.absorption_defect));
        if report.calibrated() {
            return Ok((cover, Calibration { c0, report, trials }));
        }
        if best.map_or(true, |b| report.min_sum_chi > b.1) {
            best = Some((c0, report.min_sum_chi, report.absorption_defect));
        }
    }
    let (best_c0, min_sum_chi, absorption_defect) = best.expect("at least one candidate");
    Err(Error::Calibration {
        epsilon,
        best_c0,
        min_sum_chi,
        absorption_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::gamma;

    fn cover(k: usize, eps: f64, c0: u32) -> TubeCover {
        TubeCover::new(&CurveSpec::moment(k).unwrap(), eps, c0).unwrap()
    }

    #[test]
    fn centers_are_evenly_spaced_and_clamped() {
        let c = cover(2, 1.0 / 16.0, 8);
        assert_eq!(c.len(), 129);
        assert_eq!(c.centers()[0], 0.0);
        assert_eq!(*c.centers().last().unwrap(), 1.0);
        for w in c.centers().windows(2) {
            assert!((w[1] - w[0] - 1.0 / 128.0).abs() < 1e-15);
        }
        let odd = TubeCover::new(&CurveSpec::moment(2).unwrap(), 0.15, 4).unwrap();
        let last = *odd.centers().last().unwrap();
        assert!(last <= 1.0 && last >= 1.0 - 0.15 / 4.0);
    }

    #[test]
    fn rejects_odd_or_zero_c0() {
        let spec = CurveSpec::moment(2).unwrap();
        assert!(TubeCover::new(&spec, 0.1, 3).is_err());
        assert!(TubeCover::new(&spec, 0.1, 0).is_err());
        assert!(TubeCover::new(&spec, 0.3, 4).is_err());
    }

    #[test]
    fn chi_examples() {
        let c = cover(2, 1.0 / 16.0, 64);
        let eps = c.epsilon();
        let iota = 300;
        let t = c.center(iota).unwrap();
        let p = gamma(c.spec(), t).unwrap();
        let f = c.frame(iota).unwrap().clone();
        assert_eq!(c.chi(iota, &p).unwrap(), 1.0);
        let out: Vec<f64> = (0..2).map(|i| p[i] + 3e-2 * eps * f.column(0)[i]).collect();
        assert_eq!(c.chi(iota, &out).unwrap(), 0.0);
        let mid: Vec<f64> = (0..2).map(|i| p[i] + 1.5e-2 * eps * eps * f.column(1)[i]).collect();
        let v = c.chi(iota, &mid).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(matches!(c.chi(10_000, &p), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn chi_tilde_examples() {
        let c = cover(2, 1.0 / 16.0, 64);
        let iota = 100;
        let p = gamma(c.spec(), c.center(iota).unwrap()).unwrap();
        assert_eq!(c.chi_tilde(iota, &p).unwrap(), 1.0);
        // Move 3e-4 (in tube coordinates) along the normal: beyond the outer radius.
        let f = c.frame(iota).unwrap().clone();
        let e2 = c.epsilon().powi(2);
        let off: Vec<f64> = (0..2).map(|i| p[i] + 3e-4 * e2 * f.column(1)[i]).collect();
        assert_eq!(c.chi_tilde(iota, &off).unwrap(), 0.0);
        let near: Vec<f64> = (0..2).map(|i| p[i] + 0.5e-4 * e2 * f.column(1)[i]).collect();
        assert_eq!(c.chi_tilde(iota, &near).unwrap(), 1.0);
    }

    #[test]
    fn tilde_distance_matches_brute_force_scan() {
        let c = cover(3, 1.0 / 8.0, 16);
        let iota = 40;
        let k = 3;
        for (j, y1) in [-0.015, 0.0, 0.012].iter().enumerate() {
            let s = c.rescaled_first_inverse(iota, *y1);
            let foot = c.rescaled_curve(iota, s);
            let mut y = foot;
            y[1] += 1.3e-4 * (j as f64 - 1.0);
            y[2] += 0.7e-4;
            let fast = c.tilde_distance(iota, &y);
            let mut brute = f64::INFINITY;
            let n = 200_000;
            for m in 0..=n {
                let s = c.centers()[iota] - 0.01 + 0.02 * m as f64 / n as f64;
                let p = c.rescaled_curve(iota, s);
                let d: f64 = (0..k).map(|i| (p[i] - y[i]).powi(2)).sum::<f64>().sqrt();
                brute = brute.min(d);
            }
            assert!((fast - brute).abs() < 1e-7, "fast {fast} brute {brute}");
        }
    }

    #[test]
    fn newton_foot_agrees_with_golden_section() {
        let c = cover(2, 1.0 / 32.0, 64);
        let iota = 500;
        for &(y1, y2) in &[(0.01, 1.5e-4), (-0.018, -0.9e-4), (0.0, 3e-5)] {
            let mut y = c.rescaled_curve(iota, c.rescaled_first_inverse(iota, y1));
            y[1] += y2;
            let d = c.tilde_distance(iota, &y);
            let s0 = c.rescaled_first_inverse(iota, y[0]);
            let sg = c.tilde_foot_search(iota, &y, s0 - 1e-3 * c.epsilon(), s0 + 1e-3 * c.epsilon());
            let f = c.rescaled_curve(iota, sg);
            let dg = ((f[0] - y[0]).powi(2) + (f[1] - y[1]).powi(2)).sqrt();
            assert!((d - dg).abs() < 1e-10, "{d} vs {dg}");
        }
    }

    #[test]
    fn active_window_matches_exhaustive_scan() {
        let c = cover(2, 1.0 / 16.0, 32);
        let pts = c.sample_tube_raw(1.0, 300, 5);
        for xi in &pts {
            let (lo, hi) = c.active_range(xi).unwrap_or((1, 0));
            for i in 0..c.len() {
                if c.chi_at(i, xi).0 > 0.0 {
                    assert!(lo <= i && i <= hi, "tube {i} outside window {lo}..={hi}");
                }
            }
        }
    }

    #[test]
    fn eta_examples() {
        let c = cover(2, 1.0 / 16.0, 64);
        let far = [0.5, 0.9];
        assert_eq!(c.eta_total(&far).unwrap(), 0.0);
        assert_eq!(c.eta(10, &far).unwrap(), 0.0);
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let p = gamma(c.spec(), t).unwrap();
            let v = c.eta_total(&p).unwrap();
            assert!(v >= 0.0 && v <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn quotient_rules_agree_above_half() {
        for &s in &[0.5, 0.7, 1.0, 2.5] {
            assert_eq!(
                QuotientRule::Literal.apply(0.3, s),
                QuotientRule::Guarded.apply(0.3, s)
            );
        }
        assert_eq!(QuotientRule::Guarded.apply(0.2, 0.2), 0.0);
        assert_eq!(QuotientRule::Literal.apply(0.0, 0.0), 0.0);
    }
}
