//! `η̌_total(x)` straight from the curve, without splitting into tubes.
//!
//! The support of `η_total` is parametrized by the chart
//! `Φ(s, n) = γ(s) + Σ_{j≥2} ε^j n_j e_j(s)`, with Jacobian
//! `Π_j ε^j · (|γ′| − Σ_j ε^j n_j ⟨e_j, γ″⟩/|γ′|)`. The chart tabulates
//! `c_n(s) = η_total(Φ(s, n))·J·w_n` on Chebyshev panels in `s` (bisected until
//! the interpolant is accurate), so
//!
//! `η̌_total(x) = ∫ A(s; x) e^{2πi x·γ(s)} ds`, `A = Σ_n c_n(s) e^{2πi Σ ε^j n_j x·e_j(s)}`.
//!
//! The `s` integral is done per panel by Gauss–Legendre where the phase is
//! mild and by Levin collocation where it is not; panels are bisected towards
//! stationary points of `x·γ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::atom::{normal_rule, AtomResolution, NORMAL_RADIUS};
use super::TWO_PI;
use crate::bump::OUTER_HALFWIDTH;
use crate::cover::TubeCover;
use crate::curve::{dot, frame_at, CurveSpec, FrenetFrame, Vector, MAX_DIM};
use crate::error::{Error, Result};
use crate::quadrature::{
    barycentric_coefficients, chebyshev_differentiation, chebyshev_lobatto, gauss_legendre, lobatto_barycentric_weights,
    pairwise_sum, pairwise_sum_complex,
};

const LEVIN_NODES: usize = 16;
const GL_NODES: usize = 20;
/// Phase variation (radians) a plain Gauss–Legendre panel may carry.
const GL_PHASE: f64 = 3.0 * std::f64::consts::PI;
const MAX_DEPTH: usize = 48;
/// Reference points used to check each profile panel's interpolant.
const CHECK_POINTS: [f64; 3] = [-0.71, 0.13, 0.77];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartResolution {
    /// Largest `|ε^j x·e_j|` (j ≥ 2) the normal grid resolves.
    pub u_perp_max: f64,
    /// Chebyshev nodes per profile panel.
    pub profile_nodes: usize,
    /// Widest panel in `s`.
    pub interior_panel: f64,
    /// Initial panel width near the ends, in units of ε.
    pub end_panel: f64,
    /// Admitted interpolation error of `η_total` on a panel.
    pub tolerance: f64,
}

impl Default for ChartResolution {
    fn default() -> Self {
        Self {
            u_perp_max: 1024.0,
            profile_nodes: 12,
            interior_panel: 1.0 / 16.0,
            end_panel: 0.01,
            tolerance: 1e-4,
        }
    }
}

impl ChartResolution {
    pub fn new(u_perp_max: f64) -> Self {
        Self {
            u_perp_max,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Panel {
    a: f64,
    b: f64,
    /// Row-major `c[node][normal]`.
    c: Vec<f64>,
}

struct Scratch {
    lam: Vec<f64>,
    row: Vec<f64>,
}

/// Curve quantities at one parameter value.
struct Geometry {
    point: Vector,
    frame: FrenetFrame,
    /// `Π ε^j · (|γ′| − Σ ε^j n_j ⟨e_j, γ″⟩/|γ′|)` is `jac0 − Σ n_j jac1[j]`.
    jac0: f64,
    jac1: Vector,
}

#[derive(Debug, Clone)]
pub struct CurveChart {
    spec: CurveSpec,
    k: usize,
    epsilon: f64,
    diag: Vector,
    res: ChartResolution,
    normals: Vec<Vector>,
    normal_weights: Vec<f64>,
    /// `(n₀, Δn)` when the normal grid is uniform (k = 2).
    uniform: Option<(f64, f64)>,
    cheb: Vec<f64>,
    bw: Vec<f64>,
    panels: Vec<Panel>,
    accel_bound: f64,
    speed_bound: f64,
    frame_rate_bound: f64,
}

impl CurveChart {
    pub fn build(cover: &TubeCover, res: ChartResolution) -> Result<Self> {
        let spec = cover.spec().clone();
        let k = cover.k();
        let epsilon = cover.epsilon();
        let mut diag = [0.0; MAX_DIM];
        for (j, d) in diag.iter_mut().enumerate().take(k) {
            *d = epsilon.powi(j as i32 + 1);
        }
        let (normals, normal_weights) = normal_rule(k, &AtomResolution::new(0.0, res.u_perp_max));
        let uniform = (k == 2).then(|| (normals[0][1], normals[1][1] - normals[0][1]));
        let m = res.profile_nodes.max(4);
        let mut chart = Self {
            spec,
            k,
            epsilon,
            diag,
            res,
            normals,
            normal_weights,
            uniform,
            cheb: chebyshev_lobatto(m),
            bw: lobatto_barycentric_weights(m),
            panels: Vec::new(),
            accel_bound: 0.0,
            speed_bound: 0.0,
            frame_rate_bound: 0.0,
        };
        let (s_lo, s_hi) = chart.parameter_range();
        chart.bounds(s_lo, s_hi)?;
        let breaks = chart.initial_breaks(s_lo, s_hi);
        let panels: Vec<Vec<Panel>> = breaks
            .par_windows(2)
            .map(|w| chart.refine(cover, w[0], w[1], 0))
            .collect::<Result<_>>()?;
        chart.panels = panels.into_iter().flatten().filter(|p| p.c.iter().any(|&v| v != 0.0)).collect();
        Ok(chart)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn resolution(&self) -> ChartResolution {
        self.res
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// Panel breakpoints `(a, b)` in `s`, for panels where `η_total ≠ 0`.
    pub fn panels(&self) -> Vec<(f64, f64)> {
        self.panels.iter().map(|p| (p.a, p.b)).collect()
    }

    /// `s` range covering the support: tubes reach `2·10⁻²` past the ends in y₁.
    fn parameter_range(&self) -> (f64, f64) {
        let mut d = [0.0; MAX_DIM];
        self.spec.eval(0.0, 1, &mut d);
        let lo = -2.5 * OUTER_HALFWIDTH * self.epsilon / dot(&d, &d, self.k).sqrt();
        self.spec.eval(1.0, 1, &mut d);
        let hi = 1.0 + 2.5 * OUTER_HALFWIDTH * self.epsilon / dot(&d, &d, self.k).sqrt();
        (lo, hi)
    }

    /// Bounds on `|γ″|` and `|e_j′|` over the parameter range.
    fn bounds(&mut self, lo: f64, hi: f64) -> Result<()> {
        let k = self.k;
        let n = 256;
        let h = 1e-6;
        let mut acc: f64 = 0.0;
        let mut speed: f64 = 0.0;
        let mut rate: f64 = 0.0;
        let mut d1 = [0.0; MAX_DIM];
        let mut d2 = [0.0; MAX_DIM];
        for i in 0..=n {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            self.spec.eval(s, 2, &mut d2);
            acc = acc.max(dot(&d2, &d2, k).sqrt());
            self.spec.eval(s, 1, &mut d1);
            speed = speed.max(dot(&d1, &d1, k).sqrt());
            let f0 = frame_at(&self.spec, s - h)?;
            let f1 = frame_at(&self.spec, s + h)?;
            for j in 1..k {
                let (a, b) = (f0.col(j), f1.col(j));
                let diff: f64 = (0..k).map(|i| (b[i] - a[i]).powi(2)).sum::<f64>().sqrt();
                rate = rate.max(diff / (2.0 * h));
            }
        }
        self.accel_bound = 1.25 * acc + 1e-12;
        self.speed_bound = 1.01 * speed;
        self.frame_rate_bound = 1.25 * rate + 1e-12;
        Ok(())
    }

    /// Fine panels near both ends, growing geometrically into the interior.
    fn initial_breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let end = self.res.end_panel * self.epsilon;
        let layer = 4.0 * OUTER_HALFWIDTH * self.epsilon * 2.0;
        let grow = |from: f64, dir: f64| -> Vec<f64> {
            let mut out = vec![from];
            let mut s = from;
            let mut w = end;
            while dir * (0.5 - s) > w {
                s += dir * w;
                out.push(s);
                if (s - from).abs() > layer {
                    w = (2.0 * w).min(self.res.interior_panel);
                }
            }
            out
        };
        let mut left = grow(lo, 1.0);
        let mut right = grow(hi, -1.0);
        right.reverse();
        left.push(0.5);
        left.extend(right);
        left.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        left
    }

    fn geometry(&self, s: f64) -> Result<Geometry> {
        let k = self.k;
        let mut point = [0.0; MAX_DIM];
        let mut velocity = [0.0; MAX_DIM];
        let mut accel = [0.0; MAX_DIM];
        self.spec.eval(s, 0, &mut point);
        self.spec.eval(s, 1, &mut velocity);
        self.spec.eval(s, 2, &mut accel);
        let frame = frame_at(&self.spec, s)?;
        let speed = dot(&velocity, &velocity, k).sqrt();
        let scale: f64 = self.diag[1..k].iter().product();
        let mut jac1 = [0.0; MAX_DIM];
        for j in 1..k {
            jac1[j] = scale * self.diag[j] * dot(frame.col(j), &accel, k) / speed;
        }
        Ok(Geometry {
            point,
            frame,
            jac0: scale * speed,
            jac1,
        })
    }

    fn chart_point(&self, g: &Geometry, n: &Vector) -> Vector {
        let mut xi = g.point;
        for j in 1..self.k {
            let c = self.diag[j] * n[j];
            for (x, e) in xi.iter_mut().zip(g.frame.col(j)).take(self.k) {
                *x += c * e;
            }
        }
        xi
    }

    fn jacobian(&self, g: &Geometry, n: &Vector) -> f64 {
        let mut j = g.jac0;
        for d in 1..self.k {
            j -= n[d] * g.jac1[d];
        }
        j.abs()
    }

    /// `η_total·J·w` at every normal node for parameter `s`.
    fn profile_row(&self, cover: &TubeCover, s: f64, out: &mut [f64]) -> Result<()> {
        let g = self.geometry(s)?;
        for ((o, n), w) in out.iter_mut().zip(&self.normals).zip(&self.normal_weights) {
            let xi = self.chart_point(&g, n);
            let eta = cover.eta_total_at(&xi);
            *o = if eta == 0.0 { 0.0 } else { eta * self.jacobian(&g, n) * w };
        }
        Ok(())
    }

    fn refine(&self, cover: &TubeCover, a: f64, b: f64, depth: usize) -> Result<Vec<Panel>> {
        let nn = self.normals.len();
        let m = self.cheb.len();
        let map = |r: f64| 0.5 * (a + b) + 0.5 * (b - a) * r;
        let mut c = vec![0.0; m * nn];
        for (i, &r) in self.cheb.iter().enumerate() {
            self.profile_row(cover, map(r), &mut c[i * nn..(i + 1) * nn])?;
        }
        if depth < MAX_DEPTH && b - a > 1e-9 * self.epsilon {
            let mut lam = vec![0.0; m];
            let mut exact = vec![0.0; nn];
            let mut worst: f64 = 0.0;
            for &r in &CHECK_POINTS {
                self.profile_row(cover, map(r), &mut exact)?;
                barycentric_coefficients(&self.cheb, &self.bw, r, &mut lam);
                let g = self.geometry(map(r))?;
                for (q, e) in exact.iter().enumerate() {
                    let approx: f64 = (0..m).map(|i| lam[i] * c[i * nn + q]).sum();
                    let scale = self.jacobian(&g, &self.normals[q]) * self.normal_weights[q];
                    worst = worst.max((approx - e).abs() / scale);
                }
            }
            if worst > self.res.tolerance {
                let mid = 0.5 * (a + b);
                let mut left = self.refine(cover, a, mid, depth + 1)?;
                left.extend(self.refine(cover, mid, b, depth + 1)?);
                return Ok(left);
            }
        }
        Ok(vec![Panel { a, b, c }])
    }

    /// `(A(s; x), 2π x·γ(s), 2π x·γ′(s))` on profile panel `p`.
    fn amplitude(&self, p: &Panel, s: f64, x: &Vector, scratch: &mut Scratch) -> Result<(Complex64, f64, f64)> {
        let k = self.k;
        let nn = self.normals.len();
        let m = self.cheb.len();
        let r = (2.0 * s - p.a - p.b) / (p.b - p.a);
        barycentric_coefficients(&self.cheb, &self.bw, r, &mut scratch.lam);
        let row = &mut scratch.row;
        row.iter_mut().for_each(|v| *v = 0.0);
        for (i, &l) in scratch.lam.iter().enumerate().take(m) {
            for (v, c) in row.iter_mut().zip(&p.c[i * nn..(i + 1) * nn]) {
                *v += l * c;
            }
        }
        let mut point = [0.0; MAX_DIM];
        let mut velocity = [0.0; MAX_DIM];
        self.spec.eval(s, 0, &mut point);
        self.spec.eval(s, 1, &mut velocity);
        let frame = frame_at(&self.spec, s)?;
        let mut beta = [0.0; MAX_DIM];
        for j in 1..k {
            beta[j] = TWO_PI * self.diag[j] * dot(x, frame.col(j), k);
        }
        let mut amp = Complex64::new(0.0, 0.0);
        match self.uniform {
            Some((n0, dn)) => {
                let step = Complex64::from_polar(1.0, beta[1] * dn);
                let mut rot = Complex64::from_polar(1.0, beta[1] * n0);
                for &c in row.iter() {
                    amp += rot * c;
                    rot *= step;
                }
            }
            None => {
                for (&c, n) in row.iter().zip(&self.normals) {
                    if c != 0.0 {
                        let ph: f64 = (1..k).map(|j| beta[j] * n[j]).sum();
                        amp += Complex64::from_polar(c, ph);
                    }
                }
            }
        }
        Ok((amp, TWO_PI * dot(x, &point, k), TWO_PI * dot(x, &velocity, k)))
    }

    /// `η̌_total(x)`.
    pub fn inverse_ft(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.k {
            return Err(Error::Domain(format!("point has length {} but k = {}", x.len(), self.k)));
        }
        let mut v = [0.0; MAX_DIM];
        v[..self.k].copy_from_slice(x);
        self.inverse_ft_raw(&v)
    }

    pub(crate) fn inverse_ft_raw(&self, x: &Vector) -> Result<Complex64> {
        let norm = dot(x, x, self.k).sqrt();
        let u_perp = norm * self.diag[1];
        if u_perp > self.res.u_perp_max {
            return Err(Error::Accuracy {
                what: "point lies outside the chart's resolved dual range".into(),
                estimate: u_perp,
                bound: self.res.u_perp_max,
            });
        }
        let mut scratch = Scratch {
            lam: vec![0.0; self.cheb.len()],
            row: vec![0.0; self.normals.len()],
        };
        let parts = self
            .panels
            .iter()
            .map(|p| self.panel_integral(p, p.a, p.b, x, norm, &mut scratch, 0))
            .collect::<Result<Vec<_>>>()?;
        Ok(pairwise_sum_complex(&parts))
    }

    /// Reference evaluation without Levin: panels are bisected until plain
    /// Gauss–Legendre resolves the phase. Cost grows linearly with `|x|`.
    pub fn inverse_ft_plain(&self, x: &[f64]) -> Result<Complex64> {
        let mut v = [0.0; MAX_DIM];
        v[..self.k].copy_from_slice(x);
        let norm = dot(&v, &v, self.k).sqrt();
        let mut scratch = Scratch {
            lam: vec![0.0; self.cheb.len()],
            row: vec![0.0; self.normals.len()],
        };
        let mut parts = Vec::new();
        for p in &self.panels {
            let mut stack = vec![(p.a, p.b)];
            while let Some((a, b)) = stack.pop() {
                let bound = TWO_PI * norm * (self.speed_bound + self.diag[1..self.k].iter().sum::<f64>() * NORMAL_RADIUS * self.frame_rate_bound);
                if bound * (b - a) <= GL_PHASE {
                    parts.push(self.gauss_panel(p, a, b, &v, &mut scratch, GL_NODES)?);
                } else {
                    let mid = 0.5 * (a + b);
                    stack.push((mid, b));
                    stack.push((a, mid));
                }
            }
        }
        Ok(pairwise_sum_complex(&parts))
    }

    #[allow(clippy::too_many_arguments)]
    fn panel_integral(
        &self,
        p: &Panel,
        a: f64,
        b: f64,
        x: &Vector,
        norm: f64,
        scratch: &mut Scratch,
        depth: usize,
    ) -> Result<Complex64> {
        let h = b - a;
        let mid = 0.5 * (a + b);
        let mut velocity = [0.0; MAX_DIM];
        self.spec.eval(mid, 1, &mut velocity);
        let slope_mid = TWO_PI * dot(x, &velocity, self.k).abs();
        let curvature = TWO_PI * norm * self.accel_bound;
        let normal_reach: f64 = self.diag[1..self.k].iter().sum::<f64>() * NORMAL_RADIUS;
        let amp_rate = TWO_PI * norm * normal_reach * self.frame_rate_bound;
        let phase_max = slope_mid + 0.5 * curvature * h;
        let variation = (phase_max + amp_rate) * h;
        if variation <= 0.5 * std::f64::consts::PI {
            return self.gauss_panel(p, a, b, x, scratch, 12);
        }
        if variation <= GL_PHASE || depth >= MAX_DEPTH {
            return self.gauss_panel(p, a, b, x, scratch, GL_NODES);
        }
        let slope_min = slope_mid - 0.5 * curvature * h;
        if slope_min * h >= std::f64::consts::PI && amp_rate * h <= GL_PHASE {
            return self.levin_panel(p, a, b, x, scratch);
        }
        let left = self.panel_integral(p, a, mid, x, norm, scratch, depth + 1)?;
        let right = self.panel_integral(p, mid, b, x, norm, scratch, depth + 1)?;
        Ok(left + right)
    }

    fn gauss_panel(&self, p: &Panel, a: f64, b: f64, x: &Vector, scratch: &mut Scratch, order: usize) -> Result<Complex64> {
        let (nodes, weights) = gauss_legendre(order);
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, w) in nodes.iter().zip(&weights) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * r;
            let (amp, phase, _) = self.amplitude(p, s, x, scratch)?;
            acc += amp * Complex64::from_polar(0.5 * (b - a) * w, phase);
        }
        Ok(acc)
    }

    /// Levin collocation: find non-oscillatory `q` with `q′ + iφ′q = A`, then
    /// `∫ A e^{iφ} = q e^{iφ}` evaluated at the ends.
    fn levin_panel(&self, p: &Panel, a: f64, b: f64, x: &Vector, scratch: &mut Scratch) -> Result<Complex64> {
        let m = LEVIN_NODES;
        let cheb = chebyshev_lobatto(m);
        let d = chebyshev_differentiation(m);
        let scale = 2.0 / (b - a);
        let mut mat = DMatrix::<Complex64>::zeros(m, m);
        let mut rhs = DVector::<Complex64>::zeros(m);
        let mut phase_ends = [0.0; 2];
        for (i, r) in cheb.iter().enumerate() {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * r;
            let (amp, phase, dphase) = self.amplitude(p, s, x, scratch)?;
            for j in 0..m {
                mat[(i, j)] = Complex64::new(scale * d[i * m + j], 0.0);
            }
            mat[(i, i)] += Complex64::new(0.0, dphase);
            rhs[i] = amp;
            if i == 0 {
                phase_ends[0] = phase;
            }
            if i == m - 1 {
                phase_ends[1] = phase;
            }
        }
        let q = mat.lu().solve(&rhs).ok_or_else(|| Error::Accuracy {
            what: "singular Levin system".into(),
            estimate: b - a,
            bound: 0.0,
        })?;
        Ok(q[m - 1] * Complex64::from_polar(1.0, phase_ends[1]) - q[0] * Complex64::from_polar(1.0, phase_ends[0]))
    }
}

/// Direct tensor quadrature of `η_total` over the chart: the nodes `ξ`,
/// `η_total(ξ)` and the chart weights. An independent route to `η̌_total` and
/// `‖η‖₂` (no interpolation, no tube decomposition).
#[derive(Debug, Clone)]
pub struct ChartQuadrature {
    k: usize,
    points: Vec<Vector>,
    eta: Vec<f64>,
    weights: Vec<f64>,
}

impl ChartQuadrature {
    /// Gauss–Legendre in `s` on the chart's panels; `η_total` evaluated
    /// directly at every node.
    pub fn build(cover: &TubeCover, chart: &CurveChart) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let blocks: Vec<(Vec<Vector>, Vec<f64>, Vec<f64>)> = chart
            .panels
            .par_iter()
            .map(|p| -> Result<_> {
                let mut out = (Vec::new(), Vec::new(), Vec::new());
                for (r, w) in nodes.iter().zip(&weights) {
                    let s = 0.5 * (p.a + p.b) + 0.5 * (p.b - p.a) * r;
                    let g = chart.geometry(s)?;
                    for (n, wn) in chart.normals.iter().zip(&chart.normal_weights) {
                        let xi = chart.chart_point(&g, n);
                        let eta = cover.eta_total_at(&xi);
                        if eta != 0.0 {
                            out.0.push(xi);
                            out.1.push(eta);
                            out.2.push(0.5 * (p.b - p.a) * w * wn * chart.jacobian(&g, n));
                        }
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut q = Self {
            k: chart.k,
            points: Vec::new(),
            eta: Vec::new(),
            weights: Vec::new(),
        };
        for (p, e, w) in blocks {
            q.points.extend(p);
            q.eta.extend(e);
            q.weights.extend(w);
        }
        Ok(q)
    }

    pub fn node_count(&self) -> usize {
        self.points.len()
    }

    /// `∫ η_total dξ`.
    pub fn integral(&self) -> f64 {
        let terms: Vec<f64> = self.eta.iter().zip(&self.weights).map(|(e, w)| e * w).collect();
        pairwise_sum(&terms)
    }

    /// `∫ η_total² dξ = ‖η‖₂²`.
    pub fn l2_squared(&self) -> f64 {
        let terms: Vec<f64> = self.eta.iter().zip(&self.weights).map(|(e, w)| e * e * w).collect();
        pairwise_sum(&terms)
    }

    /// `∫ η_total(ξ) e^{2πi x·ξ} dξ`.
    pub fn inverse_ft(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.k {
            return Err(Error::Domain(format!("point has length {} but k = {}", x.len(), self.k)));
        }
        let terms: Vec<Complex64> = self
            .points
            .iter()
            .zip(self.eta.iter().zip(&self.weights))
            .map(|(xi, (e, w))| {
                let ph: f64 = (0..self.k).map(|i| x[i] * xi[i]).sum();
                Complex64::from_polar(e * w, TWO_PI * ph)
            })
            .collect();
        Ok(pairwise_sum_complex(&terms))
    }
}

/// `∫ η_ι dξ` over the chart with panels fine enough for the tube's own
/// edges — an independent check on the atom's `det D_ε ∫ g_ι dy`.
pub fn tube_integral_in_chart(cover: &TubeCover, iota: usize, panels: usize) -> Result<f64> {
    let chart = CurveChart {
        panels: Vec::new(),
        ..CurveChart::skeleton(cover)?
    };
    let t = cover.center(iota)?;
    let mut d = [0.0; MAX_DIM];
    cover.spec().eval(t, 1, &mut d);
    let reach = 1.6 * OUTER_HALFWIDTH * cover.epsilon() / dot(&d, &d, cover.k()).sqrt();
    let (nodes, weights) = gauss_legendre(GL_NODES);
    let h = 2.0 * reach / panels as f64;
    let mut terms = Vec::new();
    for p in 0..panels {
        let a = t - reach + p as f64 * h;
        for (r, w) in nodes.iter().zip(&weights) {
            let s = a + 0.5 * h * (r + 1.0);
            let g = chart.geometry(s)?;
            for (n, wn) in chart.normals.iter().zip(&chart.normal_weights) {
                let xi = chart.chart_point(&g, n);
                let eta = cover.eta_at(iota, &xi);
                if eta != 0.0 {
                    terms.push(eta * 0.5 * h * w * wn * chart.jacobian(&g, n));
                }
            }
        }
    }
    Ok(pairwise_sum(&terms))
}

impl CurveChart {
    /// Chart geometry without a profile table.
    fn skeleton(cover: &TubeCover) -> Result<Self> {
        let k = cover.k();
        let epsilon = cover.epsilon();
        let mut diag = [0.0; MAX_DIM];
        for (j, d) in diag.iter_mut().enumerate().take(k) {
            *d = epsilon.powi(j as i32 + 1);
        }
        let res = ChartResolution::default();
        let (normals, normal_weights) = normal_rule(k, &AtomResolution::new(0.0, res.u_perp_max));
        Ok(Self {
            spec: cover.spec().clone(),
            k,
            epsilon,
            diag,
            res,
            normals,
            normal_weights,
            uniform: None,
            cheb: Vec::new(),
            bw: Vec::new(),
            panels: Vec::new(),
            accel_bound: 0.0,
            speed_bound: 0.0,
            frame_rate_bound: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cover() -> TubeCover {
        TubeCover::new(&CurveSpec::moment(2).unwrap(), 1.0 / 16.0, 256).unwrap()
    }

    #[test]
    fn levin_matches_direct_quadrature() {
        let cover = cover();
        let chart = CurveChart::build(&cover, ChartResolution::new(2048.0)).unwrap();
        let direct = ChartQuadrature::build(&cover, &chart).unwrap();
        // Small |x| so the direct rule still resolves the phase.
        for x in [[0.0, 0.0], [3.0, -1.0], [-6.0, 12.0], [20.0, 9.0]] {
            let a = chart.inverse_ft(&x).unwrap();
            let b = direct.inverse_ft(&x).unwrap();
            assert!((a - b).norm() <= 1e-6 * direct.integral(), "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn levin_matches_plain_bisection_at_large_x() {
        let cover = cover();
        let chart = CurveChart::build(&cover, ChartResolution::new(2048.0)).unwrap();
        // Along the normal cone (stationary points inside), across it, and
        // near the tangent directions (endpoint-dominated).
        for x in [[-3.0e3, 8.0e3], [2.5e4, 1.0e3], [-1.2e4, 1.3e4], [900.0, -2.0e4]] {
            let a = chart.inverse_ft(&x).unwrap();
            let b = chart.inverse_ft_plain(&x).unwrap();
            assert!((a - b).norm() <= 1e-6 * b.norm() + 1e-15, "{x:?}: {a} vs {b}");
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let cover = cover();
        let chart = CurveChart::build(&cover, ChartResolution::new(2048.0)).unwrap();
        let x = [1234.5, -3456.7];
        let a = chart.inverse_ft(&x).unwrap();
        let b = chart.inverse_ft(&[-x[0], -x[1]]).unwrap();
        assert!((a - b.conj()).norm() <= 1e-9 * a.norm().max(1e-12));
    }
}
