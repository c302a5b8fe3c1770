//! One tube's cutoff in its own anisotropic coordinates,
//! `g_ι(y) = η_ι(γ(t_ι) + M_ι D_ε y)`, and its Fourier transform.
//!
//! `g_ι` lives on a thin strip around the rescaled curve `Y(s)`, so the
//! quadrature uses sheared coordinates `y = (y₁, Y_⊥(σ(y₁)) + z)` where
//! `Y₁(σ(y₁)) = y₁`. The shear has unit Jacobian. Along `y₁` and (for k = 2)
//! `z` the integrand is smooth with compact support, so uniform trapezoid
//! rules converge spectrally; the node spacing is chosen to resolve both the
//! cutoff and the phase up to the requested dual box.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TWO_PI;
use crate::bump::OUTER_HALFWIDTH;
use crate::cover::TubeCover;
use crate::curve::{dot, FrenetFrame, Vector, MAX_DIM};
use crate::error::{Error, Result};
use crate::quadrature::gauss_rule;

/// Half-width of the normal offset range `z`; `g` vanishes beyond ≈ 2.0·10⁻⁴.
pub const NORMAL_RADIUS: f64 = 2.6e-4;

/// Bound on `|dY_⊥/dy₁|` over the atom, used to size the `y₁` grid.
const SHEAR_SLOPE: f64 = 0.1;
/// Effective bandwidth of the cutoff along `y₁` and across the strip.
const Y1_BANDWIDTH: f64 = 2_500.0;
pub(crate) const Z_BANDWIDTH: f64 = 2.5e5;
const OVERSAMPLE: f64 = 1.2;

/// Dual box `|u₁| ≤ u1_max`, `|u_j| ≤ u_perp_max (j ≥ 2)` an atom resolves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomResolution {
    pub u1_max: f64,
    pub u_perp_max: f64,
}

impl AtomResolution {
    /// Enough for `|u| ≲ 10³`, e.g. spatial points in a ball of radius ≈ ε⁻¹.
    pub fn low() -> Self {
        Self {
            u1_max: 1024.0,
            u_perp_max: 1024.0,
        }
    }

    pub fn new(u1_max: f64, u_perp_max: f64) -> Self {
        Self { u1_max, u_perp_max }
    }

    fn y1_count(&self) -> usize {
        let rate = OVERSAMPLE * (self.u1_max + SHEAR_SLOPE * self.u_perp_max) + Y1_BANDWIDTH;
        ((2.0 * OUTER_HALFWIDTH * rate).ceil() as usize).max(64)
    }

    fn z_count(&self) -> usize {
        let rate = OVERSAMPLE * self.u_perp_max + Z_BANDWIDTH;
        ((2.0 * NORMAL_RADIUS * rate).ceil() as usize).max(32)
    }

    fn contains(&self, u: &Vector, k: usize) -> bool {
        u[0].abs() <= self.u1_max && (1..k).all(|j| u[j].abs() <= self.u_perp_max)
    }
}

/// Quadrature rule in the normal offset `z ∈ ℝ^{k−1}` (stored in slots 1..k).
pub(crate) fn normal_rule(k: usize, res: &AtomResolution) -> (Vec<Vector>, Vec<f64>) {
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match k {
        2 => {
            let n = res.z_count();
            let h = 2.0 * NORMAL_RADIUS / n as f64;
            for j in 1..n {
                let mut z = [0.0; MAX_DIM];
                z[1] = -NORMAL_RADIUS + j as f64 * h;
                nodes.push(z);
                weights.push(h);
            }
        }
        3 => {
            // Polar: Gauss in r (plateau, transition), trapezoid in angle.
            let r_max = 2.1e-4;
            let panels = ((1.2e-4 * 4.0 * res.u_perp_max).ceil() as usize).max(4);
            let mut radial = gauss_rule(8, 0.0, 0.9e-4);
            let h = (r_max - 0.9e-4) / panels as f64;
            for p in 0..panels {
                let r = gauss_rule(10, 0.9e-4 + p as f64 * h, 0.9e-4 + (p + 1) as f64 * h);
                radial.nodes.extend(r.nodes);
                radial.weights.extend(r.weights);
            }
            let m = (TWO_PI * res.u_perp_max * r_max).ceil() as usize + 24;
            for a in 0..m {
                let theta = TWO_PI * a as f64 / m as f64;
                let (sn, cs) = theta.sin_cos();
                for (&r, &w) in radial.nodes.iter().zip(&radial.weights) {
                    let mut z = [0.0; MAX_DIM];
                    z[1] = r * cs;
                    z[2] = r * sn;
                    nodes.push(z);
                    weights.push(w * r * TWO_PI / m as f64);
                }
            }
        }
        _ => {
            // Tensor trapezoid restricted to the ball containing the support.
            let n = res.z_count().min(48);
            let h = 2.0 * NORMAL_RADIUS / n as f64;
            let dims = k - 1;
            let total = (n - 1).pow(dims as u32);
            for flat in 0..total {
                let mut z = [0.0; MAX_DIM];
                let mut rest = flat;
                for d in 0..dims {
                    z[d + 1] = -NORMAL_RADIUS + ((rest % (n - 1)) + 1) as f64 * h;
                    rest /= n - 1;
                }
                if dot(&z, &z, k) <= 2.2e-4 * 2.2e-4 {
                    nodes.push(z);
                    weights.push(h.powi(dims as i32));
                }
            }
        }
    }
    (nodes, weights)
}

/// Sampled `g_ι` with everything needed to evaluate its transform.
#[derive(Debug, Clone)]
pub struct TubeAtom {
    iota: usize,
    k: usize,
    t: f64,
    det: f64,
    center: Vector,
    frame: FrenetFrame,
    diag: Vector,
    res: AtomResolution,
    y1: Vec<f64>,
    wy: f64,
    /// `Y(σ(y₁))` per row (slot 0 holds y₁).
    shift: Vec<Vector>,
    z: Vec<Vector>,
    wz: Vec<f64>,
    /// Row-major `wz_j · g(y₁_i, z_j)`.
    wg: Vec<f64>,
    /// Row-major `η_total` at the same nodes, when requested.
    total: Option<Vec<f64>>,
    live_rows: Vec<usize>,
}

impl TubeAtom {
    pub fn build(cover: &TubeCover, iota: usize, res: AtomResolution) -> Result<Self> {
        Self::build_inner(cover, iota, res, false)
    }

    /// Also samples `η_total` at the atom's nodes (for `∫ η_ι η_total`).
    pub fn build_with_total(cover: &TubeCover, iota: usize, res: AtomResolution) -> Result<Self> {
        Self::build_inner(cover, iota, res, true)
    }

    fn build_inner(cover: &TubeCover, iota: usize, res: AtomResolution, with_total: bool) -> Result<Self> {
        let frame = cover.frame(iota)?.clone();
        let k = cover.k();
        let t = cover.centers()[iota];
        let center = *cover.point_ref(iota);
        let diag = *cover.scaling().diag();
        let n_y = res.y1_count();
        let wy = 2.0 * OUTER_HALFWIDTH / n_y as f64;
        let y1: Vec<f64> = (1..n_y).map(|i| -OUTER_HALFWIDTH + i as f64 * wy).collect();
        let (z, wz) = normal_rule(k, &res);
        let nz = z.len();
        let rows: Vec<(Vector, Vec<f64>, Vec<f64>)> = y1
            .par_iter()
            .map(|&a| {
                let s = cover.rescaled_first_inverse(iota, a);
                let mut shift = cover.rescaled_curve(iota, s);
                shift[0] = a;
                let mut wg = vec![0.0; nz];
                let mut tot = if with_total { vec![0.0; nz] } else { Vec::new() };
                for j in 0..nz {
                    let mut dy = [0.0; MAX_DIM];
                    for d in 0..k {
                        dy[d] = (shift[d] + z[j][d]) * diag[d];
                    }
                    let off = frame.apply(&dy);
                    let mut xi = [0.0; MAX_DIM];
                    for d in 0..k {
                        xi[d] = center[d] + off[d];
                    }
                    if with_total {
                        let (own, all) = cover.eta_pair_at(iota, &xi);
                        wg[j] = wz[j] * own;
                        tot[j] = all;
                    } else {
                        wg[j] = wz[j] * cover.eta_at(iota, &xi);
                    }
                }
                (shift, wg, tot)
            })
            .collect();
        let mut shift = Vec::with_capacity(rows.len());
        let mut wg = Vec::with_capacity(rows.len() * nz);
        let mut total = if with_total { Some(Vec::with_capacity(rows.len() * nz)) } else { None };
        let mut live_rows = Vec::new();
        for (i, (s, w, tt)) in rows.into_iter().enumerate() {
            if w.iter().any(|&v| v != 0.0) {
                live_rows.push(i);
            }
            shift.push(s);
            wg.extend(w);
            if let Some(tv) = total.as_mut() {
                tv.extend(tt);
            }
        }
        Ok(Self {
            iota,
            k,
            t,
            det: cover.scaling().determinant(),
            center,
            frame,
            diag,
            res,
            y1,
            wy,
            shift,
            z,
            wz,
            wg,
            total,
            live_rows,
        })
    }

    pub fn iota(&self) -> usize {
        self.iota
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Jacobian `det D_ε`.
    pub fn jacobian(&self) -> f64 {
        self.det
    }

    pub fn resolution(&self) -> AtomResolution {
        self.res
    }

    pub fn node_count(&self) -> usize {
        self.y1.len() * self.z.len()
    }

    /// Largest sampled value of `g_ι`.
    pub fn max_value(&self) -> f64 {
        let nz = self.z.len();
        let mut m: f64 = 0.0;
        for i in 0..self.y1.len() {
            for j in 0..nz {
                let w = self.wg[i * nz + j];
                if w != 0.0 {
                    m = m.max(w / self.wz[j]);
                }
            }
        }
        m
    }

    /// `∫ g_ι dy`.
    pub fn integral(&self) -> f64 {
        let nz = self.z.len();
        let rows: Vec<f64> = (0..self.y1.len())
            .map(|i| self.wg[i * nz..(i + 1) * nz].iter().sum::<f64>() * self.wy)
            .collect();
        crate::quadrature::pairwise_sum(&rows)
    }

    /// `∫ g_ι(y) η_total(ξ(y)) dy`; needs [`TubeAtom::build_with_total`].
    pub fn overlap_integral(&self) -> Option<f64> {
        let total = self.total.as_ref()?;
        let nz = self.z.len();
        let rows: Vec<f64> = (0..self.y1.len())
            .map(|i| {
                let r = i * nz..(i + 1) * nz;
                self.wg[r.clone()].iter().zip(&total[r]).map(|(a, b)| a * b).sum::<f64>() * self.wy
            })
            .collect();
        Some(crate::quadrature::pairwise_sum(&rows))
    }

    /// Dual coordinates `u = D_ε M_ιᵀ x`.
    pub fn dual_coords(&self, x: &[f64]) -> Vec<f64> {
        let mut v = [0.0; MAX_DIM];
        v[..self.k].copy_from_slice(&x[..self.k]);
        let u = self.dual_raw(&v);
        u[..self.k].to_vec()
    }

    pub(crate) fn dual_raw(&self, x: &Vector) -> Vector {
        let mut u = self.frame.transpose_apply(x);
        for d in 0..self.k {
            u[d] *= self.diag[d];
        }
        u
    }

    /// `ĝ_ι(u) = ∫ g_ι(y) e^{−2πi u·y} dy`.
    pub fn transform(&self, u: &[f64]) -> Result<Complex64> {
        if u.len() != self.k {
            return Err(Error::Domain(format!("dual point has length {} but k = {}", u.len(), self.k)));
        }
        let mut v = [0.0; MAX_DIM];
        v[..self.k].copy_from_slice(u);
        self.check_resolved(&v)?;
        Ok(self.transform_raw(&v))
    }

    fn check_resolved(&self, u: &Vector) -> Result<()> {
        if !self.res.contains(u, self.k) {
            let reach = (0..self.k).map(|j| u[j].abs()).fold(0.0, f64::max);
            return Err(Error::Accuracy {
                what: format!("tube {} transform outside its resolved dual box", self.iota),
                estimate: reach,
                bound: self.res.u1_max.min(self.res.u_perp_max),
            });
        }
        Ok(())
    }

    pub(crate) fn transform_raw(&self, u: &Vector) -> Complex64 {
        let k = self.k;
        let nz = self.z.len();
        let phases: Vec<Complex64> = self
            .z
            .iter()
            .map(|z| {
                let mut a = 0.0;
                for d in 1..k {
                    a += u[d] * z[d];
                }
                Complex64::from_polar(1.0, -TWO_PI * a)
            })
            .collect();
        let rows: Vec<Complex64> = self
            .live_rows
            .iter()
            .map(|&i| {
                let row = &self.wg[i * nz..(i + 1) * nz];
                let mut inner = Complex64::new(0.0, 0.0);
                for (w, e) in row.iter().zip(&phases) {
                    inner += e * *w;
                }
                let s = &self.shift[i];
                let mut a = 0.0;
                for d in 0..k {
                    a += u[d] * s[d];
                }
                inner * Complex64::from_polar(self.wy, -TWO_PI * a)
            })
            .collect();
        crate::quadrature::pairwise_sum_complex(&rows)
    }

    /// `η̌_ι(x) = det D_ε · e^{2πi x·γ(t_ι)} · ĝ_ι(−D_ε M_ιᵀ x)`.
    pub fn inverse_ft(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.k {
            return Err(Error::Domain(format!("point has length {} but k = {}", x.len(), self.k)));
        }
        let mut v = [0.0; MAX_DIM];
        v[..self.k].copy_from_slice(x);
        let mut u = self.dual_raw(&v);
        for c in u.iter_mut() {
            *c = -*c;
        }
        self.check_resolved(&u)?;
        Ok(self.inverse_ft_unchecked(&v, &u))
    }

    pub(crate) fn inverse_ft_raw(&self, x: &Vector) -> Result<Complex64> {
        let mut u = self.dual_raw(x);
        for c in u.iter_mut() {
            *c = -*c;
        }
        self.check_resolved(&u)?;
        Ok(self.inverse_ft_unchecked(x, &u))
    }

    fn inverse_ft_unchecked(&self, x: &Vector, minus_u: &Vector) -> Complex64 {
        let phase = TWO_PI * dot(x, &self.center, self.k);
        Complex64::from_polar(self.det, phase) * self.transform_raw(minus_u)
    }

    // Raw access for the dual-grid L¹ evaluation.
    pub(crate) fn rows(&self) -> (&[f64], f64, &[Vector], &[Vector], &[f64], &[usize]) {
        (&self.y1, self.wy, &self.shift, &self.z, &self.wg, &self.live_rows)
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveSpec;

    fn cover(k: usize, e: i32) -> TubeCover {
        TubeCover::new(&CurveSpec::moment(k).unwrap(), 2f64.powi(-e), 256).unwrap()
    }

    #[test]
    fn transform_at_origin_is_the_integral() {
        let c = cover(2, 5);
        let a = TubeAtom::build(&c, 1000, AtomResolution::low()).unwrap();
        let at0 = a.inverse_ft(&[0.0, 0.0]).unwrap();
        assert!(at0.im.abs() < 1e-20);
        assert!((at0.re - a.jacobian() * a.integral()).abs() < 1e-12 * at0.re);
        assert!(a.integral() > 0.0);
    }

    #[test]
    fn conjugate_symmetry() {
        let c = cover(2, 5);
        let a = TubeAtom::build(&c, 777, AtomResolution::low()).unwrap();
        for x in [[3.0, -2.0], [40.0, 100.0], [-500.0, 700.0]] {
            let p = a.inverse_ft(&x).unwrap();
            let m = a.inverse_ft(&[-x[0], -x[1]]).unwrap();
            assert!((p - m.conj()).norm() <= 1e-9 * p.norm().max(1e-30));
        }
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let c = cover(2, 4);
        let a = TubeAtom::build(&c, 0, AtomResolution::low()).unwrap();
        let m = a.max_value();
        assert!(m > 0.0 && m <= 1.0 + 1e-12);
    }

    #[test]
    fn unresolved_dual_point_is_an_accuracy_error() {
        let c = cover(2, 5);
        let a = TubeAtom::build(&c, 10, AtomResolution::low()).unwrap();
        let far = [0.0, 1e9];
        assert!(matches!(a.inverse_ft(&far), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn refinement_does_not_move_the_integral() {
        let c = cover(2, 5);
        let coarse = TubeAtom::build(&c, 2000, AtomResolution::low()).unwrap();
        let fine = TubeAtom::build(&c, 2000, AtomResolution::new(4096.0, 8192.0)).unwrap();
        let (a, b) = (coarse.integral(), fine.integral());
        assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
    }

    #[test]
    fn polar_rule_for_space_curves() {
        let c = cover(3, 4);
        let a = TubeAtom::build(&c, 500, AtomResolution::low()).unwrap();
        let fine = TubeAtom::build(&c, 500, AtomResolution::new(1024.0, 8192.0)).unwrap();
        assert!((a.integral() - fine.integral()).abs() < 1e-4 * fine.integral());
    }
}
