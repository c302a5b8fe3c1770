//! The moment curve `t ↦ (t, t², …, t^k)`, its small polynomial perturbations,
//! Frenet frames built by Gram–Schmidt on the derivative flag, and the
//! anisotropic tube coordinates `y = D_ε⁻¹ M_tᵀ (ξ − center)`.
//!
//! Points and vectors live in fixed `[f64; MAX_DIM]` buffers so the hot loops
//! in the cover and Fourier code never allocate; only the first `k` entries
//! are meaningful.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest ambient dimension supported by the geometric machinery.
pub const MAX_DIM: usize = 8;

/// Largest allowed magnitude of a perturbation coefficient.
pub const MAX_PERTURBATION: f64 = 1e-3;

const MAX_PERTURBATION_DEGREE: usize = 16;

/// Pivot norms below this are treated as a degenerate derivative flag.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Orthonormality tolerance under which `Mᵀ` is used as `M⁻¹`.
pub const INVERSE_TOL: f64 = 1e-9;

pub type Vector = [f64; MAX_DIM];

/// Dimension and perturbation of the curve.
///
/// Component `j` (1-based) is `t^j + Σ_d perturbation[j-1][d] · t^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    k: usize,
    perturbation: Vec<Vec<f64>>,
    delta: f64,
}

impl CurveSpec {
    /// The unperturbed moment curve in `ℝ^k`.
    pub fn moment(k: usize) -> Result<Self> {
        Self::perturbed(k, Vec::new())
    }

    /// A perturbed moment curve; `perturbation[j]` lists the coefficients of
    /// the polynomial added to component `j + 1`, lowest degree first.
    pub fn perturbed(k: usize, mut perturbation: Vec<Vec<f64>>) -> Result<Self> {
        if k < 2 {
            return Err(invalid("k", format!("dimension must be at least 2, got {k}")));
        }
        if k > MAX_DIM {
            return Err(invalid("k", format!("dimension {k} exceeds supported maximum {MAX_DIM}")));
        }
        if perturbation.len() > k {
            return Err(invalid(
                "perturbation",
                format!("{} component polynomials given for k = {k}", perturbation.len()),
            ));
        }
        perturbation.resize(k, Vec::new());
        let mut delta: f64 = 0.0;
        for (j, poly) in perturbation.iter().enumerate() {
            if poly.len() > MAX_PERTURBATION_DEGREE + 1 {
                return Err(invalid(
                    "perturbation",
                    format!("component {} has degree above {MAX_PERTURBATION_DEGREE}", j + 1),
                ));
            }
            for &c in poly {
                if !c.is_finite() {
                    return Err(invalid("perturbation", "non-finite coefficient"));
                }
                delta = delta.max(c.abs());
            }
        }
        if delta > MAX_PERTURBATION {
            return Err(invalid(
                "delta",
                format!("perturbation size {delta:e} exceeds {MAX_PERTURBATION:e}"),
            ));
        }
        Ok(Self { k, perturbation, delta })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn perturbation(&self) -> &[Vec<f64>] {
        &self.perturbation
    }

    pub fn is_unperturbed(&self) -> bool {
        self.delta == 0.0
    }

    /// `m`-th derivative (m = 0 gives the point) at any real `t`, following
    /// the polynomial continuation outside [0, 1].
    pub(crate) fn eval(&self, t: f64, m: usize, out: &mut Vector) {
        *out = [0.0; MAX_DIM];
        for j in 1..=self.k {
            let mut v = monomial_derivative(j, m, t);
            for (d, &c) in self.perturbation[j - 1].iter().enumerate() {
                if c != 0.0 {
                    v += c * monomial_derivative(d, m, t);
                }
            }
            out[j - 1] = v;
        }
    }

    pub(crate) fn point(&self, t: f64) -> Vector {
        let mut p = [0.0; MAX_DIM];
        self.eval(t, 0, &mut p);
        p
    }

    /// Bound on `|γ₁(t) − t|` and on `|γ₁′(t) − 1|` over [-1, 2].
    pub(crate) fn first_component_slack(&self) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for (d, &c) in self.perturbation[0].iter().enumerate() {
            value += c.abs() * 2f64.powi(d as i32);
            if d >= 1 {
                slope += c.abs() * d as f64 * 2f64.powi(d as i32 - 1);
            }
        }
        (value, slope)
    }

    /// Solves `γ₁(t) = x` for `t` (γ₁ is strictly increasing near [0, 1]).
    pub(crate) fn invert_first_component(&self, x: f64) -> f64 {
        if self.perturbation[0].iter().all(|&c| c == 0.0) {
            return x;
        }
        let mut t = x;
        let mut buf = [0.0; MAX_DIM];
        for _ in 0..50 {
            self.eval(t, 0, &mut buf);
            let f = buf[0] - x;
            self.eval(t, 1, &mut buf);
            let step = f / buf[0];
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        t
    }
}

/// `d^m/dt^m t^j`.
fn monomial_derivative(j: usize, m: usize, t: f64) -> f64 {
    if m > j {
        return 0.0;
    }
    let mut coeff = 1.0;
    for i in 0..m {
        coeff *= (j - i) as f64;
    }
    coeff * t.powi((j - m) as i32)
}

fn check_parameter(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("curve parameter t = {t} lies outside [0, 1]")));
    }
    Ok(())
}

/// The curve point `γ(t)`.
pub fn gamma(spec: &CurveSpec, t: f64) -> Result<Vec<f64>> {
    check_parameter(t)?;
    Ok(spec.point(t)[..spec.k].to_vec())
}

/// The exact `m`-th derivative `γ^{(m)}(t)`, `m ≥ 1`. Orders above `k` are
/// permitted and return only the perturbation's contribution.
pub fn curve_derivative(spec: &CurveSpec, t: f64, m: usize) -> Result<Vec<f64>> {
    check_parameter(t)?;
    if m == 0 {
        return Err(Error::Domain("derivative order must be at least 1".into()));
    }
    let mut out = [0.0; MAX_DIM];
    spec.eval(t, m, &mut out);
    Ok(out[..spec.k].to_vec())
}

/// Orthonormal frame `M_t = [e₁(t), …, e_k(t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetFrame {
    t: f64,
    k: usize,
    cols: [Vector; MAX_DIM],
    residual: f64,
}

impl FrenetFrame {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Column `e_{j+1}` (0-based `j`).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j][..self.k]
    }

    pub(crate) fn col(&self, j: usize) -> &Vector {
        &self.cols[j]
    }

    /// `‖MᵀM − I‖_max` measured when the frame was built.
    pub fn orthonormality_residual(&self) -> f64 {
        self.residual
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.cols[j][i])
    }

    /// `Mᵀ v`.
    pub(crate) fn transpose_apply(&self, v: &Vector) -> Vector {
        let mut out = [0.0; MAX_DIM];
        for (j, o) in out.iter_mut().enumerate().take(self.k) {
            *o = dot(&self.cols[j], v, self.k);
        }
        out
    }

    /// `M v`.
    pub(crate) fn apply(&self, v: &Vector) -> Vector {
        let mut out = [0.0; MAX_DIM];
        for j in 0..self.k {
            let c = v[j];
            for (o, e) in out.iter_mut().zip(&self.cols[j]).take(self.k) {
                *o += c * e;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &Vector, b: &Vector, k: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..k {
        s += a[i] * b[i];
    }
    s
}

/// Frenet frame at `t ∈ [0, 1]`.
pub fn frenet_frame(spec: &CurveSpec, t: f64) -> Result<FrenetFrame> {
    check_parameter(t)?;
    frame_at(spec, t)
}

/// Frenet frame at any real `t` (polynomial continuation).
///
/// Modified Gram–Schmidt with one reorthogonalization pass over
/// `γ′, …, γ^{(k)}`; each pivot keeps a positive inner product with the
/// derivative it came from.
pub(crate) fn frame_at(spec: &CurveSpec, t: f64) -> Result<FrenetFrame> {
    let k = spec.k;
    let mut cols = [[0.0; MAX_DIM]; MAX_DIM];
    for m in 1..=k {
        let mut w = [0.0; MAX_DIM];
        spec.eval(t, m, &mut w);
        let scale = dot(&w, &w, k).sqrt();
        for _pass in 0..2 {
            for e in cols.iter().take(m - 1) {
                let c = dot(&w, e, k);
                for i in 0..k {
                    w[i] -= c * e[i];
                }
            }
        }
        let norm = dot(&w, &w, k).sqrt();
        if norm < DEGENERACY_TOL || norm < DEGENERACY_TOL * scale {
            return Err(Error::Degenerate { t, pivot: m, norm });
        }
        for i in 0..k {
            cols[m - 1][i] = w[i] / norm;
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((dot(&cols[i], &cols[j], k) - target).abs());
        }
    }
    Ok(FrenetFrame { t, k, cols, residual })
}

/// The scaling `D_ε = diag(ε, ε², …, ε^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropicScaling {
    epsilon: f64,
    k: usize,
    diag: Vector,
}

impl AnisotropicScaling {
    pub fn new(epsilon: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 0.25) {
            return Err(invalid("epsilon", format!("scale {epsilon} must lie in (0, 1/4]")));
        }
        if !(2..=MAX_DIM).contains(&k) {
            return Err(invalid("k", format!("dimension {k} unsupported")));
        }
        let mut diag = [0.0; MAX_DIM];
        let mut p = 1.0;
        for d in diag.iter_mut().take(k) {
            p *= epsilon;
            *d = p;
        }
        Ok(Self { epsilon, k, diag })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag[..self.k]
    }

    pub(crate) fn diag(&self) -> &Vector {
        &self.diag
    }

    /// `det D_ε = ε^{k(k+1)/2}`.
    pub fn determinant(&self) -> f64 {
        self.diagonal().iter().product()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(self.diagonal()))
    }
}

fn to_vector(p: &[f64], k: usize, what: &str) -> Result<Vector> {
    if p.len() != k {
        return Err(Error::Domain(format!("{what} has length {} but k = {k}", p.len())));
    }
    let mut v = [0.0; MAX_DIM];
    v[..k].copy_from_slice(p);
    Ok(v)
}

/// `y = D_ε⁻¹ Mᵀ (ξ − center)`, using `Mᵀ` for `M⁻¹`.
pub fn anisotropic_coords(
    frame: &FrenetFrame,
    scaling: &AnisotropicScaling,
    center: &[f64],
    xi: &[f64],
) -> Result<Vec<f64>> {
    let k = frame.k;
    if scaling.k != k {
        return Err(Error::Domain("frame and scaling dimensions differ".into()));
    }
    if frame.residual > INVERSE_TOL {
        return Err(Error::Domain(format!(
            "frame is not orthonormal (residual {:e}); transpose is not its inverse",
            frame.residual
        )));
    }
    let c = to_vector(center, k, "center")?;
    let x = to_vector(xi, k, "xi")?;
    let y = coords_raw(frame, scaling.diag(), &c, &x);
    Ok(y[..k].to_vec())
}

#[inline]
pub(crate) fn coords_raw(frame: &FrenetFrame, diag: &Vector, center: &Vector, xi: &Vector) -> Vector {
    let k = frame.k;
    let mut d = [0.0; MAX_DIM];
    for i in 0..k {
        d[i] = xi[i] - center[i];
    }
    let mut y = frame.transpose_apply(&d);
    for i in 0..k {
        y[i] /= diag[i];
    }
    y
}

/// Membership in the closed anisotropic box `Γ_{ε,t}` around `center`.
pub fn in_tube(
    frame: &FrenetFrame,
    scaling: &AnisotropicScaling,
    center: &[f64],
    xi: &[f64],
) -> Result<bool> {
    let y = anisotropic_coords(frame, scaling, center, xi)?;
    Ok(y.iter().all(|v| v.abs() <= 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn moment(k: usize) -> CurveSpec {
        CurveSpec::moment(k).unwrap()
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(&moment(3), 0.0).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(gamma(&moment(3), 0.5).unwrap(), vec![0.5, 0.25, 0.125]);
        let spec = CurveSpec::perturbed(2, vec![vec![], vec![0.0, 0.0, 0.0, 1e-3]]).unwrap();
        let p = gamma(&spec, 1.0).unwrap();
        assert_eq!(p[0], 1.0);
        assert_relative_eq!(p[1], 1.001, epsilon = 1e-15);
    }

    #[test]
    fn gamma_rejects_parameters_outside_unit_interval() {
        assert!(matches!(gamma(&moment(2), 1.5), Err(Error::Domain(_))));
        assert!(matches!(gamma(&moment(2), -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(CurveSpec::moment(1), Err(Error::InvalidParameter { field: "k", .. })));
        assert!(matches!(
            CurveSpec::perturbed(2, vec![vec![2e-3]]),
            Err(Error::InvalidParameter { field: "delta", .. })
        ));
        let ok = CurveSpec::perturbed(3, vec![vec![1e-3, -5e-4]]).unwrap();
        assert_eq!(ok.delta(), 1e-3);
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(curve_derivative(&moment(3), 0.0, 1).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(curve_derivative(&moment(3), 0.0, 2).unwrap(), vec![0.0, 2.0, 0.0]);
        assert_eq!(curve_derivative(&moment(2), 1.0, 1).unwrap(), vec![1.0, 2.0]);
        assert_eq!(curve_derivative(&moment(2), 0.3, 3).unwrap(), vec![0.0, 0.0]);
        let spec = CurveSpec::perturbed(2, vec![vec![], vec![0.0, 0.0, 0.0, 1e-3]]).unwrap();
        assert_relative_eq!(curve_derivative(&spec, 0.5, 3).unwrap()[1], 6e-3);
        assert!(curve_derivative(&moment(2), 0.5, 0).is_err());
    }

    #[test]
    fn derivative_matches_falling_factorial_formula() {
        let spec = moment(5);
        for m in 1..=5 {
            let d = curve_derivative(&spec, 0.7, m).unwrap();
            for j in 1..=5usize {
                let expected = if j >= m {
                    let ff: f64 = (0..m).map(|i| (j - i) as f64).product();
                    ff * 0.7f64.powi((j - m) as i32)
                } else {
                    0.0
                };
                assert_relative_eq!(d[j - 1], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_at_origin_is_identity() {
        for k in [2, 3] {
            let f = frenet_frame(&moment(k), 0.0).unwrap();
            let m = f.matrix();
            assert_relative_eq!(m, DMatrix::identity(k, k), epsilon = 1e-15);
        }
    }

    #[test]
    fn planar_frame_closed_form() {
        for &t in &[0.1, 0.5, 0.9] {
            let f = frenet_frame(&moment(2), t).unwrap();
            let r = (1.0 + 4.0 * t * t).sqrt();
            assert_relative_eq!(f.column(0)[0], 1.0 / r, epsilon = 1e-14);
            assert_relative_eq!(f.column(0)[1], 2.0 * t / r, epsilon = 1e-14);
            assert_relative_eq!(f.column(1)[0], -2.0 * t / r, epsilon = 1e-14);
            assert_relative_eq!(f.column(1)[1], 1.0 / r, epsilon = 1e-14);
        }
    }

    #[test]
    fn planar_frame_agrees_with_qr_of_derivative_matrix() {
        let t = 0.5;
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 2.0 * t, 0.0, 2.0]);
        let qr = a.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..2 {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        let f = frenet_frame(&moment(2), t).unwrap();
        assert_relative_eq!(f.matrix(), q, epsilon = 1e-13);
    }

    #[test]
    fn anisotropic_coords_examples() {
        let spec = moment(2);
        let s = AnisotropicScaling::new(0.1, 2).unwrap();
        let f0 = frenet_frame(&spec, 0.0).unwrap();
        let c = gamma(&spec, 0.0).unwrap();
        let y = anisotropic_coords(&f0, &s, &c, &c).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
        let y = anisotropic_coords(&f0, &s, &c, &[0.1, 0.01]).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(y[1], 1.0, epsilon = 1e-12);

        let f = frenet_frame(&spec, 0.5).unwrap();
        let c = gamma(&spec, 0.5).unwrap();
        let xi: Vec<f64> = (0..2).map(|i| c[i] + 0.05 * f.column(0)[i]).collect();
        let y = anisotropic_coords(&f, &s, &c, &xi).unwrap();
        assert_relative_eq!(y[0], 0.5, epsilon = 1e-13);
        assert!(y[1].abs() < 1e-12);
    }

    #[test]
    fn in_tube_examples() {
        let spec = moment(2);
        let eps = 0.1;
        let s = AnisotropicScaling::new(eps, 2).unwrap();
        let f = frenet_frame(&spec, 0.3).unwrap();
        let c = gamma(&spec, 0.3).unwrap();
        assert!(in_tube(&f, &s, &c, &c).unwrap());
        let out: Vec<f64> = (0..2).map(|i| c[i] + 2.0 * eps * f.column(0)[i]).collect();
        assert!(!in_tube(&f, &s, &c, &out).unwrap());
        // Exactly on the boundary in the frame at t = 0 (axis aligned).
        let f0 = frenet_frame(&spec, 0.0).unwrap();
        assert!(in_tube(&f0, &s, &[0.0, 0.0], &[0.0, eps * eps]).unwrap());
    }

    #[test]
    fn scaling_rejects_large_epsilon() {
        assert!(AnisotropicScaling::new(0.5, 2).is_err());
        assert!(AnisotropicScaling::new(0.0, 2).is_err());
        let s = AnisotropicScaling::new(0.25, 3).unwrap();
        assert_eq!(s.diagonal(), &[0.25, 0.0625, 0.015625]);
        assert_relative_eq!(s.determinant(), 0.25f64.powi(6));
    }

    #[test]
    fn first_component_inversion() {
        let spec = CurveSpec::perturbed(2, vec![vec![0.0, 0.0, 1e-3]]).unwrap();
        let t = spec.invert_first_component(0.5 + 1e-3 * 0.25);
        assert_relative_eq!(t, 0.5, epsilon = 1e-14);
    }
}
