//! Sums over tubes: `η̌_total = Σ_ι η̌_ι`, `‖η‖₂² = Σ_ι ∫ η_ι η_total`, and
//! `Σ_ι ‖η̌_ι‖₁`.
//!
//! Per-tube quantities depend smoothly on `t_ι` except within a few tubes of
//! either end, where neighbours are missing. Sums over the cover therefore
//! evaluate those boundary tubes exactly and replace the interior by an
//! interpolatory rule on integer indices: a polynomial through tubes near
//! Chebyshev points, summed exactly over every interior index. Two nested
//! rules give the error estimate.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::atom::{AtomResolution, TubeAtom};
use super::l1::{l1_norm_tube, L1Options};
use super::{NormKind, NormMeasurement, ADMISSIBLE_REL_ERROR};
use crate::bump::OUTER_HALFWIDTH;
use crate::cover::TubeCover;
use crate::curve::{dot, Vector, MAX_DIM};
use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, pairwise_sum_complex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSumOptions {
    /// Covers with at most this many tubes are summed exhaustively.
    pub exhaustive_below: usize,
    /// Nodes of the finer interior rule (the coarser one uses about half).
    pub interior_nodes: usize,
}

impl Default for TubeSumOptions {
    fn default() -> Self {
        Self {
            exhaustive_below: 64,
            interior_nodes: 17,
        }
    }
}

/// A sum over all tubes with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSum {
    pub value: f64,
    /// Estimated absolute error (interior rule difference plus per-tube errors).
    pub error: f64,
    pub tubes: usize,
    /// `(ι, t_ι, value, abs error)` for every tube evaluated.
    pub samples: Vec<(usize, f64, f64, f64)>,
    /// Indices of the first and last interior tube (empty when exhaustive).
    pub interior: Option<(usize, usize)>,
}

impl TubeSum {
    pub fn rel_error(&self) -> f64 {
        self.error / self.value.abs()
    }

    /// Values of the tubes not influenced by either end of the curve.
    pub fn interior_samples(&self) -> Vec<(usize, f64, f64, f64)> {
        match self.interior {
            Some((a, b)) => self.samples.iter().copied().filter(|s| s.0 >= a && s.0 <= b).collect(),
            None => self.samples.clone(),
        }
    }
}

/// Number of tubes at each end whose cutoff sees the missing neighbours.
pub fn boundary_reach(cover: &TubeCover) -> (usize, usize) {
    let k = cover.k();
    let mut d = [0.0; MAX_DIM];
    let reach = |t: f64, d: &mut Vector| {
        cover.spec().eval(t, 1, d);
        let speed = dot(d, d, k).sqrt();
        // Neighbour supports overlap up to two half-widths away in y₁.
        (2.0 * OUTER_HALFWIDTH * 1.025 * cover.c0() as f64 / speed).ceil() as usize + 1
    };
    (reach(0.0, &mut d), reach(1.0, &mut d))
}

/// Integer nodes near the Chebyshev–Lobatto points of `[a, b]`.
fn integer_nodes(a: usize, b: usize, m: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..m)
        .map(|j| {
            let x = -(std::f64::consts::PI * j as f64 / (m - 1) as f64).cos();
            let v = a as f64 + 0.5 * (x + 1.0) * (b - a) as f64;
            v.round() as usize
        })
        .collect();
    nodes.dedup();
    nodes
}

/// Weights `W_j = Σ_{ι=a}^{b} ℓ_j(ι)` of the interpolatory discrete-sum rule.
fn discrete_sum_weights(nodes: &[usize], a: usize, b: usize) -> Vec<f64> {
    let m = nodes.len();
    let x: Vec<f64> = nodes.iter().map(|&n| n as f64).collect();
    // Barycentric weights for arbitrary nodes, scaled for stability.
    let scale = (b - a).max(1) as f64;
    let mut bw = vec![1.0; m];
    for j in 0..m {
        for i in 0..m {
            if i != j {
                bw[j] /= (x[j] - x[i]) / scale;
            }
        }
    }
    let mut weights = vec![0.0; m];
    let mut lam = vec![0.0; m];
    for iota in a..=b {
        let s = iota as f64;
        crate::quadrature::barycentric_coefficients(&x, &bw, s, &mut lam);
        for j in 0..m {
            weights[j] += lam[j];
        }
    }
    weights
}

/// Sum of `f(ι)` over the cover; `f` returns a value and its absolute error.
pub fn sum_over_tubes<F>(cover: &TubeCover, opts: &TubeSumOptions, f: F) -> Result<TubeSum>
where
    F: Fn(usize) -> Result<(f64, f64)> + Sync,
{
    let n = cover.len();
    let (rl, rr) = boundary_reach(cover);
    let m = opts.interior_nodes.max(3);
    if n <= opts.exhaustive_below.max(rl + rr + 2 * m) {
        let values = (0..n).into_par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        let samples: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &(v, e))| (i, cover.centers()[i], v, e))
            .collect();
        let value = pairwise_sum(&values.iter().map(|v| v.0).collect::<Vec<_>>());
        let error = values.iter().map(|v| v.1).sum();
        return Ok(TubeSum {
            value,
            error,
            tubes: n,
            samples,
            interior: None,
        });
    }
    let a = rl + 1;
    let b = n - 2 - rr;
    let fine = integer_nodes(a, b, m);
    let coarse = integer_nodes(a, b, (m + 1) / 2);
    let mut wanted: Vec<usize> = (0..a).chain(b + 1..n).chain(fine.iter().copied()).chain(coarse.iter().copied()).collect();
    wanted.sort_unstable();
    wanted.dedup();
    let values = wanted.par_iter().map(|&i| f(i)).collect::<Result<Vec<_>>>()?;
    let lookup = |i: usize| values[wanted.binary_search(&i).expect("evaluated")];
    let boundary: Vec<f64> = (0..a).chain(b + 1..n).map(|i| lookup(i).0).collect();
    let mut error: f64 = (0..a).chain(b + 1..n).map(|i| lookup(i).1).sum();
    let rule = |nodes: &[usize]| -> (f64, f64) {
        let w = discrete_sum_weights(nodes, a, b);
        let terms: Vec<f64> = nodes.iter().zip(&w).map(|(&i, w)| w * lookup(i).0).collect();
        let errs: f64 = nodes.iter().zip(&w).map(|(&i, w)| w.abs() * lookup(i).1).sum();
        (pairwise_sum(&terms), errs)
    };
    let (fine_sum, fine_err) = rule(&fine);
    let (coarse_sum, _) = rule(&coarse);
    error += fine_err + (fine_sum - coarse_sum).abs();
    let value = pairwise_sum(&boundary) + fine_sum;
    let samples = wanted
        .iter()
        .zip(&values)
        .map(|(&i, &(v, e))| (i, cover.centers()[i], v, e))
        .collect();
    Ok(TubeSum {
        value,
        error,
        tubes: n,
        samples,
        interior: Some((a, b)),
    })
}

/// `‖η‖₂ = ‖η̌‖₂`, from `‖η‖₂² = Σ_ι det D_ε ∫ g_ι(y) η_total(ξ(y)) dy`.
pub fn l2_norm_eta(cover: &TubeCover, opts: &TubeSumOptions) -> Result<NormMeasurement> {
    let res = AtomResolution::low();
    let sum = sum_over_tubes(cover, opts, |i| {
        let atom = TubeAtom::build_with_total(cover, i, res)?;
        let v = atom.jacobian() * atom.overlap_integral().expect("built with total");
        // The cutoffs are C^∞ but not analytic: trapezoid error decays like
        // exp(−c√N) and sits near 3·10⁻⁶ at the default resolution.
        Ok((v, 1e-5 * v.abs()))
    })?;
    let squared = sum.value;
    if squared <= 0.0 {
        return Err(Error::Accuracy {
            what: "L2 norm of eta".into(),
            estimate: squared,
            bound: sum.error,
        });
    }
    // Relative error of a square root is half that of its argument.
    let rel_error = 0.5 * sum.rel_error();
    if rel_error > ADMISSIBLE_REL_ERROR {
        return Err(Error::Accuracy {
            what: "L2 norm of eta".into(),
            estimate: squared.sqrt(),
            bound: rel_error * squared.sqrt(),
        });
    }
    Ok(NormMeasurement {
        value: squared.sqrt(),
        kind: NormKind::L2,
        truncation: 0.0,
        nodes: sum.samples.len(),
        rel_error,
    })
}

/// `Σ_ι ‖η̌_ι‖₁` with the per-tube values it was assembled from.
pub fn sum_l1_tubes(cover: &TubeCover, opts: &TubeSumOptions, l1: &L1Options) -> Result<TubeSum> {
    sum_over_tubes(cover, opts, |i| {
        let m = l1_norm_tube(cover, i, l1)?;
        Ok((m.value, m.abs_error()))
    })
}

/// `η̌_total(x)` at a batch of points: every tube's transform, summed pairwise
/// in tube order (independent of thread count).
pub fn inverse_ft_total_batch(cover: &TubeCover, xs: &[Vec<f64>], res: AtomResolution) -> Result<Vec<Complex64>> {
    let k = cover.k();
    let pts: Vec<Vector> = xs
        .iter()
        .map(|x| {
            if x.len() != k {
                return Err(Error::Domain(format!("point has length {} but k = {k}", x.len())));
            }
            let mut v = [0.0; MAX_DIM];
            v[..k].copy_from_slice(x);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let per_tube: Vec<Vec<Complex64>> = (0..cover.len())
        .into_par_iter()
        .map(|i| {
            let atom = TubeAtom::build(cover, i, res)?;
            pts.iter().map(|x| atom.inverse_ft_raw(x)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..pts.len())
        .map(|j| {
            let column: Vec<Complex64> = per_tube.iter().map(|v| v[j]).collect();
            pairwise_sum_complex(&column)
        })
        .collect())
}

/// `η̌_total(x) = Σ_ι η̌_ι(x)` with atoms resolving the dual box `res`.
pub fn inverse_ft_total(cover: &TubeCover, x: &[f64], res: AtomResolution) -> Result<Complex64> {
    Ok(inverse_ft_total_batch(cover, &[x.to_vec()], res)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::CurveSpec;

    #[test]
    fn discrete_sum_rule_is_exact_for_polynomials() {
        let (a, b) = (13usize, 5000usize);
        let nodes = integer_nodes(a, b, 9);
        let w = discrete_sum_weights(&nodes, a, b);
        let f = |i: f64| 1.0 + 0.3 * i - 2e-4 * i * i + 1e-11 * i.powi(5);
        let exact: f64 = (a..=b).map(|i| f(i as f64)).sum();
        let got: f64 = nodes.iter().zip(&w).map(|(&i, w)| w * f(i as f64)).sum();
        assert!((got - exact).abs() < 1e-9 * exact.abs(), "{got} vs {exact}");
    }

    #[test]
    fn quadrature_in_index_matches_exhaustive_sum() {
        let cover = TubeCover::new(&CurveSpec::moment(2).unwrap(), 0.25, 64).unwrap();
        let f = |i: usize| -> Result<(f64, f64)> {
            let t = cover.centers()[i];
            Ok(((1.0 + 4.0 * t * t).sqrt() + if i < 3 { 1.0 } else { 0.0 }, 0.0))
        };
        let exhaustive: f64 = (0..cover.len()).map(|i| f(i).unwrap().0).sum();
        let opts = TubeSumOptions {
            exhaustive_below: 0,
            interior_nodes: 17,
        };
        let s = sum_over_tubes(&cover, &opts, f).unwrap();
        assert!(s.interior.is_some());
        assert!((s.value - exhaustive).abs() < 1e-9 * exhaustive);
        assert!(s.error < 1e-6 * exhaustive);
    }

    #[test]
    fn tube_order_does_not_matter_beyond_rounding() {
        let cover = TubeCover::new(&CurveSpec::moment(2).unwrap(), 0.25, 16).unwrap();
        let x = vec![0.3, -0.2];
        let res = AtomResolution::new(4.0, 4.0);
        let forward = inverse_ft_total(&cover, &x, res).unwrap();
        let mut terms: Vec<Complex64> = (0..cover.len())
            .map(|i| TubeAtom::build(&cover, i, res).unwrap().inverse_ft(&x).unwrap())
            .collect();
        terms.reverse();
        let reverse = pairwise_sum_complex(&terms);
        assert!((forward - reverse).norm() <= 1e-12 * forward.norm());
    }
}
