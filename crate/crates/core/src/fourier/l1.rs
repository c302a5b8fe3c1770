//! `‖η̌_ι‖₁ = ∫ |ĝ_ι(u)| du` in dual-adapted coordinates (the Jacobian of
//! `u = D_ε Mᵀ x` cancels `det D_ε`).
//!
//! `ĝ` is evaluated on a uniform half-plane grid (`|ĝ(−u)| = |ĝ(u)|`) with
//! separable sums: first across the strip, then along `y₁` with rotating
//! phasors. The truncation tail is extrapolated from the masses of the last
//! two dyadic bands in each direction; the discretization error from the
//! same sum on the every-other-node subgrid.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::atom::{AtomResolution, TubeAtom};
use super::{NormKind, NormMeasurement, ADMISSIBLE_REL_ERROR, TWO_PI};
use crate::cover::TubeCover;
use crate::error::{invalid, Error, Result};
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub u1_start: f64,
    pub u2_start: f64,
    pub u1_limit: f64,
    pub u2_limit: f64,
    pub du1: f64,
    pub du2: f64,
    /// Admitted relative error (tail plus discretization).
    pub tolerance: f64,
}

impl Default for L1Options {
    fn default() -> Self {
        Self {
            u1_start: 4096.0,
            u2_start: 32768.0,
            u1_limit: 16384.0,
            u2_limit: 131072.0,
            du1: 4.0,
            du2: 64.0,
            tolerance: ADMISSIBLE_REL_ERROR,
        }
    }
}

/// Masses of `|ĝ|` on one truncated grid.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualGridMass {
    pub total: f64,
    /// Same sum on the every-other-node subgrid.
    pub coarse: f64,
    /// `|u₁| ∈ [U₁/4, U₁/2)` and `[U₁/2, U₁]`.
    pub u1_bands: [f64; 2],
    pub u2_bands: [f64; 2],
    pub nodes: usize,
}

fn geometric_tail(bands: [f64; 2]) -> f64 {
    let [inner, outer] = bands;
    if outer <= 0.0 {
        return 0.0;
    }
    if inner <= 0.0 {
        return f64::INFINITY;
    }
    let r = outer / inner;
    if r >= 0.9 {
        f64::INFINITY
    } else {
        outer * r / (1.0 - r)
    }
}

impl DualGridMass {
    pub fn tails(&self) -> (f64, f64) {
        (geometric_tail(self.u1_bands), geometric_tail(self.u2_bands))
    }

    pub fn rel_error(&self) -> f64 {
        let (t1, t2) = self.tails();
        (t1 + t2 + (self.total - self.coarse).abs()) / self.total
    }
}

/// `∫ |ĝ|` over `|u₁| ≤ u1_max`, `0 ≤ u₂ ≤ u2_max` (doubled for the lower half).
///
/// The `u₁` spacing is at most `du1`; it is set to `1/(N h)` with `h` the
/// `y₁` node spacing and `N` a power of two, so each `u₂` row is one FFT.
pub fn dual_grid_mass(atom: &TubeAtom, u1_max: f64, u2_max: f64, du1: f64, du2: f64) -> Result<DualGridMass> {
    if atom.k() != 2 {
        return Err(invalid("k", "dual-grid L¹ is implemented for planar curves (k = 2)"));
    }
    let res = atom.resolution();
    if u1_max > res.u1_max || u2_max > res.u_perp_max {
        return Err(Error::Accuracy {
            what: "dual grid exceeds the atom's resolved box".into(),
            estimate: u1_max.max(u2_max),
            bound: res.u1_max.min(res.u_perp_max),
        });
    }
    let (y1, wy, shift, z, wg, live) = atom.rows();
    let nz = z.len();
    let h = if y1.len() > 1 { y1[1] - y1[0] } else { wy };
    let n_fft = (y1.len().max((1.0 / (du1 * h)).ceil() as usize)).next_power_of_two();
    let du1 = 1.0 / (n_fft as f64 * h);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let n1 = (u1_max / du1).floor() as i64;
    let n2 = (u2_max / du2).round() as i64;
    let rows: Vec<[f64; 4]> = (0..=n2)
        .into_par_iter()
        .map(|m| {
            let u2 = m as f64 * du2;
            let phases: Vec<Complex64> = z.iter().map(|zz| Complex64::from_polar(1.0, -TWO_PI * u2 * zz[1])).collect();
            let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
            for &i in live {
                let row = &wg[i * nz..(i + 1) * nz];
                let mut inner = Complex64::new(0.0, 0.0);
                for (w, e) in row.iter().zip(&phases) {
                    inner += e * *w;
                }
                buf[i] = inner * Complex64::from_polar(wy, -TWO_PI * u2 * shift[i][1]);
            }
            fft.process(&mut buf);
            let mut full = Vec::with_capacity((2 * n1 + 1) as usize);
            let mut coarse = Vec::with_capacity((n1 + 1) as usize);
            let (mut b_in, mut b_out) = (0.0, 0.0);
            for l in -n1..=n1 {
                let v = buf[l.rem_euclid(n_fft as i64) as usize].norm();
                full.push(v);
                if l % 2 == 0 {
                    coarse.push(v);
                }
                let a = l.unsigned_abs() as f64 * du1;
                if a >= u1_max / 2.0 {
                    b_out += v;
                } else if a >= u1_max / 4.0 {
                    b_in += v;
                }
            }
            [pairwise_sum(&full), 2.0 * pairwise_sum(&coarse), b_in, b_out]
        })
        .collect();
    let mut out = DualGridMass {
        nodes: ((2 * n1 + 1) * (n2 + 1)) as usize,
        ..Default::default()
    };
    let cell = du1 * du2;
    let mut full = Vec::with_capacity(rows.len());
    let mut coarse = Vec::new();
    for (m, r) in rows.iter().enumerate() {
        // Half-plane trapezoid: u₂ = 0 once, every other row twice.
        let w = if m == 0 { cell } else { 2.0 * cell };
        full.push(w * r[0]);
        if m % 2 == 0 {
            coarse.push(2.0 * w * r[1]);
        }
        out.u1_bands[0] += w * r[2];
        out.u1_bands[1] += w * r[3];
        let u2 = m as f64 * du2;
        if u2 >= u2_max / 2.0 {
            out.u2_bands[1] += w * r[0];
        } else if u2 >= u2_max / 4.0 {
            out.u2_bands[0] += w * r[0];
        }
    }
    out.total = pairwise_sum(&full);
    out.coarse = pairwise_sum(&coarse);
    Ok(out)
}

/// `‖η̌_ι‖₁`, growing the dual box until the estimated error is admitted.
pub fn l1_norm_tube(cover: &TubeCover, iota: usize, opts: &L1Options) -> Result<NormMeasurement> {
    let (mut u1, mut u2) = (opts.u1_start, opts.u2_start);
    loop {
        let atom = TubeAtom::build(cover, iota, AtomResolution::new(u1, u2))?;
        let mass = dual_grid_mass(&atom, u1, u2, opts.du1, opts.du2)?;
        let (t1, t2) = mass.tails();
        let rel = mass.rel_error();
        if rel <= opts.tolerance {
            return Ok(NormMeasurement {
                value: mass.total + t1 + t2,
                kind: NormKind::L1,
                truncation: u2,
                nodes: mass.nodes,
                rel_error: rel,
            });
        }
        let grow1 = t1 > 0.25 * opts.tolerance * mass.total && u1 < opts.u1_limit;
        let grow2 = t2 > 0.25 * opts.tolerance * mass.total && u2 < opts.u2_limit;
        if !grow1 && !grow2 {
            return Err(Error::Accuracy {
                what: format!("L1 norm of tube {iota}"),
                estimate: mass.total,
                bound: rel * mass.total,
            });
        }
        if grow1 {
            u1 *= 2.0;
        }
        if grow2 {
            u2 *= 2.0;
            u1 = u1.max(0.06 * u2 + 1024.0);
        }
    }
}
