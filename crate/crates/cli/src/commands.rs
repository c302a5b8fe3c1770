use std::path::PathBuf;

use moment_tubes::ack::{threshold_probe, ShellVerdict};
use moment_tubes::cover::{calibrate_c0_with, Calibration, PartitionReport, TubeCover};
use moment_tubes::curve::{frenet_frame, gamma, CurveSpec};
use moment_tubes::fourier::{
    l2_norm_eta, lp_norms_total, sum_l1_tubes, L1Options, LpOptions, NormKind, NormMeasurement, TubeSumOptions,
};
use moment_tubes::scaling::{
    critical_exponent, fit_power_law, interpolation_exponent, l2_exponent_theory, rational_from_f64, to_f64,
    vanishing_certificate, CertificateInput, EpsLadder, ThresholdReport, Verdict,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{C0Choice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{create_dir, write_file, write_outputs, ResultRow};

pub const FRENET_TOL: f64 = 1e-10;
pub const PARTITION_TOL: f64 = 1e-8;
/// Allowed `sup/inf` of `ε · Σ_ι ‖η̌_ι‖₁` over the ladder.
pub const L1_SCALED_RATIO: f64 = 4.0;
pub const L1_TUBE_SPREAD: f64 = 0.10;
/// A measured `L^{p′}` slope must reach this fraction of `α(k, p)`.
pub const LP_SLOPE_FRACTION: f64 = 0.75;
pub const SHELL_REL_ERROR: f64 = 0.10;

fn l2_slope_tol(k: usize) -> f64 {
    if k == 2 {
        0.05
    } else {
        0.10
    }
}

fn cover_for(cfg: &RunConfig, spec: &CurveSpec, e: i32, samples: usize) -> CliResult<(TubeCover, Option<Calibration>)> {
    let eps = RunConfig::epsilon(e);
    Ok(match cfg.c0 {
        C0Choice::Auto => {
            let (cover, cal) = calibrate_c0_with(spec, eps, samples, cfg.seed)?;
            (cover, Some(cal))
        }
        C0Choice::Fixed(c) => (TubeCover::new(spec, eps, c)?, None),
    })
}

pub fn frenet(cfg: &RunConfig) -> CliResult<bool> {
    let spec = cfg.curve()?;
    let n = cfg.budget.frenet_points;
    let rows: Vec<ResultRow> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
            let f = frenet_frame(&spec, t)?;
            let m = f.matrix();
            let entries: Vec<String> = (0..cfg.k)
                .flat_map(|r| (0..cfg.k).map(move |c| (r, c)))
                .map(|(r, c)| format!("{:.15e}", m[(r, c)]))
                .collect();
            let res = f.orthonormality_residual();
            Ok(ResultRow::new("frenet", cfg.k, res)
                .t(t)
                .theory(0.0)
                .pass(res <= FRENET_TOL)
                .note(entries.join(" ")))
        })
        .collect::<CliResult<_>>()?;
    write_outputs(cfg, "frenet", &rows, ())
}

#[derive(Debug, Serialize)]
struct PartitionDetail {
    eps_exp: i32,
    c0: u32,
    report: PartitionReport,
    curve_defect: f64,
    calibration: Option<Calibration>,
}

pub fn partition_check(cfg: &RunConfig) -> CliResult<bool> {
    let spec = cfg.curve()?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &e in &cfg.eps_exponents {
        let (cover, calibration) = cover_for(cfg, &spec, e, cfg.budget.partition_samples)?;
        let r = cover.check_partition(cfg.budget.partition_samples, cfg.seed);
        let n = cfg.budget.curve_points;
        let curve_defect = (0..n)
            .into_par_iter()
            .map(|i| {
                let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                Ok((cover.eta_total(&gamma(&spec, t)?)? - 1.0).abs())
            })
            .collect::<CliResult<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let k = cfg.k;
        rows.push(
            ResultRow::new("partition_defect", k, r.partition_defect)
                .eps(e)
                .theory(0.0)
                .pass(r.partition_defect <= PARTITION_TOL)
                .note(format!("max |sum eta - 1| over {} thin-tube samples", r.samples)),
        );
        rows.push(
            ResultRow::new("curve_defect", k, curve_defect)
                .eps(e)
                .theory(0.0)
                .pass(curve_defect <= PARTITION_TOL)
                .note(format!("max |eta_total(gamma(t)) - 1| over {n} curve points")),
        );
        rows.push(
            ResultRow::new("min_sum_chi", k, r.min_sum_chi)
                .eps(e)
                .pass(r.calibrated())
                .note(format!("absorption defect {:e}", r.absorption_defect)),
        );
        rows.push(ResultRow::new("overlap", k, r.max_overlap as f64).eps(e).note("N_ov"));
        rows.push(ResultRow::new("c0", k, cover.c0() as f64).eps(e).note(format!("{} tubes", cover.len())));
        details.push(PartitionDetail {
            eps_exp: e,
            c0: cover.c0(),
            report: r,
            curve_defect,
            calibration,
        });
    }
    write_outputs(cfg, "partition-check", &rows, details)
}

/// Per-scale measurements kept for `threshold-table`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMeasurements {
    pub k: usize,
    pub eps_exp: i32,
    pub epsilon: f64,
    pub c0: u32,
    pub l2: Option<NormMeasurement>,
    /// `Σ_ι ‖η̌_ι‖₁` and its relative error.
    pub l1_sum: Option<(f64, f64)>,
    pub lp: Vec<NormMeasurement>,
}

pub fn measurement_path(cfg: &RunConfig, e: i32) -> PathBuf {
    cfg.out.join("measurements").join(format!("k{}_eps_m{}.json", cfg.k, -e))
}

fn load_measurements(cfg: &RunConfig, e: i32) -> CliResult<StoredMeasurements> {
    let path = measurement_path(cfg, e);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingMeasurement { path, eps_exp: e })
        }
        Err(err) => return Err(CliError::io(path, err)),
    };
    serde_json::from_str(&text).map_err(|err| CliError::Config {
        path,
        reason: err.to_string(),
    })
}

/// `p′ = p/(p−1)` for the configured `p ≥ 2` (the range the spatial sampler covers).
fn dual_exponents(cfg: &RunConfig) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &p in &cfg.p {
        let q = p / (p - 1.0);
        if (1.0..=2.0).contains(&q) && !out.iter().any(|v| (v - q).abs() < 1e-12) {
            out.push(q);
        }
    }
    out
}

fn measurement_row(name: &str, k: usize, e: i32, m: &NormMeasurement) -> ResultRow {
    ResultRow::new(name, k, m.value)
        .eps(e)
        .error(m.abs_error())
        .pass(m.admissible())
        .note(format!("rel_error {:.3e}, nodes {}", m.rel_error, m.nodes))
}

fn failed_row(name: &str, k: usize, e: i32, err: &moment_tubes::Error) -> ResultRow {
    ResultRow::new(name, k, f64::NAN).eps(e).pass(false).note(err.to_string())
}

pub fn eta_norms(cfg: &RunConfig) -> CliResult<bool> {
    let spec = cfg.curve()?;
    let k = cfg.k;
    let want = |n: &str| cfg.norms.iter().any(|v| v == n);
    let tube_opts = TubeSumOptions {
        interior_nodes: cfg.budget.interior_nodes,
        ..TubeSumOptions::default()
    };
    let q_list = dual_exponents(cfg);
    let mut rows = Vec::new();
    let mut stored = Vec::new();
    create_dir(&cfg.out.join("measurements"))?;
    for &e in &cfg.eps_exponents {
        let eps = RunConfig::epsilon(e);
        let (cover, _) = cover_for(cfg, &spec, e, cfg.budget.partition_samples)?;
        let mut s = StoredMeasurements {
            k,
            eps_exp: e,
            epsilon: eps,
            c0: cover.c0(),
            l2: None,
            l1_sum: None,
            lp: Vec::new(),
        };
        if want("l2") {
            match l2_norm_eta(&cover, &tube_opts) {
                Ok(m) => {
                    rows.push(measurement_row("l2", k, e, &m));
                    s.l2 = Some(m);
                }
                Err(err @ moment_tubes::Error::Accuracy { .. }) => rows.push(failed_row("l2", k, e, &err)),
                Err(err) => return Err(err.into()),
            }
        }
        if want("l1") && k == 2 {
            match sum_l1_tubes(&cover, &tube_opts, &L1Options::default()) {
                Ok(sum) => {
                    let rel = sum.rel_error();
                    rows.push(
                        ResultRow::new("l1_scaled", k, eps * sum.value)
                            .eps(e)
                            .error(eps * sum.error)
                            .note(format!("epsilon * sum of tube L1 norms over {} tubes", sum.tubes)),
                    );
                    let spread = |v: &[(usize, f64, f64, f64)]| {
                        let hi = v.iter().map(|s| s.2).fold(f64::MIN, f64::max);
                        let lo = v.iter().map(|s| s.2).fold(f64::MAX, f64::min);
                        hi / lo - 1.0
                    };
                    let all = spread(&sum.samples);
                    let interior = spread(&sum.interior_samples());
                    rows.push(
                        ResultRow::new("l1_tube_spread", k, all)
                            .eps(e)
                            .theory(0.0)
                            .pass(all <= L1_TUBE_SPREAD)
                            .note(format!(
                                "max/min - 1 over {} evaluated tubes; interior tubes only: {interior:.4}",
                                sum.samples.len()
                            )),
                    );
                    s.l1_sum = Some((sum.value, rel));
                }
                Err(err @ moment_tubes::Error::Accuracy { .. }) => rows.push(failed_row("l1_scaled", k, e, &err)),
                Err(err) => return Err(err.into()),
            }
        }
        if want("lp") && k == 2 && !q_list.is_empty() {
            let opts = LpOptions {
                samples: cfg.budget.lp_samples,
                seed: cfg.seed.wrapping_mul(0x9e37_79b9).wrapping_add((-e) as u64),
                ..LpOptions::default()
            };
            let report = lp_norms_total(&cover, &q_list, &opts)?;
            for m in &report.measurements {
                let NormKind::Lp(q) = m.kind else { unreachable!() };
                rows.push(measurement_row("lp", k, e, m).p(q));
            }
            s.lp = report.measurements;
        }
        let text = serde_json::to_string_pretty(&s).expect("measurements serialize");
        write_file(&measurement_path(cfg, e), &text)?;
        stored.push(s);
    }

    // Ladder fits.
    let fit_row = |name: &str, pts: &[(f64, f64)]| -> Option<(ResultRow, f64)> {
        let fit = fit_power_law(pts).ok()?;
        Some((
            ResultRow::new(name, k, fit.slope)
                .error(fit.loo_halfwidth)
                .note(format!("{} scales, max log2 residual {:.3e}", fit.points, fit.residual_max)),
            fit.slope,
        ))
    };
    let l2_pts: Vec<(f64, f64)> = stored
        .iter()
        .filter_map(|s| s.l2.as_ref().filter(|m| m.admissible()).map(|m| (s.epsilon, m.value)))
        .collect();
    if let Some((row, slope)) = fit_row("l2_slope", &l2_pts) {
        let theory = to_f64(l2_exponent_theory(k as u32)?);
        rows.push(row.theory(theory).pass((slope - theory).abs() <= l2_slope_tol(k)));
    }
    let l1_pts: Vec<(f64, f64)> = stored.iter().filter_map(|s| s.l1_sum.map(|v| (s.epsilon, v.0))).collect();
    if let Some((row, _)) = fit_row("l1_slope", &l1_pts) {
        rows.push(row.theory(-1.0));
    }
    if !l1_pts.is_empty() {
        let scaled: Vec<f64> = l1_pts.iter().map(|(e, v)| e * v).collect();
        let ratio = scaled.iter().cloned().fold(f64::MIN, f64::max) / scaled.iter().cloned().fold(f64::MAX, f64::min);
        rows.push(
            ResultRow::new("l1_scaled_ratio", k, ratio)
                .pass(ratio <= L1_SCALED_RATIO)
                .note("sup/inf of epsilon * sum of tube L1 norms"),
        );
    }
    for &q in &q_list {
        let pts: Vec<(f64, f64)> = stored
            .iter()
            .filter_map(|s| {
                s.lp.iter()
                    .find(|m| matches!(m.kind, NormKind::Lp(v) if (v - q).abs() < 1e-12) && m.admissible())
                    .map(|m| (s.epsilon, m.value))
            })
            .collect();
        if let Some((row, slope)) = fit_row("lp_slope", &pts) {
            let p = q / (q - 1.0);
            let alpha = if q == 1.0 {
                -1.0
            } else {
                to_f64(interpolation_exponent(k as u32, rational_from_f64(p)?)?.alpha)
            };
            let row = row.p(q).theory(alpha);
            rows.push(if alpha > 0.0 {
                row.pass(slope >= LP_SLOPE_FRACTION * alpha)
            } else {
                row
            });
        }
    }
    write_outputs(cfg, "eta-norms", &rows, stored)
}

fn certificate(cfg: &RunConfig, p: f64, ladder: &EpsLadder) -> CliResult<ThresholdReport> {
    let k = cfg.k as u32;
    let pr = rational_from_f64(p)?;
    let it = interpolation_exponent(k, pr)?;
    if it.alpha <= 0.into() {
        return Ok(vanishing_certificate(k, pr, ladder, CertificateInput::Direct(&[]))?);
    }
    let stored: Vec<StoredMeasurements> = cfg
        .eps_exponents
        .iter()
        .map(|&e| load_measurements(cfg, e))
        .collect::<CliResult<_>>()?;
    let q = to_f64(it.p_prime.expect("p > 1"));
    let direct: Vec<(f64, NormMeasurement)> = stored
        .iter()
        .filter_map(|s| {
            let m = if (q - 2.0).abs() < 1e-12 {
                s.l2.clone()
            } else {
                s.lp.iter().find(|m| matches!(m.kind, NormKind::Lp(v) if (v - q).abs() < 1e-9)).cloned()
            };
            m.map(|m| (s.epsilon, m))
        })
        .collect();
    if direct.len() == stored.len() {
        return Ok(vanishing_certificate(k, pr, ladder, CertificateInput::Direct(&direct))?);
    }
    let l1: Vec<(f64, f64)> = stored.iter().filter_map(|s| s.l1_sum.map(|v| (s.epsilon, v.0))).collect();
    let l2: Vec<(f64, f64)> = stored
        .iter()
        .filter_map(|s| s.l2.as_ref().map(|m| (s.epsilon, m.value)))
        .collect();
    Ok(vanishing_certificate(k, pr, ladder, CertificateInput::Interpolated { l1: &l1, l2: &l2 })?)
}

pub fn threshold_table(cfg: &RunConfig) -> CliResult<bool> {
    let mut rows = Vec::new();
    for k in 2u32..=6 {
        let pc = critical_exponent(k)?;
        let formula = ((k * k + k + 2) as f64) / 2.0;
        let alpha = interpolation_exponent(k, pc)?.alpha;
        rows.push(
            ResultRow::new("p_critical", k as usize, to_f64(pc))
                .p(to_f64(pc))
                .theory(formula)
                .pass(pc.is_integer() && to_f64(pc) == formula && alpha == 0.into())
                .note(format!("p_c = {pc}, alpha(p_c) = {alpha}")),
        );
    }
    let ladder = EpsLadder::new(cfg.eps_exponents.iter().map(|&e| (-e) as u32).collect())?;
    let mut reports = Vec::new();
    for &p in &cfg.p {
        let r = certificate(cfg, p, &ladder)?;
        let alpha = to_f64(r.alpha);
        let certified = r.verdict == Verdict::VanishingCertified;
        let mut row = ResultRow::new("certificate", cfg.k, r.fit.map_or(f64::NAN, |f| f.slope))
            .p(p)
            .theory(alpha)
            .pass(certified == (alpha > 0.0))
            .note(format!("{:?}; {:?}; {}", r.verdict, r.evidence, r.explanation));
        if let Some(f) = r.fit {
            row = row.error(f.loo_halfwidth);
        }
        rows.push(row);
        reports.push(r);
    }
    write_outputs(cfg, "threshold-table", &rows, reports)
}

const PLOT_SCRIPT: &str = r##"# Plots log2 S_j against j for each p from ack.csv (needs matplotlib).
import csv, math, sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "ack.csv"
with open(path) as fh:
    rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
series = {}
for r in rows:
    if r["experiment"] == "shell_mass":
        series.setdefault(float(r["p"]), []).append((int(r["index"]), math.log2(float(r["value"]))))
for p, pts in sorted(series.items()):
    pts.sort()
    plt.plot([j for j, _ in pts], [v for _, v in pts], marker="o", label=f"p = {p:g}")
plt.xlabel("shell j")
plt.ylabel("log2 S_j")
plt.legend()
plt.savefig(path.rsplit(".", 1)[0] + ".svg")
"##;

fn consistent(p: f64, pc: f64, v: ShellVerdict) -> bool {
    if p < pc {
        v != ShellVerdict::Convergent
    } else if p > pc {
        v != ShellVerdict::Divergent
    } else {
        v == ShellVerdict::NearCritical
    }
}

pub fn ack(cfg: &RunConfig) -> CliResult<bool> {
    let k = cfg.k;
    let [j0, j1] = cfg.ack.shells;
    let table = threshold_probe(k, &cfg.ack.p, (j0, j1), cfg.budget.shell_samples, cfg.seed)?;
    let pc = to_f64(table.p_critical);
    let mut rows = Vec::new();
    for r in &table.rows {
        for s in &r.shells {
            rows.push(
                ResultRow::new("shell_mass", k, s.value)
                    .p(r.p)
                    .index(s.j as usize)
                    .error(s.std_error)
                    .pass(s.rel_error() <= SHELL_REL_ERROR)
                    .note(format!("{} samples", s.samples)),
            );
        }
        rows.push(
            ResultRow::new("beta", k, r.beta)
                .p(r.p)
                .error(r.beta_error)
                .theory(pc)
                .pass(consistent(r.p, pc, r.verdict))
                .note(format!("{:?}", r.verdict)),
        );
    }
    rows.push(
        ResultRow::new("crossing", k, table.crossing.unwrap_or(f64::NAN))
            .theory(pc)
            .pass(table.ordered)
            .note("p where the fitted beta changes sign; pass = verdicts ordered in p"),
    );
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("ack_plot.py"), PLOT_SCRIPT)?;
    write_outputs(cfg, "ack", &rows, table)
}
