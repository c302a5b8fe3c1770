//! Run configuration: one TOML file, with a handful of flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C0Choice {
    Auto,
    Fixed(u32),
}

impl Serialize for C0Choice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(c) => s.serialize_u32(*c),
        }
    }
}

impl<'de> Deserialize<'de> for C0Choice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Fixed(u32),
            Named(String),
        }
        match Raw::deserialize(d)? {
            Raw::Fixed(c) => Ok(Self::Fixed(c)),
            Raw::Named(s) if s == "auto" => Ok(Self::Auto),
            Raw::Named(s) => Err(serde::de::Error::custom(format!("c0 must be \"auto\" or an integer, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub frenet_points: usize,
    pub partition_samples: usize,
    pub curve_points: usize,
    /// Spatial Monte Carlo evaluations per scale for `L^{p′}` norms.
    pub lp_samples: usize,
    /// Monte Carlo evaluations per dyadic shell.
    pub shell_samples: usize,
    /// Interior nodes of the tube-index quadrature.
    pub interior_nodes: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            frenet_points: 100,
            partition_samples: 10_000,
            curve_points: 1000,
            lp_samples: 16_384,
            shell_samples: 4000,
            interior_nodes: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AckConfig {
    pub p: Vec<f64>,
    /// First and last shell index `j`.
    pub shells: [u32; 2],
}

impl Default for AckConfig {
    fn default() -> Self {
        Self {
            p: vec![3.0, 3.5, 4.0, 4.5, 5.0],
            shells: [6, 12],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: usize,
    /// `ε = 2^e` for each entry (all ≤ −2, strictly decreasing).
    pub eps_exponents: Vec<i32>,
    pub p: Vec<f64>,
    pub c0: C0Choice,
    /// Per-component polynomial perturbation of the moment curve.
    pub perturbation: Vec<Vec<f64>>,
    /// Which norms `eta-norms` measures: any of "l2", "l1", "lp".
    pub norms: Vec<String>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub budget: Budgets,
    pub ack: AckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 2,
            eps_exponents: (4..=9).map(|m| -m).collect(),
            p: vec![2.0, 3.0, 3.5, 4.0, 5.0],
            c0: C0Choice::Fixed(256),
            perturbation: Vec::new(),
            norms: vec!["l2".into(), "l1".into(), "lp".into()],
            seed: 1,
            out: PathBuf::from("mtubes-out"),
            threads: 0,
            budget: Budgets::default(),
            ack: AckConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config { reason, .. } => CliError::Config {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: PathBuf::new(),
            reason: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn epsilon(e: i32) -> f64 {
        (e as f64).exp2()
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> CliResult<()> {
        if !(2..=6).contains(&self.k) {
            return Err(CliError::usage("k", format!("must be between 2 and 6, got {}", self.k)));
        }
        if self.eps_exponents.is_empty() {
            return Err(CliError::usage("eps_exponents", "at least one scale is required"));
        }
        if let Some(e) = self.eps_exponents.iter().find(|&&e| !(-40..=-2).contains(&e)) {
            return Err(CliError::usage(
                "eps_exponents",
                format!("epsilon = 2^{e} is outside (0, 1/4]; exponents must lie in [-40, -2]"),
            ));
        }
        if self.eps_exponents.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::usage("eps_exponents", "scales must be strictly decreasing"));
        }
        if let Some(p) = self.p.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
            return Err(CliError::usage("p", format!("exponents must be finite and > 1, got {p}")));
        }
        if let Some(n) = self.norms.iter().find(|n| !["l1", "l2", "lp"].contains(&n.as_str())) {
            return Err(CliError::usage("norms", format!("unknown norm {n:?}")));
        }
        if let C0Choice::Fixed(c) = self.c0 {
            if c == 0 {
                return Err(CliError::usage("c0", "must be positive"));
            }
        }
        let b = &self.budget;
        for (name, v) in [
            ("budget.frenet_points", b.frenet_points),
            ("budget.partition_samples", b.partition_samples),
            ("budget.curve_points", b.curve_points),
            ("budget.lp_samples", b.lp_samples),
            ("budget.shell_samples", b.shell_samples),
        ] {
            if v == 0 {
                return Err(CliError::usage(name, "must be positive"));
            }
        }
        if b.interior_nodes < 3 || b.interior_nodes % 2 == 0 {
            return Err(CliError::usage("budget.interior_nodes", "must be odd and at least 3"));
        }
        if let Some(p) = self.ack.p.iter().find(|p| !(2.0..=8.0).contains(*p)) {
            return Err(CliError::usage("ack.p", format!("shell exponents must lie in [2, 8], got {p}")));
        }
        let [j0, j1] = self.ack.shells;
        if j1 < j0 + 4 || j1 > 14 {
            return Err(CliError::usage("ack.shells", "need at least 5 shells with j <= 14"));
        }
        Ok(())
    }

    pub fn curve(&self) -> CliResult<moment_tubes::curve::CurveSpec> {
        moment_tubes::curve::CurveSpec::perturbed(self.k, self.perturbation.clone()).map_err(|e| match e {
            moment_tubes::Error::InvalidParameter { field, reason } => CliError::usage(&field, reason),
            other => other.into(),
        })
    }

    pub fn threads(&self) -> usize {
        if self.threads > 0 {
            self.threads
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }
}
