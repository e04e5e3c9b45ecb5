//! Scenario files.
//!
//! A config is a TOML document with a `schema_version`, a `seed`, and three
//! tables: `[network]` (required), `[solver]` and `[detect]` (optional,
//! defaults below). Unknown keys are rejected. Every validation error names
//! the offending field and, when it can be located, its line.
//!
//! ```toml
//! schema_version = 1
//! seed = 1
//!
//! [network]
//! M = 10                  # sensors
//! N = 10                  # samples per sensor
//! U = 3.0                 # statistics are quantized over [0, 2U]
//! Pt = 1.0                # total transmit power budget
//! pfa = 0.1
//! signal_amplitude = 0.2  # constant signal before SNR calibration
//! xi_a_db = -4.0          # optional: network-average SNR target
//! zeta = 0.1              # channel noise variance
//! sigma2_min = 0.5        # observation noise variance, log-uniform
//! sigma2_max = 2.0
//! channel_gain = 1.0      # optional: fixed |h| instead of Rayleigh draws
//! radius = 0.5            # geometric-graph connection radius
//! topology = "geometric"  # or "complete"
//!
//! [solver]
//! lambda0_init = 1e-8
//! kappa = 1e-7
//! step_rule = "harmonic"
//! consensus_tol = 1e-10
//! consensus_max_iter = 100000
//! consensus_stop = "local"  # or "oracle"
//! outer_max_iter = 100000
//!
//! [detect]
//! trials = 100000
//! quantizer = "whole_bits"  # or "additive"
//! schemes = ["ED_opt_weights_opt_power", "MFD_opt_power"]
//! pt_grid = [0.5, 1.0, 2.0]
//! pfa_grid = [0.01, 0.1]
//! n_grid = [10, 50]
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::consensus::{Graph, StopRule};
use crate::error::{Error, Result};
use crate::model::{NetworkSpec, Scenario};
use crate::montecarlo::{Quantizer, Scheme};
use crate::solver_dist::{SolverConfig, StepRule};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub seed: u64,
    pub network: NetworkSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub detect: DetectSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Geometric,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "Pt")]
    pub pt: f64,
    pub pfa: f64,
    pub signal_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_a_db: Option<f64>,
    pub zeta: f64,
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_gain: Option<f64>,
    pub radius: f64,
    #[serde(default)]
    pub topology: Topology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda0_init: f64,
    pub kappa: f64,
    pub step_rule: String,
    pub consensus_tol: f64,
    pub consensus_max_iter: usize,
    pub consensus_stop: String,
    pub outer_max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            lambda0_init: d.lambda0_init,
            kappa: d.kappa,
            step_rule: "harmonic".into(),
            consensus_tol: d.consensus_tol,
            consensus_max_iter: d.consensus_max_iter,
            consensus_stop: "local".into(),
            outer_max_iter: d.outer_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectSection {
    pub trials: usize,
    pub quantizer: String,
    pub schemes: Vec<String>,
    pub pt_grid: Vec<f64>,
    pub pfa_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            trials: 100_000,
            quantizer: Quantizer::default().name().into(),
            schemes: Scheme::ALL.iter().map(|s| s.name().to_string()).collect(),
            pt_grid: Vec::new(),
            pfa_grid: Vec::new(),
            n_grid: Vec::new(),
        }
    }
}

/// 1-based line of the first `key = ...` assignment in `text`.
fn locate(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|line| {
            let line = line.trim_start();
            line.strip_prefix(key)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
}

fn field_error(text: Option<&str>, field: &str, reason: impl std::fmt::Display) -> Error {
    let key = field.rsplit('.').next().unwrap_or(field);
    match text.and_then(|t| locate(t, key)) {
        Some(line) => Error::Config(format!("line {line}: field `{field}`: {reason}")),
        None => Error::Config(format!("field `{field}`: {reason}")),
    }
}

fn qualify(name: &str) -> String {
    match name {
        "M" | "N" | "U" | "Pt" | "pfa" | "radius" | "xi_a_db" | "sigma2_min" | "sigma2_max" => {
            format!("network.{name}")
        }
        "lambda0_init" | "kappa" | "consensus_tol" | "consensus_max_iter" | "outer_max_iter" => {
            format!("solver.{name}")
        }
        "trials" | "schemes" | "quantizer" | "pfa_grid" | "pt_grid" | "n_grid" => {
            format!("detect.{name}")
        }
        other => other.to_string(),
    }
}

impl Config {
    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    Error::Config(format!("line {line}: {msg}"))
                }
                None => Error::Config(msg),
            }
        })?;
        cfg.validate_with(Some(text))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(None)
    }

    fn validate_with(&self, text: Option<&str>) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_error(
                text,
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        let net = &self.network;
        for (name, v) in [
            ("network.U", net.u),
            ("network.Pt", net.pt),
            ("network.zeta", net.zeta),
            ("network.radius", net.radius),
            ("network.sigma2_min", net.sigma2_min),
            ("network.sigma2_max", net.sigma2_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_error(
                    text,
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if !(net.signal_amplitude.is_finite() && net.signal_amplitude >= 0.0) {
            return Err(field_error(
                text,
                "network.signal_amplitude",
                "must be finite and >= 0",
            ));
        }
        if let Some(h) = net.channel_gain {
            if !(h.is_finite() && h > 0.0) {
                return Err(field_error(
                    text,
                    "network.channel_gain",
                    "must be finite and > 0",
                ));
            }
        }
        if net.xi_a_db.is_some() && net.signal_amplitude == 0.0 {
            return Err(field_error(
                text,
                "network.xi_a_db",
                "cannot calibrate a zero signal",
            ));
        }
        self.solver_config().map_err(|e| relabel(e, text))?;
        let d = &self.detect;
        if d.trials == 0 {
            return Err(field_error(text, "detect.trials", "must be >= 1"));
        }
        if d.schemes.is_empty() {
            return Err(field_error(
                text,
                "detect.schemes",
                "must list at least one scheme",
            ));
        }
        self.schemes().map_err(|e| relabel(e, text))?;
        self.quantizer().map_err(|e| relabel(e, text))?;
        if d.pt_grid.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(field_error(
                text,
                "detect.pt_grid",
                "budgets must be finite and > 0",
            ));
        }
        if d.pfa_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(field_error(
                text,
                "detect.pfa_grid",
                "values must lie in (0, 1)",
            ));
        }
        if d.pfa_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_error(
                text,
                "detect.pfa_grid",
                "must be strictly increasing",
            ));
        }
        if d.n_grid.contains(&0) {
            return Err(field_error(
                text,
                "detect.n_grid",
                "sample counts must be >= 1",
            ));
        }
        self.scenario().map_err(|e| relabel(e, text))?;
        Ok(())
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let step_rule = match s.step_rule.as_str() {
            "harmonic" => StepRule::Harmonic,
            other => {
                return Err(Error::Config(format!(
                    "field `solver.step_rule`: unknown rule `{other}`"
                )))
            }
        };
        let consensus_stop = match s.consensus_stop.as_str() {
            "local" => StopRule::Local,
            "oracle" => StopRule::Oracle,
            other => {
                return Err(Error::Config(format!(
                "field `solver.consensus_stop`: unknown rule `{other}` (expected local or oracle)"
            )))
            }
        };
        let cfg = SolverConfig {
            lambda0_init: s.lambda0_init,
            kappa: s.kappa,
            step_rule,
            consensus_tol: s.consensus_tol,
            consensus_max_iter: s.consensus_max_iter,
            consensus_stop,
            outer_max_iter: s.outer_max_iter,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        self.detect.schemes.iter().map(|s| s.parse()).collect()
    }

    pub fn quantizer(&self) -> Result<Quantizer> {
        self.detect.quantizer.parse()
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let n = &self.network;
        NetworkSpec {
            sensors: n.m,
            samples: n.n,
            signal_amplitude: n.signal_amplitude,
            xi_a_db: n.xi_a_db,
            zeta: n.zeta,
            sigma2_range: (n.sigma2_min, n.sigma2_max),
            channel_gain: n.channel_gain,
            radius: n.radius,
        }
    }

    /// Draws the scenario described by this config.
    pub fn scenario(&self) -> Result<Scenario> {
        let n = &self.network;
        let sc = Scenario::generate(
            &self.network_spec(),
            n.u,
            n.pt,
            n.pfa,
            self.seed,
            self.solver_config()?,
        )?;
        match n.topology {
            Topology::Geometric => Ok(sc),
            Topology::Complete => Scenario::new(
                sc.sensors().to_vec(),
                sc.u(),
                sc.pt(),
                sc.pfa(),
                Graph::complete(n.m),
                sc.seed(),
                sc.solver().clone(),
            ),
        }
    }

    /// Canonical TOML text: fixed key order, every default spelled out.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn relabel(e: Error, text: Option<&str>) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => field_error(text, &qualify(name), reason),
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}
