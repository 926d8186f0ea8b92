//! Experiment drivers, configuration, and deterministic result emission.
//!
//! Drivers are pure: they return a [`Report`] holding records, gate
//! outcomes, and optional file artifacts, and never touch the filesystem.
//! Work is parallelized over seeds with order-preserving collection, so a
//! report depends only on its configuration.

mod config;
mod experiments;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use experiments::{
    run_convergence, run_coupling, run_invariance, run_smoothing, run_xsb, FREE_FIELD_SALT,
};

use serde::{Deserialize, Serialize};

use crate::dynamics::FlowConfig;
use crate::error::Result;
use crate::io::ResultRecord;

/// Pass/fail outcome of one scientific check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A named file produced by a run, written by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: Experiment,
    pub config_hash: String,
    pub records: Vec<ResultRecord>,
    pub gates: Vec<Gate>,
    pub artifacts: Vec<Artifact>,
}

impl Report {
    fn new(cfg: &ExperimentConfig) -> Self {
        Report {
            experiment: cfg.experiment,
            config_hash: cfg.hash(),
            records: Vec::new(),
            gates: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }

    /// Records matching a metric and (optionally) an exact parameter string.
    pub fn values<'a>(
        &'a self,
        metric: &'a str,
        params: Option<&'a str>,
    ) -> impl Iterator<Item = &'a ResultRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.metric == metric && params.is_none_or(|p| r.params == p))
    }

    fn push(
        &mut self,
        seed: Option<u64>,
        n: Option<usize>,
        metric: &str,
        params: &str,
        value: f64,
    ) {
        self.records.push(ResultRecord {
            experiment: self.experiment.as_str().into(),
            config_hash: self.config_hash.clone(),
            seed,
            modes: n,
            metric: metric.into(),
            params: params.into(),
            value,
        });
    }

    fn add_gate(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        let name = name.into();
        self.push(
            None,
            None,
            "gate",
            &format!("name={name}"),
            if passed { 1.0 } else { 0.0 },
        );
        self.gates.push(Gate {
            name,
            passed,
            detail: detail.into(),
        });
    }
}

/// Caller-side switches that do not change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Attach every evolved trajectory as a binary artifact.
    pub dump_trajectories: bool,
}

/// Validates `cfg` and runs its experiment.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Invariance => run_invariance(cfg, opts),
        Experiment::Convergence => run_convergence(cfg, opts),
        Experiment::Smoothing => run_smoothing(cfg, opts),
        Experiment::Coupling => run_coupling(cfg),
        Experiment::Xsb => run_xsb(cfg, opts),
    }
}

/// Flow parameters implied by a configuration.
pub fn flow_config(cfg: &ExperimentConfig) -> FlowConfig {
    let mut flow = FlowConfig::new(cfg.model, cfg.alpha)
        .with_energy_tol(cfg.energy_tol)
        .with_nonlinear_scale(cfg.nonlinear_scale);
    flow.dt = cfg.dt;
    flow
}

/// `k1=v1;k2=v2` with Rust's shortest float formatting.
pub(crate) fn params(pairs: &[(&str, f64)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}
