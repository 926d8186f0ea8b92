//! `key = value` experiment configuration with optional `[section]`
//! headers. Every violation is collected before reporting.
//!
//! ```text
//! experiment = convergence
//! [model]
//! model = nls
//! d = 3
//! alpha = 2
//! [grid]
//! n = 16, 32, 64, 128
//! n_ref = 256
//! T = 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Invariance,
    Convergence,
    Smoothing,
    Coupling,
    Xsb,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Invariance => "invariance",
            Experiment::Convergence => "convergence",
            Experiment::Smoothing => "smoothing",
            Experiment::Coupling => "coupling",
            Experiment::Xsb => "xsb",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "invariance" => Ok(Experiment::Invariance),
            "convergence" => Ok(Experiment::Convergence),
            "smoothing" => Ok(Experiment::Smoothing),
            "coupling" => Ok(Experiment::Coupling),
            "xsb" => Ok(Experiment::Xsb),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}`"
            ))),
        }
    }
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dim: usize,
    pub alpha: f64,
    pub model: Model,
    /// Truncation sizes, strictly increasing.
    pub n: Vec<usize>,
    /// Reference truncation for the convergence distance.
    pub n_ref: usize,
    /// Final time `T`.
    pub horizon: f64,
    /// Integrator step; `None` uses the flow default.
    pub dt: Option<f64>,
    pub energy_tol: f64,
    pub nonlinear_scale: f64,
    /// Ensemble size (invariance) or number of seeds (other experiments).
    pub samples: usize,
    pub seed: u64,
    /// Stored samples per unit time for sampled trajectories.
    pub samples_per_unit: usize,
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    pub mixed_s: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub taper: f64,
    /// Sobolev index of the free-field divergence check.
    pub free_s: f64,
    /// Free draws used by the free-field check.
    pub free_samples: usize,
    /// Coupling sweep sizes.
    pub maxn: Vec<usize>,
    /// Truncation of the resonant diagonal sum.
    pub n0: usize,
    pub exponent: f64,
    /// N-stability tolerance for the smoothing and norm experiments.
    pub stability_tol: f64,
    /// Output directory. Not part of the config hash.
    pub output: Option<String>,
}

impl ExperimentConfig {
    /// Defaults for an experiment before any user keys are applied.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            dim: 3,
            alpha: 2.0,
            model: Model::Nls,
            n: vec![16, 32, 64, 128],
            n_ref: 256,
            horizon: 1.0,
            dt: Some(1e-4),
            energy_tol: 1e-8,
            nonlinear_scale: 1.0,
            samples: 8,
            seed: 0,
            samples_per_unit: 256,
            s: vec![0.4],
            b: vec![0.7],
            mixed_s: vec![0.25],
            p: vec![3.9],
            q: vec![8.0],
            taper: crate::spacetime::DEFAULT_TAPER,
            free_s: 0.75,
            free_samples: 1000,
            maxn: vec![16, 32],
            n0: 256,
            exponent: crate::coupling::DEFAULT_RESONANCE_EXPONENT,
            stability_tol: 0.25,
            output: None,
        };
        match experiment {
            Experiment::Invariance => ExperimentConfig {
                n: vec![16],
                samples: 2000,
                s: vec![0.25],
                ..base
            },
            Experiment::Convergence => ExperimentConfig {
                horizon: 0.5,
                samples: 20,
                energy_tol: 1e-2,
                ..base
            },
            Experiment::Smoothing => ExperimentConfig {
                model: Model::Nlw,
                dt: None,
                s: vec![0.75, 1.2, 1.35],
                free_s: 1.2,
                ..base
            },
            Experiment::Coupling => base,
            Experiment::Xsb => ExperimentConfig {
                energy_tol: 1e-2,
                stability_tol: 0.2,
                ..base
            },
        }
    }

    /// `(5 - α) / 2`, the smoothing threshold for the wave flow.
    pub fn smoothing_threshold(&self) -> f64 {
        (5.0 - self.alpha) / 2.0
    }

    /// Stored sample count over `[0, T]` (one more than the interval count).
    pub fn intervals(&self) -> usize {
        ((self.samples_per_unit as f64 * self.horizon).round() as usize).max(1)
    }

    /// All violations of the per-experiment ranges.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.dim != 2 && self.dim != 3 {
            v.push(format!("d must be 2 or 3, got {}", self.dim));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            v.push(format!(
                "alpha must be a positive number, got {}",
                self.alpha
            ));
        }
        if self.model == Model::Nlw && !(self.alpha < 4.0) {
            v.push(format!(
                "alpha = {} with model = nlw: the wave results require alpha < 4",
                self.alpha
            ));
        }
        if self.n.is_empty() || self.n[0] == 0 {
            v.push("n must list positive truncation sizes".into());
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            v.push(format!("n must be strictly increasing, got {:?}", self.n));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            v.push(format!("T must be > 0, got {}", self.horizon));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                v.push(format!("dt must be > 0, got {dt}"));
            }
        }
        if !(self.energy_tol > 0.0) {
            v.push(format!("energy_tol must be > 0, got {}", self.energy_tol));
        }
        if self.samples == 0 {
            v.push("samples must be >= 1".into());
        }
        if self.samples_per_unit == 0 {
            v.push("samples_per_unit must be >= 1".into());
        }
        if self.p.iter().chain(&self.q).any(|x| !(*x >= 1.0)) {
            v.push("p and q must be >= 1".into());
        }
        if self.b.iter().any(|x| !(*x >= 0.0)) {
            v.push("b must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.taper) {
            v.push(format!("taper must lie in [0, 1], got {}", self.taper));
        }
        if self
            .s
            .iter()
            .chain(&self.mixed_s)
            .chain(std::iter::once(&self.free_s))
            .any(|x| !x.is_finite())
        {
            v.push("Sobolev indices must be finite".into());
        }
        match self.experiment {
            Experiment::Invariance => {
                if self.samples < 500 {
                    v.push(format!(
                        "invariance needs samples >= 500, got {}",
                        self.samples
                    ));
                }
            }
            Experiment::Convergence => {
                if self.n.len() < 4 {
                    v.push(format!(
                        "convergence needs at least 4 values of n, got {}",
                        self.n.len()
                    ));
                }
                if self.n.last().is_some_and(|&m| self.n_ref <= m) {
                    v.push(format!("n_ref = {} must exceed every n", self.n_ref));
                }
            }
            Experiment::Smoothing => {
                if self.model != Model::Nlw {
                    v.push("smoothing runs the wave flow: set model = nlw".into());
                }
            }
            Experiment::Coupling => {
                if self.maxn.is_empty() || self.maxn.iter().any(|&m| m == 0 || m > 64) {
                    v.push(format!(
                        "maxn values must lie in 1..=64, got {:?}",
                        self.maxn
                    ));
                }
                if self.n0 < 8 {
                    v.push(format!("n0 must be >= 8, got {}", self.n0));
                }
            }
            Experiment::Xsb => {
                if self.intervals() + 1 < crate::spacetime::MIN_SAMPLES {
                    v.push(format!(
                        "xsb needs at least {} samples over [0, T]; raise samples_per_unit",
                        crate::spacetime::MIN_SAMPLES
                    ));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// SHA-256 over the semantic fields (everything but the output path),
    /// truncated to 16 hex digits.
    pub fn hash(&self) -> String {
        let semantic = ExperimentConfig {
            output: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&semantic).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("run", &["experiment", "seed", "samples", "output"]),
    ("model", &["model", "d", "alpha", "nonlinear_scale"]),
    (
        "grid",
        &["n", "n_ref", "t", "dt", "energy_tol", "samples_per_unit"],
    ),
    (
        "norms",
        &[
            "s",
            "b",
            "mixed_s",
            "p",
            "q",
            "taper",
            "free_s",
            "free_samples",
            "stability_tol",
        ],
    ),
    ("coupling", &["maxn", "n0", "exponent"]),
];

fn known_key(key: &str) -> bool {
    SECTIONS.iter().any(|(_, keys)| keys.contains(&key))
}

fn parse_list<T: FromStr>(raw: &str) -> std::result::Result<Vec<T>, ()> {
    raw.split(',')
        .map(|x| x.trim().parse::<T>().map_err(|_| ()))
        .collect()
}

/// Parses and validates a configuration; all problems are reported at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errors = Vec::new();
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut section: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_ascii_lowercase();
            match SECTIONS.iter().find(|(s, _)| *s == name) {
                Some((s, _)) => section = Some(s),
                None => {
                    errors.push(format!("line {line_no}: unknown section [{name}]"));
                    section = None;
                }
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!(
                "line {line_no}: expected `key = value`, got `{line}`"
            ));
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().trim_matches('"').to_string();
        let allowed = match section {
            Some(s) => SECTIONS
                .iter()
                .find(|(name, _)| *name == s)
                .is_some_and(|(_, keys)| keys.contains(&key.as_str())),
            None => known_key(&key),
        };
        if !allowed {
            let place = section.map(|s| format!(" in [{s}]")).unwrap_or_default();
            errors.push(format!("line {line_no}: unknown key `{key}`{place}"));
            continue;
        }
        if let Some((first, _)) = entries.get(&key) {
            errors.push(format!(
                "line {line_no}: duplicate key `{key}` (first set on line {first})"
            ));
            continue;
        }
        entries.insert(key, (line_no, value));
    }

    let experiment = match entries.get("experiment") {
        Some((line, v)) => match v.parse::<Experiment>() {
            Ok(e) => Some(e),
            Err(e) => {
                errors.push(format!("line {line}: {e}"));
                None
            }
        },
        None => {
            errors.push("missing required key `experiment`".into());
            None
        }
    };
    let mut cfg = ExperimentConfig::defaults(experiment.unwrap_or(Experiment::Coupling));

    macro_rules! scalar {
        ($key:literal, $field:expr, $ty:ty) => {
            if let Some((line, v)) = entries.get($key) {
                match v.parse::<$ty>() {
                    Ok(x) => $field = x,
                    Err(_) => errors.push(format!("line {line}: cannot parse `{}` = `{v}`", $key)),
                }
            }
        };
    }
    macro_rules! list {
        ($key:literal, $field:expr, $ty:ty) => {
            if let Some((line, v)) = entries.get($key) {
                match parse_list::<$ty>(v) {
                    Ok(x) if !x.is_empty() => $field = x,
                    _ => errors.push(format!("line {line}: cannot parse list `{}` = `{v}`", $key)),
                }
            }
        };
    }

    scalar!("seed", cfg.seed, u64);
    scalar!("samples", cfg.samples, usize);
    if let Some((_, v)) = entries.get("output") {
        cfg.output = Some(v.clone());
    }
    if let Some((line, v)) = entries.get("model") {
        match v.parse::<Model>() {
            Ok(m) => cfg.model = m,
            Err(e) => errors.push(format!("line {line}: {e}")),
        }
    }
    scalar!("d", cfg.dim, usize);
    scalar!("alpha", cfg.alpha, f64);
    scalar!("nonlinear_scale", cfg.nonlinear_scale, f64);
    list!("n", cfg.n, usize);
    scalar!("n_ref", cfg.n_ref, usize);
    scalar!("t", cfg.horizon, f64);
    if let Some((line, v)) = entries.get("dt") {
        if v.eq_ignore_ascii_case("auto") {
            cfg.dt = None;
        } else {
            match v.parse::<f64>() {
                Ok(x) => cfg.dt = Some(x),
                Err(_) => errors.push(format!("line {line}: cannot parse `dt` = `{v}`")),
            }
        }
    }
    scalar!("energy_tol", cfg.energy_tol, f64);
    scalar!("samples_per_unit", cfg.samples_per_unit, usize);
    list!("s", cfg.s, f64);
    list!("b", cfg.b, f64);
    list!("mixed_s", cfg.mixed_s, f64);
    list!("p", cfg.p, f64);
    list!("q", cfg.q, f64);
    scalar!("taper", cfg.taper, f64);
    scalar!("free_s", cfg.free_s, f64);
    scalar!("free_samples", cfg.free_samples, usize);
    scalar!("stability_tol", cfg.stability_tol, f64);
    list!("maxn", cfg.maxn, usize);
    scalar!("n0", cfg.n0, usize);
    scalar!("exponent", cfg.exponent, f64);

    if experiment.is_some() {
        errors.extend(cfg.violations());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}
