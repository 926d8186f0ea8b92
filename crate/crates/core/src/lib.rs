//! Spectral Galerkin simulation of the truncated radial nonlinear
//! Schrödinger (NLS) and wave (NLW) equations on the unit ball in two and
//! three dimensions, with Gaussian and Gibbs-distributed random initial data.
//!
//! Module map:
//!
//! * [`eigenbasis`]: radial Dirichlet eigenfunctions, quadrature, transforms.
//! * [`measures`]: free Gaussian sampling and Gibbs importance weights.
//! * [`dynamics`]: truncated flows, interaction-picture integrator, energies.
//! * [`coupling`]: quartic overlap integrals and resonance classification.
//! * [`spacetime`]: Sobolev, mixed-norm, and windowed `X^{s,b}` diagnostics.
//! * [`harness`]: experiment drivers, configuration, result records.

// Negated comparisons are used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dynamics;
pub mod eigenbasis;
pub mod error;
pub mod harness;
pub mod io;
pub mod measures;
pub mod spacetime;
pub mod stats;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Which truncated flow a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// `(i d_t + Δ) u - P_N(|u|^α u) = 0`
    Nls,
    /// First-order form of the wave equation in `u = w + i (√-Δ)^{-1} d_t w`.
    Nlw,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Nls => "nls",
            Model::Nlw => "nlw",
        }
    }
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nls" => Ok(Model::Nls),
            "nlw" => Ok(Model::Nlw),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}
