//! Sobolev, mixed `L^p_x L^q_t` and windowed `X^{s,b}` diagnostics of
//! sampled trajectories, plus the distances used by the convergence and
//! smoothing experiments.
//!
//! Frequencies are angular throughout. Mode `n` of a linear solution
//! oscillates as `e^{-iω_n t}`, so its spectrum sits at `λ = -ω_n`. The
//! transform demodulates each mode by its own carrier before the DFT, which
//! keeps the high dispersive frequencies from aliasing at modest sample
//! rates; the stored grid is the baseband offset `ν = λ + ω_n`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::{dispersion, linear_flow, SpectralState, Trajectory};
use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};

/// Default taper fraction of the raised-cosine window.
pub const DEFAULT_TAPER: f64 = 0.25;
/// Zero-padding factor of the time-frequency transform.
pub const PAD_FACTOR: usize = 4;
/// Fewest samples accepted by [`time_frequency_transform`].
pub const MIN_SAMPLES: usize = 64;

/// `(Σ z_n^{2s} |u_n|²)^{1/2}`.
pub fn sobolev_norm(basis: &EigenBasis, coeffs: &[C64], s: f64) -> f64 {
    sobolev_norm_with(basis.frequencies(), coeffs, s)
}

fn sobolev_norm_with(freqs: &[f64], coeffs: &[C64], s: f64) -> f64 {
    assert!(
        coeffs.len() <= freqs.len(),
        "more coefficients than frequencies"
    );
    coeffs
        .iter()
        .zip(freqs)
        .map(|(c, z)| z.powf(2.0 * s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `Σ_{n ≤ N} z_n^{2s-2}`, the free-measure mean of `‖φ‖²_{H^s}`.
pub fn free_field_partial_sum(basis: &EigenBasis, s: f64) -> f64 {
    basis
        .frequencies()
        .iter()
        .map(|z| z.powf(2.0 * s - 2.0))
        .sum()
}

/// Raised-cosine (Tukey) window on `[0, 1]`; `taper = 0` is rectangular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub taper: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            taper: DEFAULT_TAPER,
        }
    }
}

impl Window {
    pub fn rectangular() -> Self {
        Window { taper: 0.0 }
    }

    /// Window value at relative position `x ∈ [0, 1]`.
    pub fn at(&self, x: f64) -> f64 {
        let a = self.taper;
        if a <= 0.0 {
            return 1.0;
        }
        let edge = a / 2.0;
        let y = x.min(1.0 - x);
        if y >= edge {
            1.0
        } else if y <= 0.0 {
            0.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * y / edge).cos())
        }
    }
}

/// Per-mode windowed spectra of a trajectory.
#[derive(Debug, Clone)]
pub struct SpaceTimeCoefficients {
    pub basis: Arc<EigenBasis>,
    pub window: Window,
    /// Carrier `ω_n` removed from mode `n`.
    pub carriers: Vec<f64>,
    /// Baseband offsets `ν` in FFT order (symmetric about 0).
    pub offsets: Vec<f64>,
    /// Grid spacing `Δλ = 2π / (L Δt)` for the padded length `L`.
    pub spacing: f64,
    /// `amplitudes[n][k]` at absolute frequency `λ = offsets[k] - carriers[n]`.
    pub amplitudes: Vec<Vec<C64>>,
    pub sample_interval: f64,
    pub samples: usize,
}

impl SpaceTimeCoefficients {
    /// `Σ_k |f_{n,k}|² Δλ` for mode `n` (0-based).
    pub fn spectral_energy(&self, n: usize) -> f64 {
        self.amplitudes[n].iter().map(|a| a.norm_sqr()).sum::<f64>() * self.spacing
    }

    /// Absolute frequency of bin `k` of mode `n` (0-based).
    pub fn frequency(&self, n: usize, k: usize) -> f64 {
        self.offsets[k] - self.carriers[n]
    }
}

/// Windowed DFT of each mode, demodulated by its dispersive carrier and
/// zero-padded 4×, normalized so `Σ|f|² Δλ = Σ_k |w u(t_k)|² Δt`.
pub fn time_frequency_transform(
    trajectory: &Trajectory,
    window: Window,
) -> Result<SpaceTimeCoefficients> {
    let k = trajectory.len();
    if k < MIN_SAMPLES {
        return Err(Error::TimeGrid(format!(
            "need at least {MIN_SAMPLES} samples, got {k}"
        )));
    }
    let dt = trajectory
        .uniform_spacing()
        .ok_or_else(|| Error::TimeGrid("time-frequency transform needs uniform samples".into()))?;
    let basis = trajectory.basis.clone();
    let carriers = dispersion(&basis, trajectory.config.model).to_vec();
    let len = PAD_FACTOR * k;
    let fft = FftPlanner::new().plan_fft_forward(len);
    let t0 = trajectory.times[0];
    let span = trajectory.times[k - 1] - t0;
    let weights: Vec<f64> = trajectory
        .times
        .iter()
        .map(|t| window.at((t - t0) / span))
        .collect();
    let norm = dt / (2.0 * std::f64::consts::PI).sqrt();
    let amplitudes = (0..trajectory.modes())
        .map(|n| {
            let mut buf = vec![C64::new(0.0, 0.0); len];
            for (j, ((t, u), w)) in trajectory
                .times
                .iter()
                .zip(&trajectory.states)
                .zip(&weights)
                .enumerate()
            {
                buf[j] = u[n] * C64::from_polar(w * norm, carriers[n] * (t - t0));
            }
            fft.process(&mut buf);
            buf
        })
        .collect();
    let spacing = 2.0 * std::f64::consts::PI / (len as f64 * dt);
    // DFT with e^{-iνt}; bin m ≥ len/2 wraps to negative offsets
    let offsets = (0..len)
        .map(|m| {
            let m = if m < len / 2 {
                m as f64
            } else {
                m as f64 - len as f64
            };
            m * spacing
        })
        .collect();
    Ok(SpaceTimeCoefficients {
        basis,
        window,
        carriers,
        offsets,
        spacing,
        amplitudes,
        sample_interval: dt,
        samples: k,
    })
}

/// Windowed `X^{s,b}` proxy
/// `(Σ_n (z_n/z_1)^{2s} Σ_λ ⟨λ + ω_n⟩^{2b} |f_{n,λ}|² Δλ)^{1/2}`
/// with `⟨x⟩ = (1 + x²)^{1/2}`.
pub fn xsb_norm(stc: &SpaceTimeCoefficients, s: f64, b: f64) -> Result<f64> {
    if !(b >= 0.0) {
        return Err(Error::InvalidArgument(format!("b must be >= 0, got {b}")));
    }
    let z = stc.basis.frequencies();
    let modulation: Vec<f64> = stc.offsets.iter().map(|v| (1.0 + v * v).powf(b)).collect();
    let total: f64 = stc
        .amplitudes
        .iter()
        .enumerate()
        .map(|(n, row)| {
            let inner: f64 = row
                .iter()
                .zip(&modulation)
                .map(|(a, m)| m * a.norm_sqr())
                .sum();
            (z[n] / z[0]).powf(2.0 * s) * inner * stc.spacing
        })
        .sum();
    Ok(total.sqrt())
}

/// Trapezoid weights on a (possibly non-uniform) time grid.
fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for (i, pair) in times.windows(2).enumerate() {
        let h = 0.5 * (pair[1] - pair[0]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// `‖(√-Δ)^s u‖_{L^p_x L^q_t}`: trapezoid `L^q` in time at each quadrature
/// node, then the quadrature `L^p` in space.
pub fn mixed_norm(
    basis: &EigenBasis,
    trajectory: &Trajectory,
    s: f64,
    p: f64,
    q: f64,
) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mixed norm needs p, q >= 1, got p = {p}, q = {q}"
        )));
    }
    if trajectory.modes() > basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: trajectory.modes(),
        });
    }
    let m = basis.node_count();
    let tw = trapezoid_weights(&trajectory.times);
    let scale: Vec<f64> = basis.frequencies().iter().map(|z| z.powf(s)).collect();
    let mut inner = vec![0.0; m];
    let mut scaled = vec![C64::new(0.0, 0.0); trajectory.modes()];
    let mut field = vec![C64::new(0.0, 0.0); m];
    for (u, w) in trajectory.states.iter().zip(&tw) {
        for ((o, c), k) in scaled.iter_mut().zip(u).zip(&scale) {
            *o = c * k;
        }
        basis.synthesize_into(&scaled, &mut field)?;
        for (acc, v) in inner.iter_mut().zip(&field) {
            *acc += w * v.norm().powf(q);
        }
    }
    let outer: f64 = inner
        .iter()
        .zip(basis.weights())
        .map(|(i, w)| w * i.powf(p / q))
        .sum();
    Ok(outer.powf(1.0 / p))
}

/// `max_t ‖u(t) - e^{-iω(t - t0)} P_N φ‖_{H^s}` over the sample times.
pub fn linear_deviation(
    basis: &EigenBasis,
    trajectory: &Trajectory,
    data: &SpectralState,
    s: f64,
) -> Result<f64> {
    let n = trajectory.modes();
    if data.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: data.len(),
        });
    }
    let projected = &data.coeffs[..n];
    let first = trajectory
        .states
        .first()
        .ok_or_else(|| Error::TimeGrid("empty trajectory".into()))?;
    let scale = crate::dynamics::mass(projected).sqrt().max(1e-300);
    let mismatch = first
        .iter()
        .zip(projected)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if mismatch > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "trajectory does not start from P_N of the data (mismatch {mismatch:e})"
        )));
    }
    let model = trajectory.config.model;
    let t0 = trajectory.times[0];
    let mut worst = 0.0_f64;
    for (t, u) in trajectory.times.iter().zip(&trajectory.states) {
        let lin = linear_flow(&trajectory.basis, projected, t - t0, model);
        let diff: Vec<C64> = u.iter().zip(&lin).map(|(a, b)| a - b).collect();
        worst = worst.max(sobolev_norm(basis, &diff, s));
    }
    Ok(worst)
}

/// `max_t ‖u_A(t) - u_B(t)‖_{H^s}` with the shorter coefficient vector
/// zero-padded.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, s: f64) -> Result<f64> {
    if a.basis.dim() != b.basis.dim() {
        return Err(Error::InvalidArgument(
            "trajectories live in different dimensions".into(),
        ));
    }
    if a.len() != b.len()
        || a.times
            .iter()
            .zip(&b.times)
            .any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0))
    {
        return Err(Error::TimeGrid(
            "trajectories have different sample times".into(),
        ));
    }
    let freqs = if a.modes() >= b.modes() {
        a.basis.frequencies()
    } else {
        b.basis.frequencies()
    };
    let n = a.modes().max(b.modes());
    let zero = C64::new(0.0, 0.0);
    let mut worst = 0.0_f64;
    let mut diff = vec![zero; n];
    for (ua, ub) in a.states.iter().zip(&b.states) {
        for (i, d) in diff.iter_mut().enumerate() {
            *d = ua.get(i).copied().unwrap_or(zero) - ub.get(i).copied().unwrap_or(zero);
        }
        worst = worst.max(sobolev_norm_with(freqs, &diff, s));
    }
    Ok(worst)
}

/// Windowed time integral `Σ_k w_k² ‖u(t_k)‖²_{H^s} Δt` with the same
/// `(z_n/z_1)` scaling as [`xsb_norm`]; equals `xsb_norm(·, s, 0)²`.
pub fn windowed_sobolev_integral(trajectory: &Trajectory, window: Window, s: f64) -> Result<f64> {
    let dt = trajectory
        .uniform_spacing()
        .ok_or_else(|| Error::TimeGrid("needs uniform samples".into()))?;
    let z = trajectory.basis.frequencies();
    let t0 = trajectory.times[0];
    let span = trajectory.times[trajectory.len() - 1] - t0;
    Ok(trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(t, u)| {
            let w = window.at((t - t0) / span);
            let h: f64 = u
                .iter()
                .zip(z)
                .map(|(c, zn)| (zn / z[0]).powf(2.0 * s) * c.norm_sqr())
                .sum();
            w * w * h * dt
        })
        .sum())
}
