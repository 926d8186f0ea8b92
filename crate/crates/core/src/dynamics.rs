//! Truncated NLS and first-order NLW flows in spectral coefficients.
//!
//! Both flows are written as `du_n/dt = -i ω_n u_n + F_n(u)` with the
//! dispersive frequency `ω_n = λ_n` (NLS) or `ω_n = z_n` (NLW) and
//!
//! * NLS: `F_n = -i P_N(|u|^α u)_n`,
//! * NLW: `F_n = -i z_n^{-1} P_N(|Re u|^α Re u)_n`,
//!
//! the nonlinearities being evaluated pointwise on the quadrature grid. The
//! linear part is propagated exactly; the default integrator is RK4 in the
//! interaction picture (Lawson RK4). Strang splitting with an RK4 nonlinear
//! substep is kept as a second-order cross-check.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};
use crate::Model;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Coefficients `u_1..u_N` of a field at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralState {
    pub coeffs: Vec<C64>,
    pub time: f64,
}

impl SpectralState {
    pub fn new(coeffs: Vec<C64>) -> Self {
        SpectralState { coeffs, time: 0.0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![ZERO; n])
    }

    /// `δ_{n,k}` scaled by `amplitude` (`k` is 1-based).
    pub fn single_mode(n: usize, k: usize, amplitude: C64) -> Self {
        let mut s = Self::zeros(n);
        s.coeffs[k - 1] = amplitude;
        s
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Zero-padded or truncated copy with `n` modes.
    pub fn resized(&self, n: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(n, ZERO);
        SpectralState {
            coeffs,
            time: self.time,
        }
    }
}

/// `Σ |u_n|²`.
pub fn mass(coeffs: &[C64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum()
}

/// Dispersive frequencies `ω_n` of a model.
pub fn dispersion(basis: &EigenBasis, model: Model) -> &[f64] {
    match model {
        Model::Nls => basis.eigenvalues(),
        Model::Nlw => basis.frequencies(),
    }
}

/// `|x|^α` given `x² `, with `0^α = 0`.
#[derive(Debug, Clone, Copy)]
enum Power {
    Square,
    Quartic,
    EvenInteger(i32),
    OddInteger(i32),
    General(f64),
}

impl Power {
    fn new(alpha: f64) -> Self {
        if alpha == 2.0 {
            Power::Square
        } else if alpha == 4.0 {
            Power::Quartic
        } else if alpha.fract() == 0.0 && (alpha as i64) % 2 == 0 && alpha < 64.0 {
            Power::EvenInteger(alpha as i32 / 2)
        } else if alpha.fract() == 0.0 && alpha > 0.0 && alpha < 64.0 {
            Power::OddInteger(alpha as i32 / 2)
        } else {
            Power::General(alpha / 2.0)
        }
    }

    #[inline]
    fn of_square(self, x2: f64) -> f64 {
        match self {
            Power::Square => x2,
            Power::Quartic => x2 * x2,
            Power::EvenInteger(k) => x2.powi(k),
            Power::OddInteger(k) => x2.powi(k) * x2.sqrt(),
            Power::General(h) => {
                if x2 == 0.0 {
                    0.0
                } else {
                    x2.powf(h)
                }
            }
        }
    }
}

/// `∫_B |φ|^{α+2}` (NLS) or `∫_B |Re φ|^{α+2}` (NLW) by basis quadrature.
pub fn potential(basis: &EigenBasis, coeffs: &[C64], alpha: f64, model: Model) -> Result<f64> {
    let grid = basis.synthesize(coeffs)?;
    let power = Power::new(alpha);
    let v = grid
        .values
        .iter()
        .zip(basis.weights())
        .map(|(u, w)| {
            let x2 = match model {
                Model::Nls => u.norm_sqr(),
                Model::Nlw => u.re * u.re,
            };
            w * power.of_square(x2) * x2
        })
        .sum();
    Ok(v)
}

/// `Σ λ_n |u_n|² + (2/(2+α)) ∫ V(u)`.
pub fn hamiltonian(basis: &EigenBasis, coeffs: &[C64], alpha: f64, model: Model) -> Result<f64> {
    Ok(kinetic(basis, coeffs) + 2.0 / (2.0 + alpha) * potential(basis, coeffs, alpha, model)?)
}

/// `∫|∇u|² = Σ λ_n |u_n|²`.
pub fn kinetic(basis: &EigenBasis, coeffs: &[C64]) -> f64 {
    coeffs
        .iter()
        .zip(basis.eigenvalues())
        .map(|(c, l)| l * c.norm_sqr())
        .sum()
}

/// Exact linear propagation `u_n ↦ exp(-i ω_n t) u_n`.
pub fn linear_flow(basis: &EigenBasis, coeffs: &[C64], t: f64, model: Model) -> Vec<C64> {
    coeffs
        .iter()
        .zip(dispersion(basis, model))
        .map(|(c, w)| c * C64::from_polar(1.0, -w * t))
        .collect()
}

/// Full right-hand side of the truncated NLS.
pub fn nls_rhs(basis: &EigenBasis, coeffs: &[C64], alpha: f64) -> Result<Vec<C64>> {
    full_rhs(basis, coeffs, alpha, Model::Nls)
}

/// Full right-hand side of the truncated first-order NLW.
pub fn nlw_rhs(basis: &EigenBasis, coeffs: &[C64], alpha: f64) -> Result<Vec<C64>> {
    full_rhs(basis, coeffs, alpha, Model::Nlw)
}

fn full_rhs(basis: &EigenBasis, coeffs: &[C64], alpha: f64, model: Model) -> Result<Vec<C64>> {
    let config = FlowConfig::new(model, alpha);
    let mut rhs = NonlinearTerm::new(Arc::new(basis.clone()), &config)?;
    let mut out = vec![ZERO; coeffs.len()];
    rhs.eval(coeffs, &mut out)?;
    for ((o, c), w) in out.iter_mut().zip(coeffs).zip(dispersion(basis, model)) {
        *o += C64::new(0.0, -w) * c;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    /// RK4 in the interaction picture.
    ExpRk4,
    /// Strang splitting, RK4 nonlinear substep.
    Strang,
}

/// Parameters of a truncated flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub model: Model,
    pub alpha: f64,
    /// Step size; `None` selects [`FlowConfig::default_dt`].
    pub dt: Option<f64>,
    pub integrator: Integrator,
    /// Gate on the relative Hamiltonian drift over the run.
    pub energy_tol: f64,
    /// Halving stops below this step (relative to the initial step).
    pub max_halvings: u32,
    /// Multiplier `ε` on the nonlinear term (1 for the physical flow).
    pub nonlinear_scale: f64,
}

impl FlowConfig {
    pub fn new(model: Model, alpha: f64) -> Self {
        FlowConfig {
            model,
            alpha,
            dt: None,
            integrator: Integrator::ExpRk4,
            energy_tol: 1e-8,
            max_halvings: 6,
            nonlinear_scale: 1.0,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_energy_tol(mut self, tol: f64) -> Self {
        self.energy_tol = tol;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_nonlinear_scale(mut self, eps: f64) -> Self {
        self.nonlinear_scale = eps;
        self
    }

    /// `min(0.1 / ω_N, 1e-3)`.
    pub fn default_dt(&self, basis: &EigenBasis) -> f64 {
        let top = *dispersion(basis, self.model).last().unwrap_or(&1.0);
        (0.1 / top).min(1e-3)
    }

    pub fn step(&self, basis: &EigenBasis) -> f64 {
        self.dt.unwrap_or_else(|| self.default_dt(basis))
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
            }
        }
        Ok(())
    }

    /// Hamiltonian conserved by this (possibly ε-scaled) flow.
    pub fn hamiltonian(&self, basis: &EigenBasis, coeffs: &[C64]) -> Result<f64> {
        Ok(kinetic(basis, coeffs)
            + self.nonlinear_scale * 2.0 / (2.0 + self.alpha)
                * potential(basis, coeffs, self.alpha, self.model)?)
    }
}

/// Evaluates `F(u)` with reusable grid buffers.
struct NonlinearTerm {
    basis: Arc<EigenBasis>,
    model: Model,
    power: Power,
    scale: f64,
    grid: Vec<C64>,
    real_grid: Vec<f64>,
    real_coeffs: Vec<f64>,
    real_out: Vec<f64>,
}

impl NonlinearTerm {
    fn new(basis: Arc<EigenBasis>, config: &FlowConfig) -> Result<Self> {
        config.validate()?;
        let m = basis.node_count();
        let n = basis.len();
        Ok(NonlinearTerm {
            model: config.model,
            power: Power::new(config.alpha),
            scale: config.nonlinear_scale,
            grid: vec![ZERO; m],
            real_grid: vec![0.0; m],
            real_coeffs: vec![0.0; n],
            real_out: vec![0.0; n],
            basis,
        })
    }

    fn eval(&mut self, u: &[C64], out: &mut [C64]) -> Result<()> {
        let n = u.len();
        if self.scale == 0.0 {
            out.fill(ZERO);
            return Ok(());
        }
        match self.model {
            Model::Nls => {
                self.basis.synthesize_into(u, &mut self.grid)?;
                let p = self.power;
                for g in self.grid.iter_mut() {
                    let x2 = g.norm_sqr();
                    *g *= p.of_square(x2);
                }
                self.basis.analyze_into(&self.grid, out)?;
                for o in out.iter_mut() {
                    // -i ε a
                    *o = C64::new(self.scale * o.im, -self.scale * o.re);
                }
            }
            Model::Nlw => {
                for (r, c) in self.real_coeffs[..n].iter_mut().zip(u) {
                    *r = c.re;
                }
                self.basis
                    .synthesize_real_into(&self.real_coeffs[..n], &mut self.real_grid)?;
                let p = self.power;
                for g in self.real_grid.iter_mut() {
                    *g *= p.of_square(*g * *g);
                }
                self.basis
                    .analyze_real_into(&self.real_grid, &mut self.real_out[..n])?;
                for ((o, a), z) in out
                    .iter_mut()
                    .zip(&self.real_out[..n])
                    .zip(self.basis.frequencies())
                {
                    *o = C64::new(0.0, -self.scale * a / z);
                }
            }
        }
        if out.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("nonlinear term"));
        }
        Ok(())
    }
}

/// Stepper for one truncated flow on one basis.
///
/// Owns scratch buffers, so each worker thread should build its own.
pub struct Flow {
    basis: Arc<EigenBasis>,
    config: FlowConfig,
    omega: Vec<f64>,
    rhs: NonlinearTerm,
    cached_h: f64,
    half: Vec<C64>,
    full: Vec<C64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Flow {
    pub fn new(basis: Arc<EigenBasis>, config: FlowConfig) -> Result<Self> {
        let floor = ((config.alpha + 2.0) * basis.len() as f64 / 2.0).ceil() as usize;
        if basis.node_count() < floor {
            return Err(Error::InvalidArgument(format!(
                "{} quadrature nodes are below the anti-aliasing floor {floor}",
                basis.node_count()
            )));
        }
        let n = basis.len();
        let omega = dispersion(&basis, config.model).to_vec();
        let rhs = NonlinearTerm::new(basis.clone(), &config)?;
        Ok(Flow {
            basis,
            config,
            omega,
            rhs,
            cached_h: f64::NAN,
            half: vec![ZERO; n],
            full: vec![ZERO; n],
            k: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
            tmp: vec![ZERO; n],
        })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn config(&self) -> &FlowConfig {
        &self.config
    }

    /// Nonlinear part `F(u)` of the vector field.
    pub fn nonlinear(&mut self, u: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; u.len()];
        self.rhs.eval(u, &mut out)?;
        Ok(out)
    }

    pub fn hamiltonian(&self, u: &[C64]) -> Result<f64> {
        self.config.hamiltonian(&self.basis, u)
    }

    fn prepare(&mut self, h: f64) {
        if h == self.cached_h {
            return;
        }
        for ((hf, fl), w) in self
            .half
            .iter_mut()
            .zip(self.full.iter_mut())
            .zip(&self.omega)
        {
            *hf = C64::from_polar(1.0, -w * h / 2.0);
            *fl = C64::from_polar(1.0, -w * h);
        }
        self.cached_h = h;
    }

    /// One step of size `h` (negative steps integrate backwards).
    pub fn step(&mut self, u: &mut [C64], h: f64) -> Result<()> {
        self.prepare(h);
        match self.config.integrator {
            Integrator::ExpRk4 => self.lawson_rk4(u, h),
            Integrator::Strang => {
                for (c, e) in u.iter_mut().zip(&self.half) {
                    *c *= e;
                }
                self.plain_rk4(u, h)?;
                for (c, e) in u.iter_mut().zip(&self.half) {
                    *c *= e;
                }
                Ok(())
            }
        }
    }

    fn lawson_rk4(&mut self, u: &mut [C64], h: f64) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let (half, full) = (&self.half, &self.full);
        let h2 = 0.5 * h;

        self.rhs.eval(u, k1)?;
        for i in 0..u.len() {
            tmp[i] = half[i] * (u[i] + k1[i] * h2);
        }
        self.rhs.eval(tmp, k2)?;
        for i in 0..u.len() {
            tmp[i] = half[i] * u[i] + k2[i] * h2;
        }
        self.rhs.eval(tmp, k3)?;
        for i in 0..u.len() {
            tmp[i] = full[i] * u[i] + half[i] * k3[i] * h;
        }
        self.rhs.eval(tmp, k4)?;
        let h6 = h / 6.0;
        for i in 0..u.len() {
            u[i] = full[i] * (u[i] + k1[i] * h6) + (half[i] * (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
        Ok(())
    }

    fn plain_rk4(&mut self, u: &mut [C64], h: f64) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let h2 = 0.5 * h;
        self.rhs.eval(u, k1)?;
        for i in 0..u.len() {
            tmp[i] = u[i] + k1[i] * h2;
        }
        self.rhs.eval(tmp, k2)?;
        for i in 0..u.len() {
            tmp[i] = u[i] + k2[i] * h2;
        }
        self.rhs.eval(tmp, k3)?;
        for i in 0..u.len() {
            tmp[i] = u[i] + k3[i] * h;
        }
        self.rhs.eval(tmp, k4)?;
        let h6 = h / 6.0;
        for i in 0..u.len() {
            u[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
        Ok(())
    }

    /// Integrates `state` to `target` with uniform steps no longer than `dt`.
    pub fn advance(&mut self, state: &mut SpectralState, target: f64, dt: f64) -> Result<()> {
        let gap = target - state.time;
        if gap == 0.0 {
            return Ok(());
        }
        let steps = ((gap.abs() / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = gap / steps as f64;
        for _ in 0..steps {
            self.step(&mut state.coeffs, h)?;
        }
        state.time = target;
        if !state.is_finite() {
            return Err(Error::NonFinite("spectral state"));
        }
        Ok(())
    }
}

/// Time-sampled solution of a truncated flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub basis: Arc<EigenBasis>,
    pub config: FlowConfig,
    /// Step actually used after drift-gate halvings.
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    /// Largest relative Hamiltonian deviation over the run.
    pub energy_drift: f64,
    pub seed: Option<u64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.basis.len()
    }

    pub fn final_state(&self) -> SpectralState {
        SpectralState {
            coeffs: self.states.last().cloned().unwrap_or_default(),
            time: *self.times.last().unwrap_or(&0.0),
        }
    }

    /// Uniform spacing of the sample grid, if it is uniform.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1e-300));
        uniform.then_some(dt)
    }
}

/// `n + 1` uniformly spaced times on `[t0, t1]`.
pub fn uniform_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| t0 + (t1 - t0) * k as f64 / n as f64)
        .collect()
}

fn relative_drift(h0: f64, h: f64) -> f64 {
    if h0 == 0.0 {
        h.abs()
    } else {
        ((h - h0) / h0).abs()
    }
}

/// Evolves `state0` to `horizon`, recording the state at each of the
/// strictly increasing `sample_times` (which must lie in `[t0, horizon]`).
///
/// The step is halved until the relative Hamiltonian drift over the run is
/// below `config.energy_tol`, at most `config.max_halvings` times.
pub fn evolve(
    basis: Arc<EigenBasis>,
    state0: &SpectralState,
    config: &FlowConfig,
    horizon: f64,
    sample_times: &[f64],
) -> Result<Trajectory> {
    if state0.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: state0.len(),
        });
    }
    if !state0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let t0 = state0.time;
    if !(horizon >= t0) {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} precedes the initial time {t0}"
        )));
    }
    if sample_times.windows(2).any(|w| !(w[1] > w[0]))
        || sample_times.iter().any(|&t| t < t0 || t > horizon)
    {
        return Err(Error::TimeGrid(
            "sample times must be strictly increasing within [t0, horizon]".into(),
        ));
    }

    let mut flow = Flow::new(basis.clone(), config.clone())?;
    let h0 = flow.hamiltonian(&state0.coeffs)?;
    let mut dt = config.step(&basis);
    let mut halvings = 0;
    loop {
        let mut state = state0.clone();
        let mut times = Vec::with_capacity(sample_times.len());
        let mut states = Vec::with_capacity(sample_times.len());
        let mut masses = Vec::with_capacity(sample_times.len());
        let mut energies = Vec::with_capacity(sample_times.len());
        let mut drift = 0.0_f64;
        for &t in sample_times {
            flow.advance(&mut state, t, dt)?;
            let e = flow.hamiltonian(&state.coeffs)?;
            drift = drift.max(relative_drift(h0, e));
            times.push(t);
            states.push(state.coeffs.clone());
            masses.push(mass(&state.coeffs));
            energies.push(e);
        }
        if state.time < horizon {
            flow.advance(&mut state, horizon, dt)?;
            drift = drift.max(relative_drift(h0, flow.hamiltonian(&state.coeffs)?));
        }
        if drift <= config.energy_tol {
            return Ok(Trajectory {
                basis,
                config: config.clone(),
                dt,
                times,
                states,
                mass: masses,
                energy: energies,
                energy_drift: drift,
                seed: None,
            });
        }
        if halvings >= config.max_halvings {
            return Err(Error::DriftGate {
                drift,
                tolerance: config.energy_tol,
                dt,
            });
        }
        dt *= 0.5;
        halvings += 1;
    }
}

/// Relative `ℓ²` residual of the Duhamel identity
/// `u(t) = e^{-iωt} u(0) + ∫_0^t e^{-iω(t-τ)} F(u(τ)) dτ` at the last
/// sample, the integral taken by composite Boole's rule on the stored
/// samples (the sample count minus one must be a multiple of 4).
pub fn duhamel_residual(trajectory: &Trajectory) -> Result<f64> {
    let k = trajectory.len();
    let spacing = trajectory
        .uniform_spacing()
        .ok_or_else(|| Error::TimeGrid("Duhamel check needs uniform samples".into()))?;
    if k < 5 || !(k - 1).is_multiple_of(4) {
        return Err(Error::TimeGrid(format!(
            "Boole's rule needs 4m + 1 samples, got {k}"
        )));
    }
    let mut flow = Flow::new(trajectory.basis.clone(), trajectory.config.clone())?;
    let omega = flow.omega.clone();
    let t0 = trajectory.times[0];
    let n = trajectory.modes();
    let mut integral = vec![ZERO; n];
    for (idx, (t, u)) in trajectory.times.iter().zip(&trajectory.states).enumerate() {
        let f = flow.nonlinear(u)?;
        let boole = if idx == 0 || idx == k - 1 {
            7.0
        } else {
            match idx % 4 {
                0 => 14.0,
                2 => 12.0,
                _ => 32.0,
            }
        };
        let c = boole * 2.0 * spacing / 45.0;
        for ((acc, f), w) in integral.iter_mut().zip(&f).zip(&omega) {
            *acc += C64::from_polar(c, w * (t - t0)) * f;
        }
    }
    let t_end = trajectory.times[k - 1];
    let u0 = &trajectory.states[0];
    let u_end = &trajectory.states[k - 1];
    let mut err = 0.0;
    for i in 0..n {
        let predicted = C64::from_polar(1.0, -omega[i] * (t_end - t0)) * (u0[i] + integral[i]);
        err += (u_end[i] - predicted).norm_sqr();
    }
    let scale = mass(u0).sqrt().max(f64::MIN_POSITIVE);
    Ok(err.sqrt() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::Dim;
    use std::f64::consts::PI;

    fn basis(dim: Dim, n: usize) -> Arc<EigenBasis> {
        Arc::new(EigenBasis::new(dim, n).unwrap())
    }

    #[test]
    fn zero_state_has_zero_rhs_and_energy() {
        let b = basis(Dim::Three, 6);
        let z = vec![ZERO; 6];
        assert!(nls_rhs(&b, &z, 2.0)
            .unwrap()
            .iter()
            .all(|c| c.norm() == 0.0));
        assert!(nlw_rhs(&b, &z, 3.0)
            .unwrap()
            .iter()
            .all(|c| c.norm() == 0.0));
        assert_eq!(hamiltonian(&b, &z, 2.0, Model::Nls).unwrap(), 0.0);
        assert_eq!(mass(&z), 0.0);
    }

    #[test]
    fn unit_mode_mass_and_kinetic() {
        let b = basis(Dim::Three, 4);
        let u = SpectralState::single_mode(4, 1, C64::new(1.0, 0.0));
        assert_eq!(mass(&u.coeffs), 1.0);
        assert!((kinetic(&b, &u.coeffs) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn imaginary_nlw_state_rotates_only() {
        let b = basis(Dim::Three, 5);
        let u: Vec<C64> = (1..=5).map(|k| C64::new(0.0, 1.0 / k as f64)).collect();
        let rhs = nlw_rhs(&b, &u, 2.0).unwrap();
        for ((r, c), z) in rhs.iter().zip(&u).zip(b.frequencies()) {
            let lin = C64::new(0.0, -z) * c;
            assert!((r - lin).norm() < 1e-15);
        }
    }

    #[test]
    fn linear_flow_identities() {
        let b = basis(Dim::Three, 6);
        let u: Vec<C64> = (1..=6).map(|k| C64::new(k as f64, -0.5)).collect();
        assert_eq!(linear_flow(&b, &u, 0.0, Model::Nls), u);
        // λ_n t = 2π n² at t = 2/π
        let back = linear_flow(&b, &u, 2.0 / PI, Model::Nls);
        for (a, c) in back.iter().zip(&u) {
            assert!((a - c).norm() < 1e-11 * c.norm());
        }
        let moved = linear_flow(&b, &u, 0.37, Model::Nlw);
        for (a, c) in moved.iter().zip(&u) {
            assert!((a.norm() - c.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let b = basis(Dim::Two, 6);
        let cfg = FlowConfig::new(Model::Nls, 4.0).with_dt(1e-3);
        let traj = evolve(
            b,
            &SpectralState::zeros(6),
            &cfg,
            0.1,
            &uniform_times(0.0, 0.1, 4),
        )
        .unwrap();
        assert!(traj.states.iter().flatten().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rejects_bad_sample_times() {
        let b = basis(Dim::Three, 4);
        let cfg = FlowConfig::new(Model::Nls, 2.0);
        let s = SpectralState::zeros(4);
        assert!(evolve(b.clone(), &s, &cfg, 1.0, &[0.5, 0.2]).is_err());
        assert!(evolve(b.clone(), &s, &cfg, 1.0, &[0.5, 1.5]).is_err());
        assert!(evolve(b, &SpectralState::zeros(3), &cfg, 1.0, &[0.5]).is_err());
    }

    #[test]
    fn anti_aliasing_floor_is_enforced() {
        let b = Arc::new(EigenBasis::build(Dim::Three, 8, 40).unwrap());
        assert!(Flow::new(b, FlowConfig::new(Model::Nls, 10.0)).is_err());
    }

    #[test]
    fn power_dispatch() {
        assert_eq!(Power::new(2.0).of_square(3.0), 3.0);
        assert_eq!(Power::new(4.0).of_square(3.0), 9.0);
        assert_eq!(Power::new(6.0).of_square(2.0), 8.0);
        assert_eq!(Power::new(3.0).of_square(0.0), 0.0);
        assert!((Power::new(3.0).of_square(4.0) - 8.0).abs() < 1e-14);
        assert!((Power::new(1.0).of_square(9.0) - 3.0).abs() < 1e-14);
        assert!((Power::new(2.5).of_square(4.0) - 2f64.powf(2.5)).abs() < 1e-12);
    }
}
