//! Radial Dirichlet eigenfunctions of the unit ball in two and three
//! dimensions, the radial quadrature rule they are sampled on, and the
//! synthesis/analysis transforms between coefficients and grid values.
//!
//! Eigenfunctions are orthonormal in `L²(B)` with the full `d`-dimensional
//! volume measure:
//!
//! * `d = 3`: `e_n(r) = sin(nπr) / (√(2π) r)`, `z_n = nπ`;
//! * `d = 2`: `e_n(r) = J0(z_n r) / (√π |J1(z_n)|)`, `z_n` the `n`-th zero of `J0`.
//!
//! Eigenvalues of `-Δ` are `λ_n = z_n²`. Quadrature is Gauss-Legendre on
//! `(0, 1)` with the weights carrying the surface factor `|S^{d-1}| r^{d-1}`.

pub mod bessel;
pub mod quadrature;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bessel::bessel_j0_zero;

/// Discrete orthonormality tolerance enforced at construction.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Default quadrature nodes per mode.
pub const DEFAULT_NODES_PER_MODE: usize = 8;

/// Node count ceiling (per mode) for automatic refinement.
const MAX_NODES_PER_MODE: usize = 64;

/// Spatial dimension of the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn new(d: usize) -> Result<Self> {
        match d {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(Error::InvalidArgument(format!(
                "dimension must be 2 or 3, got {d}"
            ))),
        }
    }

    pub fn as_usize(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Area of the unit sphere `S^{d-1}`.
    pub fn sphere_area(self) -> f64 {
        match self {
            Dim::Two => 2.0 * PI,
            Dim::Three => 4.0 * PI,
        }
    }
}

/// Frequency `z_n` of the `n`-th radial mode (`n >= 1`).
pub fn frequency(dim: Dim, n: usize) -> Result<f64> {
    match dim {
        Dim::Three if n >= 1 => Ok(n as f64 * PI),
        Dim::Three => Err(Error::InvalidArgument("mode index must be >= 1".into())),
        Dim::Two => bessel_j0_zero(n),
    }
}

/// Radial profile of one eigenfunction, with its normalization cached.
#[derive(Debug, Clone, Copy)]
struct Profile {
    dim: Dim,
    z: f64,
    norm: f64,
}

impl Profile {
    fn new(dim: Dim, z: f64) -> Self {
        let norm = match dim {
            Dim::Three => 1.0 / (2.0 * PI).sqrt(),
            Dim::Two => 1.0 / (PI.sqrt() * bessel::j1(z).abs()),
        };
        Profile { dim, z, norm }
    }

    fn value(&self, r: f64) -> f64 {
        match self.dim {
            Dim::Three => {
                let x = self.z * r;
                if x < 1e-4 {
                    // sin(x)/r = z (1 - x²/6 + x⁴/120)
                    let x2 = x * x;
                    self.norm * self.z * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0))
                } else {
                    self.norm * x.sin() / r
                }
            }
            Dim::Two => self.norm * bessel::j0(self.z * r),
        }
    }

    fn derivative(&self, r: f64) -> f64 {
        match self.dim {
            Dim::Three => {
                let k = self.z;
                let x = k * r;
                if x < 0.1 {
                    // d/dr sin(kr)/r = k² Σ_{j>=1} (-1)^j 2j x^{2j-1} / (2j+1)!
                    let x2 = x * x;
                    let mut term = -x / 3.0;
                    let mut sum = term;
                    for j in 2..10 {
                        let jf = j as f64;
                        term *= -x2 * jf / ((jf - 1.0) * (2.0 * jf) * (2.0 * jf + 1.0));
                        sum += term;
                    }
                    self.norm * k * k * sum
                } else {
                    let (s, c) = x.sin_cos();
                    self.norm * (x * c - s) / (r * r)
                }
            }
            Dim::Two => -self.norm * self.z * bessel::j1(self.z * r),
        }
    }
}

/// Radial eigenpairs, quadrature rule, and sampled eigenfunction table.
///
/// Immutable once built; share across threads behind an `Arc`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    dim: Dim,
    frequencies: Vec<f64>,
    eigenvalues: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `values[n * m + j] = e_{n+1}(r_j)`
    values: Vec<f64>,
    /// `weighted[n * m + j] = w_j e_{n+1}(r_j)`
    weighted: Vec<f64>,
    orthonormality_residual: f64,
}

/// JSON-friendly digest of a basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisSummary {
    pub dimension: usize,
    pub modes: usize,
    pub nodes: usize,
    pub frequencies: Vec<f64>,
    pub orthonormality_residual: f64,
    pub eigenvalue_residual: f64,
}

impl EigenBasis {
    /// Basis with the default `8N` nodes, doubled until the orthonormality
    /// gate passes.
    pub fn new(dim: Dim, n_modes: usize) -> Result<Self> {
        Self::with_min_nodes(dim, n_modes, DEFAULT_NODES_PER_MODE * n_modes)
    }

    /// Basis whose node count also clears the anti-aliasing floor
    /// `(α + 2) N / 2` for a nonlinearity of degree `α + 1`.
    pub fn for_nonlinearity(dim: Dim, n_modes: usize, alpha: f64) -> Result<Self> {
        let floor = ((alpha + 2.0) * n_modes as f64 / 2.0).ceil() as usize;
        Self::with_min_nodes(dim, n_modes, floor.max(DEFAULT_NODES_PER_MODE * n_modes))
    }

    fn with_min_nodes(dim: Dim, n_modes: usize, start: usize) -> Result<Self> {
        let limit = MAX_NODES_PER_MODE * n_modes.max(1);
        let mut m = start.max(2 * n_modes);
        loop {
            match Self::build(dim, n_modes, m) {
                Err(Error::Orthonormality { .. }) if 2 * m <= limit => m *= 2,
                other => return other,
            }
        }
    }

    /// Build with exactly `m` quadrature nodes.
    pub fn build(dim: Dim, n_modes: usize, m: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidArgument("mode count must be >= 1".into()));
        }
        if m < 2 * n_modes {
            return Err(Error::InvalidArgument(format!(
                "need at least 2N = {} quadrature nodes, got {m}",
                2 * n_modes
            )));
        }
        let frequencies = (1..=n_modes)
            .map(|n| frequency(dim, n))
            .collect::<Result<Vec<_>>>()?;
        let eigenvalues = frequencies.iter().map(|z| z * z).collect();

        let (nodes, gl) = quadrature::gauss_legendre_on(m, 0.0, 1.0);
        let area = dim.sphere_area();
        let weights: Vec<f64> = nodes
            .iter()
            .zip(&gl)
            .map(|(&r, &w)| match dim {
                Dim::Two => w * area * r,
                Dim::Three => w * area * r * r,
            })
            .collect();

        let mut values = Vec::with_capacity(n_modes * m);
        for &z in &frequencies {
            let p = Profile::new(dim, z);
            values.extend(nodes.iter().map(|&r| p.value(r)));
        }
        let weighted = values
            .chunks_exact(m)
            .flat_map(|row| row.iter().zip(&weights).map(|(e, w)| e * w))
            .collect();

        let mut basis = EigenBasis {
            dim,
            frequencies,
            eigenvalues,
            nodes,
            weights,
            values,
            weighted,
            orthonormality_residual: f64::NAN,
        };
        let residual = basis.measure_orthonormality();
        basis.orthonormality_residual = residual;
        if !(residual <= ORTHONORMALITY_TOL) {
            return Err(Error::Orthonormality {
                residual,
                tolerance: ORTHONORMALITY_TOL,
                nodes: m,
            });
        }
        Ok(basis)
    }

    fn measure_orthonormality(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0_f64;
        for a in 0..n {
            let wa = self.weighted_row(a);
            for b in a..n {
                let dot: f64 = wa.iter().zip(self.row(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Number of modes `N`.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Number of quadrature nodes `M`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `z_1..z_N` (index 0 holds mode 1).
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `λ_n = z_n²`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weights including `|S^{d-1}| r^{d-1}`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Samples of mode `index + 1` at the nodes.
    pub fn row(&self, index: usize) -> &[f64] {
        let m = self.node_count();
        &self.values[index * m..(index + 1) * m]
    }

    fn weighted_row(&self, index: usize) -> &[f64] {
        let m = self.node_count();
        &self.weighted[index * m..(index + 1) * m]
    }

    pub fn orthonormality_residual(&self) -> f64 {
        self.orthonormality_residual
    }

    /// `e_n(r)` for `n >= 1`, evaluated from the closed form.
    pub fn eval(&self, n: usize, r: f64) -> f64 {
        Profile::new(self.dim, self.frequencies[n - 1]).value(r)
    }

    /// `e_n'(r)`.
    pub fn eval_derivative(&self, n: usize, r: f64) -> f64 {
        Profile::new(self.dim, self.frequencies[n - 1]).derivative(r)
    }

    /// Largest relative deviation of `∫|∇e_n|²` (by quadrature) from `λ_n`.
    pub fn eigenvalue_residual(&self) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&z, &lambda)| {
                let p = Profile::new(self.dim, z);
                let energy: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(&r, &w)| w * p.derivative(r).powi(2))
                    .sum();
                ((energy - lambda) / lambda).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|e_n(1)|` over the basis.
    pub fn boundary_residual(&self) -> f64 {
        (1..=self.len())
            .map(|n| self.eval(n, 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Quadrature of a real grid function over the ball.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// `values_j = Σ_n c_n e_n(r_j)`; coefficient vectors shorter than `N`
    /// are zero-extended.
    pub fn synthesize(&self, coeffs: &[C64]) -> Result<GridField> {
        let mut values = vec![C64::new(0.0, 0.0); self.node_count()];
        self.synthesize_into(coeffs, &mut values)?;
        Ok(GridField { values })
    }

    pub fn synthesize_into(&self, coeffs: &[C64], out: &mut [C64]) -> Result<()> {
        if coeffs.len() > self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        if out.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: out.len(),
            });
        }
        out.fill(C64::new(0.0, 0.0));
        for (n, &c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (o, &e) in out.iter_mut().zip(self.row(n)) {
                o.re += c.re * e;
                o.im += c.im * e;
            }
        }
        Ok(())
    }

    /// Real-valued synthesis.
    pub fn synthesize_real_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        if coeffs.len() > self.len() || out.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        out.fill(0.0);
        for (n, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, &e) in out.iter_mut().zip(self.row(n)) {
                *o += c * e;
            }
        }
        Ok(())
    }

    /// `c_n = Σ_j w_j e_n(r_j) values_j`: the projection `P_N` for
    /// band-limited inputs.
    pub fn analyze(&self, field: &GridField) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.analyze_into(&field.values, &mut out)?;
        Ok(out)
    }

    pub fn analyze_into(&self, values: &[C64], out: &mut [C64]) -> Result<()> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: values.len(),
            });
        }
        if out.len() > self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: out.len(),
            });
        }
        for (n, o) in out.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (&w, v) in self.weighted_row(n).iter().zip(values) {
                re += w * v.re;
                im += w * v.im;
            }
            *o = C64::new(re, im);
        }
        Ok(())
    }

    /// Real-valued analysis.
    pub fn analyze_real_into(&self, values: &[f64], out: &mut [f64]) -> Result<()> {
        if values.len() != self.node_count() || out.len() > self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: values.len(),
            });
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o = self
                .weighted_row(n)
                .iter()
                .zip(values)
                .map(|(w, v)| w * v)
                .sum();
        }
        Ok(())
    }

    pub fn summary(&self) -> BasisSummary {
        BasisSummary {
            dimension: self.dim.as_usize(),
            modes: self.len(),
            nodes: self.node_count(),
            frequencies: self.frequencies.clone(),
            orthonormality_residual: self.orthonormality_residual,
            eigenvalue_residual: self.eigenvalue_residual(),
        }
    }
}

/// Complex samples of a field at the quadrature radii of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub values: Vec<C64>,
}

impl GridField {
    pub fn zeros(basis: &EigenBasis) -> Self {
        GridField {
            values: vec![C64::new(0.0, 0.0); basis.node_count()],
        }
    }

    /// Wraps grid samples, checking the length against the basis.
    pub fn from_values(basis: &EigenBasis, values: Vec<C64>) -> Result<Self> {
        if values.len() != basis.node_count() {
            return Err(Error::DimensionMismatch {
                expected: basis.node_count(),
                got: values.len(),
            });
        }
        Ok(GridField { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, len: usize) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); len];
        v[n - 1] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn three_dimensional_first_mode() {
        let b = EigenBasis::new(Dim::Three, 4).unwrap();
        let expected = 2.0 / (2.0 * PI).sqrt();
        assert!((b.eval(1, 0.5) - expected).abs() < 1e-15);
        for n in 1..=4 {
            let lambda = (n as f64 * PI).powi(2);
            assert!((b.eigenvalues()[n - 1] - lambda).abs() < 1e-12 * lambda);
        }
    }

    #[test]
    fn value_at_origin_is_continuous() {
        let b = EigenBasis::new(Dim::Three, 3).unwrap();
        let at0 = b.eval(3, 0.0);
        assert!((at0 - 3.0 * PI / (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((b.eval(3, 1e-6) - at0).abs() < 1e-8);
        // derivative branches agree around the switch
        let below = b.eval_derivative(3, 0.1 / (3.0 * PI) * (1.0 - 1e-10));
        let above = b.eval_derivative(3, 0.1 / (3.0 * PI) * (1.0 + 1e-10));
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn too_few_nodes_is_rejected() {
        assert!(matches!(
            EigenBasis::build(Dim::Three, 8, 15),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn two_n_nodes_fail_orthonormality_gate() {
        match EigenBasis::build(Dim::Two, 32, 64) {
            Err(Error::Orthonormality { residual, .. }) => assert!(residual > 1e-10),
            Ok(b) => assert!(b.orthonormality_residual() <= ORTHONORMALITY_TOL),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn synthesis_of_unit_vector_is_basis_row() {
        let b = EigenBasis::new(Dim::Two, 6).unwrap();
        let f = b.synthesize(&unit(3, 6)).unwrap();
        for (v, &e) in f.values.iter().zip(b.row(2)) {
            assert_eq!(v.re, e);
            assert_eq!(v.im, 0.0);
        }
        let c = b.analyze(&f).unwrap();
        for (i, c) in c.iter().enumerate() {
            let t = if i == 2 { 1.0 } else { 0.0 };
            assert!((c.re - t).abs() < 1e-12 && c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coefficients_give_zero_field() {
        let b = EigenBasis::new(Dim::Three, 5).unwrap();
        let f = b.synthesize(&[C64::new(0.0, 0.0); 5]).unwrap();
        assert!(f.values.iter().all(|v| v.norm() == 0.0));
        assert!(b.analyze(&f).unwrap().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn mismatched_lengths_are_errors() {
        let b = EigenBasis::new(Dim::Three, 4).unwrap();
        assert!(b.synthesize(&[C64::new(1.0, 0.0); 5]).is_err());
        let short = GridField {
            values: vec![C64::new(0.0, 0.0); 3],
        };
        assert!(b.analyze(&short).is_err());
        assert!(GridField::from_values(&b, vec![C64::new(0.0, 0.0); 7]).is_err());
    }

    #[test]
    fn dirichlet_boundary() {
        for dim in [Dim::Two, Dim::Three] {
            let b = EigenBasis::new(dim, 16).unwrap();
            assert!(b.boundary_residual() < 1e-12, "{dim:?}");
        }
    }
}
