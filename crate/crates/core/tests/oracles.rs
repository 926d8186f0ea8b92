//! Checks against values computed independently of the library: high
//! precision references, closed forms, and an independent adaptive rule.

#![allow(clippy::excessive_precision)]

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use radial_gibbs::coupling::{quartic_coupling, quartic_coupling_validated};
use radial_gibbs::dynamics::{evolve, uniform_times, FlowConfig, SpectralState};
use radial_gibbs::eigenbasis::bessel::{bessel_j0_zero, j0};
use radial_gibbs::eigenbasis::{Dim, EigenBasis};
use radial_gibbs::measures::sample_free;
use radial_gibbs::spacetime::{free_field_partial_sum, sobolev_norm};
use radial_gibbs::stats::mean_and_se;
use radial_gibbs::Model;

use common::{adaptive_simpson, bisect};

/// Zeros of J0 to 21 significant digits.
const J0_ZEROS: [(usize, f64); 5] = [
    (1, 2.404_825_557_695_772_768_62),
    (2, 5.520_078_110_286_310_649_60),
    (3, 8.653_727_912_911_012_216_95),
    (10, 30.634_606_468_431_975_117_5),
    (50, 156.295_034_268_533_523_820),
];

/// `(1/π)∫_0^1 sin⁴(πr)/r² dr`.
const C_1111: f64 = 0.672_070_963_340_398_422_502;
/// `(1/π)∫_0^1 sin(πr)sin(2πr)sin(3πr)sin(5πr)/r² dr`.
const C_1235: f64 = 0.393_307_953_241_132_007_792;

#[test]
fn j0_zeros_match_reference() {
    for (n, z) in J0_ZEROS {
        let got = bessel_j0_zero(n).unwrap();
        assert!((got - z).abs() <= 1e-12 * z, "z_{n}: {got} vs {z}");
    }
}

#[test]
fn j0_zeros_agree_with_bisection_of_j0() {
    for n in [1usize, 4, 17, 33] {
        let got = bessel_j0_zero(n).unwrap();
        let lo = (n as f64 - 0.25) * PI;
        let hi = (n as f64 - 0.125) * PI;
        let root = bisect(j0, lo, hi);
        assert!((got - root).abs() < 1e-12 * root, "n={n}: {got} vs {root}");
    }
}

#[test]
fn three_dimensional_couplings_match_reference() {
    let basis = EigenBasis::new(Dim::Three, 8).unwrap();
    for (quad, want) in [([1, 1, 1, 1], C_1111), ([1, 2, 3, 5], C_1235)] {
        let got = quartic_coupling(&basis, quad).unwrap();
        assert!((got - want).abs() < 1e-12, "{quad:?}: {got} vs {want}");
        let (fine, diff) = quartic_coupling_validated(&basis, quad).unwrap();
        assert!((fine - want).abs() < 1e-12 && diff < 1e-9);
    }
}

#[test]
fn two_dimensional_coupling_matches_independent_rule() {
    let basis = EigenBasis::new(Dim::Two, 8).unwrap();
    let e = |n: usize, r: f64| basis.eval(n, r);
    for quad in [[1usize, 1, 1, 1], [1, 2, 3, 4], [2, 2, 5, 7]] {
        let f = |r: f64| 2.0 * PI * r * quad.iter().map(|&n| e(n, r)).product::<f64>();
        let want = adaptive_simpson(&f, 0.0, 1.0, 1e-13);
        let got = quartic_coupling(&basis, quad).unwrap();
        assert!((got - want).abs() < 1e-10, "{quad:?}: {got} vs {want}");
    }
}

#[test]
fn quartic_integral_is_resolution_independent() {
    // Fourth power of the first mode with 4x the default node count.
    for dim in [Dim::Two, Dim::Three] {
        let coarse = EigenBasis::new(dim, 16).unwrap();
        let fine = EigenBasis::build(dim, 16, 4 * coarse.node_count()).unwrap();
        let quartic =
            |b: &EigenBasis| b.integrate(&b.row(0).iter().map(|v| v.powi(4)).collect::<Vec<_>>());
        let (a, b) = (quartic(&coarse), quartic(&fine));
        assert!((a - b).abs() < 1e-12 * b, "{dim:?}: {a} vs {b}");
    }
    let three = EigenBasis::new(Dim::Three, 16).unwrap();
    let q = three.integrate(&three.row(0).iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    assert!((q - C_1111).abs() < 1e-12);
}

#[test]
fn single_mode_nls_matches_closed_form() {
    // With one mode the flow is a pure phase rotation at frequency
    // λ_1 + |a|^α ∫ e_1^{α+2}.
    for (dim, alpha) in [(Dim::Three, 2.0), (Dim::Two, 4.0), (Dim::Three, 3.0)] {
        let basis = Arc::new(EigenBasis::for_nonlinearity(dim, 1, alpha).unwrap());
        let a = C64::new(0.6, -0.3);
        let e1 = basis.row(0);
        let moment = basis.integrate(
            &e1.iter()
                .map(|v| v.abs().powf(alpha + 2.0))
                .collect::<Vec<_>>(),
        );
        let rate = basis.eigenvalues()[0] + a.norm().powf(alpha) * moment;
        let cfg = FlowConfig::new(Model::Nls, alpha).with_dt(1e-4);
        let tr = evolve(
            basis,
            &SpectralState::single_mode(1, 1, a),
            &cfg,
            1.0,
            &uniform_times(0.0, 1.0, 8),
        )
        .unwrap();
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let exact = a * C64::from_polar(1.0, -rate * t);
            assert!(
                (u[0] - exact).norm() < 1e-8,
                "{dim:?} α={alpha} t={t}: {} vs {exact}",
                u[0]
            );
        }
    }
}

#[test]
fn single_mode_moment_matches_independent_rule() {
    let basis = EigenBasis::for_nonlinearity(Dim::Three, 1, 2.0).unwrap();
    let e1 = basis.row(0);
    let moment = basis.integrate(&e1.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
    let f = |r: f64| {
        let s = if r == 0.0 { PI } else { (PI * r).sin() / r };
        s * s * (PI * r).sin().powi(2) / PI
    };
    let want = adaptive_simpson(&f, 0.0, 1.0, 1e-14);
    assert!((want - C_1111).abs() < 1e-12);
    // Eight nodes resolve the single-mode moment to about 1e-7.
    assert!(
        (moment - want).abs() < 1e-6,
        "{moment} vs {want} ({} nodes)",
        basis.node_count()
    );
}

#[test]
fn free_field_sobolev_mean_matches_partial_sum() {
    let basis = EigenBasis::new(Dim::Three, 64).unwrap();
    let s = 0.25;
    let draws: Vec<f64> = (0..2000u64)
        .map(|seed| sobolev_norm(&basis, &sample_free(&basis, seed ^ 0xf00d).coeffs, s).powi(2))
        .collect();
    let (mean, se) = mean_and_se(&draws);
    let want = free_field_partial_sum(&basis, s);
    let closed: f64 = (1..=64).map(|n| (n as f64 * PI).powf(2.0 * s - 2.0)).sum();
    assert!((want - closed).abs() < 1e-12 * closed);
    assert!(
        (mean - want).abs() <= 3.0 * se,
        "mean {mean} vs {want} (se {se})"
    );
}
