//! Randomized invariants of the transforms, norms, couplings, and estimators.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use radial_gibbs::coupling::quartic_coupling;
use radial_gibbs::dynamics::{linear_flow, mass, FlowConfig, Trajectory};
use radial_gibbs::eigenbasis::{Dim, EigenBasis, GridField};
use radial_gibbs::io::{read_results_csv, write_results_csv, ResultRecord};
use radial_gibbs::measures::{gibbs_weight, weighted_expectation};
use radial_gibbs::spacetime::{sobolev_norm, trajectory_distance};
use radial_gibbs::Model;

const MODES: usize = 24;

fn basis(dim: Dim) -> Arc<EigenBasis> {
    static THREE: OnceLock<Arc<EigenBasis>> = OnceLock::new();
    static TWO: OnceLock<Arc<EigenBasis>> = OnceLock::new();
    let cell = if dim == Dim::Three { &THREE } else { &TWO };
    cell.get_or_init(|| Arc::new(EigenBasis::new(dim, MODES).unwrap()))
        .clone()
}

fn dims() -> impl Strategy<Value = Dim> {
    prop_oneof![Just(Dim::Two), Just(Dim::Three)]
}

fn coeffs(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
}

fn l2(v: &[C64]) -> f64 {
    mass(v).sqrt()
}

fn trajectory(b: &Arc<EigenBasis>, states: Vec<Vec<C64>>) -> Trajectory {
    let k = states.len();
    Trajectory {
        basis: b.clone(),
        config: FlowConfig::new(Model::Nls, 2.0),
        dt: 1e-3,
        times: (0..k).map(|i| i as f64 * 0.1).collect(),
        mass: states.iter().map(|s| mass(s)).collect(),
        energy: vec![0.0; k],
        states,
        energy_drift: 0.0,
        seed: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn synthesis_then_analysis_is_identity(dim in dims(), c in coeffs(MODES)) {
        let b = basis(dim);
        let back = b.analyze(&b.synthesize(&c).unwrap()).unwrap();
        let err: Vec<C64> = back.iter().zip(&c).map(|(x, y)| x - y).collect();
        prop_assert!(l2(&err) <= 1e-11 * l2(&c).max(1e-300));
    }

    #[test]
    fn analysis_is_linear(dim in dims(), a in coeffs(MODES), c in coeffs(MODES), k in -3.0..3.0f64) {
        let b = basis(dim);
        let fa = b.synthesize(&a).unwrap();
        let fc = b.synthesize(&c).unwrap();
        let sum = GridField::from_values(&b, fa.values.iter().zip(&fc.values).map(|(x, y)| x * k + y).collect()).unwrap();
        let lhs = b.analyze(&sum).unwrap();
        for ((l, x), y) in lhs.iter().zip(&a).zip(&c) {
            prop_assert!((l - (x * k + y)).norm() < 1e-10);
        }
    }

    #[test]
    fn sobolev_norm_is_monotone_in_s(dim in dims(), c in coeffs(MODES), s in -1.0..2.0f64, ds in 0.0..1.0f64) {
        let b = basis(dim);
        // z_1 > 1 in both dimensions, so every weight grows with s.
        prop_assert!(sobolev_norm(&b, &c, s) <= sobolev_norm(&b, &c, s + ds) * (1.0 + 1e-14));
        prop_assert!((sobolev_norm(&b, &c, 0.0) - l2(&c)).abs() <= 1e-12 * l2(&c).max(1.0));
    }

    #[test]
    fn trajectory_distance_is_a_metric(
        dim in dims(),
        x in prop::collection::vec(coeffs(MODES), 3),
        y in prop::collection::vec(coeffs(MODES), 3),
        z in prop::collection::vec(coeffs(MODES), 3),
        s in 0.0..1.0f64,
    ) {
        let b = basis(dim);
        let (tx, ty, tz) = (trajectory(&b, x), trajectory(&b, y), trajectory(&b, z));
        let dxy = trajectory_distance(&tx, &ty, s).unwrap();
        prop_assert_eq!(dxy, trajectory_distance(&ty, &tx, s).unwrap());
        prop_assert_eq!(trajectory_distance(&tx, &tx, s).unwrap(), 0.0);
        let via = trajectory_distance(&tx, &tz, s).unwrap() + trajectory_distance(&tz, &ty, s).unwrap();
        prop_assert!(dxy <= via * (1.0 + 1e-12));
    }

    #[test]
    fn coupling_is_permutation_symmetric(
        dim in dims(),
        quad in prop::array::uniform4(1usize..=MODES),
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let b = basis(dim);
        let base = quartic_coupling(&b, quad).unwrap();
        let permuted = quartic_coupling(&b, [quad[perm[0]], quad[perm[1]], quad[perm[2]], quad[perm[3]]]).unwrap();
        prop_assert!((base - permuted).abs() <= 1e-9);
    }

    #[test]
    fn weighted_mean_ignores_weight_scale(
        pairs in prop::collection::vec((0.01..10.0f64, -5.0..5.0f64), 2..60),
        scale in 1e-6..1e6f64,
    ) {
        let (w, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let a = weighted_expectation(&w, &v).unwrap();
        let b = weighted_expectation(&scaled, &v).unwrap();
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + a.mean.abs()));
        prop_assert!((a.standard_error - b.standard_error).abs() <= 1e-10 * (1.0 + a.standard_error));
        prop_assert!((a.effective_sample_size - b.effective_sample_size).abs() <= 1e-9 * a.effective_sample_size);
    }

    #[test]
    fn linear_flow_conserves_every_sobolev_norm(dim in dims(), c in coeffs(MODES), t in -5.0..5.0f64, s in -1.0..1.5f64, wave in any::<bool>()) {
        let b = basis(dim);
        let model = if wave { Model::Nlw } else { Model::Nls };
        let u = linear_flow(&b, &c, t, model);
        prop_assert!((mass(&u) - mass(&c)).abs() <= 1e-12 * mass(&c).max(1.0));
        let (n0, n1) = (sobolev_norm(&b, &c, s), sobolev_norm(&b, &u, s));
        prop_assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
        let back = linear_flow(&b, &u, -t, model);
        prop_assert!(back.iter().zip(&c).all(|(x, y)| (x - y).norm() < 1e-12));
    }

    #[test]
    fn gibbs_weight_is_a_probability_density_factor(dim in dims(), c in coeffs(MODES), alpha in 0.5..4.0f64) {
        let b = basis(dim);
        let w = gibbs_weight(&b, &c, alpha, Model::Nls).unwrap();
        // Large data may underflow to zero, never above one.
        prop_assert!((0.0..=1.0).contains(&w));
        let small: Vec<C64> = c.iter().map(|x| x * 0.05).collect();
        let ws = gibbs_weight(&b, &small, alpha, Model::Nls).unwrap();
        prop_assert!(ws > 0.0 && ws >= w);
        let zero = vec![C64::new(0.0, 0.0); MODES];
        prop_assert_eq!(gibbs_weight(&b, &zero, alpha, Model::Nls).unwrap(), 1.0);
    }

    #[test]
    fn results_csv_round_trips(
        rows in prop::collection::vec(
            ("[a-z]{1,8}", any::<Option<u64>>(), any::<Option<u32>>(), "[a-z_]{1,10}", "([a-z]=[0-9.]{1,4};?){0,3}", any::<f64>()),
            0..20,
        ),
    ) {
        let records: Vec<ResultRecord> = rows
            .into_iter()
            .filter(|r| r.5.is_finite())
            .map(|(experiment, seed, modes, metric, params, value)| ResultRecord {
                experiment,
                config_hash: "0123456789abcdef".into(),
                seed,
                modes: modes.map(|m| m as usize),
                metric,
                params,
                value,
            })
            .collect();
        let mut buf = Vec::new();
        write_results_csv(&records, &mut buf).unwrap();
        prop_assert_eq!(read_results_csv(buf.as_slice()).unwrap(), records);
    }
}
