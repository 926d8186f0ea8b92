//! End-to-end checks across modules: flow, transforms, serialization,
//! and small experiment runs.

use std::io::BufReader;
use std::sync::Arc;

use radial_gibbs::dynamics::{
    duhamel_residual, evolve, linear_flow, mass, uniform_times, FlowConfig, Trajectory,
};
use radial_gibbs::eigenbasis::{Dim, EigenBasis};
use radial_gibbs::harness::{self, Experiment, ExperimentConfig, RunOptions};
use radial_gibbs::io::{
    read_ensemble_jsonl, read_results_csv, read_trajectory_binary, read_trajectory_jsonl,
    write_ensemble_jsonl, write_results_csv, write_trajectory_binary, write_trajectory_jsonl,
    BinaryHeader,
};
use radial_gibbs::measures::{sample_free, Ensemble};
use radial_gibbs::spacetime::{
    linear_deviation, time_frequency_transform, windowed_sobolev_integral, xsb_norm, Window,
};
use radial_gibbs::Model;

fn nls_trajectory(n: usize, samples: usize, horizon: f64) -> Trajectory {
    let basis = Arc::new(EigenBasis::new(Dim::Three, n).unwrap());
    let data = sample_free(&basis, 11);
    let cfg = FlowConfig::new(Model::Nls, 2.0);
    evolve(
        basis,
        &data,
        &cfg,
        horizon,
        &uniform_times(0.0, horizon, samples),
    )
    .unwrap()
}

#[test]
fn trajectory_survives_both_file_formats() {
    let tr = nls_trajectory(8, 16, 0.05);
    let mut text = Vec::new();
    write_trajectory_jsonl(&tr, &mut text).unwrap();
    let (times, states) = read_trajectory_jsonl(BufReader::new(text.as_slice())).unwrap();
    assert_eq!(times, tr.times);
    assert_eq!(states, tr.states);

    let mut bin = Vec::new();
    write_trajectory_binary(&tr, &mut bin).unwrap();
    assert_eq!(bin.len(), BinaryHeader::BYTES + tr.len() * tr.modes() * 16);
    let back = read_trajectory_binary(bin.as_slice()).unwrap();
    assert_eq!(back.header.dim, 3);
    assert_eq!(back.header.modes, 8);
    assert_eq!(back.header.samples, 17);
    assert_eq!(back.header.model, Model::Nls);
    assert_eq!(back.header.alpha, 2.0);
    assert!((back.header.dt - 0.05 / 16.0).abs() < 1e-15);
    assert_eq!(back.states, tr.states);
}

#[test]
fn truncated_binary_is_an_error() {
    let tr = nls_trajectory(4, 4, 0.01);
    let mut bin = Vec::new();
    write_trajectory_binary(&tr, &mut bin).unwrap();
    bin.truncate(bin.len() - 3);
    assert!(read_trajectory_binary(bin.as_slice()).is_err());
}

#[test]
fn ensemble_survives_jsonl() {
    let basis = Arc::new(EigenBasis::new(Dim::Two, 12).unwrap());
    let ens = Ensemble::draw(basis, Model::Nls, 4.0, 5, 20).unwrap();
    let mut buf = Vec::new();
    write_ensemble_jsonl(&ens.samples, &mut buf).unwrap();
    assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 20);
    assert_eq!(
        read_ensemble_jsonl(BufReader::new(buf.as_slice())).unwrap(),
        ens.samples
    );
}

#[test]
fn evolved_states_satisfy_duhamel() {
    let tr = nls_trajectory(8, 400, 0.1);
    let r = duhamel_residual(&tr).unwrap();
    assert!(r < 1e-6, "Duhamel residual {r:e}");
}

#[test]
fn zero_nonlinearity_reproduces_linear_flow() {
    for model in [Model::Nls, Model::Nlw] {
        let basis = Arc::new(EigenBasis::new(Dim::Three, 16).unwrap());
        let data = sample_free(&basis, 3);
        let cfg = FlowConfig::new(model, 2.0).with_nonlinear_scale(0.0);
        let tr = evolve(basis.clone(), &data, &cfg, 0.2, &uniform_times(0.0, 0.2, 4)).unwrap();
        for (t, u) in tr.times.iter().zip(&tr.states) {
            let lin = linear_flow(&basis, &data.coeffs, *t, model);
            assert!(u.iter().zip(&lin).all(|(a, b)| (a - b).norm() < 1e-12));
            assert!((mass(u) - mass(&data.coeffs)).abs() < 1e-13);
        }
        assert!(linear_deviation(&basis, &tr, &data, 0.5).unwrap() < 1e-12);
    }
}

#[test]
fn deviation_is_linear_in_small_nonlinearity() {
    let basis = Arc::new(EigenBasis::new(Dim::Three, 16).unwrap());
    let data = sample_free(&basis, 8);
    let times = uniform_times(0.0, 0.5, 8);
    let dev = |eps: f64| {
        let cfg = FlowConfig::new(Model::Nlw, 2.0)
            .with_nonlinear_scale(eps)
            .with_energy_tol(1e-6);
        let tr = evolve(basis.clone(), &data, &cfg, 0.5, &times).unwrap();
        linear_deviation(&basis, &tr, &data, 1.0).unwrap()
    };
    let (a, b) = (dev(1e-3), dev(2e-3));
    assert!(a > 0.0);
    assert!((b / a - 2.0).abs() < 1e-2, "ratio {}", b / a);
}

#[test]
fn xsb_at_zero_b_is_the_windowed_time_integral() {
    let basis = Arc::new(EigenBasis::new(Dim::Three, 8).unwrap());
    let data = sample_free(&basis, 21);
    let cfg = FlowConfig::new(Model::Nlw, 2.0);
    let tr = evolve(basis, &data, &cfg, 0.5, &uniform_times(0.0, 0.5, 128)).unwrap();
    let stc = time_frequency_transform(&tr, Window::default()).unwrap();
    let lhs = xsb_norm(&stc, 0.4, 0.0).unwrap().powi(2);
    let rhs = windowed_sobolev_integral(&tr, Window::default(), 0.4).unwrap();
    assert!((lhs - rhs).abs() < 1e-10 * rhs, "{lhs} vs {rhs}");
    assert!(xsb_norm(&stc, 0.4, 0.7).unwrap() >= xsb_norm(&stc, 0.4, 0.0).unwrap());
}

#[test]
fn small_smoothing_run_reports_every_truncation() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Smoothing);
    cfg.n = vec![4, 8];
    cfg.samples = 3;
    cfg.horizon = 0.25;
    cfg.s = vec![0.75];
    cfg.free_samples = 50;
    let report = harness::run(&cfg, RunOptions::default()).unwrap();
    assert_eq!(report.values("linear_deviation", None).count(), 6);
    assert!(report.gate("deviation_stable_s0.75").is_some());
    let mut csv = Vec::new();
    write_results_csv(&report.records, &mut csv).unwrap();
    assert_eq!(read_results_csv(csv.as_slice()).unwrap(), report.records);
}

#[test]
fn small_xsb_run_is_deterministic() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Xsb);
    cfg.n = vec![4, 8];
    cfg.samples = 2;
    cfg.horizon = 0.25;
    cfg.dt = Some(2e-4);
    cfg.free_samples = 50;
    let run = || {
        let report = harness::run(&cfg, RunOptions::default()).unwrap();
        let mut csv = Vec::new();
        write_results_csv(&report.records, &mut csv).unwrap();
        csv
    };
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    assert!(text.contains(",xsb,") && text.contains(",mixed,"));
}

#[test]
fn dumped_trajectories_are_binary_artifacts() {
    let mut cfg = ExperimentConfig::defaults(Experiment::Smoothing);
    cfg.n = vec![4];
    cfg.samples = 2;
    cfg.horizon = 0.1;
    cfg.free_samples = 10;
    let report = harness::run(
        &cfg,
        RunOptions {
            dump_trajectories: true,
        },
    )
    .unwrap();
    let bins: Vec<_> = report
        .artifacts
        .iter()
        .filter(|a| a.name.ends_with(".bin"))
        .collect();
    assert_eq!(bins.len(), 2);
    let decoded = read_trajectory_binary(bins[0].bytes.as_slice()).unwrap();
    assert_eq!(decoded.header.model, Model::Nlw);
    assert_eq!(decoded.header.modes, 4);
}

#[test]
fn xsb_needs_enough_samples() {
    let tr = nls_trajectory(4, 16, 0.01);
    assert!(time_frequency_transform(&tr, Window::default()).is_err());
}
