use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{flow_config, params, Artifact, ExperimentConfig, Report, RunOptions};
use crate::coupling::{
    quartic_coupling, resonance_census, resonant_diagonal_sum, write_coupling_csv, CouplingTensor,
};
use crate::dynamics::{evolve, mass, potential, uniform_times, SpectralState, Trajectory};
use crate::eigenbasis::{Dim, EigenBasis};
use crate::error::{Error, Result};
use crate::io::write_trajectory_binary;
use crate::measures::{
    complex_gaussians, gibbs_weight, sample_seed, weighted_expectation, Ensemble,
};
use crate::spacetime::{
    linear_deviation, mixed_norm, sobolev_norm, time_frequency_transform, trajectory_distance,
    xsb_norm, Window,
};
use crate::stats::{max_relative_spread, mean_and_se, quantile, strictly_decreasing};

/// Ensembles below this effective size abort the invariance run.
const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;

/// Mixed into the base seed for the free-field comparator draws so they do
/// not reuse the evolved samples.
pub const FREE_FIELD_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn basis_for(cfg: &ExperimentConfig, n: usize) -> Result<Arc<EigenBasis>> {
    Ok(Arc::new(EigenBasis::for_nonlinearity(
        Dim::new(cfg.dim)?,
        n,
        cfg.alpha,
    )?))
}

/// Free data `g_n / z_n` for the first `basis.len()` entries of `g`.
fn truncate_data(basis: &EigenBasis, g: &[C64]) -> SpectralState {
    SpectralState::new(
        g.iter()
            .zip(basis.frequencies())
            .map(|(g, z)| g / z)
            .collect(),
    )
}

fn dump(report: &mut Report, name: String, tr: &Trajectory) -> Result<()> {
    let mut bytes = Vec::new();
    write_trajectory_binary(tr, &mut bytes)?;
    report.artifacts.push(Artifact { name, bytes });
    Ok(())
}

const OBSERVABLES: [&str; 5] = ["mass", "sobolev", "mode1_sq", "re_mode1", "potential"];

fn observe(cfg: &ExperimentConfig, basis: &EigenBasis, u: &[C64]) -> Result<[f64; 5]> {
    Ok([
        mass(u),
        sobolev_norm(basis, u, cfg.s[0]),
        u[0].norm_sqr(),
        u[0].re,
        potential(basis, u, cfg.alpha, cfg.model)?,
    ])
}

/// Weighted means at `t = 0` and at `T/2`, `T`, with paired z-scores of the
/// differences, under Gibbs weights and under the free measure.
///
/// The z denominator adds `energy_tol · rms(F(0))` in quadrature to the
/// Monte Carlo error, so integrator-level drift of conserved quantities is
/// not mistaken for a statistical signal.
pub fn run_invariance(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let mut report = Report::new(cfg);
    let n = cfg.n[0];
    let basis = basis_for(cfg, n)?;
    let ensemble = Ensemble::draw(basis.clone(), cfg.model, cfg.alpha, cfg.seed, cfg.samples)?;
    let gibbs = ensemble.weights();
    let ess = weighted_expectation(&gibbs, &vec![0.0; gibbs.len()])?.effective_sample_size;
    report.push(None, Some(n), "effective_sample_size", "", ess);
    if ess < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::DegenerateEnsemble(format!(
            "effective sample size {ess:.1} < {MIN_EFFECTIVE_SAMPLES}"
        )));
    }

    let flow = flow_config(cfg);
    let times = [cfg.horizon / 2.0, cfg.horizon];
    let trajectories: Vec<Trajectory> = ensemble
        .samples
        .par_iter()
        .map(|s| {
            let mut tr = evolve(
                basis.clone(),
                &SpectralState::new(s.coeffs.clone()),
                &flow,
                cfg.horizon,
                &times,
            )?;
            tr.seed = Some(s.seed);
            Ok(tr)
        })
        .collect::<Result<_>>()?;
    let initial: Vec<[f64; 5]> = ensemble
        .samples
        .iter()
        .map(|s| observe(cfg, &basis, &s.coeffs))
        .collect::<Result<_>>()?;
    let later: Vec<Vec<[f64; 5]>> = (0..times.len())
        .map(|ti| {
            trajectories
                .iter()
                .map(|tr| observe(cfg, &basis, &tr.states[ti]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let max_drift = trajectories
        .iter()
        .map(|t| t.energy_drift)
        .fold(0.0, f64::max);
    report.push(None, Some(n), "max_energy_drift", "", max_drift);

    let ones = vec![1.0; gibbs.len()];
    let mut worst_gibbs = (0.0_f64, String::new());
    let mut control = 0.0_f64;
    for (label, weights) in [("gibbs", &gibbs), ("free", &ones)] {
        let code = if label == "gibbs" { 0.0 } else { 1.0 };
        for (k, name) in OBSERVABLES.iter().enumerate() {
            let f0: Vec<f64> = initial.iter().map(|v| v[k]).collect();
            let e0 = weighted_expectation(weights, &f0)?;
            let rms = weighted_expectation(weights, &f0.iter().map(|x| x * x).collect::<Vec<_>>())?
                .mean
                .sqrt();
            let floor = cfg.energy_tol * rms;
            let tag = |t: f64| format!("observable={name};t={t};weights={label}");
            report.push(None, Some(n), "mean", &tag(0.0), e0.mean);
            report.push(
                None,
                Some(n),
                "standard_error",
                &tag(0.0),
                e0.standard_error,
            );
            for (ti, &t) in times.iter().enumerate() {
                let ft: Vec<f64> = later[ti].iter().map(|v| v[k]).collect();
                let et = weighted_expectation(weights, &ft)?;
                let diff: Vec<f64> = ft.iter().zip(&f0).map(|(a, b)| a - b).collect();
                let ed = weighted_expectation(weights, &diff)?;
                let denom = ed.standard_error.hypot(floor);
                let z = if denom > 0.0 { ed.mean / denom } else { 0.0 };
                report.push(None, Some(n), "mean", &tag(t), et.mean);
                report.push(None, Some(n), "standard_error", &tag(t), et.standard_error);
                report.push(None, Some(n), "difference", &tag(t), ed.mean);
                report.push(None, Some(n), "z", &tag(t), z);
                if code == 0.0 && z.abs() >= worst_gibbs.0 {
                    worst_gibbs = (z.abs(), format!("{name} at t={t}"));
                }
                if code == 1.0 && *name == "potential" {
                    control = control.max(z.abs());
                }
            }
        }
    }
    report.add_gate(
        "gibbs_invariance",
        worst_gibbs.0 <= 3.0,
        format!("max |z| = {:.3} ({})", worst_gibbs.0, worst_gibbs.1),
    );
    report.add_gate(
        "free_measure_negative_control",
        control > 3.0,
        format!("max |z| of the potential under unit weights = {control:.3}"),
    );
    if opts.dump_trajectories {
        for tr in &trajectories {
            let seed = tr.seed.unwrap_or_default();
            dump(&mut report, format!("traj_n{n}_seed{seed}.bin"), tr)?;
        }
    }
    Ok(report)
}

enum SeedOutcome<T> {
    Done(T),
    Failed(String),
}

/// Per-N, per-s distances of one seed, with any kept trajectories.
type DistanceRows = (Vec<Vec<f64>>, Vec<Trajectory>);

/// Shared-ω convergence: each seed draws one Gaussian sequence up to
/// `n_ref`, every truncation starts from its prefix, and
/// `D(N) = max_t ‖u^N - u^{n_ref}‖_{H^s}`.
pub fn run_convergence(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let mut report = Report::new(cfg);
    let mut sizes = cfg.n.clone();
    sizes.push(cfg.n_ref);
    let bases: Vec<Arc<EigenBasis>> = sizes
        .iter()
        .map(|&n| basis_for(cfg, n))
        .collect::<Result<_>>()?;
    let flow = flow_config(cfg);
    let times = uniform_times(0.0, cfg.horizon, cfg.intervals());

    let outcomes: Vec<(u64, SeedOutcome<DistanceRows>)> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = sample_seed(cfg.seed, i);
            let g = complex_gaussians(seed, cfg.n_ref);
            let mut trajectories = Vec::with_capacity(bases.len());
            for basis in &bases {
                let data = truncate_data(basis, &g);
                match evolve(basis.clone(), &data, &flow, cfg.horizon, &times) {
                    Ok(mut tr) => {
                        tr.seed = Some(seed);
                        trajectories.push(tr);
                    }
                    Err(e) => {
                        return (seed, SeedOutcome::Failed(format!("N={}: {e}", basis.len())))
                    }
                }
            }
            let reference = trajectories.last().expect("reference trajectory");
            let distances = trajectories[..cfg.n.len()]
                .iter()
                .map(|tr| {
                    cfg.s
                        .iter()
                        .map(|&s| trajectory_distance(tr, reference, s))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>();
            match distances {
                Ok(d) => (seed, SeedOutcome::Done((d, trajectories))),
                Err(e) => (seed, SeedOutcome::Failed(e.to_string())),
            }
        })
        .collect();

    let mut per_n: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); cfg.n.len()]; cfg.s.len()];
    let mut failures = Vec::new();
    for (seed, outcome) in &outcomes {
        match outcome {
            SeedOutcome::Done((d, trajectories)) => {
                for (ni, &n) in cfg.n.iter().enumerate() {
                    for (si, &s) in cfg.s.iter().enumerate() {
                        report.push(
                            Some(*seed),
                            Some(n),
                            "distance",
                            &params(&[("s", s)]),
                            d[ni][si],
                        );
                        per_n[si][ni].push(d[ni][si]);
                    }
                }
                if opts.dump_trajectories {
                    for tr in trajectories {
                        dump(
                            &mut report,
                            format!("traj_n{}_seed{seed}.bin", tr.modes()),
                            tr,
                        )?;
                    }
                }
            }
            SeedOutcome::Failed(msg) => {
                report.push(Some(*seed), None, "integrator_failure", "", 1.0);
                failures.push(format!("seed {seed}: {msg}"));
            }
        }
    }
    report.push(
        None,
        None,
        "completed_seeds",
        "",
        (outcomes.len() - failures.len()) as f64,
    );

    for (si, &s) in cfg.s.iter().enumerate() {
        let p = params(&[("s", s)]);
        let mut medians = Vec::new();
        for (ni, &n) in cfg.n.iter().enumerate() {
            let d = &per_n[si][ni];
            if d.is_empty() {
                continue;
            }
            let median = quantile(d, 0.5);
            medians.push(median);
            report.push(None, Some(n), "distance_median", &p, median);
            report.push(None, Some(n), "distance_q25", &p, quantile(d, 0.25));
            report.push(None, Some(n), "distance_q75", &p, quantile(d, 0.75));
            report.push(None, Some(n), "distance_mean", &p, mean_and_se(d).0);
        }
        let complete = medians.len() == cfg.n.len();
        report.add_gate(
            format!("median_decreasing_s{s}"),
            complete && strictly_decreasing(&medians),
            format!("medians {medians:?}"),
        );
    }
    report.add_gate(
        "all_seeds_integrated",
        failures.is_empty(),
        failures.join("; "),
    );
    Ok(report)
}

/// Ensemble check `E‖P_N φ‖²_{H^s} = Σ_{n≤N} z_n^{2s-2}` over free draws:
/// within three standard errors at every `N`, and increasing in `N`.
fn free_field_check(
    cfg: &ExperimentConfig,
    report: &mut Report,
    bases: &[Arc<EigenBasis>],
    s: f64,
) {
    let p = params(&[("s", s)]);
    let nmax = bases.last().map(|b| b.len()).unwrap_or(0);
    let draws: Vec<Vec<C64>> = (0..cfg.free_samples as u64)
        .into_par_iter()
        .map(|j| complex_gaussians(sample_seed(cfg.seed ^ FREE_FIELD_SALT, j), nmax))
        .collect();
    let mut worst = 0.0_f64;
    let mut means = Vec::new();
    for basis in bases {
        let n = basis.len();
        let values: Vec<f64> = draws
            .iter()
            .map(|g| sobolev_norm(basis, &truncate_data(basis, &g[..n]).coeffs, s).powi(2))
            .collect();
        let (mean, se) = mean_and_se(&values);
        let exact = crate::spacetime::free_field_partial_sum(basis, s);
        let z = if se > 0.0 { (mean - exact) / se } else { 0.0 };
        worst = worst.max(z.abs());
        means.push(mean);
        report.push(None, Some(n), "free_norm_sq_mean", &p, mean);
        report.push(None, Some(n), "free_norm_sq_se", &p, se);
        report.push(None, Some(n), "free_partial_sum", &p, exact);
        report.push(None, Some(n), "free_z", &p, z);
    }
    let growing = means.windows(2).all(|w| w[1] > w[0]);
    report.add_gate(
        format!("free_field_partial_sum_s{s}"),
        worst <= 3.0 && growing,
        format!("max |z| = {worst:.3}, means {means:?}"),
    );
}

/// Wave-flow nonlinear smoothing: `max_t ‖u^N(t) - e^{-iωt} P_N φ‖_{H^s}`
/// over an `s` grid, with N-stability of the seed average below the
/// threshold `(5 - α) / 2`.
pub fn run_smoothing(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let mut report = Report::new(cfg);
    let bases: Vec<Arc<EigenBasis>> = cfg
        .n
        .iter()
        .map(|&n| basis_for(cfg, n))
        .collect::<Result<_>>()?;
    let nmax = *cfg.n.last().expect("validated non-empty");
    let flow = flow_config(cfg);
    let times = uniform_times(0.0, cfg.horizon, cfg.intervals());
    let threshold = cfg.smoothing_threshold();

    let per_seed: Vec<(u64, Vec<Vec<f64>>, Vec<Trajectory>)> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = sample_seed(cfg.seed, i);
            let g = complex_gaussians(seed, nmax);
            let mut rows = Vec::new();
            let mut kept = Vec::new();
            for basis in &bases {
                let data = truncate_data(basis, &g);
                let mut tr = evolve(basis.clone(), &data, &flow, cfg.horizon, &times)?;
                tr.seed = Some(seed);
                let devs = cfg
                    .s
                    .iter()
                    .map(|&s| linear_deviation(basis, &tr, &data, s))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(devs);
                if opts.dump_trajectories {
                    kept.push(tr);
                }
            }
            Ok((seed, rows, kept))
        })
        .collect::<Result<_>>()?;

    for (seed, rows, kept) in &per_seed {
        for (ni, &n) in cfg.n.iter().enumerate() {
            for (si, &s) in cfg.s.iter().enumerate() {
                report.push(
                    Some(*seed),
                    Some(n),
                    "linear_deviation",
                    &params(&[("s", s)]),
                    rows[ni][si],
                );
            }
        }
        for tr in kept {
            dump(
                &mut report,
                format!("traj_n{}_seed{seed}.bin", tr.modes()),
                tr,
            )?;
        }
    }
    for (si, &s) in cfg.s.iter().enumerate() {
        let p = params(&[("s", s)]);
        let means: Vec<f64> = (0..cfg.n.len())
            .map(|ni| {
                let v: Vec<f64> = per_seed.iter().map(|(_, rows, _)| rows[ni][si]).collect();
                let (m, se) = mean_and_se(&v);
                report.push(None, Some(cfg.n[ni]), "linear_deviation_mean", &p, m);
                report.push(None, Some(cfg.n[ni]), "linear_deviation_se", &p, se);
                m
            })
            .collect();
        let spread = max_relative_spread(&means, *means.last().expect("non-empty"));
        report.push(None, None, "stability", &p, spread);
        if s < threshold {
            report.add_gate(
                format!("deviation_stable_s{s}"),
                spread <= cfg.stability_tol,
                format!(
                    "max relative spread {spread:.4} (tolerance {})",
                    cfg.stability_tol
                ),
            );
        }
    }
    free_field_check(cfg, &mut report, &bases, cfg.free_s);
    Ok(report)
}

/// Quartic coupling sweep: bound constant, permutation symmetry, resonance
/// census, and the resonant diagonal sum fit.
pub fn run_coupling(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(cfg);
    let top = *cfg.maxn.iter().max().expect("validated non-empty");
    let basis = EigenBasis::new(Dim::new(cfg.dim)?, top.max(cfg.n0))?;

    let mut constants = Vec::new();
    for &maxn in &cfg.maxn {
        let tensor = CouplingTensor::build(&basis, maxn)?;
        let bound = crate::coupling::bound_report(&tensor);
        report.push(None, Some(maxn), "bound_constant", "", bound.max_ratio);
        report.push(None, Some(maxn), "quadruples", "", bound.quadruples as f64);
        report.add_gate(
            format!("bound_finite_maxn{maxn}"),
            bound.all_finite && bound.max_ratio.is_finite(),
            format!("C = {} at {:?}", bound.max_ratio, bound.argmax),
        );
        constants.push(bound.max_ratio);

        let census = resonance_census(&tensor, cfg.exponent);
        for cell in &census.cells {
            let tag = format!(
                "blocks={}/{}/{}/{};label={}",
                cell.blocks[0],
                cell.blocks[1],
                cell.blocks[2],
                cell.blocks[3],
                cell.label.as_str()
            );
            report.push(None, Some(maxn), "census_count", &tag, cell.count as f64);
            report.push(None, Some(maxn), "census_l2", &tag, cell.l2_mass);
        }
        report.push(
            None,
            Some(maxn),
            "near_resonant",
            "",
            census.near_resonant as f64,
        );
        report.push(
            None,
            Some(maxn),
            "nonresonant",
            "",
            census.nonresonant as f64,
        );
        report.add_gate(
            format!("census_partition_maxn{maxn}"),
            census.is_partition(),
            format!("{} ordered quadruples", census.total),
        );
        if maxn == *cfg.maxn.iter().min().expect("non-empty") {
            let mut csv = Vec::new();
            write_coupling_csv(&tensor, cfg.exponent, &mut csv)?;
            report.artifacts.push(Artifact {
                name: format!("coupling_maxn{maxn}.csv"),
                bytes: csv,
            });
        }
    }
    if constants.len() >= 2 {
        let ratio = constants[constants.len() - 1] / constants[0];
        report.push(None, None, "bound_constant_ratio", "", ratio);
        report.add_gate(
            "bound_constant_stable",
            (0.9..=1.1).contains(&ratio),
            format!("C(last)/C(first) = {ratio:.4}"),
        );
    }

    // direct evaluation of every permutation of random quadruples
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut asymmetry = 0.0_f64;
    for _ in 0..64 {
        let q: [usize; 4] = std::array::from_fn(|_| rng.gen_range(1..=top));
        let reference = quartic_coupling(&basis, q)?;
        for perm in permutations4() {
            let v = quartic_coupling(&basis, perm.map(|i| q[i]))?;
            asymmetry = asymmetry.max((v - reference).abs());
        }
    }
    report.push(None, Some(top), "permutation_asymmetry", "", asymmetry);
    report.add_gate(
        "permutation_symmetry",
        asymmetry <= 1e-9,
        format!("max deviation {asymmetry:e}"),
    );

    let diag = resonant_diagonal_sum(&basis, cfg.n0)?;
    for (k, v) in diag.values.iter().enumerate() {
        report.push(None, Some(k + 1), "diagonal_sum", "", *v);
    }
    let fit = diag.fit;
    let range = params(&[("lo", diag.range.0 as f64), ("hi", diag.range.1 as f64)]);
    report.push(
        None,
        Some(cfg.n0),
        "diagonal_fit_intercept",
        &range,
        fit.intercept,
    );
    report.push(None, Some(cfg.n0), "diagonal_fit_slope", &range, fit.slope);
    report.push(None, Some(cfg.n0), "diagonal_fit_r2", &range, fit.r_squared);
    report.add_gate(
        "diagonal_log_fit",
        fit.r_squared >= 0.99,
        format!(
            "S(n) = {:.5} + {:.5} log n, R² = {:.5}",
            fit.intercept, fit.slope, fit.r_squared
        ),
    );
    let target = fit.slope * std::f64::consts::LN_2;
    for n in [8usize, 16, 32] {
        if 2 * n > cfg.n0 {
            continue;
        }
        let inc = diag.s(2 * n) - diag.s(n);
        let rel = (inc / target - 1.0).abs();
        report.push(None, Some(n), "diagonal_doubling_increment", "", inc);
        report.add_gate(
            format!("diagonal_doubling_n{n}"),
            rel <= 0.15,
            format!("S(2n) - S(n) = {inc:.5} vs c log 2 = {target:.5}"),
        );
    }
    let fit_json = serde_json::json!({
        "a": fit.intercept,
        "c": fit.slope,
        "r_squared": fit.r_squared,
        "range": [diag.range.0, diag.range.1],
    });
    report.artifacts.push(Artifact {
        name: "diagonal_fit.json".into(),
        bytes: serde_json::to_vec_pretty(&fit_json)?,
    });
    Ok(report)
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let Some(d) = 6usize.checked_sub(a + b + c) else {
                    continue;
                };
                if a != b && a != c && b != c && d < 4 && d != a && d != b && d != c {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// A priori space-time bounds checked as N-stability: the windowed
/// `X^{s,b}` proxy and the mixed `L^p_x L^q_t` norm over Gibbs-weighted
/// seeds, plus the free-field divergence check at `free_s`.
pub fn run_xsb(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Report> {
    let mut report = Report::new(cfg);
    let bases: Vec<Arc<EigenBasis>> = cfg
        .n
        .iter()
        .map(|&n| basis_for(cfg, n))
        .collect::<Result<_>>()?;
    let nmax = *cfg.n.last().expect("validated non-empty");
    let flow = flow_config(cfg);
    let times = uniform_times(0.0, cfg.horizon, cfg.intervals());
    let window = Window { taper: cfg.taper };

    let mut xsb_params = Vec::new();
    for &s in &cfg.s {
        for &b in &cfg.b {
            xsb_params.push((s, b));
        }
    }
    let mut mixed_params = Vec::new();
    for &s in &cfg.mixed_s {
        for &p in &cfg.p {
            for &q in &cfg.q {
                mixed_params.push((s, p, q));
            }
        }
    }

    struct Row {
        weight: f64,
        xsb: Vec<f64>,
        mixed: Vec<f64>,
    }
    let per_seed: Vec<(u64, Vec<Row>, Vec<Trajectory>)> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = sample_seed(cfg.seed, i);
            let g = complex_gaussians(seed, nmax);
            let mut rows = Vec::new();
            let mut kept = Vec::new();
            for basis in &bases {
                let data = truncate_data(basis, &g);
                let weight = gibbs_weight(basis, &data.coeffs, cfg.alpha, cfg.model)?;
                let mut tr = evolve(basis.clone(), &data, &flow, cfg.horizon, &times)?;
                tr.seed = Some(seed);
                let stc = time_frequency_transform(&tr, window)?;
                let xsb = xsb_params
                    .iter()
                    .map(|&(s, b)| xsb_norm(&stc, s, b))
                    .collect::<Result<Vec<f64>>>()?;
                let mixed = mixed_params
                    .iter()
                    .map(|&(s, p, q)| mixed_norm(basis, &tr, s, p, q))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(Row { weight, xsb, mixed });
                if opts.dump_trajectories {
                    kept.push(tr);
                }
            }
            Ok((seed, rows, kept))
        })
        .collect::<Result<_>>()?;

    for (seed, rows, kept) in &per_seed {
        for (ni, &n) in cfg.n.iter().enumerate() {
            let row = &rows[ni];
            report.push(Some(*seed), Some(n), "gibbs_weight", "", row.weight);
            for (k, &(s, b)) in xsb_params.iter().enumerate() {
                report.push(
                    Some(*seed),
                    Some(n),
                    "xsb",
                    &params(&[("s", s), ("b", b), ("taper", cfg.taper)]),
                    row.xsb[k],
                );
            }
            for (k, &(s, p, q)) in mixed_params.iter().enumerate() {
                report.push(
                    Some(*seed),
                    Some(n),
                    "mixed",
                    &params(&[("s", s), ("p", p), ("q", q)]),
                    row.mixed[k],
                );
            }
        }
        for tr in kept {
            dump(
                &mut report,
                format!("traj_n{}_seed{seed}.bin", tr.modes()),
                tr,
            )?;
        }
    }

    let stability = |report: &mut Report,
                     metric: &str,
                     tag: String,
                     pick: &dyn Fn(&Row) -> f64|
     -> Result<()> {
        let mut means = Vec::new();
        for (ni, &n) in cfg.n.iter().enumerate() {
            let w: Vec<f64> = per_seed
                .iter()
                .map(|(_, rows, _)| rows[ni].weight)
                .collect();
            let v: Vec<f64> = per_seed
                .iter()
                .map(|(_, rows, _)| pick(&rows[ni]))
                .collect();
            let est = weighted_expectation(&w, &v)?;
            report.push(None, Some(n), &format!("{metric}_mean"), &tag, est.mean);
            report.push(
                None,
                Some(n),
                &format!("{metric}_se"),
                &tag,
                est.standard_error,
            );
            means.push(est.mean);
        }
        let spread = max_relative_spread(&means, *means.last().expect("non-empty"));
        report.push(None, None, &format!("{metric}_stability"), &tag, spread);
        report.add_gate(
            format!("{metric}_stable_{tag}"),
            spread <= cfg.stability_tol,
            format!("means {means:?}, max relative spread {spread:.4}"),
        );
        Ok(())
    };
    for (k, &(s, b)) in xsb_params.iter().enumerate() {
        stability(
            &mut report,
            "xsb",
            params(&[("s", s), ("b", b), ("taper", cfg.taper)]),
            &|r: &Row| r.xsb[k],
        )?;
    }
    for (k, &(s, p, q)) in mixed_params.iter().enumerate() {
        stability(
            &mut report,
            "mixed",
            params(&[("s", s), ("p", p), ("q", q)]),
            &|r: &Row| r.mixed[k],
        )?;
    }
    free_field_check(cfg, &mut report, &bases, cfg.free_s);
    Ok(report)
}
