use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use radial_gibbs::dynamics::{evolve, uniform_times, FlowConfig};
use radial_gibbs::eigenbasis::{Dim, EigenBasis};
use radial_gibbs::harness::{self, parse_config, Experiment, ExperimentConfig, RunOptions};
use radial_gibbs::io::{
    write_ensemble_jsonl, write_results_csv, write_trajectory_binary, write_trajectory_jsonl,
};
use radial_gibbs::measures::{sample_free, sample_seed, Ensemble};
use radial_gibbs::{Error, Model, Result};

#[derive(Parser)]
#[command(
    name = "radial-gibbs",
    version,
    about = "Truncated radial NLS/NLW with Gibbs-distributed data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration file (`key = value`, optional sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write every evolved trajectory in the binary layout.
    #[arg(long)]
    dump_traj: bool,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value = "nls")]
    model: Model,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrajFormat {
    Jsonl,
    Bin,
}

#[derive(Subcommand)]
enum Command {
    /// Build a basis and print its summary as JSON.
    Basis {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a Gibbs-weighted free ensemble and write it as JSON lines.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ensemble.jsonl")]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Evolve one free draw and write its trajectory.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Final time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        energy_tol: f64,
        /// Stored samples over `[0, t]` (plus the initial state).
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: TrajFormat,
        #[arg(long, default_value = "trajectory.jsonl")]
        out: PathBuf,
    },
    /// Weighted means and z-scores of observables along the flow.
    Invariance(Common),
    /// Distance of truncated solutions to a reference truncation.
    Convergence(Common),
    /// Deviation of the wave flow from its linear part.
    Smoothing(Common),
    /// Quartic overlap bound, resonance census, diagonal sum fit.
    Coupling(Common),
    /// Space-time norm stability across truncations.
    Xsb(Common),
}

enum Outcome {
    Passed,
    GateFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config(list) = &e {
                for item in list {
                    eprintln!("  - {item}");
                }
            }
            ExitCode::from(1)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Basis { d, n, out } => {
            let basis = EigenBasis::new(Dim::new(d)?, n)?;
            let json = serde_json::to_string_pretty(&basis.summary())?;
            match out {
                Some(path) => {
                    create_parent(&path)?;
                    fs::write(path, json + "\n")?;
                }
                None => println!("{json}"),
            }
            Ok(Outcome::Passed)
        }
        Command::Sample {
            model,
            count,
            seed,
            out,
            threads,
        } => {
            set_threads(threads)?;
            let basis = Arc::new(EigenBasis::for_nonlinearity(
                Dim::new(model.d)?,
                model.n,
                model.alpha,
            )?);
            let ensemble = Ensemble::draw(basis, model.model, model.alpha, seed, count)?;
            create_parent(&out)?;
            let mut w = BufWriter::new(fs::File::create(&out)?);
            write_ensemble_jsonl(&ensemble.samples, &mut w)?;
            w.flush()?;
            Ok(Outcome::Passed)
        }
        Command::Evolve {
            model,
            seed,
            t,
            dt,
            energy_tol,
            samples,
            format,
            out,
        } => {
            let basis = Arc::new(EigenBasis::for_nonlinearity(
                Dim::new(model.d)?,
                model.n,
                model.alpha,
            )?);
            let data = sample_free(&basis, sample_seed(seed, 0));
            let mut flow = FlowConfig::new(model.model, model.alpha).with_energy_tol(energy_tol);
            flow.dt = dt;
            let mut tr = evolve(
                basis,
                &data,
                &flow,
                t,
                &uniform_times(0.0, t, samples.max(1)),
            )?;
            tr.seed = Some(seed);
            create_parent(&out)?;
            let mut w = BufWriter::new(fs::File::create(&out)?);
            match format {
                TrajFormat::Jsonl => write_trajectory_jsonl(&tr, &mut w)?,
                TrajFormat::Bin => write_trajectory_binary(&tr, &mut w)?,
            }
            w.flush()?;
            eprintln!(
                "dt = {:e}, relative energy drift = {:e}",
                tr.dt, tr.energy_drift
            );
            Ok(Outcome::Passed)
        }
        Command::Invariance(c) => experiment(Experiment::Invariance, c),
        Command::Convergence(c) => experiment(Experiment::Convergence, c),
        Command::Smoothing(c) => experiment(Experiment::Smoothing, c),
        Command::Coupling(c) => experiment(Experiment::Coupling, c),
        Command::Xsb(c) => experiment(Experiment::Xsb, c),
    }
}

/// Config for a subcommand: the file (with `experiment` implied when
/// absent) or the experiment defaults.
fn load_config(experiment: Experiment, path: Option<&Path>) -> Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::defaults(experiment));
    };
    let text = fs::read_to_string(path)?;
    let names_experiment = text.lines().any(|l| {
        l.split('#')
            .next()
            .and_then(|l| l.split_once('='))
            .is_some_and(|(k, _)| k.trim().eq_ignore_ascii_case("experiment"))
    });
    let cfg = if names_experiment {
        parse_config(&text)?
    } else {
        parse_config(&format!("experiment = {experiment}\n{text}"))?
    };
    if cfg.experiment != experiment {
        return Err(Error::InvalidArgument(format!(
            "config describes `{}` but the `{experiment}` subcommand was used",
            cfg.experiment
        )));
    }
    Ok(cfg)
}

fn experiment(kind: Experiment, common: Common) -> Result<Outcome> {
    set_threads(common.threads)?;
    let mut cfg = load_config(kind, common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(kind.as_str()));
    cfg.output = Some(out.display().to_string());
    cfg.validate()?;

    let started = SystemTime::now();
    let clock = Instant::now();
    let report = harness::run(
        &cfg,
        RunOptions {
            dump_trajectories: common.dump_traj,
        },
    )?;
    let wall = clock.elapsed().as_secs_f64();

    fs::create_dir_all(&out)?;
    let mut csv = BufWriter::new(fs::File::create(out.join("results.csv"))?);
    write_results_csv(&report.records, &mut csv)?;
    csv.flush()?;
    for artifact in &report.artifacts {
        fs::write(out.join(&artifact.name), &artifact.bytes)?;
    }
    let epoch = |t: SystemTime| {
        t.duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    };
    let meta = serde_json::json!({
        "config": cfg,
        "config_hash": report.config_hash,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": epoch(started),
        "finished_unix": epoch(SystemTime::now()),
        "wall_seconds": wall,
        "threads": rayon::current_num_threads(),
        "gates": report.gates,
        "passed": report.passed(),
    });
    fs::write(
        out.join("meta.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;

    for g in &report.gates {
        println!(
            "{} {}: {}",
            if g.passed { "PASS" } else { "FAIL" },
            g.name,
            g.detail
        );
    }
    Ok(if report.passed() {
        Outcome::Passed
    } else {
        Outcome::GateFailed
    })
}
