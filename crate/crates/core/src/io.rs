//! File formats: ensemble and trajectory JSON lines, the compact binary
//! trajectory layout, and long-format result CSV.
//!
//! Binary layout (all little-endian): `d: u64, N: u64, α: f64,
//! model: u64 (0 = NLS, 1 = NLW), dt: f64, K: u64`, followed by `K` records
//! of `2N` floats `re_1, im_1, …, re_N, im_N`. `dt` is the sample interval.

use std::io::{BufRead, Read, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::measures::WeightedSample;
use crate::Model;

fn interleave(coeffs: &[C64]) -> Vec<f64> {
    coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn deinterleave(values: &[f64]) -> Result<Vec<C64>> {
    if !values.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "interleaved coefficient array has odd length {}",
            values.len()
        )));
    }
    Ok(values
        .chunks_exact(2)
        .map(|p| C64::new(p[0], p[1]))
        .collect())
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    seed: u64,
    weight: f64,
    coeffs: Vec<f64>,
}

/// One sample per line: `{"seed", "weight", "coeffs": [re, im, …]}`.
pub fn write_ensemble_jsonl<W: Write>(samples: &[WeightedSample], mut out: W) -> Result<()> {
    for s in samples {
        let line = SampleLine {
            seed: s.seed,
            weight: s.weight,
            coeffs: interleave(&s.coeffs),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ensemble_jsonl<R: BufRead>(input: R) -> Result<Vec<WeightedSample>> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SampleLine = serde_json::from_str(&line)?;
        samples.push(WeightedSample {
            seed: parsed.seed,
            weight: parsed.weight,
            coeffs: deinterleave(&parsed.coeffs)?,
        });
    }
    Ok(samples)
}

#[derive(Serialize, Deserialize)]
struct TrajectoryLine {
    time: f64,
    coeffs: Vec<f64>,
}

/// One sample time per line: `{"time", "coeffs": [re, im, …]}`.
pub fn write_trajectory_jsonl<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<()> {
    for (t, u) in trajectory.times.iter().zip(&trajectory.states) {
        serde_json::to_writer(
            &mut out,
            &TrajectoryLine {
                time: *t,
                coeffs: interleave(u),
            },
        )?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// `(times, states)` from a trajectory JSON-lines stream.
pub fn read_trajectory_jsonl<R: BufRead>(input: R) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TrajectoryLine = serde_json::from_str(&line)?;
        times.push(parsed.time);
        states.push(deinterleave(&parsed.coeffs)?);
    }
    Ok((times, states))
}

/// Header of the binary trajectory layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryHeader {
    pub dim: u64,
    pub modes: u64,
    pub alpha: f64,
    pub model: Model,
    pub dt: f64,
    pub samples: u64,
}

impl BinaryHeader {
    pub const BYTES: usize = 48;
}

/// Decoded binary trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTrajectory {
    pub header: BinaryHeader,
    pub states: Vec<Vec<C64>>,
}

pub fn write_trajectory_binary<W: Write>(trajectory: &Trajectory, mut out: W) -> Result<()> {
    let dt = trajectory.uniform_spacing().unwrap_or(0.0);
    let model: u64 = match trajectory.config.model {
        Model::Nls => 0,
        Model::Nlw => 1,
    };
    out.write_all(&(trajectory.basis.dim().as_usize() as u64).to_le_bytes())?;
    out.write_all(&(trajectory.modes() as u64).to_le_bytes())?;
    out.write_all(&trajectory.config.alpha.to_le_bytes())?;
    out.write_all(&model.to_le_bytes())?;
    out.write_all(&dt.to_le_bytes())?;
    out.write_all(&(trajectory.len() as u64).to_le_bytes())?;
    for u in &trajectory.states {
        for c in u {
            out.write_all(&c.re.to_le_bytes())?;
            out.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_trajectory_binary<R: Read>(mut input: R) -> Result<BinaryTrajectory> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let dim = u64::from_le_bytes(next(&mut input)?);
    let modes = u64::from_le_bytes(next(&mut input)?);
    let alpha = f64::from_le_bytes(next(&mut input)?);
    let model = match u64::from_le_bytes(next(&mut input)?) {
        0 => Model::Nls,
        1 => Model::Nlw,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown model tag {other} in binary header"
            )))
        }
    };
    let dt = f64::from_le_bytes(next(&mut input)?);
    let samples = u64::from_le_bytes(next(&mut input)?);
    let mut states = Vec::with_capacity(samples as usize);
    for _ in 0..samples {
        let mut u = Vec::with_capacity(modes as usize);
        for _ in 0..modes {
            let re = f64::from_le_bytes(next(&mut input)?);
            let im = f64::from_le_bytes(next(&mut input)?);
            u.push(C64::new(re, im));
        }
        states.push(u);
    }
    Ok(BinaryTrajectory {
        header: BinaryHeader {
            dim,
            modes,
            alpha,
            model,
            dt,
            samples,
        },
        states,
    })
}

/// One scalar result. Rows are long-format so every experiment shares a
/// single CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub metric: String,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub value: f64,
}

pub const RESULT_HEADER: &str = "experiment,config_hash,seed,N,metric,params,value";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

/// Writes records in order; floats use Rust's shortest round-trip form,
/// so equal inputs give byte-identical files.
pub fn write_results_csv<W: Write>(records: &[ResultRecord], mut out: W) -> Result<()> {
    writeln!(out, "{RESULT_HEADER}")?;
    for r in records {
        for field in [&r.experiment, &r.metric, &r.params] {
            if field.contains(',') || field.contains('\n') {
                return Err(Error::InvalidArgument(format!(
                    "CSV field {field:?} contains a separator"
                )));
            }
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.config_hash,
            opt(&r.seed),
            opt(&r.modes),
            r.metric,
            r.params,
            r.value
        )?;
    }
    Ok(())
}

pub fn read_results_csv<R: BufRead>(input: R) -> Result<Vec<ResultRecord>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h == RESULT_HEADER => {}
        _ => return Err(Error::InvalidArgument("missing results header".into())),
    }
    let bad = |line: &str| Error::InvalidArgument(format!("malformed result row {line:?}"));
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(&line));
        }
        let parse_opt = |s: &str| -> Result<Option<u64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(&line))
            }
        };
        out.push(ResultRecord {
            experiment: f[0].into(),
            config_hash: f[1].into(),
            seed: parse_opt(f[2])?,
            modes: parse_opt(f[3])?.map(|v| v as usize),
            metric: f[4].into(),
            params: f[5].into(),
            value: f[6].parse().map_err(|_| bad(&line))?,
        });
    }
    Ok(out)
}

/// Checks that all records come from one configuration and returns its hash.
pub fn common_config_hash(records: &[ResultRecord]) -> Result<String> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("no records to aggregate".into()))?;
    for r in records {
        if r.config_hash != first.config_hash {
            return Err(Error::MixedConfig {
                expected: first.config_hash.clone(),
                got: r.config_hash.clone(),
            });
        }
    }
    Ok(first.config_hash.clone())
}
