//! Quartic overlap integrals `c(n, n1, n2, n3) = ∫_B e_n e_{n1} e_{n2} e_{n3}`,
//! the `|c| ≤ C min(indices)` sweep, dyadic resonance classification, and
//! the resonant diagonal sum `S(n) = Σ_m z_m^{-2} ∫ e_n² e_m²`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::{quadrature, EigenBasis};
use crate::error::{Error, Result};
use crate::stats::{linear_fit, LinearFit};

/// Largest quadrature rule `quartic_coupling` will build on its own.
pub const MAX_NODES: usize = 1 << 20;

/// Absolute accuracy target for individual overlaps.
pub const COUPLING_TOL: f64 = 1e-9;

/// Nodes needed for four per oscillation of `e_n e_{n1} e_{n2} e_{n3}`.
pub fn required_nodes(basis: &EigenBasis, quad: [usize; 4]) -> usize {
    let z: f64 = quad.iter().map(|&n| basis.frequencies()[n - 1]).sum();
    (4.0 * z / (2.0 * std::f64::consts::PI)).ceil() as usize
}

fn check_indices(basis: &EigenBasis, quad: [usize; 4]) -> Result<()> {
    if quad.iter().any(|&n| n == 0 || n > basis.len()) {
        return Err(Error::InvalidArgument(format!(
            "indices {quad:?} must lie in 1..={}",
            basis.len()
        )));
    }
    Ok(())
}

/// `∫_B e_n e_{n1} e_{n2} e_{n3}` by Gauss-Legendre quadrature.
///
/// Uses the basis table when it has enough nodes, otherwise builds a finer
/// rule and evaluates the eigenfunctions directly.
pub fn quartic_coupling(basis: &EigenBasis, quad: [usize; 4]) -> Result<f64> {
    check_indices(basis, quad)?;
    let need = required_nodes(basis, quad);
    if basis.node_count() >= need {
        let rows = quad.map(|n| basis.row(n - 1));
        Ok(basis
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| w * rows[0][j] * rows[1][j] * rows[2][j] * rows[3][j])
            .sum())
    } else {
        coupling_on_rule(basis, quad, need)
    }
}

fn coupling_on_rule(basis: &EigenBasis, quad: [usize; 4], m: usize) -> Result<f64> {
    if m > MAX_NODES {
        return Err(Error::ResolutionCeiling {
            needed: m,
            limit: MAX_NODES,
        });
    }
    let (r, w) = quadrature::gauss_legendre_on(m, 0.0, 1.0);
    let area = basis.dim().sphere_area();
    let d = basis.dim().as_usize() as i32;
    Ok(r.iter()
        .zip(&w)
        .map(|(&r, &w)| {
            let e: f64 = quad.iter().map(|&n| basis.eval(n, r)).product();
            w * area * r.powi(d - 1) * e
        })
        .sum())
}

/// Overlap computed at the required resolution and at twice it; returns the
/// finer value and the difference between the two.
pub fn quartic_coupling_validated(basis: &EigenBasis, quad: [usize; 4]) -> Result<(f64, f64)> {
    check_indices(basis, quad)?;
    let m = required_nodes(basis, quad).max(basis.node_count()).max(8);
    let coarse = coupling_on_rule(basis, quad, m)?;
    let fine = coupling_on_rule(basis, quad, 2 * m)?;
    let diff = (fine - coarse).abs();
    if diff > COUPLING_TOL {
        return Err(Error::NoConvergence {
            what: format!("coupling {quad:?} under node doubling"),
            residual: diff,
        });
    }
    Ok((fine, diff))
}

/// Rank of a sorted quadruple `a <= b <= c <= d` (1-based) among all
/// multisets of size four drawn from `1..=maxn`.
fn canonical_rank(sorted: [usize; 4]) -> usize {
    fn choose(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }
    let [a, b, c, d] = sorted.map(|v| v - 1);
    choose(a, 1) + choose(b + 1, 2) + choose(c + 2, 3) + choose(d + 3, 4)
}

fn sort4(mut q: [usize; 4]) -> [usize; 4] {
    q.sort_unstable();
    q
}

/// All quartic overlaps with indices up to `maxn`, stored once per
/// permutation class.
#[derive(Debug, Clone)]
pub struct CouplingTensor {
    maxn: usize,
    entries: Vec<f64>,
}

impl CouplingTensor {
    pub fn build(basis: &EigenBasis, maxn: usize) -> Result<Self> {
        if maxn == 0 || maxn > basis.len() {
            return Err(Error::InvalidArgument(format!(
                "maxn {maxn} must lie in 1..={}",
                basis.len()
            )));
        }
        let worst = required_nodes(basis, [maxn; 4]);
        if basis.node_count() < worst {
            return Err(Error::ResolutionCeiling {
                needed: worst,
                limit: basis.node_count(),
            });
        }
        let weights = basis.weights();
        // w_j e_a e_b for a <= b, and e_c e_d, indexed by pair
        let pair_index = |a: usize, b: usize| b * (b + 1) / 2 + a;
        let m = basis.node_count();
        let mut weighted_pairs = vec![0.0; maxn * (maxn + 1) / 2 * m];
        let mut pairs = vec![0.0; maxn * (maxn + 1) / 2 * m];
        for b in 0..maxn {
            for a in 0..=b {
                let p = pair_index(a, b);
                let (ra, rb) = (basis.row(a), basis.row(b));
                for j in 0..m {
                    let e = ra[j] * rb[j];
                    pairs[p * m + j] = e;
                    weighted_pairs[p * m + j] = e * weights[j];
                }
            }
        }
        let quads: Vec<[usize; 4]> = (1..=maxn)
            .flat_map(|d| {
                (1..=d).flat_map(move |c| {
                    (1..=c).flat_map(move |b| (1..=b).map(move |a| [a, b, c, d]))
                })
            })
            .collect();
        let mut entries = vec![0.0; quads.len()];
        let values: Vec<(usize, f64)> = quads
            .par_iter()
            .map(|&q| {
                let p = pair_index(q[0] - 1, q[1] - 1);
                let r = pair_index(q[2] - 1, q[3] - 1);
                let v = weighted_pairs[p * m..(p + 1) * m]
                    .iter()
                    .zip(&pairs[r * m..(r + 1) * m])
                    .map(|(x, y)| x * y)
                    .sum();
                (canonical_rank(q), v)
            })
            .collect();
        for (rank, v) in values {
            entries[rank] = v;
        }
        Ok(CouplingTensor { maxn, entries })
    }

    pub fn maxn(&self) -> usize {
        self.maxn
    }

    /// Number of stored (canonical) entries.
    pub fn stored(&self) -> usize {
        self.entries.len()
    }

    /// `c(n, n1, n2, n3)` for any ordering of the indices.
    pub fn get(&self, quad: [usize; 4]) -> f64 {
        assert!(quad.iter().all(|&n| n >= 1 && n <= self.maxn));
        self.entries[canonical_rank(sort4(quad))]
    }

    /// Canonical quadruples with their values.
    pub fn iter(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        let maxn = self.maxn;
        (1..=maxn).flat_map(move |d| {
            (1..=d).flat_map(move |c| {
                (1..=c).flat_map(move |b| {
                    (1..=b).map(move |a| {
                        let q = [a, b, c, d];
                        (q, self.entries[canonical_rank(q)])
                    })
                })
            })
        })
    }
}

/// Result of the `|c| / min(indices)` sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub maxn: usize,
    /// Empirical constant `C`.
    pub max_ratio: f64,
    pub argmax: [usize; 4],
    pub quadruples: usize,
    pub all_finite: bool,
}

pub fn bound_report(tensor: &CouplingTensor) -> BoundReport {
    let mut best = (0.0, [1, 1, 1, 1]);
    let mut all_finite = true;
    let mut count = 0;
    for (q, c) in tensor.iter() {
        count += 1;
        let ratio = c.abs() / q[0] as f64;
        if !ratio.is_finite() {
            all_finite = false;
            continue;
        }
        if ratio > best.0 {
            best = (ratio, q);
        }
    }
    BoundReport {
        maxn: tensor.maxn(),
        max_ratio: best.0,
        argmax: best.1,
        quadruples: count,
        all_finite,
    }
}

/// Empirical `C = max |c| / min(indices)` over all quadruples up to `maxn`.
pub fn verify_coupling_bound(basis: &EigenBasis, maxn: usize) -> Result<BoundReport> {
    Ok(bound_report(&CouplingTensor::build(basis, maxn)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResonanceLabel {
    Nonresonant,
    NearResonant,
}

impl ResonanceLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ResonanceLabel::Nonresonant => "nonresonant",
            ResonanceLabel::NearResonant => "near-resonant",
        }
    }
}

/// Dyadic block `2^⌊log₂ n⌋`.
pub fn dyadic_block(n: usize) -> usize {
    assert!(n >= 1);
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// Threshold exponent used by [`classify_resonance`] by default.
pub const DEFAULT_RESONANCE_EXPONENT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceClass {
    pub quad: [usize; 4],
    pub blocks: [usize; 4],
    /// `|n² - n1² + n2² - n3²|` in integer indices.
    pub modulus: u64,
    /// `min(N, N1, N2 + N3)^exponent`.
    pub threshold: f64,
    pub label: ResonanceLabel,
}

/// Classifies `(n, n1, n2, n3)`: near-resonant iff the modulus is below
/// `min(N, N1, N2 + N3)^exponent`.
pub fn classify_resonance(quad: [usize; 4], exponent: f64) -> ResonanceClass {
    let sq = quad.map(|n| (n as i128) * (n as i128));
    let modulus = (sq[0] - sq[1] + sq[2] - sq[3]).unsigned_abs() as u64;
    let blocks = quad.map(dyadic_block);
    let base = blocks[0].min(blocks[1]).min(blocks[2] + blocks[3]) as f64;
    let threshold = base.powf(exponent);
    let label = if (modulus as f64) < threshold {
        ResonanceLabel::NearResonant
    } else {
        ResonanceLabel::Nonresonant
    };
    ResonanceClass {
        quad,
        blocks,
        modulus,
        threshold,
        label,
    }
}

/// `|z_n² - z_{n1}² + z_{n2}² - z_{n3}²|`.
pub fn spectral_modulus(basis: &EigenBasis, quad: [usize; 4]) -> f64 {
    let l = quad.map(|n| basis.eigenvalues()[n - 1]);
    (l[0] - l[1] + l[2] - l[3]).abs()
}

/// Count and `ℓ²` mass of the couplings in one class of one block quadruple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusCell {
    pub blocks: [usize; 4],
    pub label: ResonanceLabel,
    pub count: u64,
    pub l2_mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceCensus {
    pub maxn: usize,
    pub cells: Vec<CensusCell>,
    /// Ordered quadruples visited.
    pub total: u64,
    pub near_resonant: u64,
    pub nonresonant: u64,
}

impl ResonanceCensus {
    /// True when every ordered quadruple was assigned to exactly one class.
    pub fn is_partition(&self) -> bool {
        let cell_total: u64 = self.cells.iter().map(|c| c.count).sum();
        self.total == (self.maxn as u64).pow(4)
            && cell_total == self.total
            && self.near_resonant + self.nonresonant == self.total
    }
}

/// Classifies every ordered quadruple in `[1, maxn]^4`.
pub fn resonance_census(tensor: &CouplingTensor, exponent: f64) -> ResonanceCensus {
    use std::collections::BTreeMap;
    let maxn = tensor.maxn();
    let mut cells: BTreeMap<([usize; 4], ResonanceLabel), (u64, f64)> = BTreeMap::new();
    let (mut total, mut near, mut non) = (0, 0, 0);
    for n in 1..=maxn {
        for n1 in 1..=maxn {
            for n2 in 1..=maxn {
                for n3 in 1..=maxn {
                    let q = [n, n1, n2, n3];
                    let class = classify_resonance(q, exponent);
                    let c = tensor.get(q);
                    let cell = cells.entry((class.blocks, class.label)).or_insert((0, 0.0));
                    cell.0 += 1;
                    cell.1 += c * c;
                    total += 1;
                    match class.label {
                        ResonanceLabel::NearResonant => near += 1,
                        ResonanceLabel::Nonresonant => non += 1,
                    }
                }
            }
        }
    }
    ResonanceCensus {
        maxn,
        cells: cells
            .into_iter()
            .map(|((blocks, label), (count, l2))| CensusCell {
                blocks,
                label,
                count,
                l2_mass: l2.sqrt(),
            })
            .collect(),
        total,
        near_resonant: near,
        nonresonant: non,
    }
}

/// `S(n)` for `n = 1..=n0` and the fit `S(n) ≈ a + c log n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalReport {
    pub n0: usize,
    /// `values[k] = S(k + 1)`.
    pub values: Vec<f64>,
    /// Intercept `a`, slope `c`, and `R²`.
    pub fit: LinearFit,
    /// Inclusive index range of the fit.
    pub range: (usize, usize),
}

impl DiagonalReport {
    pub fn s(&self, n: usize) -> f64 {
        self.values[n - 1]
    }
}

/// `S(n) = Σ_{m ≤ n0} z_m^{-2} ∫ e_n² e_m²`, fitted against `log n` over
/// `n ∈ [4, n0/2]`.
pub fn resonant_diagonal_sum(basis: &EigenBasis, n0: usize) -> Result<DiagonalReport> {
    if n0 == 0 || n0 > basis.len() {
        return Err(Error::InvalidArgument(format!(
            "N0 = {n0} must lie in 1..={}",
            basis.len()
        )));
    }
    let m = basis.node_count();
    // free-field density Σ_m z_m^{-2} e_m(r)²
    let mut density = vec![0.0; m];
    for (k, z) in basis.frequencies()[..n0].iter().enumerate() {
        let inv = 1.0 / (z * z);
        for (d, e) in density.iter_mut().zip(basis.row(k)) {
            *d += inv * e * e;
        }
    }
    let values: Vec<f64> = (0..n0)
        .map(|k| {
            basis
                .row(k)
                .iter()
                .zip(&density)
                .zip(basis.weights())
                .map(|((e, d), w)| w * e * e * d)
                .sum()
        })
        .collect();
    let lo = 4.min(n0);
    let hi = (n0 / 2).max(lo);
    let (x, y): (Vec<f64>, Vec<f64>) = (lo..=hi).map(|n| ((n as f64).ln(), values[n - 1])).unzip();
    let fit = if x.len() >= 2 {
        linear_fit(&x, &y)
    } else {
        LinearFit {
            intercept: y.first().copied().unwrap_or(f64::NAN),
            slope: f64::NAN,
            r_squared: f64::NAN,
        }
    };
    Ok(DiagonalReport {
        n0,
        values,
        fit,
        range: (lo, hi),
    })
}

/// Writes `n,n1,n2,n3,c,modulus,label` for every ordered quadruple.
pub fn write_coupling_csv<W: Write>(
    tensor: &CouplingTensor,
    exponent: f64,
    mut out: W,
) -> Result<()> {
    writeln!(out, "n,n1,n2,n3,c,modulus,label")?;
    let maxn = tensor.maxn();
    for n in 1..=maxn {
        for n1 in 1..=maxn {
            for n2 in 1..=maxn {
                for n3 in 1..=maxn {
                    let q = [n, n1, n2, n3];
                    let class = classify_resonance(q, exponent);
                    writeln!(
                        out,
                        "{n},{n1},{n2},{n3},{:e},{},{}",
                        tensor.get(q),
                        class.modulus,
                        class.label.as_str()
                    )?;
                }
            }
        }
    }
    Ok(())
}
