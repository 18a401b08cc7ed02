//! Hierarchical divisive change-point estimation with energy statistics.
//!
//! For a split of a segment into `X = z[a..t]` and `Y = z[t..b]` the sample
//! divergence is
//!
//! ```text
//! E = 2/(mn) ΣΣ |Xi - Yj|^α  -  C(n,2)^-1 Σ_{i<k} |Xi - Xk|^α  -  C(m,2)^-1 Σ_{j<k} |Yj - Yk|^α
//! Q = mn/(m+n) · E
//! ```
//!
//! Each iteration takes the admissible split with the largest `Q` over all
//! current segments and keeps it only if a permutation test rejects the
//! no-change hypothesis. Permutations shuffle observations within every
//! current segment and recompute the largest `Q`; the p-value is
//! `(1 + #{permuted >= observed}) / (R + 1)`.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Epoch;
use crate::seed::derive_seed;

/// Spans up to this length get a precomputed distance matrix.
const MATRIX_LIMIT: usize = 2500;

#[derive(Debug, Error, PartialEq)]
pub enum ChangePointError {
    #[error("segment of {len} observations is too small (need {need})")]
    SegmentTooSmall { len: usize, need: usize },
    #[error("alpha exponent must lie in (0, 2), got {0}")]
    BadExponent(f64),
    #[error("minimum segment length must be at least 2, got {0}")]
    BadMinSegment(usize),
    #[error("permutation count must be positive and significance in (0, 1)")]
    BadPermutationConfig,
    #[error("observations must be finite with a consistent dimension")]
    BadObservations,
}

/// A sequence of points in `dim` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    dim: usize,
    data: Vec<f64>,
}

impl Observations {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self, ChangePointError> {
        if dim == 0 || !data.len().is_multiple_of(dim) || data.iter().any(|v| !v.is_finite()) {
            return Err(ChangePointError::BadObservations);
        }
        Ok(Self { dim, data })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self, ChangePointError> {
        Self::new(1, values)
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self, ChangePointError> {
        let dim = points.first().map_or(1, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(ChangePointError::BadObservations);
        }
        Self::new(dim, points.concat())
    }

    pub fn from_epochs(epochs: &[Epoch], signal: Signal) -> Self {
        match signal {
            Signal::Triaxial => Self {
                dim: 3,
                data: epochs.iter().flat_map(|e| e.counts()).collect(),
            },
            Signal::Vm3 => Self {
                dim: 1,
                data: epochs.iter().map(Epoch::vector_magnitude).collect(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        Self {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }

    /// Adds `offset` to every point.
    pub fn translate(&self, offset: &[f64]) -> Self {
        assert_eq!(offset.len(), self.dim);
        let data = self
            .data
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(offset).map(|(a, b)| a + b))
            .collect();
        Self { dim: self.dim, data }
    }
}

/// Per-epoch signal fed to the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    /// The three axis counts as a point in R^3.
    #[default]
    Triaxial,
    /// Vector magnitude, one dimension.
    Vm3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub alpha_exp: f64,
    pub min_segment: usize,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            alpha_exp: 1.0,
            min_segment: 30,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<(), ChangePointError> {
        if !(self.alpha_exp > 0.0 && self.alpha_exp < 2.0) {
            return Err(ChangePointError::BadExponent(self.alpha_exp));
        }
        if self.min_segment < 2 {
            return Err(ChangePointError::BadMinSegment(self.min_segment));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_permutations: usize,
    pub significance: f64,
    pub master_seed: u64,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            n_permutations: 99,
            significance: 0.01,
            master_seed: 0,
        }
    }
}

impl PermutationConfig {
    pub fn validate(&self) -> Result<(), ChangePointError> {
        if self.n_permutations == 0 || !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(ChangePointError::BadPermutationConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    /// Offset within the span; the new segment starts here.
    pub index: usize,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub points: Vec<ChangePoint>,
}

impl ChangePointSet {
    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|c| c.index).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub e_hat: f64,
    pub q_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub index: usize,
    pub q_hat: f64,
}

fn distance(a: &[f64], b: &[f64], alpha: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let d = sq.sqrt();
    if alpha == 1.0 {
        d
    } else {
        d.powf(alpha)
    }
}

/// Canonical order of two sets so that `energy_divergence` does the same
/// arithmetic whichever way round it is called.
fn canonical_first(x: &Observations, y: &Observations) -> bool {
    match x.len().cmp(&y.len()) {
        std::cmp::Ordering::Equal => {
            let xb = x.data.iter().map(|v| v.to_bits());
            let yb = y.data.iter().map(|v| v.to_bits());
            xb.le(yb)
        }
        o => o.is_lt(),
    }
}

pub fn energy_divergence(x: &Observations, y: &Observations, alpha_exp: f64) -> Result<Divergence, ChangePointError> {
    if !(alpha_exp > 0.0 && alpha_exp < 2.0) {
        return Err(ChangePointError::BadExponent(alpha_exp));
    }
    for s in [x, y] {
        if s.len() < 2 {
            return Err(ChangePointError::SegmentTooSmall { len: s.len(), need: 2 });
        }
    }
    if x.dim != y.dim {
        return Err(ChangePointError::BadObservations);
    }
    let (x, y) = if canonical_first(x, y) { (x, y) } else { (y, x) };
    let (n, m) = (x.len(), y.len());

    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..m {
            cross += distance(x.point(i), y.point(j), alpha_exp);
        }
    }
    let within = |s: &Observations| {
        let mut acc = 0.0;
        for i in 0..s.len() {
            for k in i + 1..s.len() {
                acc += distance(s.point(i), s.point(k), alpha_exp);
            }
        }
        let len = s.len() as f64;
        acc * 2.0 / (len * (len - 1.0))
    };
    let (nf, mf) = (n as f64, m as f64);
    let e_hat = 2.0 * cross / (nf * mf) - within(x) - within(y);
    Ok(Divergence {
        e_hat,
        q_hat: nf * mf / (nf + mf) * e_hat,
    })
}

/// Pairwise `|zi - zj|^α` lookups over one span.
enum Distances<'a> {
    Matrix { n: usize, d: Vec<f64> },
    Lazy { obs: &'a Observations, alpha: f64 },
}

impl<'a> Distances<'a> {
    fn new(obs: &'a Observations, alpha: f64) -> Self {
        let n = obs.len();
        if n > MATRIX_LIMIT {
            return Self::Lazy { obs, alpha };
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = distance(obs.point(i), obs.point(j), alpha);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self::Matrix { n, d }
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::Matrix { n, d } => d[i * n + j],
            Self::Lazy { obs, alpha } => distance(obs.point(i), obs.point(j), *alpha),
        }
    }
}

/// Best split of the sequence `idx` (positions into the distance table),
/// as an offset into `idx`. Ties go to the smallest offset.
fn best_split_indexed(dist: &Distances, idx: &[usize], min_segment: usize) -> Option<Split> {
    let n = idx.len();
    if n < 2 * min_segment {
        return None;
    }
    // before[t] = Σ_{i<t} d(i,t); after[t] = Σ_{j>t} d(t,j)
    let mut before = vec![0.0; n];
    let mut after = vec![0.0; n];
    for i in 0..n {
        let gi = idx[i];
        let mut row = 0.0;
        for j in i + 1..n {
            let v = dist.get(gi, idx[j]);
            row += v;
            before[j] += v;
        }
        after[i] = row;
    }

    let mut within_x = 0.0;
    let mut within_y: f64 = after.iter().sum();
    let mut cross = 0.0;
    let nf = n as f64;
    let mut best: Option<Split> = None;
    for t in 0..n {
        if t >= min_segment && n - t >= min_segment {
            let (xf, yf) = (t as f64, (n - t) as f64);
            let e = 2.0 * cross / (xf * yf) - 2.0 * within_x / (xf * (xf - 1.0)) - 2.0 * within_y / (yf * (yf - 1.0));
            let q = xf * yf / nf * e;
            if best.is_none_or(|b| q > b.q_hat) {
                best = Some(Split { index: t, q_hat: q });
            }
        }
        // move point t from Y to X
        within_x += before[t];
        within_y -= after[t];
        cross += after[t] - before[t];
    }
    best
}

pub fn best_split(span: &Observations, params: &EnergyParams) -> Result<Split, ChangePointError> {
    params.validate()?;
    let need = 2 * params.min_segment;
    if span.len() < need {
        return Err(ChangePointError::SegmentTooSmall { len: span.len(), need });
    }
    let dist = Distances::new(span, params.alpha_exp);
    let idx: Vec<usize> = (0..span.len()).collect();
    Ok(best_split_indexed(&dist, &idx, params.min_segment).expect("length checked"))
}

fn permuted_stat(
    dist: &Distances,
    segments: &[Range<usize>],
    min_segment: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::NEG_INFINITY;
    for seg in segments {
        let mut idx: Vec<usize> = seg.clone().collect();
        idx.shuffle(&mut rng);
        if let Some(s) = best_split_indexed(dist, &idx, min_segment) {
            best = best.max(s.q_hat);
        }
    }
    best
}

fn permutation_p_value(
    dist: &Distances,
    segments: &[Range<usize>],
    observed: f64,
    params: &EnergyParams,
    cfg: &PermutationConfig,
    iteration_id: u64,
) -> f64 {
    let stats: Vec<f64> = (0..cfg.n_permutations)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(&[cfg.master_seed, iteration_id, r as u64]);
            permuted_stat(dist, segments, params.min_segment, seed)
        })
        .collect();
    let exceed = stats.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (cfg.n_permutations + 1) as f64
}

/// Permutation p-value of `observed_stat` given the current segmentation of
/// `span`. Deterministic in `(cfg.master_seed, iteration_id)`.
pub fn permutation_test(
    span: &Observations,
    current_segments: &[Range<usize>],
    observed_stat: f64,
    params: &EnergyParams,
    cfg: &PermutationConfig,
    iteration_id: u64,
) -> Result<f64, ChangePointError> {
    params.validate()?;
    cfg.validate()?;
    let dist = Distances::new(span, params.alpha_exp);
    Ok(permutation_p_value(&dist, current_segments, observed_stat, params, cfg, iteration_id))
}

/// Runs the divisive search until a proposed split is not significant or no
/// segment can be split further.
pub fn e_divisive(
    span: &Observations,
    params: &EnergyParams,
    cfg: &PermutationConfig,
) -> Result<ChangePointSet, ChangePointError> {
    params.validate()?;
    cfg.validate()?;
    let n = span.len();
    if n < 2 * params.min_segment {
        return Ok(ChangePointSet::default());
    }
    let dist = Distances::new(span, params.alpha_exp);
    let propose = |seg: &Range<usize>| {
        let idx: Vec<usize> = seg.clone().collect();
        best_split_indexed(&dist, &idx, params.min_segment)
    };

    // segments stay sorted by start, so the first maximum is the smallest index
    #[allow(clippy::single_range_in_vec_init)]
    let mut segments = vec![0..n];
    let mut proposals = vec![propose(&segments[0])];
    let mut points = Vec::new();
    loop {
        let mut pick: Option<(usize, Split)> = None;
        for (k, p) in proposals.iter().enumerate() {
            if let Some(s) = p {
                if pick.is_none_or(|(_, b)| s.q_hat > b.q_hat) {
                    pick = Some((k, *s));
                }
            }
        }
        let Some((k, split)) = pick else { break };
        let iteration = points.len() as u64;
        let p_value = permutation_p_value(&dist, &segments, split.q_hat, params, cfg, iteration);
        if p_value > cfg.significance {
            break;
        }
        let seg = segments[k].clone();
        let at = seg.start + split.index;
        tracing::debug!(index = at, statistic = split.q_hat, p_value, "change point accepted");
        points.push(ChangePoint {
            index: at,
            statistic: split.q_hat,
            p_value,
        });
        let left = seg.start..at;
        let right = at..seg.end;
        let (pl, pr) = (propose(&left), propose(&right));
        segments.splice(k..=k, [left, right]);
        proposals.splice(k..=k, [pl, pr]);
    }
    points.sort_by_key(|c| c.index);
    Ok(ChangePointSet { points })
}
