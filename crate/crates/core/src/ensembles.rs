//! Multiscale ensembles of matrix mimicries, statistic profiles over them,
//! entropies, and Monte Carlo tests between a coarse null and a finer
//! alternative ensemble.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, NeighborhoodSystem};
use crate::error::{Error, Result};
use crate::geometry::block_intensities;
use crate::model::{permute_unchecked, BinaryMatrix, BlockGrid, CouplingGeometry};
use crate::nestedness::{
    grid_weights, least_nested_reference, n_plus_index, ncg_index, nodf_index, temperature_index, NestedReference,
};
use crate::rng::derive_seed;
use crate::samplers::{log10_biguint, BlockSampler, ChainKind, SamplerKind, SwapChain, DEFAULT_BURN_IN, DEFAULT_STATE_BUDGET, DEFAULT_THIN};

/// Histogram resolution used by summaries and overlap unless overridden.
pub const DEFAULT_BINS: usize = 30;

pub const SUMMARY_QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    /// `None` means the whole matrix as a single block.
    pub grid: Option<BlockGrid>,
    pub sampler: SamplerKind,
    pub n_samples: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    /// Memo-state limit for exact counting of each block.
    #[serde(default = "default_budget")]
    pub state_budget: usize,
}

fn default_budget() -> usize {
    DEFAULT_STATE_BUDGET
}

impl EnsembleSpec {
    /// Exact block sampling on `grid`.
    pub fn exact(grid: Option<BlockGrid>, n_samples: usize, seed: u64) -> Self {
        Self {
            grid,
            sampler: SamplerKind::BlockExact,
            n_samples,
            seed,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            state_budget: DEFAULT_STATE_BUDGET,
        }
    }

    pub fn with_grid(&self, grid: Option<BlockGrid>) -> Self {
        Self { grid, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self, matrix: &BinaryMatrix) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::arg("an ensemble needs at least one sample"));
        }
        if let Some(grid) = &self.grid {
            grid.check_covers(matrix)?;
            if self.sampler != SamplerKind::BlockExact && grid.shape() != (1, 1) {
                return Err(Error::arg("swap chains only support the whole-matrix grid"));
            }
        }
        if self.sampler != SamplerKind::BlockExact && self.thin == 0 {
            return Err(Error::arg("thinning interval must be at least 1"));
        }
        Ok(())
    }

    fn grid_or_whole(&self, matrix: &BinaryMatrix) -> BlockGrid {
        self.grid
            .clone()
            .unwrap_or_else(|| BlockGrid::whole(matrix.rows(), matrix.cols()))
    }

    pub fn label(&self) -> String {
        match &self.grid {
            Some(g) => g.label(),
            None => "1x1".to_string(),
        }
    }
}

enum Source {
    Exact(BlockSampler),
    Chain(Box<SwapChain>),
}

/// Streams the members of an ensemble. If preparation fails (for example
/// the counting budget is exceeded) the stream yields that error once and
/// ends.
pub struct EnsembleStream {
    source: Option<Source>,
    pending_error: Option<Error>,
    seed: u64,
    next: usize,
    len: usize,
}

impl Iterator for EnsembleStream {
    type Item = Result<BinaryMatrix>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending_error.take() {
            self.next = self.len;
            return Some(Err(e));
        }
        if self.next >= self.len {
            return None;
        }
        let k = self.next;
        self.next += 1;
        let item = match self.source.as_mut()? {
            Source::Exact(s) => s.sample(derive_seed(self.seed, k as u64)),
            Source::Chain(c) => Ok(c.next_sample()),
        };
        if item.is_err() {
            self.next = self.len;
        }
        Some(item)
    }
}

fn prepare(matrix: &BinaryMatrix, spec: &EnsembleSpec) -> Result<Source> {
    spec.validate(matrix)?;
    Ok(match spec.sampler {
        SamplerKind::BlockExact => Source::Exact(BlockSampler::with_budget(
            matrix,
            &spec.grid_or_whole(matrix),
            spec.state_budget,
        )?),
        SamplerKind::Checkerboard | SamplerKind::Curveball => {
            let kind = if spec.sampler == SamplerKind::Checkerboard {
                ChainKind::Checkerboard
            } else {
                ChainKind::Curveball
            };
            Source::Chain(Box::new(SwapChain::new(matrix, kind, spec.burn_in, spec.thin, spec.seed)?))
        }
    })
}

/// Lazily generated ensemble members. Exact members use the seed derived
/// from the spec seed and the member index.
pub fn generate_ensemble(matrix: &BinaryMatrix, spec: &EnsembleSpec) -> EnsembleStream {
    let (source, pending_error) = match prepare(matrix, spec) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e)),
    };
    EnsembleStream {
        source,
        pending_error,
        seed: spec.seed,
        next: 0,
        len: spec.n_samples,
    }
}

/// Evaluates `f` on every member without keeping members around. Exact
/// members are drawn and evaluated in parallel; results keep member order.
pub fn map_ensemble<T, F>(matrix: &BinaryMatrix, spec: &EnsembleSpec, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&BinaryMatrix) -> Result<T> + Sync,
{
    match prepare(matrix, spec)? {
        Source::Exact(sampler) => (0..spec.n_samples)
            .into_par_iter()
            .map(|k| f(&sampler.sample(derive_seed(spec.seed, k as u64))?))
            .collect(),
        Source::Chain(mut chain) => (0..spec.n_samples).map(|_| f(&chain.next_sample())).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// Small values indicate structure.
    Left,
    /// Large values indicate structure.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Energy,
    NPlus,
    Temperature,
    Nodf,
    Ncg,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Energy,
        Statistic::NPlus,
        Statistic::Temperature,
        Statistic::Nodf,
        Statistic::Ncg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Energy => "energy",
            Statistic::NPlus => "n_plus",
            Statistic::Temperature => "temperature",
            Statistic::Nodf => "nodf",
            Statistic::Ncg => "ncg",
        }
    }

    pub fn tail(self) -> Tail {
        match self {
            Statistic::Nodf => Tail::Right,
            _ => Tail::Left,
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Statistic::ALL
            .into_iter()
            .find(|st| st.name() == key || (key == "nplus" && *st == Statistic::NPlus))
            .ok_or_else(|| Error::arg(format!("unknown statistic '{s}'")))
    }
}

/// A statistic bound to a geometry: energy is taken on the geometry's
/// arrangement, the block index on its finest grid.
pub struct Evaluator {
    statistic: Statistic,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
    neighborhood: NeighborhoodSystem,
    grid: BlockGrid,
    reference: NestedReference,
    row_weights: Vec<f64>,
    col_weights: Vec<f64>,
}

impl Evaluator {
    pub fn new(geometry: &CouplingGeometry, statistic: Statistic) -> Result<Self> {
        let (row_weights, col_weights) = grid_weights(&geometry.finest_grid);
        Ok(Self {
            statistic,
            row_perm: geometry.row_perm.clone(),
            col_perm: geometry.col_perm.clone(),
            neighborhood: geometry.params.neighborhood,
            grid: geometry.finest_grid.clone(),
            reference: least_nested_reference(&geometry.lambda)?,
            row_weights,
            col_weights,
        })
    }

    pub fn statistic(&self) -> Statistic {
        self.statistic
    }

    pub fn evaluate(&self, sample: &BinaryMatrix) -> Result<f64> {
        Ok(match self.statistic {
            Statistic::Energy => {
                if sample.shape() != (self.row_perm.len(), self.col_perm.len()) {
                    return Err(Error::arg("sample shape differs from the geometry"));
                }
                energy(&permute_unchecked(sample, &self.row_perm, &self.col_perm), self.neighborhood) as f64
            }
            Statistic::NPlus => n_plus_index(sample) as f64,
            Statistic::Temperature => temperature_index(sample)?,
            Statistic::Nodf => nodf_index(sample)?,
            Statistic::Ncg => {
                let lambda = block_intensities(sample, &self.grid)?;
                ncg_index(&lambda, &self.reference, &self.row_weights, &self.col_weights)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; a constant sample gets one zero-width bin.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let (lo, hi) = min_max(values);
        Self::with_range(values, lo, hi, bins)
    }

    fn with_range(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        if values.is_empty() {
            return Self {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        if hi <= lo || bins == 0 {
            return Self {
                edges: vec![lo, hi.max(lo)],
                counts: vec![values.len()],
            };
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|b| lo + b as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn bin_width(&self) -> f64 {
        match self.edges.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.0,
        }
    }

    /// Centre of the most populated bin (the first on ties).
    pub fn mode(&self) -> Option<f64> {
        let mut best: Option<usize> = None;
        for (b, &c) in self.counts.iter().enumerate() {
            if best.is_none_or(|x| c > self.counts[x]) {
                best = Some(b);
            }
        }
        best.map(|b| 0.5 * (self.edges[b] + self.edges[b + 1]))
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub statistic: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for one value).
    pub std: f64,
    /// `(probability, value)` pairs, linear interpolation between order
    /// statistics.
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Histogram,
}

impl DistributionSummary {
    pub fn from_values(statistic: &str, values: Vec<f64>) -> Result<Self> {
        Self::with_bins(statistic, values, DEFAULT_BINS)
    }

    pub fn with_bins(statistic: &str, values: Vec<f64>, bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::arg("cannot summarise an empty sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("{statistic}: non-finite value in sample")));
        }
        let n = values.len() as f64;
        let (lo, hi) = min_max(&values);
        // a constant sample must summarise exactly, without rounding drift
        let mean = if lo == hi { lo } else { values.iter().sum::<f64>() / n };
        let std = if values.len() > 1 && lo != hi {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let quantiles = SUMMARY_QUANTILES.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect();
        let histogram = Histogram::new(&values, bins);
        Ok(Self {
            statistic: statistic.to_string(),
            values,
            mean,
            std,
            quantiles,
            histogram,
        })
    }

    /// True when every value is identical.
    pub fn is_singleton(&self) -> bool {
        let (lo, hi) = min_max(&self.values);
        lo == hi
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        quantile_sorted(&sorted, p)
    }
}

/// Linear interpolation between order statistics at position `p (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Shared area of the two samples' relative-frequency histograms over a
/// common set of `bins` equal bins spanning both samples.
pub fn overlap_coefficient(a: &[f64], b: &[f64], bins: usize) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (lo_a, hi_a) = min_max(a);
    let (lo_b, hi_b) = min_max(b);
    let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
    let ha = Histogram::with_range(a, lo, hi, bins);
    let hb = Histogram::with_range(b, lo, hi, bins);
    ha.counts
        .iter()
        .zip(&hb.counts)
        .map(|(&x, &y)| (x as f64 / a.len() as f64).min(y as f64 / b.len() as f64))
        .sum()
}

/// Kolmogorov-Smirnov distance between a sample and the uniform law on [0, 1].
pub fn ks_uniform_distance(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((k + 1) as f64 / n - x).max(x - k as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Values of `statistic` over an ensemble.
pub fn ensemble_values(
    matrix: &BinaryMatrix,
    evaluator: &Evaluator,
    spec: &EnsembleSpec,
) -> Result<Vec<f64>> {
    map_ensemble(matrix, spec, |s| evaluator.evaluate(s))
}

/// One distribution per grid, each from `template` with its grid replaced
/// and its seed split by grid position.
pub fn statistic_profile(
    matrix: &BinaryMatrix,
    geometry: &CouplingGeometry,
    grids: &[BlockGrid],
    statistic: Statistic,
    template: &EnsembleSpec,
) -> Result<Vec<DistributionSummary>> {
    let evaluator = Evaluator::new(geometry, statistic)?;
    grids
        .iter()
        .enumerate()
        .map(|(g, grid)| {
            let spec = template
                .with_grid(Some(grid.clone()))
                .with_seed(derive_seed(template.seed, g as u64));
            DistributionSummary::from_values(statistic.name(), ensemble_values(matrix, &evaluator, &spec)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEntry {
    pub grid: String,
    /// Exact ensemble size as a decimal string.
    pub count: Option<String>,
    pub log10_size: Option<f64>,
    /// Why the size is unavailable, if it is.
    pub error: Option<String>,
}

/// log10 ensemble size per grid.
pub fn entropy_profile(matrix: &BinaryMatrix, grids: &[BlockGrid]) -> Result<Vec<EntropyEntry>> {
    entropy_profile_with_budget(matrix, grids, DEFAULT_STATE_BUDGET)
}

pub fn entropy_profile_with_budget(
    matrix: &BinaryMatrix,
    grids: &[BlockGrid],
    budget: usize,
) -> Result<Vec<EntropyEntry>> {
    grids
        .iter()
        .map(|grid| {
            grid.check_covers(matrix)?;
            Ok(match BlockSampler::with_budget(matrix, grid, budget) {
                Ok(s) => {
                    let count: BigUint = s.count();
                    EntropyEntry {
                        grid: grid.label(),
                        log10_size: Some(log10_biguint(&count)),
                        count: Some(count.to_string()),
                        error: None,
                    }
                }
                Err(e @ Error::BudgetExceeded { .. }) => EntropyEntry {
                    grid: grid.label(),
                    count: None,
                    log10_size: None,
                    error: Some(e.to_string()),
                },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Monte Carlo p-value `(1 + #{null at least as extreme}) / (1 + n)`.
pub fn monte_carlo_p_value(null: &[f64], observed: f64, tail: Tail) -> f64 {
    let extreme = null
        .iter()
        .filter(|&&v| match tail {
            Tail::Left => v <= observed,
            Tail::Right => v >= observed,
        })
        .count();
    (1 + extreme) as f64 / (1 + null.len()) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: String,
    pub tail: Tail,
    pub null_spec: EnsembleSpec,
    pub alt_spec: EnsembleSpec,
    /// Statistic values on the alternative ensemble.
    pub observed: Vec<f64>,
    pub null_summary: DistributionSummary,
    pub alt_summary: DistributionSummary,
    /// Constant on the alternative ensemble.
    pub efficient: bool,
    pub p_value: Option<f64>,
    pub p_value_distribution: Option<DistributionSummary>,
}

/// Tests the alternative ensemble against a coarser null ensemble.
pub fn run_test(
    matrix: &BinaryMatrix,
    geometry: &CouplingGeometry,
    statistic: Statistic,
    null_spec: &EnsembleSpec,
    alt_spec: &EnsembleSpec,
) -> Result<TestReport> {
    let null_grid = null_spec.grid_or_whole(matrix);
    let alt_grid = alt_spec.grid_or_whole(matrix);
    null_grid.check_covers(matrix)?;
    alt_grid.check_covers(matrix)?;
    if !alt_grid.refines(&null_grid) {
        return Err(Error::arg("the null grid must be coarser than (or equal to) the alternative grid"));
    }
    let evaluator = Evaluator::new(geometry, statistic)?;
    let null = ensemble_values(matrix, &evaluator, null_spec)?;
    let observed = ensemble_values(matrix, &evaluator, alt_spec)?;
    let null_summary = DistributionSummary::from_values(statistic.name(), null.clone())?;
    let alt_summary = DistributionSummary::from_values(statistic.name(), observed.clone())?;
    let efficient = alt_summary.is_singleton();
    let tail = statistic.tail();
    let (p_value, p_value_distribution) = if efficient {
        (Some(monte_carlo_p_value(&null, observed[0], tail)), None)
    } else {
        let mut sorted = null.clone();
        sorted.sort_by(f64::total_cmp);
        let ps = observed
            .iter()
            .map(|&o| sorted_p_value(&sorted, o, tail))
            .collect::<Vec<_>>();
        (None, Some(DistributionSummary::from_values("p_value", ps)?))
    };
    Ok(TestReport {
        statistic: statistic.name().to_string(),
        tail,
        null_spec: null_spec.clone(),
        alt_spec: alt_spec.clone(),
        observed,
        null_summary,
        alt_summary,
        efficient,
        p_value,
        p_value_distribution,
    })
}

/// [`monte_carlo_p_value`] against an already sorted null sample.
fn sorted_p_value(sorted: &[f64], observed: f64, tail: Tail) -> f64 {
    let extreme = match tail {
        Tail::Left => sorted.partition_point(|&v| v <= observed),
        Tail::Right => sorted.len() - sorted.partition_point(|&v| v < observed),
    };
    (1 + extreme) as f64 / (1 + sorted.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = DistributionSummary::from_values("x", vec![4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(s.mean, 3.0);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.quantile(0.5), 3.0);
        assert_eq!(s.quantile(0.25), 2.0);
        assert!((s.quantile(0.01) - 1.04).abs() < 1e-12);
        assert_eq!(s.quantiles.len(), 7);
        assert_eq!(s.histogram.counts.iter().sum::<usize>(), 5);
        assert!(!s.is_singleton());
        let one = DistributionSummary::from_values("x", vec![0.1; 7]).unwrap();
        assert_eq!(one.mean, 0.1);
        assert!(one.is_singleton());
        assert_eq!(one.std, 0.0);
        assert_eq!(one.histogram.counts, vec![7]);
    }

    #[test]
    fn overlap_examples() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        assert!((overlap_coefficient(&a, &a, 10) - 1.0).abs() < 1e-12);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        assert_eq!(overlap_coefficient(&a, &b, 10), 0.0);
        assert_eq!(overlap_coefficient(&[1.0], &[1.0], 10), 1.0);
    }

    #[test]
    fn p_values() {
        let null = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(monte_carlo_p_value(&null, 0.5, Tail::Left), 0.2);
        assert_eq!(monte_carlo_p_value(&null, 2.0, Tail::Left), 0.6);
        assert_eq!(monte_carlo_p_value(&null, 2.0, Tail::Right), 0.8);
        for obs in [0.0, 1.0, 2.5, 4.0, 9.0] {
            for tail in [Tail::Left, Tail::Right] {
                assert_eq!(sorted_p_value(&null, obs, tail), monte_carlo_p_value(&null, obs, tail));
            }
        }
    }

    #[test]
    fn ks_distance() {
        let grid: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform_distance(&grid) <= 0.0005 + 1e-12);
        assert!((ks_uniform_distance(&[0.0; 10]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn statistic_names_round_trip() {
        for s in Statistic::ALL {
            assert_eq!(s.name().parse::<Statistic>().unwrap(), s);
        }
        assert_eq!("N+".replace('+', "plus").parse::<Statistic>().unwrap(), Statistic::NPlus);
        assert!("foo".parse::<Statistic>().is_err());
    }
}
