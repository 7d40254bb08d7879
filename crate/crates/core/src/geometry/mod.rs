//! Extraction of the coupling geometry.
//!
//! Rows and columns are handled alternately: distances on one axis are
//! computed (conditioned on the other axis' current core clusters), a
//! multi-level tree is built from them, and the axis is reordered by
//! annealing over orders in which every tree cluster stays contiguous. A
//! candidate is only adopted when it does not raise the energy, so the
//! recorded trace is non-increasing.

mod anneal;
mod tree;

pub use tree::{axis_distance, build_tree, build_tree_capped, Axis, DistanceMatrix};

use serde::{Deserialize, Serialize};

use crate::energy::{energy, horizontal_agreement, row_affinity, NeighborhoodSystem};
use crate::error::{Error, Result};
use crate::model::{
    invert_permutation, permute_unchecked, BinaryMatrix, BlockGrid, CouplingGeometry, UltrametricTree,
};
use crate::rng::{derive_seed, rng_from_seed};

use anneal::{anneal, Affinity, OrderTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Upper bound on row/column alternation rounds.
    pub max_iterations: usize,
    /// Levels per tree, root included.
    pub tree_levels: usize,
    /// Annealing proposals per axis per round.
    pub anneal_steps: usize,
    /// Non-increasing temperatures, in energy units.
    pub anneal_temperature_schedule: Vec<f64>,
    pub seed: u64,
    pub neighborhood: NeighborhoodSystem,
    /// Most core clusters per axis; `None` uses the ceiling of the square
    /// root of the axis length.
    #[serde(default)]
    pub max_core_clusters: Option<usize>,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            tree_levels: 4,
            anneal_steps: 20_000,
            anneal_temperature_schedule: vec![3.0, 1.5, 0.75, 0.35, 0.15, 0.05],
            seed: 0,
            neighborhood: NeighborhoodSystem::N8,
            max_core_clusters: None,
        }
    }
}

impl GeometryParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::arg("max_iterations must be at least 1"));
        }
        if self.tree_levels < 2 {
            return Err(Error::arg("tree_levels must be at least 2"));
        }
        let s = &self.anneal_temperature_schedule;
        if s.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::arg("annealing temperatures must be positive"));
        }
        if s.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::arg("annealing schedule must be non-increasing"));
        }
        if self.max_core_clusters == Some(0) {
            return Err(Error::arg("max_core_clusters must be at least 1"));
        }
        Ok(())
    }

    /// Core-cluster cap for an axis of `len` members.
    pub fn core_cluster_cap(&self, len: usize) -> usize {
        self.max_core_clusters
            .unwrap_or_else(|| (len as f64).sqrt().ceil() as usize)
            .max(2)
    }
}

/// Fraction of 1s inside every block of `grid`.
pub fn block_intensities(matrix: &BinaryMatrix, grid: &BlockGrid) -> Result<Vec<Vec<f64>>> {
    grid.check_covers(matrix)?;
    Ok(grid
        .row_groups
        .iter()
        .map(|rg| {
            grid.col_groups
                .iter()
                .map(|cg| {
                    let ones: usize = rg
                        .iter()
                        .map(|&i| cg.iter().filter(|&&j| matrix.get(i, j) == 1).count())
                        .sum();
                    ones as f64 / (rg.len() * cg.len()) as f64
                })
                .collect()
        })
        .collect())
}

/// Reorders the rows of `mat` (whose columns are already arranged) within
/// the constraints of `tree`. Returns the new order and the energy of the
/// resulting arrangement.
///
/// `increasing` selects the orientation: when true the row fill trends
/// upward along the order, otherwise downward. Reversal leaves the energy
/// unchanged.
fn optimize_axis(
    mat: &BinaryMatrix,
    tree: &UltrametricTree,
    current: &[usize],
    params: &GeometryParams,
    seed: u64,
    increasing: bool,
) -> (Vec<usize>, i64) {
    let nb = params.neighborhood;
    let size = mat.rows();
    let aff = Affinity::build(size, |a, b| {
        if a == b {
            0
        } else {
            row_affinity(mat.row(a), mat.row(b), nb)
        }
    });
    let constant: i64 = (0..size).map(|i| horizontal_agreement(mat.row(i))).sum();
    let sums: Vec<f64> = (0..size)
        .map(|i| mat.row(i).iter().map(|&c| c as f64).sum())
        .collect();
    let sign = if increasing { 1.0 } else { -1.0 };
    let greedy = OrderTree::new(tree, |ms| {
        sign * ms.iter().map(|&x| sums[x]).sum::<f64>() / ms.len() as f64
    });
    let pos = invert_permutation(current);
    let projected = OrderTree::new(tree, |ms| {
        ms.iter().map(|&x| pos[x] as f64).sum::<f64>() / ms.len() as f64
    });
    let start = if aff.path_gain(greedy.order()) > aff.path_gain(projected.order()) {
        greedy
    } else {
        projected
    };
    let mut rng = rng_from_seed(seed);
    let (mut best, gain) = anneal(
        start,
        &aff,
        &params.anneal_temperature_schedule,
        params.anneal_steps,
        &mut rng,
    );
    let mid = (size as f64 - 1.0) / 2.0;
    let trend: f64 = best
        .order()
        .iter()
        .enumerate()
        .map(|(p, &x)| (p as f64 - mid) * sums[x])
        .sum();
    if trend * sign < 0.0 {
        best.flip();
    }
    (best.order().to_vec(), -(constant + gain))
}

/// Computes the coupling geometry of `matrix`.
///
/// Rows end up ordered with fill increasing downward and columns with fill
/// decreasing rightward, so a nested matrix has its dense corner at the
/// bottom left.
pub fn compute_geometry(matrix: &BinaryMatrix, params: &GeometryParams) -> Result<CouplingGeometry> {
    params.validate()?;
    let (m, n) = matrix.shape();
    let nb = params.neighborhood;
    let levels = params.tree_levels;
    let identity_rows: Vec<usize> = (0..m).collect();
    let identity_cols: Vec<usize> = (0..n).collect();

    let mut row_order = identity_rows.clone();
    let mut col_order = identity_cols.clone();
    let mut row_tree: Option<UltrametricTree> = None;
    let mut col_tree: Option<UltrametricTree> = None;
    let mut current = energy(matrix, nb);
    let mut trace = vec![current];

    for round in 0..params.max_iterations {
        let round_start = current;

        let dist = axis_distance(matrix, Axis::Rows, col_tree.as_ref());
        let tree = build_tree_capped(&dist, levels, params.core_cluster_cap(m));
        let arranged = permute_unchecked(matrix, &identity_rows, &col_order);
        let seed = derive_seed(params.seed, 2 * round as u64);
        let (order, e) = optimize_axis(&arranged, &tree, &row_order, params, seed, true);
        if e <= current {
            row_order = order;
            row_tree = Some(tree);
            current = e;
        } else if row_tree.is_none() {
            row_tree = Some(UltrametricTree::trivial(m, levels));
        }
        trace.push(current);

        let dist = axis_distance(matrix, Axis::Cols, row_tree.as_ref());
        let tree = build_tree_capped(&dist, levels, params.core_cluster_cap(n));
        let arranged = permute_unchecked(matrix, &row_order, &identity_cols).transpose();
        let seed = derive_seed(params.seed, 2 * round as u64 + 1);
        let (order, e) = optimize_axis(&arranged, &tree, &col_order, params, seed, false);
        if e <= current {
            col_order = order;
            col_tree = Some(tree);
            current = e;
        } else if col_tree.is_none() {
            col_tree = Some(UltrametricTree::trivial(n, levels));
        }
        trace.push(current);

        if round_start - current < 1 {
            break;
        }
    }

    let row_tree = row_tree.expect("set in first round").ordered_by(&row_order);
    let col_tree = col_tree.expect("set in first round").ordered_by(&col_order);
    debug_assert!(row_tree.is_contiguous_in(&row_order));
    debug_assert!(col_tree.is_contiguous_in(&col_order));
    let arranged = permute_unchecked(matrix, &row_order, &col_order);
    let recomputed = energy(&arranged, nb);
    if recomputed != current {
        return Err(Error::Corrupted(format!(
            "optimizer bookkeeping drifted: tracked {current}, recomputed {recomputed}"
        )));
    }
    let finest_grid = BlockGrid::new(
        row_tree.core_clusters().to_vec(),
        col_tree.core_clusters().to_vec(),
    )?;
    let lambda = block_intensities(matrix, &finest_grid)?;
    Ok(CouplingGeometry {
        row_perm: row_order,
        col_perm: col_order,
        row_tree,
        col_tree,
        finest_grid,
        lambda,
        energy: current,
        energy_trace: trace,
        params: params.clone(),
    })
}
