//! Core value types: the binary matrix, its margins, ultrametric trees over
//! one axis, block grids and the coupling geometry that ties them together.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryParams;

/// A dense 0/1 matrix with row and column labels.
///
/// Rows are typically species (animals) and columns sites (plants), but
/// nothing in the crate depends on that reading.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
}

impl BinaryMatrix {
    /// Builds a matrix from nested rows with synthetic labels `r1..`, `c1..`.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let row_labels = (1..=m).map(|i| format!("r{i}")).collect();
        let col_labels = (1..=n).map(|j| format!("c{j}")).collect();
        let mut cells = Vec::with_capacity(m * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::arg(format!(
                    "row {i} has {} cells, expected {n}",
                    row.len()
                )));
            }
            cells.extend_from_slice(row);
        }
        Self::new(row_labels, col_labels, cells)
    }

    /// Builds a matrix from row-major cells and explicit labels.
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, cells: Vec<u8>) -> Result<Self> {
        let rows = row_labels.len();
        let cols = col_labels.len();
        if rows == 0 || cols == 0 {
            return Err(Error::arg("matrix must have at least one row and one column"));
        }
        if cells.len() != rows * cols {
            return Err(Error::arg(format!(
                "{} cells do not fill a {rows}x{cols} matrix",
                cells.len()
            )));
        }
        if let Some(pos) = cells.iter().position(|&c| c > 1) {
            return Err(Error::arg(format!(
                "cell ({}, {}) is {}, expected 0 or 1",
                pos / cols,
                pos % cols,
                cells[pos]
            )));
        }
        check_unique(&row_labels, "row")?;
        check_unique(&col_labels, "column")?;
        Ok(Self {
            row_labels,
            col_labels,
            rows,
            cols,
            cells,
        })
    }

    /// All-zero matrix with synthetic labels.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_rows(&vec![vec![0; cols]; rows])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, value: u8) {
        debug_assert!(value <= 1);
        self.cells[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.cells[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major cell storage.
    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().map(|&c| c as usize).sum()
    }

    pub fn fill(&self) -> f64 {
        self.ones() as f64 / self.cells.len() as f64
    }

    pub fn transpose(&self) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                cells.push(self.get(i, j));
            }
        }
        Self {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }

    /// Same shape and labels, different cells. Used by samplers.
    pub(crate) fn with_cells(&self, cells: Vec<u8>) -> Self {
        debug_assert_eq!(cells.len(), self.cells.len());
        Self {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }

    /// Bit-packed cell content, used as an exact identity key.
    pub fn packed_bits(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.cells.len().div_ceil(8)];
        for (k, &c) in self.cells.iter().enumerate() {
            out[k / 8] |= c << (k % 8);
        }
        out
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: String = self.row(i).iter().map(|&c| if c == 1 { '1' } else { '0' }).collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

fn check_unique(labels: &[String], axis: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::arg(format!("duplicate {axis} label {l:?}")));
        }
    }
    Ok(())
}

/// Row-sum and column-sum sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarginPair {
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
}

impl MarginPair {
    pub fn new(row_sums: Vec<usize>, col_sums: Vec<usize>) -> Self {
        Self { row_sums, col_sums }
    }

    pub fn total(&self) -> usize {
        self.row_sums.iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.col_sums.clone(), self.row_sums.clone())
    }

    pub fn is_feasible(&self) -> bool {
        margins_feasible(self)
    }
}

pub fn margins_of(matrix: &BinaryMatrix) -> MarginPair {
    let mut row_sums = vec![0; matrix.rows()];
    let mut col_sums = vec![0; matrix.cols()];
    for (i, rs) in row_sums.iter_mut().enumerate() {
        for (j, cs) in col_sums.iter_mut().enumerate() {
            let c = matrix.get(i, j) as usize;
            *rs += c;
            *cs += c;
        }
    }
    MarginPair { row_sums, col_sums }
}

/// Gale–Ryser: the margins are realizable by a 0/1 matrix iff the totals
/// agree and the descending row sums are majorized by the conjugate of the
/// column sums.
pub fn margins_feasible(margins: &MarginPair) -> bool {
    let m = margins.row_sums.len();
    let n = margins.col_sums.len();
    if m == 0 || n == 0 {
        return false;
    }
    if margins.row_sums.iter().any(|&r| r > n) || margins.col_sums.iter().any(|&c| c > m) {
        return false;
    }
    if margins.row_sums.iter().sum::<usize>() != margins.col_sums.iter().sum::<usize>() {
        return false;
    }
    let mut rows = margins.row_sums.clone();
    rows.sort_unstable_by(|a, b| b.cmp(a));
    // conjugate[k] = number of columns with sum > k
    let mut conjugate = vec![0usize; m];
    for &c in &margins.col_sums {
        for slot in conjugate.iter_mut().take(c) {
            *slot += 1;
        }
    }
    let mut lhs = 0;
    let mut rhs = 0;
    for k in 0..m {
        lhs += rows[k];
        rhs += conjugate[k];
        if lhs > rhs {
            return false;
        }
    }
    true
}

/// Checks that `perm` is a bijection of `0..len`.
pub fn validate_permutation(perm: &[usize], len: usize) -> Result<()> {
    if perm.len() != len {
        return Err(Error::arg(format!(
            "permutation has length {}, expected {len}",
            perm.len()
        )));
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || seen[p] {
            return Err(Error::arg(format!("not a permutation of 0..{len}")));
        }
        seen[p] = true;
    }
    Ok(())
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Returns the matrix whose cell `(i, j)` is `matrix[row_perm[i]][col_perm[j]]`.
/// Labels move with their rows and columns.
pub fn apply_permutations(
    matrix: &BinaryMatrix,
    row_perm: &[usize],
    col_perm: &[usize],
) -> Result<BinaryMatrix> {
    validate_permutation(row_perm, matrix.rows())?;
    validate_permutation(col_perm, matrix.cols())?;
    Ok(permute_unchecked(matrix, row_perm, col_perm))
}

pub(crate) fn permute_unchecked(
    matrix: &BinaryMatrix,
    row_perm: &[usize],
    col_perm: &[usize],
) -> BinaryMatrix {
    let mut cells = Vec::with_capacity(matrix.rows() * matrix.cols());
    for &r in row_perm {
        let row = matrix.row(r);
        cells.extend(col_perm.iter().map(|&c| row[c]));
    }
    BinaryMatrix {
        row_labels: row_perm.iter().map(|&r| matrix.row_labels[r].clone()).collect(),
        col_labels: col_perm.iter().map(|&c| matrix.col_labels[c].clone()).collect(),
        rows: matrix.rows(),
        cols: matrix.cols(),
        cells,
    }
}

/// A nested hierarchy of partitions over `0..axis_size`, coarsest first.
///
/// Level 0 holds the single all-member cluster; the last level holds the
/// core clusters. Clusters are stored in display order, which for a tree
/// owned by a [`CouplingGeometry`] is the order of the geometry's permutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltrametricTree {
    pub axis_size: usize,
    pub levels: Vec<Vec<Vec<usize>>>,
    pub heights: Vec<f64>,
}

impl UltrametricTree {
    pub fn new(axis_size: usize, levels: Vec<Vec<Vec<usize>>>, heights: Vec<f64>) -> Result<Self> {
        let tree = Self {
            axis_size,
            levels,
            heights,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Single-level-per-request tree where every level is the whole axis.
    pub fn trivial(axis_size: usize, levels: usize) -> Self {
        let all: Vec<usize> = (0..axis_size).collect();
        Self {
            axis_size,
            levels: vec![vec![all]; levels.max(1)],
            heights: (0..levels.max(1)).rev().map(|h| h as f64).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::arg("tree has no levels"));
        }
        if self.heights.len() != self.levels.len() {
            return Err(Error::arg("tree needs exactly one height per level"));
        }
        if self.heights.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(Error::arg("tree heights must be finite and non-negative"));
        }
        if self.heights.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::arg("tree heights must strictly decrease"));
        }
        if self.levels[0].len() != 1 {
            return Err(Error::arg("tree level 0 must be a single cluster"));
        }
        let mut parent_of_prev: Option<Vec<usize>> = None;
        for (depth, level) in self.levels.iter().enumerate() {
            let mut owner = vec![usize::MAX; self.axis_size];
            for (c, cluster) in level.iter().enumerate() {
                if cluster.is_empty() {
                    return Err(Error::arg(format!("empty cluster at level {depth}")));
                }
                for &x in cluster {
                    if x >= self.axis_size || owner[x] != usize::MAX {
                        return Err(Error::arg(format!(
                            "level {depth} is not a partition of 0..{}",
                            self.axis_size
                        )));
                    }
                    owner[x] = c;
                }
            }
            if owner.iter().any(|&o| o == usize::MAX) {
                return Err(Error::arg(format!("level {depth} does not cover the axis")));
            }
            if let Some(prev) = &parent_of_prev {
                for cluster in level {
                    let p = prev[cluster[0]];
                    if cluster.iter().any(|&x| prev[x] != p) {
                        return Err(Error::arg(format!(
                            "level {depth} does not refine level {}",
                            depth - 1
                        )));
                    }
                }
            }
            parent_of_prev = Some(owner);
        }
        Ok(())
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn bottom_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn core_clusters(&self) -> &[Vec<usize>] {
        &self.levels[self.bottom_level()]
    }

    /// Cluster index of every axis member at `level`.
    pub fn labels_at(&self, level: usize) -> Vec<usize> {
        let mut out = vec![0; self.axis_size];
        for (c, cluster) in self.levels[level].iter().enumerate() {
            for &x in cluster {
                out[x] = c;
            }
        }
        out
    }

    /// Re-sorts clusters and their members by position in `order`.
    pub fn ordered_by(&self, order: &[usize]) -> Self {
        let pos = invert_permutation(order);
        let levels = self
            .levels
            .iter()
            .map(|level| {
                let mut level: Vec<Vec<usize>> = level
                    .iter()
                    .map(|c| {
                        let mut c = c.clone();
                        c.sort_by_key(|&x| pos[x]);
                        c
                    })
                    .collect();
                level.sort_by_key(|c| pos[c[0]]);
                level
            })
            .collect();
        Self {
            axis_size: self.axis_size,
            levels,
            heights: self.heights.clone(),
        }
    }

    /// True when every cluster at every level occupies a contiguous run of `order`.
    pub fn is_contiguous_in(&self, order: &[usize]) -> bool {
        let pos = invert_permutation(order);
        self.levels.iter().flatten().all(|cluster| {
            let lo = cluster.iter().map(|&x| pos[x]).min().unwrap_or(0);
            let hi = cluster.iter().map(|&x| pos[x]).max().unwrap_or(0);
            hi - lo + 1 == cluster.len()
        })
    }
}

/// An ordered partition of both axes into groups; block `(i, j)` is the
/// cross product of row group `i` and column group `j`.
///
/// Groups hold original matrix indices; in a geometry they are contiguous
/// after the geometry's permutation is applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub row_groups: Vec<Vec<usize>>,
    pub col_groups: Vec<Vec<usize>>,
}

impl BlockGrid {
    pub fn new(row_groups: Vec<Vec<usize>>, col_groups: Vec<Vec<usize>>) -> Result<Self> {
        let grid = Self {
            row_groups,
            col_groups,
        };
        if grid.row_groups.is_empty() || grid.col_groups.is_empty() {
            return Err(Error::arg("block grid needs at least one group per axis"));
        }
        check_groups(&grid.row_groups, "row")?;
        check_groups(&grid.col_groups, "column")?;
        Ok(grid)
    }

    /// The 1x1 grid over an `rows x cols` matrix.
    pub fn whole(rows: usize, cols: usize) -> Self {
        Self {
            row_groups: vec![(0..rows).collect()],
            col_groups: vec![(0..cols).collect()],
        }
    }

    /// (number of row groups, number of column groups)
    pub fn shape(&self) -> (usize, usize) {
        (self.row_groups.len(), self.col_groups.len())
    }

    pub fn axis_sizes(&self) -> (usize, usize) {
        (
            self.row_groups.iter().map(Vec::len).sum(),
            self.col_groups.iter().map(Vec::len).sum(),
        )
    }

    pub fn covers(&self, matrix: &BinaryMatrix) -> bool {
        self.axis_sizes() == matrix.shape()
    }

    pub(crate) fn check_covers(&self, matrix: &BinaryMatrix) -> Result<()> {
        if self.covers(matrix) {
            Ok(())
        } else {
            let (r, c) = self.axis_sizes();
            Err(Error::arg(format!(
                "grid covers {r}x{c} but matrix is {}x{}",
                matrix.rows(),
                matrix.cols()
            )))
        }
    }

    /// True when every group of `self` lies inside one group of `coarser`.
    pub fn refines(&self, coarser: &BlockGrid) -> bool {
        fn axis(fine: &[Vec<usize>], coarse: &[Vec<usize>]) -> bool {
            let size: usize = coarse.iter().map(Vec::len).sum();
            let mut owner = vec![usize::MAX; size];
            for (g, group) in coarse.iter().enumerate() {
                for &x in group {
                    if x < size {
                        owner[x] = g;
                    }
                }
            }
            fine.iter().all(|group| {
                group
                    .iter()
                    .all(|&x| x < size && owner[x] == owner[group[0]])
            })
        }
        axis(&self.row_groups, &coarser.row_groups) && axis(&self.col_groups, &coarser.col_groups)
    }

    /// Display label such as `5x5`.
    pub fn label(&self) -> String {
        let (i, j) = self.shape();
        format!("{i}x{j}")
    }
}

fn check_groups(groups: &[Vec<usize>], axis: &str) -> Result<()> {
    let size: usize = groups.iter().map(Vec::len).sum();
    let mut seen = vec![false; size];
    for g in groups {
        if g.is_empty() {
            return Err(Error::arg(format!("empty {axis} group")));
        }
        for &x in g {
            if x >= size || seen[x] {
                return Err(Error::arg(format!(
                    "{axis} groups are not a partition of 0..{size}"
                )));
            }
            seen[x] = true;
        }
    }
    Ok(())
}

/// The grid framed by the clusters at `row_level` / `col_level` of two trees,
/// in the trees' stored cluster order.
pub fn grid_at_level(
    row_tree: &UltrametricTree,
    col_tree: &UltrametricTree,
    row_level: usize,
    col_level: usize,
) -> Result<BlockGrid> {
    if row_level >= row_tree.num_levels() {
        return Err(Error::arg(format!(
            "row level {row_level} out of range (tree has {} levels)",
            row_tree.num_levels()
        )));
    }
    if col_level >= col_tree.num_levels() {
        return Err(Error::arg(format!(
            "column level {col_level} out of range (tree has {} levels)",
            col_tree.num_levels()
        )));
    }
    BlockGrid::new(
        row_tree.levels[row_level].clone(),
        col_tree.levels[col_level].clone(),
    )
}

/// The multiscale block structure extracted from a matrix: permutations on
/// both axes, the two trees framing the blocks, the finest grid and its
/// block intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGeometry {
    pub row_perm: Vec<usize>,
    pub col_perm: Vec<usize>,
    pub row_tree: UltrametricTree,
    pub col_tree: UltrametricTree,
    pub finest_grid: BlockGrid,
    pub lambda: Vec<Vec<f64>>,
    pub energy: i64,
    /// Energy after each optimizer half-step, starting with the input energy.
    pub energy_trace: Vec<i64>,
    pub params: GeometryParams,
}

impl CouplingGeometry {
    pub fn grid_at_level(&self, row_level: usize, col_level: usize) -> Result<BlockGrid> {
        grid_at_level(&self.row_tree, &self.col_tree, row_level, col_level)
    }

    pub fn coarsest_grid(&self) -> BlockGrid {
        BlockGrid::whole(self.row_tree.axis_size, self.col_tree.axis_size)
    }

    /// Grids from finest to coarsest, stepping both trees up one level at a
    /// time (a tree that reaches its root stays there). Duplicates are dropped.
    pub fn grid_series(&self) -> Vec<BlockGrid> {
        let rb = self.row_tree.bottom_level();
        let cb = self.col_tree.bottom_level();
        let mut out: Vec<BlockGrid> = Vec::new();
        for k in 0..=rb.max(cb) {
            let grid = self
                .grid_at_level(rb.saturating_sub(k), cb.saturating_sub(k))
                .expect("levels in range");
            if out.last() != Some(&grid) {
                out.push(grid);
            }
        }
        out
    }

    /// The input matrix rearranged by the geometry's permutations.
    pub fn arrange(&self, matrix: &BinaryMatrix) -> Result<BinaryMatrix> {
        apply_permutations(matrix, &self.row_perm, &self.col_perm)
    }
}
