//! Axis distances and multi-level ultrametric trees.
//!
//! Trees come from average-linkage agglomeration; the requested number of
//! levels is obtained by cutting the dendrogram at its largest merge-height
//! gaps, coarsest cut first.

use crate::model::{BinaryMatrix, UltrametricTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

/// Symmetric, non-negative, zero-diagonal distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds from a full square table. Panics if it is not square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let size = rows.len();
        let mut d = Self::zeros(size);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), size, "distance table must be square");
            for (j, &v) in row.iter().enumerate() {
                d.data[i * size + j] = v;
            }
        }
        d
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.size + j] = v;
        self.data[j * self.size + i] = v;
    }
}

/// Pairwise distances between the rows (or columns) of `matrix`.
///
/// Without a tree on the other axis this is the Hamming distance. With one,
/// each vector is first compressed to its mean inside every core cluster of
/// the other axis, and profiles are compared with the Euclidean distance.
pub fn axis_distance(
    matrix: &BinaryMatrix,
    axis: Axis,
    other_axis_tree: Option<&UltrametricTree>,
) -> DistanceMatrix {
    let owned;
    let mat = match axis {
        Axis::Rows => matrix,
        Axis::Cols => {
            owned = matrix.transpose();
            &owned
        }
    };
    let size = mat.rows();
    let mut d = DistanceMatrix::zeros(size);
    match other_axis_tree {
        None => {
            for a in 0..size {
                for b in a + 1..size {
                    let h = mat.row(a).iter().zip(mat.row(b)).filter(|(x, y)| x != y).count();
                    d.set_sym(a, b, h as f64);
                }
            }
        }
        Some(tree) => {
            assert_eq!(
                tree.axis_size,
                mat.cols(),
                "other-axis tree does not match the matrix"
            );
            let clusters = tree.core_clusters();
            let profiles: Vec<Vec<f64>> = (0..size)
                .map(|a| {
                    let row = mat.row(a);
                    clusters
                        .iter()
                        .map(|c| c.iter().map(|&x| row[x] as f64).sum::<f64>() / c.len() as f64)
                        .collect()
                })
                .collect();
            for a in 0..size {
                for b in a + 1..size {
                    let s: f64 = profiles[a]
                        .iter()
                        .zip(&profiles[b])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    d.set_sym(a, b, s.sqrt());
                }
            }
        }
    }
    d
}

/// One agglomeration step: clusters `a` and `b` (indices into the running
/// cluster list) merged at `height`.
#[derive(Debug, Clone)]
struct Merge {
    members_after: Vec<Vec<usize>>,
    height: f64,
}

/// Average linkage (UPGMA). Returns the partition after every merge.
/// Ties between equally close pairs go to the lexicographically smallest pair.
fn average_linkage(dist: &DistanceMatrix) -> Vec<Merge> {
    let n = dist.size();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut d: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dist.get(i, j)).collect()).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while clusters.len() > 1 {
        let k = clusters.len();
        let (mut ba, mut bb, mut best) = (0, 1, f64::INFINITY);
        for a in 0..k {
            for b in a + 1..k {
                if d[a][b] < best {
                    best = d[a][b];
                    ba = a;
                    bb = b;
                }
            }
        }
        let (na, nb) = (clusters[ba].len() as f64, clusters[bb].len() as f64);
        for c in 0..k {
            if c != ba && c != bb {
                let v = (na * d[ba][c] + nb * d[bb][c]) / (na + nb);
                d[ba][c] = v;
                d[c][ba] = v;
            }
        }
        let moved = clusters.remove(bb);
        clusters[ba].extend(moved);
        clusters[ba].sort_unstable();
        d.remove(bb);
        for row in d.iter_mut() {
            row.remove(bb);
        }
        merges.push(Merge {
            members_after: clusters.clone(),
            height: best,
        });
    }
    merges
}

/// Builds a `levels`-level tree from `dist`.
///
/// The `levels - 1` widest gaps between consecutive merge heights (cuts that
/// leave at least two clusters and have performed at least one merge) become
/// the cut points. If no such gap is positive, the gap below the first merge
/// is used, which under total symmetry makes every member its own core
/// cluster. A distance table of all zeros yields one cluster at every level.
/// When the data supports fewer distinct cuts than requested, the finest
/// partition is repeated.
pub fn build_tree(dist: &DistanceMatrix, levels: usize) -> UltrametricTree {
    build_tree_capped(dist, levels, usize::MAX)
}

/// [`build_tree`] restricted to cuts leaving at most `max_clusters`
/// clusters. Falls back to all cuts when none in range has a positive gap.
pub fn build_tree_capped(dist: &DistanceMatrix, levels: usize, max_clusters: usize) -> UltrametricTree {
    let n = dist.size();
    let levels = levels.max(1);
    if n <= 1 {
        return UltrametricTree::trivial(n, levels);
    }
    let merges = average_linkage(dist);
    let heights: Vec<f64> = merges.iter().map(|m| m.height).collect();
    let root_height = heights[n - 2];
    if root_height <= 0.0 {
        return UltrametricTree::trivial(n, levels);
    }
    // Cut k (1 <= k <= n-2): after k merges, n-k clusters remain.
    let all_gaps: Vec<(f64, usize)> = (1..n - 1)
        .map(|k| (heights[k] - heights[k - 1], k))
        .filter(|(g, _)| *g > 0.0)
        .collect();
    let mut gaps: Vec<(f64, usize)> = all_gaps.iter().copied().filter(|&(_, k)| n - k <= max_clusters).collect();
    if gaps.is_empty() {
        gaps = all_gaps;
    }
    if gaps.is_empty() {
        gaps.push((heights[0], 0));
    }
    // widest first; equal widths prefer the coarser cut
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    let mut cuts: Vec<usize> = gaps.iter().take(levels - 1).map(|&(_, k)| k).collect();
    cuts.sort_unstable_by(|a, b| b.cmp(a));

    let partition_after = |k: usize| -> Vec<Vec<usize>> {
        if k == 0 {
            (0..n).map(|i| vec![i]).collect()
        } else {
            merges[k - 1].members_after.clone()
        }
    };
    let threshold = |k: usize| -> f64 {
        let below = if k == 0 { 0.0 } else { heights[k - 1] };
        (below + heights[k]) / 2.0
    };

    let mut tree_levels = vec![vec![(0..n).collect::<Vec<usize>>()]];
    let mut tree_heights = vec![root_height];
    for &k in &cuts {
        let mut part = partition_after(k);
        part.sort_by_key(|c| c[0]);
        tree_levels.push(part);
        tree_heights.push(threshold(k));
    }
    while tree_levels.len() < levels {
        let last = tree_levels.last().cloned().expect("non-empty");
        let h = *tree_heights.last().expect("non-empty") / 2.0;
        tree_levels.push(last);
        tree_heights.push(h);
    }
    UltrametricTree::new(n, tree_levels, tree_heights).expect("cuts of one dendrogram are nested")
}
