//! Total-variation energy of a matrix arrangement.
//!
//! The energy is minus the number of lattice neighbour pairs whose cells
//! agree, so it is integer valued and lower for arrangements made of larger
//! homogeneous blocks. It depends on the row/column order, which is what the
//! geometry optimizer exploits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BinaryMatrix;

/// Which lattice pairs count as neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum NeighborhoodSystem {
    /// Horizontal and vertical neighbours.
    N4,
    /// N4 plus both diagonals.
    #[default]
    N8,
}

impl NeighborhoodSystem {
    /// Offsets `(di, dj)` covering every unordered pair exactly once.
    fn forward_offsets(self) -> &'static [(isize, isize)] {
        match self {
            NeighborhoodSystem::N4 => &[(0, 1), (1, 0)],
            NeighborhoodSystem::N8 => &[(0, 1), (1, 0), (1, 1), (1, -1)],
        }
    }

    fn all_offsets(self) -> &'static [(isize, isize)] {
        match self {
            NeighborhoodSystem::N4 => &[(0, 1), (1, 0), (0, -1), (-1, 0)],
            NeighborhoodSystem::N8 => &[
                (0, 1),
                (1, 0),
                (0, -1),
                (-1, 0),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }

    /// Number of unordered neighbour pairs on an `m x n` lattice.
    pub fn pair_count(self, m: usize, n: usize) -> usize {
        let n4 = m * n.saturating_sub(1) + n * m.saturating_sub(1);
        match self {
            NeighborhoodSystem::N4 => n4,
            NeighborhoodSystem::N8 => n4 + 2 * m.saturating_sub(1) * n.saturating_sub(1),
        }
    }

    /// All unordered neighbour pairs as `((i, j), (k, l))`.
    pub fn pairs(self, m: usize, n: usize) -> Vec<((usize, usize), (usize, usize))> {
        let mut out = Vec::with_capacity(self.pair_count(m, n));
        for i in 0..m {
            for j in 0..n {
                for &(di, dj) in self.forward_offsets() {
                    if let Some(nb) = offset(i, j, di, dj, m, n) {
                        out.push(((i, j), nb));
                    }
                }
            }
        }
        out
    }
}

impl std::str::FromStr for NeighborhoodSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n4" | "4" => Ok(NeighborhoodSystem::N4),
            "n8" | "8" => Ok(NeighborhoodSystem::N8),
            other => Err(Error::arg(format!("unknown neighbourhood {other:?}"))),
        }
    }
}

#[inline]
fn offset(i: usize, j: usize, di: isize, dj: isize, m: usize, n: usize) -> Option<(usize, usize)> {
    let k = i as isize + di;
    let l = j as isize + dj;
    (k >= 0 && l >= 0 && (k as usize) < m && (l as usize) < n).then_some((k as usize, l as usize))
}

/// Minus the number of agreeing neighbour pairs.
pub fn energy(matrix: &BinaryMatrix, nbhd: NeighborhoodSystem) -> i64 {
    let (m, n) = matrix.shape();
    let mut agree: i64 = 0;
    for i in 0..m {
        agree += horizontal_agreement(matrix.row(i));
        if i + 1 < m {
            agree += row_affinity(matrix.row(i), matrix.row(i + 1), nbhd);
        }
    }
    debug_assert!(agree as usize <= nbhd.pair_count(m, n));
    -agree
}

/// Agreeing horizontal pairs inside one row.
pub(crate) fn horizontal_agreement(row: &[u8]) -> i64 {
    row.windows(2).filter(|w| w[0] == w[1]).count() as i64
}

/// Agreeing pairs between two rows placed next to each other (vertical,
/// plus diagonals under N8). Symmetric in its arguments.
pub(crate) fn row_affinity(upper: &[u8], lower: &[u8], nbhd: NeighborhoodSystem) -> i64 {
    let mut agree = upper.iter().zip(lower).filter(|(a, b)| a == b).count();
    if nbhd == NeighborhoodSystem::N8 {
        agree += upper.iter().zip(&lower[1..]).filter(|(a, b)| a == b).count();
        agree += upper[1..].iter().zip(lower).filter(|(a, b)| a == b).count();
    }
    agree as i64
}

/// Checks that rows `r1, r2` and columns `c1, c2` hold a swappable 2x2
/// checkerboard (10/01 or 01/10).
pub fn is_checkerboard(matrix: &BinaryMatrix, r1: usize, r2: usize, c1: usize, c2: usize) -> bool {
    if r1 == r2 || c1 == c2 {
        return false;
    }
    let a = matrix.get(r1, c1);
    let b = matrix.get(r1, c2);
    let c = matrix.get(r2, c1);
    let d = matrix.get(r2, c2);
    a == d && b == c && a != b
}

/// Energy change caused by flipping the checkerboard at `(r1, r2) x (c1, c2)`,
/// evaluated on the affected neighbour pairs only.
pub fn energy_delta_swap(
    matrix: &BinaryMatrix,
    r1: usize,
    r2: usize,
    c1: usize,
    c2: usize,
    nbhd: NeighborhoodSystem,
) -> Result<i64> {
    let (m, n) = matrix.shape();
    if r1 >= m || r2 >= m || c1 >= n || c2 >= n {
        return Err(Error::arg("swap indices out of range"));
    }
    if !is_checkerboard(matrix, r1, r2, c1, c2) {
        return Err(Error::arg(format!(
            "rows ({r1}, {r2}) x columns ({c1}, {c2}) is not a checkerboard"
        )));
    }
    let changed = [(r1, c1), (r1, c2), (r2, c1), (r2, c2)];
    let value_after = |cell: (usize, usize)| {
        let v = matrix.get(cell.0, cell.1);
        if changed.contains(&cell) {
            1 - v
        } else {
            v
        }
    };
    let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::with_capacity(32);
    for &(i, j) in &changed {
        for &(di, dj) in nbhd.all_offsets() {
            if let Some(nb) = offset(i, j, di, dj, m, n) {
                let pair = if (i, j) < nb { ((i, j), nb) } else { (nb, (i, j)) };
                if !pairs.contains(&pair) {
                    pairs.push(pair);
                }
            }
        }
    }
    let mut before = 0i64;
    let mut after = 0i64;
    for &(u, v) in &pairs {
        before += (matrix.get(u.0, u.1) == matrix.get(v.0, v.1)) as i64;
        after += (value_after(u) == value_after(v)) as i64;
    }
    Ok(before - after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn m(rows: &[&[u8]]) -> BinaryMatrix {
        BinaryMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Direct definition over the enumerated pair list.
    fn brute_energy(matrix: &BinaryMatrix, nbhd: NeighborhoodSystem) -> i64 {
        let (r, c) = matrix.shape();
        -(nbhd
            .pairs(r, c)
            .iter()
            .filter(|(a, b)| matrix.get(a.0, a.1) == matrix.get(b.0, b.1))
            .count() as i64)
    }

    fn random_matrix(rng: &mut crate::rng::Rng, r: usize, c: usize, p: f64) -> BinaryMatrix {
        let rows: Vec<Vec<u8>> = (0..r)
            .map(|_| (0..c).map(|_| rng.gen_bool(p) as u8).collect())
            .collect();
        BinaryMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn small_examples() {
        let ones = m(&[&[1, 1], &[1, 1]]);
        assert_eq!(energy(&ones, NeighborhoodSystem::N8), -6);
        let id = m(&[&[1, 0], &[0, 1]]);
        assert_eq!(energy(&id, NeighborhoodSystem::N8), -2);
        assert_eq!(energy(&id, NeighborhoodSystem::N4), 0);
    }

    #[test]
    fn pair_counts() {
        for (r, c) in [(1, 1), (2, 3), (5, 4), (26, 28)] {
            for nb in [NeighborhoodSystem::N4, NeighborhoodSystem::N8] {
                let pairs = nb.pairs(r, c);
                assert_eq!(pairs.len(), nb.pair_count(r, c));
                assert!(pairs.iter().all(|(a, b)| a != b));
            }
        }
        assert_eq!(NeighborhoodSystem::N4.pair_count(26, 28), 1402);
        assert_eq!(NeighborhoodSystem::N8.pair_count(26, 28), 2752);
    }

    #[test]
    fn matches_pair_enumeration_and_transpose() {
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let r = rng.gen_range(1..9);
            let c = rng.gen_range(1..9);
            let mat = random_matrix(&mut rng, r, c, 0.4);
            for nb in [NeighborhoodSystem::N4, NeighborhoodSystem::N8] {
                let e = energy(&mat, nb);
                assert_eq!(e, brute_energy(&mat, nb));
                assert_eq!(e, energy(&mat.transpose(), nb));
                assert!(e >= -(nb.pair_count(r, c) as i64));
            }
        }
    }

    #[test]
    fn lower_bound_attained_only_by_constant() {
        let ones = m(&[&[1, 1, 1], &[1, 1, 1]]);
        assert_eq!(energy(&ones, NeighborhoodSystem::N8), -(NeighborhoodSystem::N8.pair_count(2, 3) as i64));
        let almost = m(&[&[1, 1, 1], &[1, 0, 1]]);
        assert!(energy(&almost, NeighborhoodSystem::N8) > -(NeighborhoodSystem::N8.pair_count(2, 3) as i64));
    }

    #[test]
    fn not_permutation_invariant() {
        let mat = m(&[&[1, 1, 0], &[0, 0, 1], &[1, 1, 0]]);
        let permuted = crate::model::apply_permutations(&mat, &[0, 2, 1], &[0, 1, 2]).unwrap();
        assert_ne!(energy(&mat, NeighborhoodSystem::N8), energy(&permuted, NeighborhoodSystem::N8));
    }

    fn flip(mat: &BinaryMatrix, cells: [(usize, usize); 4]) -> BinaryMatrix {
        let mut after = mat.clone();
        for (i, j) in cells {
            after.set(i, j, 1 - mat.get(i, j));
        }
        after
    }

    #[test]
    fn swap_delta_examples() {
        let id = m(&[&[1, 0], &[0, 1]]);
        assert_eq!(energy_delta_swap(&id, 0, 1, 0, 1, NeighborhoodSystem::N4).unwrap(), 0);
        assert!(energy_delta_swap(&m(&[&[1, 1], &[0, 1]]), 0, 1, 0, 1, NeighborhoodSystem::N4).is_err());
        assert!(energy_delta_swap(&id, 0, 0, 0, 1, NeighborhoodSystem::N4).is_err());
    }

    #[test]
    fn merging_swap_lowers_energy() {
        // 101/010/000 -> 110/001/000: the two top-left 1s become adjacent.
        let mat = m(&[&[1, 0, 1], &[0, 1, 0], &[0, 0, 0]]);
        let after = flip(&mat, [(0, 1), (0, 2), (1, 1), (1, 2)]);
        assert_eq!(after.to_rows(), vec![vec![1, 1, 0], vec![0, 0, 1], vec![0, 0, 0]]);
        assert_eq!(energy(&mat, NeighborhoodSystem::N8), -10);
        assert_eq!(energy(&after, NeighborhoodSystem::N8), -11);
        assert_eq!(energy_delta_swap(&mat, 0, 1, 1, 2, NeighborhoodSystem::N8).unwrap(), -1);
    }

    #[test]
    fn swap_delta_matches_recompute_on_random_swaps() {
        let mut rng = rng_from_seed(11);
        let mut checked = 0;
        while checked < 1000 {
            let mat = random_matrix(&mut rng, 10, 10, 0.5);
            let (r1, r2) = (rng.gen_range(0..10), rng.gen_range(0..10));
            let (c1, c2) = (rng.gen_range(0..10), rng.gen_range(0..10));
            if !is_checkerboard(&mat, r1, r2, c1, c2) {
                continue;
            }
            let after = flip(&mat, [(r1, c1), (r1, c2), (r2, c1), (r2, c2)]);
            for nb in [NeighborhoodSystem::N4, NeighborhoodSystem::N8] {
                let d = energy_delta_swap(&mat, r1, r2, c1, c2, nb).unwrap();
                assert_eq!(d, energy(&after, nb) - energy(&mat, nb));
            }
            checked += 1;
        }
    }
}
