//! Nestedness statistics: N+ counts, temperature, NODF and the block-based
//! index built on second differences of block intensities.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, BlockGrid};

/// Second differences smaller than this in magnitude count as zero.
pub const SIGN_EPS: f64 = 1e-12;

/// Direction along which second differences are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Along each row, over interior column positions.
    ColumnWise,
    /// Along each column, over interior row positions.
    RowWise,
}

/// Which single sign change a nested pattern is allowed to make.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignChange {
    PlusToMinus,
    MinusToPlus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignMatrix {
    pub orientation: Orientation,
    pub values: Vec<Vec<i8>>,
}

impl SignMatrix {
    pub fn new(orientation: Orientation, values: Vec<Vec<i8>>) -> Result<Self> {
        if values.iter().flatten().any(|v| !matches!(v, -1..=1)) {
            return Err(Error::arg("sign matrix entries must be -1, 0 or 1"));
        }
        if values.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::arg("sign matrix rows differ in length"));
        }
        Ok(Self { orientation, values })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.values.len(), self.values.first().map_or(0, Vec::len))
    }

    /// The sequences that must change sign at most once: rows for
    /// column-wise signs, columns for row-wise signs.
    fn sequences(&self) -> Vec<Vec<i8>> {
        match self.orientation {
            Orientation::ColumnWise => self.values.clone(),
            Orientation::RowWise => transpose(&self.values),
        }
    }

    fn from_sequences(orientation: Orientation, seqs: Vec<Vec<i8>>) -> Self {
        let values = match orientation {
            Orientation::ColumnWise => seqs,
            Orientation::RowWise => transpose(&seqs),
        };
        Self { orientation, values }
    }

    /// True when every sequence changes sign at most once, in the given
    /// direction. Zeros are compatible with either side.
    pub fn satisfies(&self, change: SignChange) -> bool {
        self.sequences().iter().all(|s| flips_needed(s, change) == 0)
    }
}

fn transpose<T: Copy>(rows: &[Vec<T>]) -> Vec<Vec<T>> {
    let cols = rows.first().map_or(0, Vec::len);
    (0..cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Reference sign patterns for the block index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedReference {
    pub col_signs: SignMatrix,
    pub row_signs: SignMatrix,
}

/// Allowed sign change for each orientation when building a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRules {
    pub along_columns: SignChange,
    pub along_rows: SignChange,
}

impl Default for ReferenceRules {
    fn default() -> Self {
        Self {
            along_columns: SignChange::MinusToPlus,
            along_rows: SignChange::MinusToPlus,
        }
    }
}

fn check_rect(lambda: &[Vec<f64>]) -> Result<(usize, usize)> {
    let rows = lambda.len();
    let cols = lambda.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || lambda.iter().any(|r| r.len() != cols) {
        return Err(Error::arg("intensity matrix must be non-empty and rectangular"));
    }
    if lambda.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::arg("intensity matrix has non-finite entries"));
    }
    Ok((rows, cols))
}

/// Second differences over interior positions. Column-wise output is
/// `I x (J-2)`, row-wise `(I-2) x J`; empty when the traversed dimension is
/// below 3.
pub fn second_differences(lambda: &[Vec<f64>], orientation: Orientation) -> Vec<Vec<f64>> {
    let rows = lambda.len();
    let cols = lambda.first().map_or(0, Vec::len);
    match orientation {
        Orientation::ColumnWise => {
            if cols < 3 {
                return Vec::new();
            }
            lambda
                .iter()
                .map(|r| (1..cols - 1).map(|j| r[j + 1] - 2.0 * r[j] + r[j - 1]).collect())
                .collect()
        }
        Orientation::RowWise => {
            if rows < 3 {
                return Vec::new();
            }
            (1..rows - 1)
                .map(|i| {
                    (0..cols)
                        .map(|j| lambda[i + 1][j] - 2.0 * lambda[i][j] + lambda[i - 1][j])
                        .collect()
                })
                .collect()
        }
    }
}

fn sign_of(x: f64) -> i8 {
    if x > SIGN_EPS {
        1
    } else if x < -SIGN_EPS {
        -1
    } else {
        0
    }
}

/// Raw signs of the second differences.
pub fn sign_matrix(lambda: &[Vec<f64>], orientation: Orientation) -> SignMatrix {
    let values = second_differences(lambda, orientation)
        .iter()
        .map(|r| r.iter().map(|&x| sign_of(x)).collect())
        .collect();
    SignMatrix { orientation, values }
}

/// Sign expected before and after the change point.
fn sides(change: SignChange) -> (i8, i8) {
    match change {
        SignChange::PlusToMinus => (1, -1),
        SignChange::MinusToPlus => (-1, 1),
    }
}

/// Flips needed if the change happens just before position `point`.
fn cost_at(seq: &[i8], point: usize, change: SignChange) -> usize {
    let (before, after) = sides(change);
    seq[..point].iter().filter(|&&s| s == -before).count() + seq[point..].iter().filter(|&&s| s == -after).count()
}

fn flips_needed(seq: &[i8], change: SignChange) -> usize {
    (0..=seq.len()).map(|p| cost_at(seq, p, change)).min().unwrap_or(0)
}

/// Nearest sequence with at most one sign change in the given direction,
/// by fewest flips; ties go to the later change point. Zeros are kept.
pub fn repair_signs(seq: &[i8], change: SignChange) -> Vec<i8> {
    let (before, after) = sides(change);
    let mut best = (usize::MAX, 0);
    for p in 0..=seq.len() {
        let c = cost_at(seq, p, change);
        if c <= best.0 {
            best = (c, p);
        }
    }
    let point = best.1;
    seq.iter()
        .enumerate()
        .map(|(k, &s)| match s {
            0 => 0,
            _ if k < point => before,
            _ => after,
        })
        .collect()
}

/// Repairs the raw second-difference signs of `lambda` in both orientations.
pub fn least_nested_reference(lambda: &[Vec<f64>]) -> Result<NestedReference> {
    least_nested_reference_with(lambda, ReferenceRules::default())
}

pub fn least_nested_reference_with(lambda: &[Vec<f64>], rules: ReferenceRules) -> Result<NestedReference> {
    check_rect(lambda)?;
    let repair = |orientation, change| {
        let raw = sign_matrix(lambda, orientation);
        let seqs = raw.sequences().iter().map(|s| repair_signs(s, change)).collect();
        SignMatrix::from_sequences(orientation, seqs)
    };
    Ok(NestedReference {
        col_signs: repair(Orientation::ColumnWise, rules.along_columns),
        row_signs: repair(Orientation::RowWise, rules.along_rows),
    })
}

/// Column-position factor in the row-wise curvature term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColumnFactor {
    /// `j`
    #[default]
    Position,
    /// `J - j + 1`
    Mirrored,
}

/// Block weights: share of rows (columns) in each row (column) group.
pub fn grid_weights(grid: &BlockGrid) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = grid.axis_sizes();
    (
        grid.row_groups.iter().map(|g| g.len() as f64 / m as f64).collect(),
        grid.col_groups.iter().map(|g| g.len() as f64 / n as f64).collect(),
    )
}

/// Block-based nestedness index; lower is more nested.
pub fn ncg_index(
    lambda: &[Vec<f64>],
    reference: &NestedReference,
    row_weights: &[f64],
    col_weights: &[f64],
) -> Result<f64> {
    ncg_index_with(lambda, reference, row_weights, col_weights, ColumnFactor::Position)
}

pub fn ncg_index_with(
    lambda: &[Vec<f64>],
    reference: &NestedReference,
    row_weights: &[f64],
    col_weights: &[f64],
    column_factor: ColumnFactor,
) -> Result<f64> {
    let (ni, nj) = check_rect(lambda)?;
    if row_weights.len() != ni || col_weights.len() != nj {
        return Err(Error::arg(format!(
            "weights have lengths {}/{} for a {ni}x{nj} intensity matrix",
            row_weights.len(),
            col_weights.len()
        )));
    }
    let want_col = if nj >= 3 { (ni, nj - 2) } else { (0, 0) };
    let want_row = if ni >= 3 { (ni - 2, nj) } else { (0, 0) };
    if reference.col_signs.shape() != want_col || reference.row_signs.shape() != want_row {
        return Err(Error::arg(format!(
            "reference sign shapes {:?}/{:?} do not fit a {ni}x{nj} intensity matrix",
            reference.col_signs.shape(),
            reference.row_signs.shape()
        )));
    }

    // ordering costs
    let mut t1 = 0.0;
    for (i, row) in lambda.iter().enumerate() {
        let mut s = 0.0;
        for j in 0..nj {
            for k in 0..nj {
                if k != j {
                    s += (row[j] - row[k]) * (j as f64 - k as f64);
                }
            }
        }
        t1 += row_weights[i] * s;
    }
    let mut t2 = 0.0;
    for j in 0..nj {
        let mut s = 0.0;
        for i in 0..ni {
            for k in 0..ni {
                if k != i {
                    s += (lambda[i][j] - lambda[k][j]) * (k as f64 - i as f64);
                }
            }
        }
        t2 += col_weights[j] * s;
    }

    // curvature coherence with the reference (1-based positions)
    let big_i = ni as f64;
    let big_j = nj as f64;
    let mut t3 = 0.0;
    for (i, row) in second_differences(lambda, Orientation::ColumnWise).iter().enumerate() {
        let mut s = 0.0;
        for (c, &d) in row.iter().enumerate() {
            let k = (c + 2) as f64;
            s += (big_i - (i + 1) as f64 + 1.0) * k * d * reference.col_signs.values[i][c] as f64;
        }
        t3 += row_weights[i] * s;
    }
    let mut t4 = 0.0;
    let row_curv = second_differences(lambda, Orientation::RowWise);
    for j in 0..nj {
        let factor = match column_factor {
            ColumnFactor::Position => (j + 1) as f64,
            ColumnFactor::Mirrored => big_j - (j + 1) as f64 + 1.0,
        };
        let mut s = 0.0;
        for (r, row) in row_curv.iter().enumerate() {
            let h = (r + 2) as f64;
            s += (big_i - h + 1.0) * factor * row[j] * reference.row_signs.values[r][j] as f64;
        }
        t4 += col_weights[j] * s;
    }
    Ok(t1 + t2 - t3 - t4)
}

/// N+ counts: absences at sites strictly richer than the poorest site a
/// species occupies, summed over species.
pub fn n_plus_index(matrix: &BinaryMatrix) -> u64 {
    let (m, n) = matrix.shape();
    let richness: Vec<usize> = (0..n).map(|j| (0..m).map(|i| matrix.get(i, j) as usize).sum()).collect();
    let mut total = 0u64;
    for i in 0..m {
        let row = matrix.row(i);
        let Some(poorest) = (0..n).filter(|&j| row[j] == 1).map(|j| richness[j]).min() else {
            continue;
        };
        total += (0..n).filter(|&j| row[j] == 0 && richness[j] > poorest).count() as u64;
    }
    total
}

/// Mean squared isocline distance of a maximally disordered matrix, used to
/// scale temperature to 0..100.
const TEMPERATURE_SCALE: f64 = 0.04145;

/// Area of the presence region `(1-u)^p + (1-v)^p >= 1` in the unit square.
fn isocline_fill(p: f64) -> f64 {
    1.0 - (2.0 * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + 2.0 / p)).exp()
}

/// Exponent whose presence region has the requested area.
fn isocline_exponent(fill: f64) -> f64 {
    let (mut lo, mut hi) = ((1e-3f64).ln(), (1e3f64).ln());
    // fill decreases as the exponent grows
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if isocline_fill(mid.exp()) > fill {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Rows sorted by decreasing sum, ties by richer occupied columns, then by
/// pattern; the same for columns. Used to pack before scoring.
fn packed_orders(matrix: &BinaryMatrix) -> (Vec<usize>, Vec<usize>) {
    let (m, n) = matrix.shape();
    let row_sum: Vec<usize> = (0..m).map(|i| matrix.row(i).iter().map(|&x| x as usize).sum()).collect();
    let col_sum: Vec<usize> = (0..n).map(|j| (0..m).map(|i| matrix.get(i, j) as usize).sum()).collect();
    let row_score: Vec<usize> = (0..m)
        .map(|i| (0..n).map(|j| matrix.get(i, j) as usize * col_sum[j]).sum())
        .collect();
    let col_score: Vec<usize> = (0..n)
        .map(|j| (0..m).map(|i| matrix.get(i, j) as usize * row_sum[i]).sum())
        .collect();
    let mut cols: Vec<usize> = (0..n).collect();
    cols.sort_by(|&a, &b| col_sum[b].cmp(&col_sum[a]).then(col_score[b].cmp(&col_score[a])));
    let mut rows: Vec<usize> = (0..m).collect();
    rows.sort_by(|&a, &b| {
        row_sum[b]
            .cmp(&row_sum[a])
            .then(row_score[b].cmp(&row_score[a]))
            .then_with(|| {
                let pa: Vec<u8> = cols.iter().map(|&j| matrix.get(a, j)).collect();
                let pb: Vec<u8> = cols.iter().map(|&j| matrix.get(b, j)).collect();
                pb.cmp(&pa)
            })
    });
    cols.sort_by(|&a, &b| {
        col_sum[b]
            .cmp(&col_sum[a])
            .then(col_score[b].cmp(&col_score[a]))
            .then_with(|| {
                let pa: Vec<u8> = rows.iter().map(|&i| matrix.get(i, a)).collect();
                let pb: Vec<u8> = rows.iter().map(|&i| matrix.get(i, b)).collect();
                pb.cmp(&pa)
            })
    });
    (rows, cols)
}

/// Matrix temperature in `[0, 100]`.
///
/// The packed matrix is placed on the unit square with row `i` at height
/// `(i + 0.5) / m` and column `j` at `(j + 0.5) / n`. The isocline is the
/// curve `(1-u)^p + (1-v)^p = 1` whose presence side has the observed fill.
/// Each cell is projected along the main diagonal onto the isocline; an
/// unexpected cell (presence beyond the curve, absence inside it) adds the
/// squared projection length relative to the diagonal through the cell.
pub fn temperature_index(matrix: &BinaryMatrix) -> Result<f64> {
    let (m, n) = matrix.shape();
    if m < 2 || n < 2 {
        return Err(Error::arg("temperature needs at least 2 rows and 2 columns"));
    }
    let ones = matrix.ones();
    if ones == 0 || ones == m * n {
        return Err(Error::domain("temperature is undefined for an all-zero or all-one matrix"));
    }
    let p = isocline_exponent(matrix.fill());
    let (rows, cols) = packed_orders(matrix);
    let inside = |u: f64, v: f64| (1.0 - u).max(0.0).powf(p) + (1.0 - v).max(0.0).powf(p) - 1.0;
    let mut total = 0.0;
    for (pi, &i) in rows.iter().enumerate() {
        let v0 = (pi as f64 + 0.5) / m as f64;
        for (pj, &j) in cols.iter().enumerate() {
            let u0 = (pj as f64 + 0.5) / n as f64;
            let (t_min, t_max) = (-u0.min(v0), 1.0 - u0.max(v0));
            let (mut lo, mut hi) = (t_min, t_max);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(u0 + mid, v0 + mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let present = matrix.get(i, j) == 1;
            if (present && t < 0.0) || (!present && t > 0.0) {
                total += (t / (t_max - t_min)).powi(2);
            }
        }
    }
    Ok((100.0 * total / (m * n) as f64 / TEMPERATURE_SCALE).min(100.0))
}

/// NODF in `[0, 100]`. Pairs with equal sums, or whose poorer member is
/// empty, score 0.
pub fn nodf_index(matrix: &BinaryMatrix) -> Result<f64> {
    let (m, n) = matrix.shape();
    if m < 2 || n < 2 {
        return Err(Error::arg("NODF needs at least 2 rows and 2 columns"));
    }
    let rows = matrix.to_rows();
    let cols = transpose(&rows);
    let (row_total, row_pairs) = paired_overlap(&rows);
    let (col_total, col_pairs) = paired_overlap(&cols);
    Ok((row_total + col_total) / (row_pairs + col_pairs) as f64)
}

fn paired_overlap(lines: &[Vec<u8>]) -> (f64, usize) {
    let sums: Vec<usize> = lines.iter().map(|l| l.iter().map(|&x| x as usize).sum()).collect();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| sums[b].cmp(&sums[a]));
    let mut total = 0.0;
    for (x, &a) in order.iter().enumerate() {
        for &b in &order[x + 1..] {
            if sums[a] > sums[b] && sums[b] > 0 {
                let shared = lines[a].iter().zip(&lines[b]).filter(|(&p, &q)| p == 1 && q == 1).count();
                total += 100.0 * shared as f64 / sums[b] as f64;
            }
        }
    }
    let k = lines.len();
    (total, k * (k - 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staircase(m: usize, n: usize) -> BinaryMatrix {
        let rows: Vec<Vec<u8>> = (0..m)
            .map(|i| (0..n).map(|j| ((j * m) < (m - i) * n) as u8).collect())
            .collect();
        BinaryMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn second_difference_examples() {
        let d = second_differences(&[vec![1.0, 0.5, 0.25]], Orientation::ColumnWise);
        assert_eq!(d, vec![vec![0.25]]);
        let flat = vec![vec![0.3; 4]; 4];
        assert!(second_differences(&flat, Orientation::RowWise).iter().flatten().all(|&x| x == 0.0));
        assert!(second_differences(&[vec![1.0, 2.0]], Orientation::ColumnWise).is_empty());
        let d = second_differences(&[vec![1.0], vec![3.0], vec![4.0]], Orientation::RowWise);
        assert_eq!(d, vec![vec![-1.0]]);
    }

    #[test]
    fn repair_examples() {
        // one flip either way; the later change point keeps all three positive
        assert_eq!(repair_signs(&[1, -1, 1], SignChange::PlusToMinus), vec![1, 1, 1]);
        assert_eq!(repair_signs(&[1, -1, 1], SignChange::MinusToPlus), vec![-1, -1, 1]);
        assert_eq!(repair_signs(&[1, 1, -1], SignChange::MinusToPlus), vec![1, 1, 1]);
        assert_eq!(repair_signs(&[1, -1, -1], SignChange::MinusToPlus), vec![-1, -1, -1]);
        assert_eq!(repair_signs(&[0, 0, 0], SignChange::PlusToMinus), vec![0, 0, 0]);
        assert_eq!(repair_signs(&[1, 0, -1, 0], SignChange::PlusToMinus), vec![1, 0, -1, 0]);
    }

    #[test]
    fn repair_is_minimal_by_enumeration() {
        for change in [SignChange::PlusToMinus, SignChange::MinusToPlus] {
            for code in 0..3usize.pow(5) {
                let seq: Vec<i8> = (0..5).map(|k| (code / 3usize.pow(k) % 3) as i8 - 1).collect();
                let fixed = repair_signs(&seq, change);
                let valid = SignMatrix::new(Orientation::ColumnWise, vec![fixed.clone()]).unwrap();
                assert!(valid.satisfies(change));
                let flips = seq.iter().zip(&fixed).filter(|(a, b)| a != b).count();
                // brute force over all sign sequences with zeros in place
                let best = (0..1usize << 5)
                    .map(|mask| {
                        seq.iter()
                            .enumerate()
                            .map(|(k, &s)| if s == 0 { 0 } else if mask >> k & 1 == 1 { 1 } else { -1 })
                            .collect::<Vec<i8>>()
                    })
                    .filter(|cand| flips_needed(cand, change) == 0)
                    .map(|cand| seq.iter().zip(&cand).filter(|(a, b)| a != b).count())
                    .min()
                    .unwrap();
                assert_eq!(flips, best, "{seq:?}");
                assert_eq!(repair_signs(&fixed, change), fixed);
            }
        }
    }

    #[test]
    fn reference_shapes_and_validity() {
        let lambda = vec![
            vec![0.9, 0.7, 0.6, 0.1],
            vec![0.95, 0.8, 0.3, 0.2],
            vec![1.0, 0.9, 0.8, 0.4],
        ];
        let r = least_nested_reference(&lambda).unwrap();
        assert_eq!(r.col_signs.shape(), (3, 2));
        assert_eq!(r.row_signs.shape(), (1, 4));
        assert!(r.col_signs.satisfies(SignChange::MinusToPlus));
        assert!(r.row_signs.satisfies(SignChange::MinusToPlus));
    }

    #[test]
    fn ncg_constant_and_ramp() {
        let flat = vec![vec![0.4; 4]; 3];
        let r = least_nested_reference(&flat).unwrap();
        assert_eq!(ncg_index(&flat, &r, &[1.0 / 3.0; 3], &[0.25; 4]).unwrap(), 0.0);
        // decreasing to the right, increasing downwards, no curvature
        let ramp: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..5).map(|j| 0.5 + 0.1 * i as f64 - 0.08 * j as f64).collect())
            .collect();
        let r = least_nested_reference(&ramp).unwrap();
        let v = ncg_index(&ramp, &r, &[0.25; 4], &[0.2; 5]).unwrap();
        assert!(v < 0.0, "{v}");
        assert!(ncg_index(&ramp, &r, &[0.25; 3], &[0.2; 5]).is_err());
    }

    #[test]
    fn n_plus_examples() {
        assert_eq!(n_plus_index(&staircase(5, 7)), 0);
        let id = BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(n_plus_index(&id), 0);
        let ones = BinaryMatrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(n_plus_index(&ones), 0);
        // species 2 occupies only the poorest site and skips the richest
        let m = BinaryMatrix::from_rows(&[vec![1, 1, 0], vec![1, 0, 0], vec![0, 1, 1]]).unwrap();
        assert_eq!(n_plus_index(&m), 1);
    }

    #[test]
    fn nodf_examples() {
        assert!((nodf_index(&staircase(4, 4)).unwrap() - 100.0).abs() < 1e-12);
        let id = BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(nodf_index(&id).unwrap(), 0.0);
        let dup = BinaryMatrix::from_rows(&[vec![1, 1, 0], vec![1, 1, 0], vec![1, 0, 0]]).unwrap();
        // row pairs: (0,1) equal sums -> 0; (0,2),(1,2) -> 100
        // column pairs: (0,1) -> 100; (0,2),(1,2) poorer empty -> 0
        assert!((nodf_index(&dup).unwrap() - 300.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn isocline_inverts() {
        for fill in [0.05, 0.2, 0.5, 0.73, 0.95] {
            assert!((isocline_fill(isocline_exponent(fill)) - fill).abs() < 1e-9);
        }
        assert!((isocline_fill(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn temperature_examples() {
        for k in 3..12 {
            assert!(temperature_index(&staircase(k, k)).unwrap() < 1e-9, "staircase {k}");
        }
        let ones = BinaryMatrix::from_rows(&[vec![1, 1], vec![1, 1]]).unwrap();
        assert!(matches!(temperature_index(&ones), Err(Error::Domain(_))));
        let anti = BinaryMatrix::from_rows(&[
            vec![0, 0, 0, 1],
            vec![0, 0, 1, 1],
            vec![0, 1, 1, 1],
            vec![1, 1, 1, 1],
        ])
        .unwrap();
        // packing restores the staircase
        assert!(temperature_index(&anti).unwrap() < 1e-9);
        let checker: Vec<Vec<u8>> = (0..10).map(|i| (0..10).map(|j| ((i + j) % 2) as u8).collect()).collect();
        let t = temperature_index(&BinaryMatrix::from_rows(&checker).unwrap()).unwrap();
        assert!(t > 20.0 && t <= 100.0, "{t}");
    }
}
