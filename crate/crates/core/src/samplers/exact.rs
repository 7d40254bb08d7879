//! Exact counting and exactly uniform sampling of 0/1 matrices with given
//! margins.
//!
//! Rows are filled one at a time, largest sums first. Columns only matter
//! through their residual sums, so the state after filling some rows is the
//! multiset of residual column sums, stored as "number of columns with
//! residual k". Choosing a row means choosing how many columns to take from
//! each residual class; the number of ways to do so is a product of
//! binomials.

use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{ToPrimitive, Zero};
use rand::seq::index::sample as sample_indices;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, MarginPair};
use crate::rng::{rng_from_seed, Rng};

/// Cap on distinct memoised states used when none is given.
pub const DEFAULT_STATE_BUDGET: usize = 5_000_000;

/// Products of binomials over at most this many columns fit in a u128.
const MAX_SIDE: usize = 124;

const COUNT_STACK: usize = 1 << 30;

type State = Vec<u16>;

/// A count that stays in a machine word until it outgrows one.
#[derive(Debug, Clone)]
enum Count {
    Small(u128),
    Big(BigUint),
}

impl Count {
    fn to_big(&self) -> BigUint {
        match self {
            Count::Small(v) => BigUint::from(*v),
            Count::Big(b) => b.clone(),
        }
    }
}

/// Running sum of `count * ways` terms.
#[derive(Default)]
struct Sum {
    small: u128,
    big: Option<BigUint>,
}

impl Sum {
    fn add(&mut self, count: &Count, ways: u128) {
        if let Count::Small(v) = count {
            if let Some(p) = v.checked_mul(ways) {
                match self.small.checked_add(p) {
                    Some(s) => self.small = s,
                    None => {
                        *self.big.get_or_insert_with(BigUint::zero) += self.small;
                        self.small = p;
                    }
                }
                return;
            }
        }
        let term = match count {
            Count::Small(v) => BigUint::from(*v) * ways,
            Count::Big(b) => b * ways,
        };
        *self.big.get_or_insert_with(BigUint::zero) += term;
    }

    fn finish(self) -> Count {
        match self.big {
            Some(b) => Count::Big(b + self.small),
            None => Count::Small(self.small),
        }
    }
}

/// Counting table for one margin pair. Sampling reads it without mutation,
/// so a prepared sampler can be shared across threads.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    margins: MarginPair,
    /// The table is built on the transpose when there are more columns
    /// than rows.
    transposed: bool,
    table: Table,
    total: BigUint,
}

/// Memoised counts of completions, one map per row step, keyed by the
/// residual class counts.
#[derive(Debug, Clone)]
struct Table {
    row_sums: Vec<usize>,
    cols: usize,
    /// Rows in processing order.
    order: Vec<usize>,
    /// Sum of the row sums still to place before step s.
    remaining_after: Vec<usize>,
    /// largest[s][k]: sum of the k largest row sums still to place.
    largest: Vec<Vec<usize>>,
    memo: Vec<FxHashMap<State, Count>>,
    binom: Arc<Vec<Vec<u128>>>,
    stored: usize,
    budget: usize,
}

impl Table {
    fn new(work: &MarginPair, budget: usize) -> Self {
        let m = work.row_sums.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| work.row_sums[b].cmp(&work.row_sums[a]).then(a.cmp(&b)));
        let mut remaining_after = vec![0; m + 1];
        for s in (0..m).rev() {
            remaining_after[s] = remaining_after[s + 1] + work.row_sums[order[s]];
        }
        let largest = (0..=m)
            .map(|s| {
                let mut rest: Vec<usize> = order[s..].iter().map(|&i| work.row_sums[i]).collect();
                rest.sort_unstable_by(|a, b| b.cmp(a));
                let mut prefix = vec![0; rest.len() + 1];
                for (k, r) in rest.iter().enumerate() {
                    prefix[k + 1] = prefix[k] + r;
                }
                prefix
            })
            .collect();
        Self {
            row_sums: work.row_sums.clone(),
            cols: work.col_sums.len(),
            order,
            remaining_after,
            largest,
            memo: vec![FxHashMap::default(); m],
            binom: Arc::new(binomial_table(work.col_sums.len())),
            stored: 0,
            budget,
        }
    }

    fn steps(&self) -> usize {
        self.order.len()
    }

    /// True when no completion exists: the residual column sums must be
    /// realisable by the remaining rows (Gale-Ryser).
    fn dead(&self, step: usize, state: &[u16]) -> bool {
        let rows_left = self.steps() - step;
        if state.iter().skip(rows_left + 1).any(|&c| c > 0) {
            return true;
        }
        let need: usize = state.iter().enumerate().map(|(k, &c)| k * c as usize).sum();
        if need != self.remaining_after[step] {
            return true;
        }
        let mut below = 0usize;
        let mut capacity = 0usize;
        for k in 1..=rows_left {
            below += state[k - 1] as usize;
            capacity += self.cols - below;
            if self.largest[step][k] > capacity {
                return true;
            }
        }
        false
    }

    /// Count for a live state of a built table.
    fn peek(&self, step: usize, state: &[u16]) -> Count {
        if step == self.steps() {
            return Count::Small(1);
        }
        self.memo[step].get(state).cloned().unwrap_or(Count::Small(0))
    }

    fn count_state(&mut self, step: usize, state: &[u16]) -> Result<Count> {
        if step == self.steps() {
            return Ok(Count::Small(1));
        }
        if let Some(v) = self.memo[step].get(state) {
            return Ok(v.clone());
        }
        let row_sum = self.row_sums[self.order[step]];
        let rows_left = self.steps() - step;
        let binom = Arc::clone(&self.binom);
        let mut total = Sum::default();
        for_each_choice(state, row_sum, rows_left, &binom, &mut |next, _, ways| {
            if !self.dead(step + 1, next) {
                total.add(&self.count_state(step + 1, next)?, ways);
            }
            Ok(false)
        })?;
        if self.stored >= self.budget {
            return Err(Error::BudgetExceeded { states: self.stored });
        }
        self.stored += 1;
        let total = total.finish();
        self.memo[step].insert(state.to_vec(), total.clone());
        Ok(total)
    }

    /// Draws one row's split over residual classes (entry k is how many
    /// columns of residual k receive a one) and returns it with the next
    /// state.
    fn sample_row(&self, step: usize, state: &[u16], rng: &mut Rng) -> Result<(Vec<u16>, State)> {
        let target = rng.gen_biguint_below(&self.peek(step, state).to_big());
        let mut acc = BigUint::zero();
        let mut picked = None;
        let row_sum = self.row_sums[self.order[step]];
        let rows_left = self.steps() - step;
        for_each_choice(state, row_sum, rows_left, &self.binom, &mut |next, choice, ways| {
            if self.dead(step + 1, next) {
                return Ok(false);
            }
            acc += self.peek(step + 1, next).to_big() * ways;
            if target < acc {
                picked = Some((choice.to_vec(), next.to_vec()));
                return Ok(true);
            }
            Ok(false)
        })?;
        Ok(picked.expect("choice weights sum to the state count"))
    }
}

/// Calls `visit(next_state, choice, ways)` for every way to spread
/// `row_sum` ones over residual classes. Columns whose residual equals the
/// number of rows left are forced. `visit` returns true to stop early.
fn for_each_choice(
    state: &[u16],
    row_sum: usize,
    rows_left: usize,
    binom: &[Vec<u128>],
    visit: &mut dyn FnMut(&[u16], &[u16], u128) -> Result<bool>,
) -> Result<()> {
    struct Walk<'a> {
        state: &'a [u16],
        binom: &'a [Vec<u128>],
        capacity: Vec<usize>,
        next: Vec<u16>,
        choice: Vec<u16>,
    }

    fn rec(
        w: &mut Walk,
        k: usize,
        left: usize,
        ways: u128,
        visit: &mut dyn FnMut(&[u16], &[u16], u128) -> Result<bool>,
    ) -> Result<bool> {
        if left == 0 {
            return visit(&w.next, &w.choice, ways);
        }
        if k == 0 || w.capacity[k] < left {
            return Ok(false);
        }
        let have = w.state[k] as usize;
        for t in (0..=have.min(left)).rev() {
            w.choice[k] = t as u16;
            w.next[k] -= t as u16;
            w.next[k - 1] += t as u16;
            let stop = rec(w, k - 1, left - t, ways * w.binom[have][t], visit)?;
            w.next[k] += t as u16;
            w.next[k - 1] -= t as u16;
            w.choice[k] = 0;
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    let forced = state[rows_left] as usize;
    if forced > row_sum {
        return Ok(());
    }
    let mut walk = Walk {
        state,
        binom,
        capacity: vec![0; rows_left],
        next: state.to_vec(),
        choice: vec![0; state.len()],
    };
    // columns available in classes 1..=k
    for k in 1..rows_left {
        walk.capacity[k] = walk.capacity[k - 1] + state[k] as usize;
    }
    walk.choice[rows_left] = forced as u16;
    walk.next[rows_left] -= forced as u16;
    walk.next[rows_left - 1] += forced as u16;
    rec(&mut walk, rows_left - 1, row_sum - forced, 1, visit)?;
    Ok(())
}

impl ExactSampler {
    pub fn new(margins: &MarginPair) -> Result<Self> {
        Self::with_budget(margins, DEFAULT_STATE_BUDGET)
    }

    /// Builds the full counting table, failing once more than `budget`
    /// distinct states would be stored.
    pub fn with_budget(margins: &MarginPair, budget: usize) -> Result<Self> {
        let (m, n) = (margins.row_sums.len(), margins.col_sums.len());
        if m == 0 || n == 0 {
            return Err(Error::arg("margins must have at least one row and one column"));
        }
        // Keep the state (residual column counts) on the shorter axis.
        let transposed = (n > m && m <= MAX_SIDE) || n > MAX_SIDE;
        let work = if transposed { margins.transpose() } else { margins.clone() };
        if work.col_sums.len() > MAX_SIDE || work.row_sums.len() >= u16::MAX as usize {
            return Err(Error::arg(format!(
                "exact counting supports at most {MAX_SIDE} columns or {MAX_SIDE} rows"
            )));
        }
        let mut table = Table::new(&work, budget);
        let in_range = work.row_sums.iter().all(|&r| r <= work.col_sums.len())
            && work.col_sums.iter().all(|&c| c <= work.row_sums.len());
        let total = if in_range && !table.dead(0, &initial_state(&work)) {
            // The recursion is as deep as rows times residual classes.
            let start = initial_state(&work);
            std::thread::scope(|scope| {
                std::thread::Builder::new()
                    .stack_size(COUNT_STACK)
                    .spawn_scoped(scope, || table.count_state(0, &start))
                    .expect("spawn counting thread")
                    .join()
                    .expect("counting thread panicked")
            })?
            .to_big()
        } else {
            BigUint::zero()
        };
        Ok(Self {
            margins: margins.clone(),
            transposed,
            table,
            total,
        })
    }

    pub fn margins(&self) -> &MarginPair {
        &self.margins
    }

    /// Number of distinct matrices with these margins.
    pub fn count(&self) -> &BigUint {
        &self.total
    }

    /// Distinct entries stored in the counting table.
    pub fn states(&self) -> usize {
        self.table.stored
    }

    /// Draws one matrix uniformly among all realisations, as row-major cells.
    pub fn sample_cells(&self, rng: &mut Rng) -> Result<Vec<u8>> {
        if self.total.is_zero() {
            return Err(Error::domain("margins are not realisable by any 0/1 matrix"));
        }
        let t = &self.table;
        let (m, n) = (t.row_sums.len(), t.cols);
        let mut cells = vec![0u8; m * n];
        let mut residual = if self.transposed {
            self.margins.row_sums.clone()
        } else {
            self.margins.col_sums.clone()
        };
        let mut state = initial_state(&MarginPair::new(t.row_sums.clone(), residual.clone()));
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
        for step in 0..m {
            let row = t.order[step];
            let (split, next) = t.sample_row(step, &state, rng)?;
            // Within each residual class the chosen columns are a uniform subset.
            by_class.iter_mut().for_each(Vec::clear);
            for (j, &r) in residual.iter().enumerate() {
                by_class[r].push(j);
            }
            for (k, &take) in split.iter().enumerate() {
                if take == 0 {
                    continue;
                }
                let members = &by_class[k];
                for idx in sample_indices(rng, members.len(), take as usize).iter() {
                    let j = members[idx];
                    cells[row * n + j] = 1;
                    residual[j] -= 1;
                }
            }
            state = next;
        }
        debug_assert!(residual.iter().all(|&r| r == 0));
        if self.transposed {
            let mut out = vec![0u8; m * n];
            for i in 0..m {
                for j in 0..n {
                    out[j * m + i] = cells[i * n + j];
                }
            }
            cells = out;
        }
        Ok(cells)
    }

    /// Draws one matrix, labelled with synthetic labels.
    pub fn sample(&self, rng: &mut Rng) -> Result<BinaryMatrix> {
        let cells = self.sample_cells(rng)?;
        let (m, n) = (self.margins.row_sums.len(), self.margins.col_sums.len());
        BinaryMatrix::new(
            (1..=m).map(|i| format!("r{i}")).collect(),
            (1..=n).map(|j| format!("c{j}")).collect(),
            cells,
        )
    }
}

fn initial_state(margins: &MarginPair) -> State {
    let m = margins.row_sums.len();
    let mut state = vec![0u16; m + 1];
    for &c in &margins.col_sums {
        state[c] += 1;
    }
    state
}

fn binomial_table(n: usize) -> Vec<Vec<u128>> {
    let mut table: Vec<Vec<u128>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1u128; i + 1];
        for k in 1..i {
            row[k] = table[i - 1][k - 1] + table[i - 1][k];
        }
        table.push(row);
    }
    table
}

/// Exact number of 0/1 matrices with the given margins (0 if infeasible).
pub fn count_matrices(margins: &MarginPair) -> Result<BigUint> {
    count_matrices_with_budget(margins, DEFAULT_STATE_BUDGET)
}

pub fn count_matrices_with_budget(margins: &MarginPair, budget: usize) -> Result<BigUint> {
    Ok(ExactSampler::with_budget(margins, budget)?.total)
}

/// One exactly uniform draw.
pub fn sample_exact(margins: &MarginPair, seed: u64) -> Result<BinaryMatrix> {
    ExactSampler::new(margins)?.sample(&mut rng_from_seed(seed))
}

/// Base-10 logarithm of a big integer (`-inf` for zero).
pub fn log10_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").log10();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.log10() + shift as f64 * std::f64::consts::LOG10_2
}
