//! Margin-preserving Markov chains: checkerboard swaps and curveball trades.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BinaryMatrix;
use crate::rng::{rng_from_seed, Rng};

pub const DEFAULT_BURN_IN: usize = 10_000;
pub const DEFAULT_THIN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Checkerboard,
    Curveball,
}

/// One attempted checkerboard swap on a random 2x2 submatrix. Returns
/// whether the matrix changed.
pub fn checkerboard_step(matrix: &mut BinaryMatrix, rng: &mut Rng) -> bool {
    let (m, n) = matrix.shape();
    if m < 2 || n < 2 {
        return false;
    }
    let (r1, r2) = distinct_pair(m, rng);
    let (c1, c2) = distinct_pair(n, rng);
    let a = matrix.get(r1, c1);
    let d = matrix.get(r2, c2);
    if a == d && a != matrix.get(r1, c2) && a != matrix.get(r2, c1) {
        matrix.set(r1, c1, 1 - a);
        matrix.set(r2, c2, 1 - a);
        matrix.set(r1, c2, a);
        matrix.set(r2, c1, a);
        true
    } else {
        false
    }
}

/// One curveball trade: two random rows pool the columns where exactly one
/// of them has a presence and redistribute them at random, keeping each
/// row's count.
pub fn curveball_step(matrix: &mut BinaryMatrix, rng: &mut Rng) {
    let (m, n) = matrix.shape();
    if m < 2 {
        return;
    }
    let (a, b) = distinct_pair(m, rng);
    let mut pool = Vec::new();
    let mut a_only = 0;
    for j in 0..n {
        let (x, y) = (matrix.get(a, j), matrix.get(b, j));
        if x != y {
            pool.push(j);
            a_only += x as usize;
        }
    }
    if pool.is_empty() {
        return;
    }
    pool.shuffle(rng);
    for (k, &j) in pool.iter().enumerate() {
        let to_a = (k < a_only) as u8;
        matrix.set(a, j, to_a);
        matrix.set(b, j, 1 - to_a);
    }
}

fn distinct_pair(len: usize, rng: &mut Rng) -> (usize, usize) {
    let a = rng.gen_range(0..len);
    let mut b = rng.gen_range(0..len - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// A running chain; each call to [`SwapChain::next_sample`] advances
/// `thin` steps (plus the burn-in before the first sample).
#[derive(Debug, Clone)]
pub struct SwapChain {
    state: BinaryMatrix,
    kind: ChainKind,
    rng: Rng,
    burn_in: usize,
    thin: usize,
    started: bool,
}

impl SwapChain {
    pub fn new(start: &BinaryMatrix, kind: ChainKind, burn_in: usize, thin: usize, seed: u64) -> Result<Self> {
        if thin == 0 {
            return Err(Error::arg("thinning interval must be at least 1"));
        }
        Ok(Self {
            state: start.clone(),
            kind,
            rng: rng_from_seed(seed),
            burn_in,
            thin,
            started: false,
        })
    }

    fn step(&mut self) {
        match self.kind {
            ChainKind::Checkerboard => {
                checkerboard_step(&mut self.state, &mut self.rng);
            }
            ChainKind::Curveball => curveball_step(&mut self.state, &mut self.rng),
        }
    }

    pub fn next_sample(&mut self) -> BinaryMatrix {
        if !self.started {
            for _ in 0..self.burn_in {
                self.step();
            }
            self.started = true;
        }
        for _ in 0..self.thin {
            self.step();
        }
        self.state.clone()
    }
}

/// Samples from a chain plus how many were exact repeats of an earlier one.
#[derive(Debug, Clone)]
pub struct ChainSamples {
    pub samples: Vec<BinaryMatrix>,
    pub duplicates: usize,
}

pub fn sample_chain(
    matrix: &BinaryMatrix,
    kind: ChainKind,
    burn_in: usize,
    thin: usize,
    n: usize,
    seed: u64,
) -> Result<ChainSamples> {
    if n == 0 {
        return Err(Error::arg("at least one sample is required"));
    }
    let mut chain = SwapChain::new(matrix, kind, burn_in, thin, seed)?;
    let mut seen = HashSet::with_capacity(n);
    let mut duplicates = 0;
    let samples = (0..n)
        .map(|_| {
            let s = chain.next_sample();
            if !seen.insert(s.packed_bits()) {
                duplicates += 1;
            }
            s
        })
        .collect();
    Ok(ChainSamples { samples, duplicates })
}
