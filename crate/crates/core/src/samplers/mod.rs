//! Null-model samplers over 0/1 matrices with fixed margins.

mod block;
mod chains;
mod exact;

use serde::{Deserialize, Serialize};

pub use block::{block_margins, count_block_ensemble, sample_block_exact, BlockSampler};
pub use chains::{
    checkerboard_step, curveball_step, sample_chain, ChainKind, ChainSamples, SwapChain, DEFAULT_BURN_IN,
    DEFAULT_THIN,
};
pub use exact::{
    count_matrices, count_matrices_with_budget, log10_biguint, sample_exact, ExactSampler, DEFAULT_STATE_BUDGET,
};

/// How ensemble members are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Exact uniform draws within each block of the grid (a 1x1 grid gives
    /// the plain fixed-margin ensemble).
    #[default]
    BlockExact,
    /// Checkerboard-swap chain on the whole matrix; margins only.
    Checkerboard,
    /// Curveball chain on the whole matrix; margins only.
    Curveball,
}

impl std::str::FromStr for SamplerKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "block_exact" | "block-exact" => Ok(Self::BlockExact),
            "checkerboard" => Ok(Self::Checkerboard),
            "curveball" => Ok(Self::Curveball),
            other => Err(crate::Error::arg(format!("unknown sampler '{other}'"))),
        }
    }
}
