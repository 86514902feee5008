//! Periodized Daubechies wavelets on the unit torus.

mod basis;
mod blocks;
pub mod checks;
mod filters;
mod transform;

pub use basis::{
    regularity_estimate, required_order, WaveletBasis, DEFAULT_COARSE_LEVEL, DEFAULT_TAB_DEPTH,
    HOLDER_PER_ORDER, MAX_ORDER,
};
pub use blocks::{block_decompose, block_ranges, BlockSeq};
pub use transform::{
    analyze, approximation_pyramid, atom, partial_sum, project, projection_ladder, scaling_part, synthesize,
    upsample, CoeffTree,
};
