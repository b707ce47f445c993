//! Exact analysis on enumerable state spaces: generators with their
//! stationary laws, spectral gaps, total variation curves and mixing
//! times, censored evolutions, and the constrained block dynamics.

mod block;
mod censor;
mod eigen;
mod generator;
mod space;
mod tv;

pub use block::{
    block_generator, decompose, decompose_with, gap_recursion_report, reference_gap_inverse, variance_decomposition_check,
    BlockRect, BlockSplit, Decomposition, RecursionRow, VarianceReport,
};
pub use censor::{censored_vs_uncensored, parity_generator, CensorComparison};
pub use eigen::{exact_gap, smallest_eigenpairs, GapMethod, GapResult, DENSE_LIMIT};
pub use generator::{build_generator, RateMatrix};
pub use space::{enumerate_sos, enumerate_surface, StateSpace, DEFAULT_STATE_CAP};
pub use tv::{
    evolve, exact_tmix, mixing_law_check, point_mass, tv_curve, tv_distance, MixingLawReport, MixingLawRow, TmixResult,
    TRUNCATION,
};
