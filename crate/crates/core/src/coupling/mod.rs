//! The dyadic coupling engine.
//!
//! Given Gaussian steps `Y_1..Y_{2^N}`, the engine builds `X_1..X_{2^N}` with
//! the target product law by transforming the Gaussian block tree from the
//! top down: the total sum through the marginal quantile map of the
//! `2^N`-fold convolution, then at every block the difference of the two
//! children through the conditional law of the difference given the sum.
//! For product laws all of these factorize over coordinates, so each step is
//! a one-dimensional quantile transform.

mod chain;
mod engine;
mod ladder;

pub use chain::{block_plan, compose_chain, ChainBlock, ChainOutput, MAX_CHAIN_STAGES};
pub use engine::{
    discrepancy_path, run_coupling, CouplingOutput, Engine, EngineConfig, GaussianSide,
    DEFAULT_TOLERANCE, MAX_DEPTH, MAX_DIM,
};
pub use ladder::GridPolicy;
