//! Sparse recovery of high-dimensional Chebyshev polynomials from
//! deterministic interpolation points.
//!
//! The deterministic design places `m = ⌊M/2⌋ + 1` points at
//! `cos(2π (j, j², …, j^d) / M)` for a prime `M`; the resulting interpolation
//! matrices have provably small mutual coherence, so basis pursuit recovers
//! sparse expansions in tensor-product or total-degree Chebyshev bases.
//!
//! Modules:
//! - [`indexsets`]: tensor-product and total-degree multi-index sets
//! - [`sampling`]: deterministic and random point sets, prime utilities
//! - [`chebmat`]: Chebyshev evaluation and matrix assembly
//! - [`analysis`]: coherence, RIP constants, exponential sums, bounds
//! - [`solver`]: basis pursuit and an exhaustive sparsest-solution oracle
//! - [`unisolvence`]: brute-force unisolvence checks for 1-D bases
//! - [`harness`]: randomized success-rate experiments

pub mod analysis;
pub mod chebmat;
pub mod error;
pub mod harness;
pub mod indexsets;
pub mod par;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod subsets;
pub mod unisolvence;

pub use error::{Error, Result};
