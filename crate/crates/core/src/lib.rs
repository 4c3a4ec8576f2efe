//! Simulation and exact verification toolkit for weighted recursive trees
//! (WRT) and preferential attachment trees with additive fitness (PAT).
//!
//! The crate grows both tree families, builds the two-spine coupling and
//! its exponentially tilted version, checks the many-to-one and many-to-two
//! identities by exhaustive enumeration, and runs Monte Carlo campaigns on
//! height, diameter and the random walk estimates behind them.

pub mod error;
pub mod experiments;
pub mod fenwick;
pub mod rng;
pub mod rw;
pub mod spine;
pub mod stats;
pub mod theta;
pub mod tilt;
pub mod tree;
pub mod weights;

pub use error::{Error, Result};
pub use theta::{solve_theta, x_n, AsymptoticConstants};
pub use tree::{enumerate_wrt, grow_pat, grow_wrt, EnumeratedTree, Tree};
pub use weights::{modified_sequence, pat_weights, FitnessSequence, WeightSequence};
