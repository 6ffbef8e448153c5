//! Computable pieces of the tree very weak Bernoulli (tvwB) theory for
//! p-endomorphisms.
//!
//! The crate is organised bottom-up:
//!
//! - [`prob`] and [`tree`]: probability vectors with their weight classes,
//!   nodes of the p-tree, tree names and the group of tree automorphisms.
//! - [`tbar`]: exact t̄_N distances (memoised matching DP and a brute-force
//!   oracle), state-collapsed distances on preimage graphs and product-measure
//!   Monte Carlo estimates.
//! - [`markov`]: one-sided Markov shifts, the End(p) row criterion, preimage
//!   graphs and the subset-reachability tvwB decider.
//! - [`birkhoff`]: convex decompositions of constant-sum matrices, block
//!   couplings and the induced measures on tree automorphisms.
//! - [`dynsim`]: example systems, point sampling, preimage trees, genericity
//!   and the empirical tvwB profile.
//!
//! Symbols and states are 0-based throughout the library; the CLI renders
//! them 1-based.

pub mod assignment;
pub mod birkhoff;
pub mod caps;
pub mod dynsim;
pub mod error;
pub mod exec;
pub mod markov;
pub mod prob;
pub mod rational;
pub mod seed;
pub mod tbar;
pub mod tree;

pub use caps::Caps;
pub use error::{Error, Result};
pub use exec::Exec;
pub use prob::{entropy, weight, Node, ProbVector};
pub use tree::{Label, LabelSpace, TreeAutomorphism, TreeName};
