//! Work caps shared by the exponential-size operations.
//!
//! Every cap fails loudly with [`Error::TooLarge`](crate::Error::TooLarge)
//! instead of truncating. Defaults can be overridden through environment
//! variables (see [`Caps::from_env`]).

use std::env;

/// Environment variable overriding [`Caps::automorphisms`].
pub const ENV_AUTOMORPHISMS: &str = "TVWB_AUTOMORPHISM_CAP";
/// Environment variable overriding [`Caps::memo_entries`].
pub const ENV_MEMO: &str = "TVWB_MEMO_CAP";
/// Environment variable overriding [`Caps::tree_nodes`].
pub const ENV_TREE: &str = "TVWB_TREE_CAP";
/// Environment variable overriding [`Caps::successors`].
pub const ENV_SUCCESSORS: &str = "TVWB_SUCCESSOR_CAP";
/// Environment variable overriding [`Caps::measure_support`].
pub const ENV_SUPPORT: &str = "TVWB_SUPPORT_CAP";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum size of an enumerated automorphism group.
    pub automorphisms: u64,
    /// Maximum number of memoised node pairs in one t̄ computation.
    pub memo_entries: u64,
    /// Maximum number of labelled nodes in an explicit tree name.
    pub tree_nodes: u64,
    /// Maximum number of successor sets per (set, weight) in the decider.
    pub successors: u64,
    /// Maximum support size of an automorphism measure.
    pub measure_support: u64,
    /// Maximum height accepted by `automorphism_measure`.
    pub measure_height: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            automorphisms: 1_000_000,
            memo_entries: 20_000_000,
            tree_nodes: 20_000_000,
            successors: 1_000_000,
            measure_support: 100_000,
            measure_height: 4,
        }
    }
}

impl Caps {
    /// Defaults, overridden by any of the `TVWB_*_CAP` variables that parse
    /// as an unsigned integer.
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        let read = |name: &str| {
            env::var(name)
                .ok()
                .and_then(|v| v.trim().parse::<u64>().ok())
        };
        if let Some(v) = read(ENV_AUTOMORPHISMS) {
            caps.automorphisms = v;
        }
        if let Some(v) = read(ENV_MEMO) {
            caps.memo_entries = v;
        }
        if let Some(v) = read(ENV_TREE) {
            caps.tree_nodes = v;
        }
        if let Some(v) = read(ENV_SUCCESSORS) {
            caps.successors = v;
        }
        if let Some(v) = read(ENV_SUPPORT) {
            caps.measure_support = v;
        }
        caps
    }
}
