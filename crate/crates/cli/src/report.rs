//! Run reports: `{command, inputs_digest, results, versions, seed}`.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::input::SCHEMA_VERSION;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command produced.
pub struct Outcome {
    pub results: Value,
    pub human: String,
    pub seed: Option<u64>,
    /// Set for semantic rejections reported as values (exit code 1).
    pub rejected: Option<String>,
}

impl Outcome {
    pub fn ok(results: Value, human: String) -> Self {
        Outcome {
            results,
            human,
            seed: None,
            rejected: None,
        }
    }
}

/// SHA-256 over the length-prefixed input documents, hex encoded.
pub fn digest(inputs: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for chunk in inputs {
        h.update((chunk.len() as u64).to_le_bytes());
        h.update(chunk);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn versions() -> Value {
    json!({ "tool": TOOL_VERSION, "schema": SCHEMA_VERSION })
}

pub fn run_report(command: &str, inputs_digest: &str, outcome: &Outcome) -> Value {
    json!({
        "command": command,
        "inputs_digest": inputs_digest,
        "results": outcome.results,
        "versions": versions(),
        "seed": outcome.seed,
    })
}

pub fn error_report(command: &str, class: &str, exit_code: u8, message: &str) -> Value {
    json!({
        "command": command,
        "error": { "class": class, "exit_code": exit_code, "message": message },
        "versions": versions(),
    })
}
