//! Input documents. Every document is a JSON object with `"schema": 1`.
//! Numbers may be given as JSON numbers, decimal strings or fraction
//! strings such as `"1/3"`. Symbols and states are 1-based in documents.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use tvwb_core::birkhoff::BlockCoupling;
use tvwb_core::dynsim::SystemDescriptor;
use tvwb_core::markov::{FiniteAbelianGroup, StochasticMatrix};
use tvwb_core::rational::{self, Rational};
use tvwb_core::{Label, LabelSpace, ProbVector, TreeName};

use crate::error::CliError;

pub const SCHEMA_VERSION: u64 = 1;

/// A parsed document with the raw bytes it came from.
pub struct Document {
    pub bytes: Vec<u8>,
    pub root: Map<String, Value>,
}

pub fn read_document(path: &Path) -> Result<Document, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let Value::Object(root) = value else {
        return Err(CliError::Parse(format!(
            "{}: top level must be an object",
            path.display()
        )));
    };
    match root.get("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        Some(other) => {
            return Err(CliError::Parse(format!(
                "{}: unsupported schema {other}, expected {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => {
            return Err(CliError::Parse(format!(
                "{}: missing \"schema\": {SCHEMA_VERSION}",
                path.display()
            )))
        }
    }
    Ok(Document { bytes, root })
}

fn field<'a>(root: &'a Map<String, Value>, key: &str) -> Result<&'a Value, CliError> {
    root.get(key)
        .ok_or_else(|| CliError::Parse(format!("missing field \"{key}\"")))
}

fn number_text(v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(CliError::Parse(format!("expected a number, got {other}"))),
    }
}

fn rational_of(v: &Value) -> Result<Rational, CliError> {
    Ok(rational::parse_rational(&number_text(v)?)?)
}

fn f64_of(v: &Value) -> Result<f64, CliError> {
    Ok(rational::to_f64(&rational_of(v)?))
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array()
        .ok_or_else(|| CliError::Parse(format!("\"{what}\" must be an array")))
}

fn uint(v: &Value, what: &str) -> Result<u64, CliError> {
    v.as_u64()
        .ok_or_else(|| CliError::Parse(format!("\"{what}\" must be a non-negative integer")))
}

pub fn prob_vector(root: &Map<String, Value>) -> Result<ProbVector, CliError> {
    let entries = array(field(root, "p")?, "p")?
        .iter()
        .map(rational_of)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProbVector::from_rationals(entries)?)
}

pub fn rational_grid(v: &Value, what: &str) -> Result<Vec<Vec<Rational>>, CliError> {
    array(v, what)?
        .iter()
        .map(|row| array(row, what)?.iter().map(rational_of).collect())
        .collect()
}

pub fn f64_grid(v: &Value, what: &str) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(rational_grid(v, what)?
        .iter()
        .map(|row| row.iter().map(rational::to_f64).collect())
        .collect())
}

/// `{"matrix": [[...]], "labels": [...]}`.
pub fn matrix(
    root: &Map<String, Value>,
) -> Result<(StochasticMatrix, Option<Vec<String>>), CliError> {
    let m = StochasticMatrix::new(rational_grid(field(root, "matrix")?, "matrix")?)?;
    let labels = match root.get("labels") {
        None | Some(Value::Null) => None,
        Some(v) => Some(
            array(v, "labels")?
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    other => Ok(other.to_string()),
                })
                .collect::<Result<Vec<_>, CliError>>()?,
        ),
    };
    if let Some(l) = &labels {
        if l.len() != m.dim() {
            return Err(CliError::Parse(format!(
                "{} labels for a {}-state matrix",
                l.len(),
                m.dim()
            )));
        }
    }
    Ok((m, labels))
}

/// `{"group": {"order": n, "cocycle": [g_1, …]}}` for ℤ/n, or
/// `{"group": {"orders": [n_1, …], "cocycle": [[…], …]}}` for a product.
fn group(
    root: &Map<String, Value>,
    s: usize,
) -> Result<(FiniteAbelianGroup, Vec<usize>), CliError> {
    let Value::Object(g) = field(root, "group")? else {
        return Err(CliError::Parse("\"group\" must be an object".into()));
    };
    let orders: Vec<u32> = match (g.get("order"), g.get("orders")) {
        (Some(n), None) => vec![uint(n, "order")? as u32],
        (None, Some(list)) => array(list, "orders")?
            .iter()
            .map(|x| Ok(uint(x, "orders")? as u32))
            .collect::<Result<_, CliError>>()?,
        _ => {
            return Err(CliError::Parse(
                "group needs exactly one of \"order\" or \"orders\"".into(),
            ))
        }
    };
    let group = FiniteAbelianGroup::new(orders)?;
    let cocycle_raw = array(field(g, "cocycle")?, "cocycle")?;
    if cocycle_raw.len() != s {
        return Err(tvwb_core::Error::InvalidDescriptor(format!(
            "a memory-1 cocycle lists one group element per symbol: got {} for {s} symbols",
            cocycle_raw.len()
        ))
        .into());
    }
    let cocycle = cocycle_raw
        .iter()
        .map(|x| {
            let coords: Vec<u32> = match x {
                Value::Array(cs) => cs
                    .iter()
                    .map(|c| Ok(uint(c, "cocycle")? as u32))
                    .collect::<Result<_, CliError>>()?,
                _ => vec![uint(x, "cocycle")? as u32],
            };
            Ok(group.encode(&coords)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((group, cocycle))
}

/// A system descriptor; a bare `{"matrix": …}` document reads as a Markov
/// shift.
pub fn system(root: &Map<String, Value>) -> Result<SystemDescriptor, CliError> {
    let kind = match root.get("kind") {
        Some(Value::String(k)) => k.as_str(),
        None if root.contains_key("matrix") => "markov",
        _ => return Err(CliError::Parse("missing or invalid \"kind\"".into())),
    };
    match kind {
        "bernoulli" => Ok(SystemDescriptor::bernoulli(prob_vector(root)?)),
        "markov" => {
            let (m, _) = matrix(root)?;
            let d = SystemDescriptor::markov(m)?;
            if root.contains_key("p") && !prob_vector(root)?.approx_eq(d.p()) {
                return Err(tvwb_core::Error::InvalidDescriptor(format!(
                    "declared p does not match the matrix rows {}",
                    d.p()
                ))
                .into());
            }
            Ok(d)
        }
        "finite-group-extension" => {
            let p = prob_vector(root)?;
            let (g, cocycle) = group(root, p.len())?;
            Ok(SystemDescriptor::group_extension(p, g, cocycle)?)
        }
        "circle-extension" => {
            let p = prob_vector(root)?;
            let alphas = array(field(root, "alphas")?, "alphas")?
                .iter()
                .map(f64_of)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SystemDescriptor::circle_extension(p, alphas)?)
        }
        other => Err(CliError::Parse(format!("unknown kind \"{other}\""))),
    }
}

/// State names of a matrix document, if given.
pub fn state_labels(root: &Map<String, Value>) -> Result<Option<Vec<String>>, CliError> {
    if root.contains_key("matrix") {
        Ok(matrix(root)?.1)
    } else {
        Ok(None)
    }
}

/// `{"p": […], "label_space": "discrete" | "symbol-circle", "levels":
/// [[…], …]}`; discrete labels are non-negative integers, circle labels
/// are `[symbol, fiber]` pairs with 1-based symbols.
pub fn tree_name(root: &Map<String, Value>) -> Result<TreeName, CliError> {
    let p = prob_vector(root)?;
    let space = match root.get("label_space").and_then(Value::as_str) {
        None | Some("discrete") => LabelSpace::Discrete,
        Some("symbol-circle") => LabelSpace::SymbolCircle,
        Some(other) => return Err(CliError::Parse(format!("unknown label space \"{other}\""))),
    };
    let levels = array(field(root, "levels")?, "levels")?
        .iter()
        .map(|level| {
            array(level, "levels")?
                .iter()
                .map(|l| label(l, space))
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(TreeName::new(p, space, levels)?)
}

fn label(v: &Value, space: LabelSpace) -> Result<Label, CliError> {
    match space {
        LabelSpace::Discrete => Ok(Label::Symbol(
            u32::try_from(uint(v, "label")?)
                .map_err(|_| CliError::Parse("label too large".into()))?,
        )),
        LabelSpace::SymbolCircle => {
            let pair = array(v, "label")?;
            if pair.len() != 2 {
                return Err(CliError::Parse("circle labels are [symbol, fiber]".into()));
            }
            let symbol = uint(&pair[0], "label")?;
            if symbol == 0 {
                return Err(CliError::Parse("symbols are 1-based".into()));
            }
            Ok(Label::SymbolFiber {
                symbol: (symbol - 1) as u32,
                fiber: f64_of(&pair[1])?,
            })
        }
    }
}

/// `{"p": […], "coupling": [[…]]}`.
pub fn block_coupling(root: &Map<String, Value>) -> Result<BlockCoupling, CliError> {
    let p = prob_vector(root)?;
    let entries = f64_grid(field(root, "coupling")?, "coupling")?;
    Ok(BlockCoupling::new(p, entries)?)
}
