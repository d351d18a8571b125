//! JSON interchange formats and the canonical writer.
//!
//! Matrices are dense, row-major, with each entry stored as an `[re, im]`
//! pair. Plain numbers are accepted on input as real entries.
//!
//! Canonical output sorts object keys, writes every float with 17
//! significant digits (`{:.16e}`) and keeps integers as integers, so
//! load → save → load is bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMat};
use crate::node::StateSpaceNode;

/// One matrix entry: `[re, im]` or a bare real number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Pair([f64; 2]),
    Real(f64),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Pair([re, im]) => c64(re, im),
            Entry::Real(re) => c64(re, 0.0),
        }
    }
}

pub type RawMatrix = Vec<Vec<Entry>>;

pub fn raw_from_matrix(m: &CMat) -> RawMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| Entry::Pair([m[(i, j)].re, m[(i, j)].im]))
                .collect()
        })
        .collect()
}

/// Dense matrix from rows; `shape` pins the expected dimensions when known.
pub fn matrix_from_raw(name: &str, raw: &RawMatrix, shape: Option<(usize, usize)>) -> Result<CMat> {
    let rows = raw.len();
    let cols = match shape {
        Some((r, c)) => {
            if rows != r {
                return Err(Error::Schema(format!("{name} has {rows} rows, expected {r}")));
            }
            c
        }
        None => raw.first().map_or(0, Vec::len),
    };
    for (i, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Schema(format!(
                "{name} row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
    }
    Ok(CMat::from_fn(rows, cols, |i, j| raw[i][j].value()))
}

/// Node interchange record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeFile {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "A")]
    pub a: RawMatrix,
    #[serde(rename = "B")]
    pub b: RawMatrix,
    #[serde(rename = "C")]
    pub c: RawMatrix,
    #[serde(rename = "D")]
    pub d: RawMatrix,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<RawMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<String>,
}

impl TryFrom<NodeFile> for StateSpaceNode {
    type Error = Error;

    fn try_from(f: NodeFile) -> Result<Self> {
        let (n, m, p) = (f.n, f.m, f.p);
        let a = matrix_from_raw("A", &f.a, Some((n, n)))?;
        let b = matrix_from_raw("B", &f.b, Some((n, m)))?;
        let c = matrix_from_raw("C", &f.c, Some((p, n)))?;
        let d = matrix_from_raw("D", &f.d, Some((p, m)))?;
        let w = f
            .w
            .as_ref()
            .map(|w| matrix_from_raw("W", w, Some((n, n))))
            .transpose()?;
        StateSpaceNode::from_parts(a, b, c, d, w, f.meta.unwrap_or_default())
    }
}

impl From<StateSpaceNode> for NodeFile {
    fn from(node: StateSpaceNode) -> Self {
        NodeFile {
            n: node.states(),
            m: node.inputs(),
            p: node.outputs(),
            a: raw_from_matrix(node.a()),
            b: raw_from_matrix(node.b()),
            c: raw_from_matrix(node.c()),
            d: raw_from_matrix(node.d()),
            w: node.weight_opt().map(|w| raw_from_matrix(&w)),
            meta: (!node.meta().is_empty()).then(|| node.meta().to_string()),
        }
    }
}

/// Second-order plant record `{"A0", "M", "C0", "B0"?, "C1"?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    #[serde(rename = "A0")]
    pub a0: RawMatrix,
    #[serde(rename = "M")]
    pub m: RawMatrix,
    #[serde(rename = "C0")]
    pub c0: RawMatrix,
    #[serde(rename = "B0", default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<RawMatrix>,
    #[serde(rename = "C1", default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<RawMatrix>,
}

/// Beam preset record; absent fields take the library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamFile {
    pub model: String,
    #[serde(default)]
    pub rho_a: Option<f64>,
    #[serde(rename = "EI", default)]
    pub ei: Option<f64>,
    #[serde(rename = "EbarI", default)]
    pub ebar_i: Option<f64>,
    #[serde(default)]
    pub n_modes: Option<usize>,
}

pub const BEAM_MODEL: &str = "bontsema_beam";

/// Any document the CLI accepts as input.
#[derive(Debug, Clone)]
pub enum InputDocument {
    Node(Box<StateSpaceNode>),
    Plant(PlantFile),
    Beam(BeamFile),
}

pub fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn schema<T: serde::de::DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Schema(e.to_string()))
}

/// Classifies a parsed document by its keys.
pub fn document_from_value(v: Value) -> Result<InputDocument> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Schema("top-level value must be an object".into()))?;
    if obj.contains_key("model") {
        let beam: BeamFile = schema(v)?;
        if beam.model != BEAM_MODEL {
            return Err(Error::Schema(format!("unknown model {:?}", beam.model)));
        }
        Ok(InputDocument::Beam(beam))
    } else if obj.contains_key("A0") {
        Ok(InputDocument::Plant(schema(v)?))
    } else {
        Ok(InputDocument::Node(Box::new(node_from_value(v)?)))
    }
}

pub fn node_from_value(v: Value) -> Result<StateSpaceNode> {
    let file: NodeFile = schema(v)?;
    match StateSpaceNode::try_from(file) {
        Err(Error::DimensionMismatch(msg)) => Err(Error::Schema(msg)),
        other => other,
    }
}

pub fn node_to_value(node: &StateSpaceNode) -> Value {
    serde_json::to_value(NodeFile::from(node.clone())).expect("node serializes")
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn load_document(path: &Path) -> Result<InputDocument> {
    document_from_value(parse_value(&read_text(path)?)?)
}

pub fn load_node(path: &Path) -> Result<StateSpaceNode> {
    node_from_value(parse_value(&read_text(path)?)?)
}

pub fn save_node(node: &StateSpaceNode, path: &Path) -> Result<()> {
    write_text(path, &canonical_string(&node_to_value(node)))
}

/// Reads a bare matrix file (`[[…], …]`).
pub fn load_matrix(path: &Path) -> Result<CMat> {
    let raw: RawMatrix = schema(parse_value(&read_text(path)?)?)?;
    matrix_from_raw("matrix", &raw, None)
}

pub fn matrix_to_value(m: &CMat) -> Value {
    serde_json::to_value(raw_from_matrix(m)).expect("matrix serializes")
}

pub fn complex_to_value(z: Complex64) -> Value {
    serde_json::json!([z.re, z.im])
}

pub fn complex_from_value(name: &str, v: &Value) -> Result<Complex64> {
    let e: Entry = serde_json::from_value(v.clone())
        .map_err(|e| Error::Schema(format!("{name}: {e}")))?;
    Ok(e.value())
}

/// Canonical JSON text: sorted keys, two-space indent, `{:.16e}` floats.
pub fn canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn is_leaf(v: &Value) -> bool {
    match v {
        Value::Array(items) => items.iter().all(|x| !x.is_array() && !x.is_object()),
        Value::Object(_) => false,
        _ => true,
    }
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        write!(out, "{i}").unwrap();
    } else if let Some(u) = n.as_u64() {
        write!(out, "{u}").unwrap();
    } else {
        let f = n.as_f64().expect("json number is finite");
        write!(out, "{f:.16e}").unwrap();
    }
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            // rows of scalars and complex pairs stay on one line
            let inline = items.iter().all(is_leaf);
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                    if inline {
                        out.push(' ');
                    }
                }
                if !inline {
                    newline(out, depth + 1);
                }
                write_value(out, item, depth + 1);
            }
            if !inline && !items.is_empty() {
                newline(out, depth);
            }
            out.push(']');
        }
        Value::Object(map) => write_object(out, map, depth),
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, depth: usize) {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort();
    out.push('{');
    for (k, key) in keys.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        newline(out, depth + 1);
        out.push_str(&serde_json::to_string(key).expect("key serializes"));
        out.push_str(": ");
        write_value(out, &map[*key], depth + 1);
    }
    if !map.is_empty() {
        newline(out, depth);
    }
    out.push('}');
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real;

    fn oscillator() -> StateSpaceNode {
        StateSpaceNode::new(
            from_real(2, 2, &[0.0, 1.0, -1.0, -0.5]),
            from_real(2, 1, &[0.0, 1.0]),
            from_real(1, 2, &[0.0, 1.0]),
            from_real(1, 1, &[0.0]),
        )
        .unwrap()
        .with_meta("damped oscillator")
    }

    #[test]
    fn canonical_round_trip_is_bit_identical() {
        let node = oscillator();
        let first = canonical_string(&node_to_value(&node));
        let back = node_from_value(parse_value(&first).unwrap()).unwrap();
        let second = canonical_string(&node_to_value(&back));
        assert_eq!(first, second);
        assert_eq!(back.a(), node.a());
    }

    #[test]
    fn weight_survives_round_trip() {
        let node = oscillator()
            .with_weight(from_real(2, 2, &[2.0, 0.5, 0.5, 1.0]))
            .unwrap();
        let text = canonical_string(&node_to_value(&node));
        assert!(text.contains("\"W\""));
        let back = node_from_value(parse_value(&text).unwrap()).unwrap();
        assert_eq!(back.weight(), node.weight());
    }

    #[test]
    fn ragged_rows_are_schema_errors() {
        let text = r#"{"n":2,"m":1,"p":1,
            "A":[[[0,0],[1,0]],[[-1,0]]],
            "B":[[[0,0]],[[1,0]]],"C":[[[0,0],[1,0]]],"D":[[[0,0]]]}"#;
        let r = node_from_value(parse_value(text).unwrap());
        assert!(matches!(r, Err(Error::Schema(_))));
    }

    #[test]
    fn malformed_text_is_parse_error() {
        assert!(matches!(parse_value("{\"n\": "), Err(Error::Parse(_))));
    }

    #[test]
    fn documents_are_classified() {
        let beam = parse_value(r#"{"model":"bontsema_beam","n_modes":4}"#).unwrap();
        assert!(matches!(document_from_value(beam), Ok(InputDocument::Beam(_))));
        let plant = parse_value(r#"{"A0":[[1]],"M":[[0]],"C0":[[1]]}"#).unwrap();
        assert!(matches!(document_from_value(plant), Ok(InputDocument::Plant(_))));
        let other = parse_value(r#"{"model":"plate"}"#).unwrap();
        assert!(matches!(document_from_value(other), Err(Error::Schema(_))));
    }

    #[test]
    fn floats_use_seventeen_digits() {
        let text = canonical_string(&serde_json::json!({"b": 0.1, "a": 3}));
        assert_eq!(text, "{\n  \"a\": 3,\n  \"b\": 1.0000000000000001e-1\n}\n");
    }
}
