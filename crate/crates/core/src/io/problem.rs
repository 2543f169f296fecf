//! The problem file: a JSON object
//!
//! ```text
//! {
//!   "schema_version": "1",
//!   "n": 1, "m": 1,
//!   "c": [1.0],
//!   "F0": [-1.0],                      // m×m, row-major
//!   "K": [[0.0]],                      // n matrices
//!   "L": [{"i": 0, "j": 0, "matrix": [1.0]}],   // 0-based, i ≤ j, absent pairs are zero
//!   "x_check": [2.0],                  // optional
//!   "labels": {...}                    // optional, free-form
//! }
//! ```

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use super::json::{self, parse_non_finite};
use crate::error::{BmiError, Result};
use crate::pencil::{BmiProblem, MatrixPencil};

pub const SCHEMA_VERSION: &str = "1";
const TOP_FIELDS: [&str; 9] = ["schema_version", "n", "m", "c", "F0", "K", "L", "x_check", "labels"];
const PAIR_FIELDS: [&str; 3] = ["i", "j", "matrix"];

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: BmiProblem,
    pub x_check: Option<DVector<f64>>,
    pub labels: Option<Value>,
    /// Non-fatal findings (unknown fields outside strict mode).
    pub warnings: Vec<String>,
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| BmiError::parse(key, "missing required field"))
}

pub(crate) fn real(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| BmiError::parse(field, "number out of range")),
        Value::String(s) => parse_non_finite(s).ok_or_else(|| BmiError::parse(field, format!("expected a number, got string {s:?}"))),
        other => Err(BmiError::parse(field, format!("expected a number, got {}", kind_of(other)))),
    }
}

fn count(v: &Value, field: &str) -> Result<usize> {
    v.as_u64()
        .and_then(|u| usize::try_from(u).ok())
        .ok_or_else(|| BmiError::parse(field, format!("expected a nonnegative integer, got {v}")))
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

pub(crate) fn real_vec(v: &Value, field: &str, len: usize) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| BmiError::parse(field, format!("expected an array, got {}", kind_of(v))))?;
    if arr.len() != len {
        return Err(BmiError::parse(field, format!("expected {len} entries, got {}", arr.len())));
    }
    arr.iter().enumerate().map(|(k, x)| real(x, &format!("{field}[{k}]"))).collect()
}

pub(crate) fn matrix(v: &Value, field: &str, m: usize) -> Result<DMatrix<f64>> {
    Ok(DMatrix::from_row_slice(m, m, &real_vec(v, field, m * m)?))
}

fn finite(values: &[f64], field: &str) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(BmiError::parse(format!("{field}[{k}]"), "value must be finite")),
        None => Ok(()),
    }
}

fn unknown_fields(obj: &Map<String, Value>, known: &[&str], at: &str, strict: bool, warnings: &mut Vec<String>) -> Result<()> {
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            let field = if at.is_empty() { key.clone() } else { format!("{at}.{key}") };
            if strict {
                return Err(BmiError::parse(field, "unknown field"));
            }
            warnings.push(format!("ignoring unknown field {field}"));
        }
    }
    Ok(())
}

fn with_field(err: BmiError, field: &str) -> BmiError {
    match err {
        BmiError::Input(msg) | BmiError::Numerical(msg) => BmiError::parse(field, msg),
        BmiError::Asymmetric { rel, .. } => BmiError::parse(field, format!("matrix is not symmetric (relative asymmetry {rel:.3e})")),
        other => other,
    }
}

/// Parses and validates a problem file.
pub fn parse_problem(text: &str, strict: bool) -> Result<ProblemFile> {
    let root: Value = serde_json::from_str(text).map_err(|e| BmiError::parse("<document>", format!("malformed JSON: {e}")))?;
    let obj = root.as_object().ok_or_else(|| BmiError::parse("<document>", "expected a JSON object"))?;
    let mut warnings = Vec::new();
    unknown_fields(obj, &TOP_FIELDS, "", strict, &mut warnings)?;

    match get(obj, "schema_version")? {
        Value::String(s) if s == SCHEMA_VERSION => {}
        other => return Err(BmiError::parse("schema_version", format!("expected \"{SCHEMA_VERSION}\", got {other}"))),
    }
    let n = count(get(obj, "n")?, "n")?;
    let m = count(get(obj, "m")?, "m")?;
    if n == 0 {
        return Err(BmiError::parse("n", "must be at least 1"));
    }
    if m == 0 {
        return Err(BmiError::parse("m", "must be at least 1"));
    }
    let c = real_vec(get(obj, "c")?, "c", n)?;
    finite(&c, "c")?;
    let f0 = matrix(get(obj, "F0")?, "F0", m)?;
    finite(f0.as_slice(), "F0")?;

    let kv = get(obj, "K")?;
    let karr = kv.as_array().ok_or_else(|| BmiError::parse("K", format!("expected an array, got {}", kind_of(kv))))?;
    if karr.len() != n {
        return Err(BmiError::parse("K", format!("expected {n} matrices, got {}", karr.len())));
    }
    let mut ks = Vec::with_capacity(n);
    for (k, kk) in karr.iter().enumerate() {
        let field = format!("K[{k}]");
        let mat = matrix(kk, &field, m)?;
        finite(mat.as_slice(), &field)?;
        ks.push(mat);
    }

    let mut pairs: BTreeMap<(usize, usize), (usize, DMatrix<f64>)> = BTreeMap::new();
    if let Some(lv) = obj.get("L") {
        let larr = lv.as_array().ok_or_else(|| BmiError::parse("L", format!("expected an array, got {}", kind_of(lv))))?;
        for (k, entry) in larr.iter().enumerate() {
            let at = format!("L[{k}]");
            let eobj = entry.as_object().ok_or_else(|| BmiError::parse(&at, format!("expected an object, got {}", kind_of(entry))))?;
            unknown_fields(eobj, &PAIR_FIELDS, &at, strict, &mut warnings)?;
            let i = count(eobj.get("i").ok_or_else(|| BmiError::parse(format!("{at}.i"), "missing required field"))?, &format!("{at}.i"))?;
            let j = count(eobj.get("j").ok_or_else(|| BmiError::parse(format!("{at}.j"), "missing required field"))?, &format!("{at}.j"))?;
            for (name, idx) in [("i", i), ("j", j)] {
                if idx >= n {
                    return Err(BmiError::parse(format!("{at}.{name}"), format!("index {idx} out of range for n = {n}")));
                }
            }
            let key = (i.min(j), i.max(j));
            if let Some((first, _)) = pairs.get(&key) {
                return Err(BmiError::parse(
                    &at,
                    format!("duplicate pair ({}, {}), already given by L[{first}]", key.0, key.1),
                ));
            }
            if i > j {
                return Err(BmiError::parse(&at, format!("pairs must satisfy i <= j, got ({i}, {j})")));
            }
            let mfield = format!("{at}.matrix");
            let mat = matrix(eobj.get("matrix").ok_or_else(|| BmiError::parse(&mfield, "missing required field"))?, &mfield, m)?;
            finite(mat.as_slice(), &mfield)?;
            pairs.insert(key, (k, mat));
        }
    }

    // validate symmetry per field so errors name the file location
    crate::linalg::ensure_symmetric(&f0, || "F0".into()).map_err(|e| with_field(e, "F0"))?;
    for (k, mat) in ks.iter().enumerate() {
        let field = format!("K[{k}]");
        crate::linalg::ensure_symmetric(mat, || field.clone()).map_err(|e| with_field(e, &field))?;
    }
    for (k, mat) in pairs.values() {
        let field = format!("L[{k}].matrix");
        crate::linalg::ensure_symmetric(mat, || field.clone()).map_err(|e| with_field(e, &field))?;
    }

    let pencil = MatrixPencil::new(f0, ks, pairs.into_iter().map(|(key, (_, mat))| (key, mat)))?;
    let problem = BmiProblem::new(DVector::from_vec(c), pencil)?;
    let x_check = match obj.get("x_check") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let x = real_vec(v, "x_check", n)?;
            finite(&x, "x_check")?;
            Some(DVector::from_vec(x))
        }
    };
    Ok(ProblemFile { problem, x_check, labels: obj.get("labels").cloned(), warnings })
}

fn flat(a: &DMatrix<f64>) -> Value {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for s in 0..a.ncols() {
            out.push(a[(r, s)]);
        }
    }
    serde_json::to_value(json::reals(&out)).expect("reals serialize")
}

fn vector(v: &DVector<f64>) -> Value {
    serde_json::to_value(json::reals(v.as_slice())).expect("reals serialize")
}

/// Emits a problem file that [`parse_problem`] reads back bit for bit.
pub fn problem_to_string(problem: &BmiProblem, x_check: Option<&DVector<f64>>, labels: Option<&Value>) -> String {
    let p = &problem.pencil;
    let mut obj = Map::new();
    obj.insert("schema_version".into(), Value::String(SCHEMA_VERSION.into()));
    obj.insert("n".into(), Value::from(p.n()));
    obj.insert("m".into(), Value::from(p.m()));
    obj.insert("c".into(), vector(&problem.c));
    obj.insert("F0".into(), flat(p.f0()));
    obj.insert("K".into(), Value::Array(p.ks().iter().map(flat).collect()));
    let l = p
        .l_pairs()
        .map(|(&(i, j), mat)| {
            let mut e = Map::new();
            e.insert("i".into(), Value::from(i));
            e.insert("j".into(), Value::from(j));
            e.insert("matrix".into(), flat(mat));
            Value::Object(e)
        })
        .collect();
    obj.insert("L".into(), Value::Array(l));
    if let Some(x) = x_check {
        obj.insert("x_check".into(), vector(x));
    }
    if let Some(labels) = labels {
        obj.insert("labels".into(), labels.clone());
    }
    json::to_string(&Value::Object(obj))
}
