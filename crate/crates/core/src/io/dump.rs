//! Plain-text dump of an assembled cone program.
//!
//! ```text
//! # minimize c'z + constant  s.t.  A z + s = b,  s in K
//! dims <rows> <cols>
//! constant <value>
//! cone <zero|nonneg|soc|rsoc|psd> <size>     one line per block, in order
//! c <col> <value>                            nonzero costs
//! b <row> <value>                            nonzero right-hand sides
//! a <row> <col> <value>                      nonzero entries of A
//! ```
//!
//! Indices are 0-based, values use 17 significant digits. PSD blocks are
//! packed lower-triangle column-wise with off-diagonals scaled by √2.

use std::fmt::Write as _;

use bmirelax_conic::{ConeBlock, ConeBlockSpec, Triplets};
use nalgebra::DVector;

use super::json::format_f64;
use crate::error::{BmiError, Result};
use crate::relaxation::ConeProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardForm {
    pub cost: DVector<f64>,
    pub constant: f64,
    pub a: Triplets,
    pub b: DVector<f64>,
    pub cones: ConeBlockSpec,
}

impl From<&ConeProgram> for StandardForm {
    fn from(p: &ConeProgram) -> Self {
        Self { cost: p.cost.clone(), constant: p.constant, a: p.a.clone(), b: p.b.clone(), cones: p.cones.clone() }
    }
}

pub fn write_dump(sf: &StandardForm) -> String {
    let mut out = String::new();
    out.push_str("# minimize c'z + constant  s.t.  A z + s = b,  s in K\n");
    let _ = writeln!(out, "dims {} {}", sf.a.nrows, sf.a.ncols);
    let _ = writeln!(out, "constant {}", format_f64(sf.constant));
    for block in sf.cones.blocks() {
        let _ = writeln!(out, "cone {block}");
    }
    for (j, v) in sf.cost.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        let _ = writeln!(out, "c {j} {}", format_f64(*v));
    }
    for (i, v) in sf.b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
        let _ = writeln!(out, "b {i} {}", format_f64(*v));
    }
    let mut entries = sf.a.entries.clone();
    entries.sort_by_key(|e| (e.0, e.1));
    for (i, j, v) in entries {
        let _ = writeln!(out, "a {i} {j} {}", format_f64(v));
    }
    out
}

fn bad(line: usize, msg: impl Into<String>) -> BmiError {
    BmiError::parse(format!("line {line}"), msg)
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| bad(line, "missing or malformed number"))
}

pub fn read_dump(text: &str) -> Result<StandardForm> {
    let mut dims: Option<(usize, usize)> = None;
    let mut constant = 0.0;
    let mut blocks = Vec::new();
    let mut cost = Vec::new();
    let mut rhs = Vec::new();
    let mut entries = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tok = body.split_whitespace();
        let tag = tok.next().unwrap_or("");
        match tag {
            "dims" => dims = Some((num(tok.next(), line)?, num(tok.next(), line)?)),
            "constant" => constant = num(tok.next(), line)?,
            "cone" => {
                let kind = tok.next().unwrap_or("");
                let d: usize = num(tok.next(), line)?;
                blocks.push(match kind {
                    "zero" => ConeBlock::Zero(d),
                    "nonneg" => ConeBlock::Nonneg(d),
                    "soc" => ConeBlock::Soc(d),
                    "rsoc" => ConeBlock::Rsoc(d),
                    "psd" => ConeBlock::Psd(d),
                    other => return Err(bad(line, format!("unknown cone {other:?}"))),
                });
            }
            "c" => cost.push((num::<usize>(tok.next(), line)?, num::<f64>(tok.next(), line)?)),
            "b" => rhs.push((num::<usize>(tok.next(), line)?, num::<f64>(tok.next(), line)?)),
            "a" => entries.push((num::<usize>(tok.next(), line)?, num::<usize>(tok.next(), line)?, num::<f64>(tok.next(), line)?)),
            other => return Err(bad(line, format!("unknown record {other:?}"))),
        }
        if tok.next().is_some() {
            return Err(bad(line, "trailing tokens"));
        }
    }
    let (rows, cols) = dims.ok_or_else(|| BmiError::parse("dims", "missing dims record"))?;
    let mut c = DVector::zeros(cols);
    for (j, v) in cost {
        *c.get_mut(j).ok_or_else(|| BmiError::parse("c", format!("column {j} out of range")))? += v;
    }
    let mut b = DVector::zeros(rows);
    for (i, v) in rhs {
        *b.get_mut(i).ok_or_else(|| BmiError::parse("b", format!("row {i} out of range")))? += v;
    }
    let mut a = Triplets::new(rows, cols);
    for (i, j, v) in entries {
        if i >= rows || j >= cols {
            return Err(BmiError::parse("a", format!("entry ({i}, {j}) out of range")));
        }
        a.push(i, j, v);
    }
    let cones = ConeBlockSpec::new(blocks)?;
    let width: usize = cones.blocks().iter().map(|b| b.dim()).sum();
    if width != rows {
        return Err(BmiError::parse("cone", format!("cone blocks cover {width} rows, A has {rows}")));
    }
    Ok(StandardForm { cost: c, constant, a, b, cones })
}
