//! Polytope documents.
//!
//! Numbers are written with 17 significant digits so a write, read, write
//! cycle reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use omniwrench_core::geometry::{Halfspace, Polytope};
use serde::Deserialize;

use crate::error::{read_text, write_text, IoError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeDocument {
    dim: usize,
    affine_dim: usize,
    #[serde(default)]
    empty: bool,
    vertices: Vec<Vec<f64>>,
    halfspaces: Vec<HalfspaceDocument>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HalfspaceDocument {
    a: Vec<f64>,
    b: f64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| num(*x)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn polytope_to_json(p: &Polytope) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"dim\": {},", p.dim());
    let _ = writeln!(s, "  \"affine_dim\": {},", if p.is_empty() { 0 } else { p.affine_dim() });
    let _ = writeln!(s, "  \"empty\": {},", p.is_empty());
    let rows: Vec<String> = p.vertices().iter().map(|v| format!("    {}", list(v))).collect();
    if rows.is_empty() {
        s.push_str("  \"vertices\": [],\n");
    } else {
        let _ = writeln!(s, "  \"vertices\": [\n{}\n  ],", rows.join(",\n"));
    }
    let rows: Vec<String> =
        p.halfspaces().iter().map(|h| format!("    {{\"a\": {}, \"b\": {}}}", list(&h.normal), num(h.offset))).collect();
    if rows.is_empty() {
        s.push_str("  \"halfspaces\": []\n");
    } else {
        let _ = writeln!(s, "  \"halfspaces\": [\n{}\n  ]", rows.join(",\n"));
    }
    s.push_str("}\n");
    s
}

pub fn parse_polytope(text: &str, origin: &Path) -> Result<Polytope, IoError> {
    let doc: PolytopeDocument = serde_json::from_str(text).map_err(|e| IoError::parse(origin, e))?;
    if doc.empty {
        if !doc.vertices.is_empty() {
            return Err(IoError::Invalid("empty polytope with vertices".into()));
        }
        return Ok(Polytope::empty(doc.dim));
    }
    let halfspaces = doc.halfspaces.into_iter().map(|h| Halfspace { normal: h.a, offset: h.b }).collect();
    Ok(Polytope::from_parts(doc.dim, doc.affine_dim, doc.vertices, halfspaces)?)
}

pub fn load_polytope(path: &Path) -> Result<Polytope, IoError> {
    parse_polytope(&read_text(path)?, path)
}

pub fn save_polytope(path: &Path, p: &Polytope) -> Result<(), IoError> {
    write_text(path, &polytope_to_json(p))
}
