//! Plain-text mesh format and legacy VTK export.
//!
//! ```text
//! VERTICES <n>
//! <x> <y>                 (n lines)
//! TRIANGLES <m>
//! <i> <j> <k>             (m lines, 1-based)
//! BOUNDARY <b>
//! <i> <j>                 (b edges, 1-based, counter-clockwise loop)
//! FIELD <name> <n>        (optional, repeatable)
//! <value>                 (n lines, one per vertex)
//! ```
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::TriangulatedDomain;
use crate::error::{Error, Result};
use crate::Real;

/// A mesh together with named per-vertex fields.
#[derive(Clone, Debug)]
pub struct MeshFile<T> {
    pub domain: TriangulatedDomain<T>,
    pub fields: Vec<(String, Vec<T>)>,
}

pub fn write_mesh<T: Real>(dom: &TriangulatedDomain<T>, fields: &[(&str, &[T])]) -> String {
    let mut s = String::new();
    writeln!(s, "VERTICES {}", dom.num_vertices()).unwrap();
    for v in dom.vertices() {
        writeln!(s, "{} {}", v[0], v[1]).unwrap();
    }
    writeln!(s, "TRIANGLES {}", dom.triangles().len()).unwrap();
    for t in dom.triangles() {
        writeln!(s, "{} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    writeln!(s, "BOUNDARY {}", dom.boundary().len()).unwrap();
    for [a, b] in dom.boundary_edges() {
        writeln!(s, "{} {}", a + 1, b + 1).unwrap();
    }
    for (name, values) in fields {
        writeln!(s, "FIELD {} {}", name, values.len()).unwrap();
        for v in values.iter() {
            writeln!(s, "{v}").unwrap();
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Option<Vec<&'a str>> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Some(l.split_whitespace().collect());
        }
        None
    }

    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse { line: self.line, reason: reason.into() }
    }

    fn expect_row(&mut self, what: &str, width: usize) -> Result<Vec<&'a str>> {
        let row = self.next_tokens().ok_or_else(|| self.err(format!("unexpected end of file in {what}")))?;
        if row.len() != width {
            return Err(self.err(format!("{what}: expected {width} values, found {}", row.len())));
        }
        Ok(row)
    }

    fn number<T: Real>(&self, tok: &str) -> Result<T> {
        let v: f64 = tok.parse().map_err(|_| self.err(format!("invalid number {tok:?}")))?;
        if !v.is_finite() {
            return Err(self.err(format!("non-finite value {tok:?}")));
        }
        Ok(T::lit(v))
    }

    fn index(&self, tok: &str, n: usize) -> Result<usize> {
        let i: usize = tok.parse().map_err(|_| self.err(format!("invalid index {tok:?}")))?;
        if i == 0 || i > n {
            return Err(self.err(format!("index {i} out of range 1..={n}")));
        }
        Ok(i - 1)
    }

    fn count(&self, header: &[&str], keyword: &str) -> Result<usize> {
        if header.first() != Some(&keyword) || header.len() != 2 {
            return Err(self.err(format!("expected \"{keyword} <count>\"")));
        }
        header[1].parse().map_err(|_| self.err(format!("invalid count {:?}", header[1])))
    }
}

pub fn read_mesh<T: Real>(text: &str) -> Result<MeshFile<T>> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let header = lines.next_tokens().ok_or_else(|| lines.err("empty mesh file"))?;
    let nv = lines.count(&header, "VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let row = lines.expect_row("VERTICES", 2)?;
        vertices.push([lines.number(row[0])?, lines.number(row[1])?]);
    }
    let header = lines.next_tokens().ok_or_else(|| lines.err("missing TRIANGLES section"))?;
    let nt = lines.count(&header, "TRIANGLES")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let row = lines.expect_row("TRIANGLES", 3)?;
        triangles.push([lines.index(row[0], nv)?, lines.index(row[1], nv)?, lines.index(row[2], nv)?]);
    }
    let header = lines.next_tokens().ok_or_else(|| lines.err("missing BOUNDARY section"))?;
    let nb = lines.count(&header, "BOUNDARY")?;
    let mut edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let row = lines.expect_row("BOUNDARY", 2)?;
        edges.push((lines.index(row[0], nv)?, lines.index(row[1], nv)?));
    }
    let boundary_line = lines.line;
    let domain = TriangulatedDomain::from_parts(vertices, triangles)?;
    let mut expected: Vec<(usize, usize)> = domain.boundary_edges().map(|[a, b]| (a.min(b), a.max(b))).collect();
    let mut given: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    expected.sort_unstable();
    given.sort_unstable();
    if expected != given {
        return Err(Error::Parse {
            line: boundary_line,
            reason: "BOUNDARY edges do not match the boundary of the triangulation".into(),
        });
    }
    let mut fields = Vec::new();
    while let Some(header) = lines.next_tokens() {
        if header.len() != 3 || header[0] != "FIELD" {
            return Err(lines.err("expected \"FIELD <name> <count>\""));
        }
        let n: usize = header[2].parse().map_err(|_| lines.err("invalid FIELD count"))?;
        if n != domain.num_vertices() {
            return Err(lines.err(format!(
                "FIELD {} has {n} values for {} vertices",
                header[1],
                domain.num_vertices()
            )));
        }
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let row = lines.expect_row("FIELD", 1)?;
            values.push(lines.number(row[0])?);
        }
        fields.push((header[1].to_string(), values));
    }
    Ok(MeshFile { domain, fields })
}

/// Legacy ASCII VTK unstructured grid; the point height is `height` when
/// given (so the file shows the graph surface) and zero otherwise.
pub fn write_vtk<T: Real>(dom: &TriangulatedDomain<T>, height: Option<&[T]>, fields: &[(&str, &[T])]) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ncmcgraph\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(s, "POINTS {} double", dom.num_vertices()).unwrap();
    for (i, v) in dom.vertices().iter().enumerate() {
        let z = height.map_or(T::zero(), |h| h[i]);
        writeln!(s, "{} {} {}", v[0], v[1], z).unwrap();
    }
    let nt = dom.triangles().len();
    writeln!(s, "CELLS {} {}", nt, 4 * nt).unwrap();
    for t in dom.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {}", dom.num_vertices()).unwrap();
        for (name, values) in fields {
            writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for v in values.iter() {
                writeln!(s, "{v}").unwrap();
            }
        }
    }
    s
}
