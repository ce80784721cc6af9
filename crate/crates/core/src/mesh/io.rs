//! Plain-text mesh format.
//!
//! ```text
//! nv nt
//! x y boundary_flag            (nv lines)
//! v0 v1 v2 parent_id kind      (nt lines, kind in root|red|green|blue, parent_id -1 for root)
//! ```
//! Whitespace separated; anything after `#` on a line is ignored.

use std::io::{BufRead, Write};

use super::{Genealogy, Mesh, RefinementKind};
use crate::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", mesh.n_vertices(), mesh.n_triangles())?;
    for (p, &b) in mesh.vertices.iter().zip(&mesh.boundary) {
        writeln!(w, "{} {} {}", p[0], p[1], b as u8)?;
    }
    for (t, g) in mesh.triangles.iter().zip(&mesh.genealogy) {
        let parent = g.parent.map_or(-1, |p| p as i64);
        writeln!(w, "{} {} {} {} {}", t[0], t[1], t[2], parent, g.kind.as_str())?;
    }
    Ok(())
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<Mesh> {
    let mut records = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
        if !fields.is_empty() {
            records.push((i + 1, fields));
        }
    }
    let mut it = records.into_iter();
    let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_owned() };
    fn field<T: std::str::FromStr>(f: &[String], i: usize, line: usize, what: &str) -> Result<T> {
        f.get(i)
            .ok_or_else(|| Error::Parse { line, msg: format!("missing {what}") })?
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad {what} '{}'", f[i]) })
    }

    let (line, header) = it.next().ok_or_else(|| err(1, "empty file"))?;
    let nv: usize = field(&header, 0, line, "vertex count")?;
    let nt: usize = field(&header, 1, line, "triangle count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = it.next().ok_or_else(|| err(0, "unexpected end of file in vertices"))?;
        let x: f64 = field(&f, 0, line, "x")?;
        let y: f64 = field(&f, 1, line, "y")?;
        let b: u8 = field(&f, 2, line, "boundary flag")?;
        if b > 1 {
            return Err(err(line, "boundary flag must be 0 or 1"));
        }
        vertices.push([x, y]);
        boundary.push(b == 1);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut genealogy = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = it.next().ok_or_else(|| err(0, "unexpected end of file in triangles"))?;
        let mut tri = [0usize; 3];
        for (k, v) in tri.iter_mut().enumerate() {
            *v = field(&f, k, line, "vertex index")?;
            if *v >= nv {
                return Err(err(line, "vertex index out of range"));
            }
        }
        let parent: i64 = field(&f, 3, line, "parent id")?;
        let kind_s: String = field(&f, 4, line, "kind")?;
        let kind = RefinementKind::parse(&kind_s).ok_or_else(|| err(line, "unknown refinement kind"))?;
        let parent = match (parent, kind) {
            (-1, RefinementKind::Root) => None,
            (p, k) if p >= 0 && k != RefinementKind::Root => Some(p as usize),
            _ => return Err(err(line, "parent id and kind disagree")),
        };
        triangles.push(tri);
        genealogy.push(Genealogy { parent, kind });
    }
    if let Some((line, _)) = it.next() {
        return Err(err(line, "trailing data"));
    }
    Ok(Mesh { vertices, triangles, boundary, genealogy })
}
