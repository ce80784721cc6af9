//! Red-green-blue refinement with closure.
//!
//! Marked triangles are split into four similar children (red). Every edge of a
//! marked triangle is flagged for bisection; a triangle with any flagged edge
//! also flags its longest edge, iterated to a fixed point. Triangles are then
//! split by the number of flagged edges: one (the longest) is green, two is
//! blue (longest first, then the other), three is red.

use std::collections::HashMap;

use super::topology::build_edge_topology;
use super::{Genealogy, MarkedSet, Mesh, RefinementKind};
use crate::geometry::{distance, midpoint};
use crate::Result;

/// Local index of the longest edge (lowest index on ties).
fn refinement_edge(mesh: &Mesh, t: usize) -> usize {
    let p = mesh.corners(t);
    let mut best = 0;
    let mut best_len = -1.0;
    for k in 0..3 {
        let len = distance(p[(k + 1) % 3], p[(k + 2) % 3]);
        if len > best_len {
            best = k;
            best_len = len;
        }
    }
    best
}

pub fn refine_rgb(mesh: &Mesh, marked: &MarkedSet) -> Result<Mesh> {
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let topo = build_edge_topology(mesh)?;
    let n_t = mesh.n_triangles();
    let ref_edge: Vec<usize> = (0..n_t).map(|t| refinement_edge(mesh, t)).collect();

    let mut flagged = vec![false; topo.n_edges()];
    for &t in &marked.marked {
        for &e in &topo.triangle_edges[t] {
            flagged[e] = true;
        }
    }
    loop {
        let mut changed = false;
        for t in 0..n_t {
            let te = &topo.triangle_edges[t];
            if te.iter().any(|&e| flagged[e]) && !flagged[te[ref_edge[t]]] {
                flagged[te[ref_edge[t]]] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary.clone();
    let mut mid = vec![usize::MAX; topo.n_edges()];
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        if flagged[e] {
            mid[e] = vertices.len();
            vertices.push(midpoint(mesh.vertices[a], mesh.vertices[b]));
            boundary.push(topo.is_boundary[e]);
        }
    }

    // refined triangles get fresh family ids above every existing one
    let fresh_base = mesh.genealogy.iter().filter_map(|g| g.parent).max().map_or(0, |m| m + 1);

    let mut triangles = Vec::with_capacity(n_t + 3 * marked.len());
    let mut genealogy = Vec::with_capacity(triangles.capacity());
    for t in 0..n_t {
        let v = mesh.triangles[t];
        let te = topo.triangle_edges[t];
        let m = [mid[te[0]], mid[te[1]], mid[te[2]]];
        let n_flagged = te.iter().filter(|&&e| flagged[e]).count();
        let family = Some(fresh_base + t);
        let mut push = |tri: [usize; 3], kind| {
            triangles.push(tri);
            genealogy.push(Genealogy { parent: family, kind });
        };
        match n_flagged {
            0 => {
                triangles.push(v);
                genealogy.push(mesh.genealogy[t]);
            }
            3 => {
                let k = RefinementKind::Red;
                push([v[0], m[2], m[1]], k);
                push([m[2], v[1], m[0]], k);
                push([m[1], m[0], v[2]], k);
                push([m[2], m[0], m[1]], k);
            }
            _ => {
                // rotate so the refinement edge is (a, b) opposite c
                let r = ref_edge[t];
                let (c, a, b) = (v[r], v[(r + 1) % 3], v[(r + 2) % 3]);
                let mr = m[r];
                if n_flagged == 1 {
                    let k = RefinementKind::Green;
                    push([a, mr, c], k);
                    push([mr, b, c], k);
                } else {
                    let k = RefinementKind::Blue;
                    let bc = m[(r + 1) % 3];
                    if bc != usize::MAX {
                        push([a, mr, c], k);
                        push([mr, b, bc], k);
                        push([mr, bc, c], k);
                    } else {
                        let ca = m[(r + 2) % 3];
                        push([mr, c, ca], k);
                        push([mr, ca, a], k);
                        push([mr, b, c], k);
                    }
                }
            }
        }
    }

    // compact family ids in order of first appearance
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for g in &mut genealogy {
        if let Some(p) = g.parent {
            let next = remap.len();
            g.parent = Some(*remap.entry(p).or_insert(next));
        }
    }

    Ok(Mesh { vertices, triangles, boundary, genealogy })
}
