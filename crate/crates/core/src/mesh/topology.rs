use std::collections::HashMap;

use super::Mesh;
use crate::geometry::distance;
use crate::{Error, Result};

/// Unique undirected edges of a mesh and their adjacency.
///
/// Local edge `k` of a triangle is the edge opposite its vertex `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTopology {
    /// Endpoints, smaller index first.
    pub edges: Vec<[usize; 2]>,
    pub edge_length: Vec<f64>,
    /// First adjacent triangle, and the second one for interior edges.
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    pub is_boundary: Vec<bool>,
    pub triangle_edges: Vec<[usize; 3]>,
}

impl EdgeTopology {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.is_boundary.iter().filter(|&&b| b).count()
    }

    /// The triangle across edge `e` from `t`, if any.
    pub fn neighbour(&self, e: usize, t: usize) -> Option<usize> {
        match self.edge_triangles[e] {
            (a, Some(b)) if a == t => Some(b),
            (a, Some(_)) => Some(a),
            _ => None,
        }
    }

    /// Number of edges of triangle `t` that are interior to the domain.
    pub fn interior_edge_count(&self, t: usize) -> usize {
        self.triangle_edges[t].iter().filter(|&&e| !self.is_boundary[e]).count()
    }
}

#[inline]
pub(crate) fn local_edge(tri: &[usize; 3], k: usize) -> [usize; 2] {
    [tri[(k + 1) % 3], tri[(k + 2) % 3]]
}

pub fn build_edge_topology(mesh: &Mesh) -> Result<EdgeTopology> {
    let n_t = mesh.n_triangles();
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * n_t + 8);
    let mut edges = Vec::with_capacity(2 * n_t);
    let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::with_capacity(2 * n_t);
    let mut triangle_edges = Vec::with_capacity(n_t);

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mut local = [0usize; 3];
        for (k, slot) in local.iter_mut().enumerate() {
            let [a, b] = local_edge(tri, k);
            let key = (a.min(b), a.max(b));
            let e = *lookup.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edge_triangles.push((t, None));
                edges.len() - 1
            });
            if edge_triangles[e].0 != t {
                if edge_triangles[e].1.is_some() {
                    return Err(Error::Topology(key.0, key.1));
                }
                edge_triangles[e].1 = Some(t);
            }
            *slot = e;
        }
        triangle_edges.push(local);
    }

    let edge_length = edges
        .iter()
        .map(|&[a, b]| distance(mesh.vertices[a], mesh.vertices[b]))
        .collect();
    let is_boundary = edge_triangles.iter().map(|(_, second)| second.is_none()).collect();
    Ok(EdgeTopology { edges, edge_length, edge_triangles, is_boundary, triangle_edges })
}
