//! Conforming triangular meshes with one generation of refinement genealogy.
//!
//! A [`Mesh`] is an immutable snapshot; refinement produces a new mesh. Every
//! triangle records the sibling group it was created in, which is what the
//! pressure stabilisation uses to build its macroelements.

mod generate;
mod io;
mod macros;
mod marking;
mod refine;
mod topology;

pub use generate::{generate_initial_mesh, Domain};
pub use io::{read_mesh, write_mesh};
pub use macros::{derive_macroelements, size_histogram, MacroPartition};
pub use marking::{mark_all, mark_dorfler, MarkedSet};
pub use refine::refine_rgb;
pub use topology::{build_edge_topology, EdgeTopology};

use crate::geometry::{self, Point};

/// How a triangle came into existence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefinementKind {
    Root,
    Red,
    Green,
    Blue,
}

impl RefinementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RefinementKind::Root => "root",
            RefinementKind::Red => "red",
            RefinementKind::Green => "green",
            RefinementKind::Blue => "blue",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(RefinementKind::Root),
            "red" => Some(RefinementKind::Red),
            "green" => Some(RefinementKind::Green),
            "blue" => Some(RefinementKind::Blue),
            _ => None,
        }
    }
}

/// Parent record of a triangle. Triangles with the same `parent` id are siblings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Genealogy {
    pub parent: Option<usize>,
    pub kind: RefinementKind,
}

impl Genealogy {
    pub const ROOT: Genealogy = Genealogy { parent: None, kind: RefinementKind::Root };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Vertex indices, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub genealogy: Vec<Genealogy>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Displacement plus pressure unknowns, `2 n_v + n_t`.
    pub fn dof_count(&self) -> usize {
        2 * self.n_vertices() + self.n_triangles()
    }

    #[inline]
    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        geometry::area(&self.corners(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn diameter(&self, t: usize) -> f64 {
        geometry::diameter(&self.corners(t))
    }

    pub fn centroid(&self, t: usize) -> Point {
        geometry::from_barycentric(&self.corners(t), [1.0 / 3.0; 3])
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| geometry::min_angle(&self.corners(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the structural invariants: positive areas and at most two
    /// triangles per edge, with boundary edges lying on the boundary flags.
    pub fn check_invariants(&self) -> crate::Result<()> {
        for t in 0..self.n_triangles() {
            let a = self.area(t);
            if a.is_nan() || a <= 0.0 {
                return Err(crate::Error::DegenerateTriangle(t, a));
            }
        }
        let topo = build_edge_topology(self)?;
        for (e, &[a, b]) in topo.edges.iter().enumerate() {
            if topo.is_boundary[e] && !(self.boundary[a] && self.boundary[b]) {
                return Err(crate::Error::InvalidArgument(format!(
                    "boundary edge {e} has an endpoint not flagged as boundary"
                )));
            }
        }
        Ok(())
    }

    /// [`Mesh::check_invariants`] plus the absence of hanging nodes: no vertex
    /// sits at the midpoint of an edge, and the edge count is Euler-consistent.
    pub fn check_conforming(&self) -> crate::Result<()> {
        self.check_invariants()?;
        let topo = build_edge_topology(self)?;
        if 2 * topo.n_edges() != 3 * self.n_triangles() + topo.n_boundary_edges() {
            return Err(crate::Error::InvalidArgument("edge count is not Euler-consistent".into()));
        }
        let positions: std::collections::HashSet<(u64, u64)> =
            self.vertices.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        for &[a, b] in &topo.edges {
            let m = geometry::midpoint(self.vertices[a], self.vertices[b]);
            if positions.contains(&(m[0].to_bits(), m[1].to_bits())) {
                return Err(crate::Error::InvalidArgument(format!(
                    "hanging node at ({}, {}) on edge ({a}, {b})",
                    m[0], m[1]
                )));
            }
        }
        Ok(())
    }
}
