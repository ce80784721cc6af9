//! Macroelement partition for the local pressure-jump stabilisation.
//!
//! Triangles are grouped by sibling family. A family that adaptive refinement
//! has left edge-disconnected is split into its connected components, and any
//! component made of a single triangle is absorbed into an edge-adjacent
//! macroelement so that every macroelement carries at least one stabilised edge.

use std::collections::HashMap;

use super::{EdgeTopology, Mesh, RefinementKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MacroPartition {
    pub macro_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    /// Edges interior to each macroelement (both neighbours inside it).
    pub interior_edges: Vec<Vec<usize>>,
}

impl MacroPartition {
    pub fn n_macros(&self) -> usize {
        self.members.len()
    }
}

pub fn derive_macroelements(mesh: &Mesh, topo: &EdgeTopology) -> Result<MacroPartition> {
    let n_t = mesh.n_triangles();
    if topo.triangle_edges.len() != n_t {
        return Err(Error::Partition("topology does not belong to this mesh".into()));
    }
    let mut family_of = Vec::with_capacity(n_t);
    for (t, g) in mesh.genealogy.iter().enumerate() {
        match (g.parent, g.kind) {
            (Some(p), k) if k != RefinementKind::Root => family_of.push(p),
            _ => return Err(Error::Partition(format!("triangle {t} has no refinement parent"))),
        }
    }

    // connected components of each family, joined across shared interior edges
    const UNSET: usize = usize::MAX;
    let mut component = vec![UNSET; n_t];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for seed in 0..n_t {
        if component[seed] != UNSET {
            continue;
        }
        let id = groups.len();
        let mut group = Vec::new();
        component[seed] = id;
        stack.push(seed);
        while let Some(t) = stack.pop() {
            group.push(t);
            for &e in &topo.triangle_edges[t] {
                if let Some(n) = topo.neighbour(e, t) {
                    if component[n] == UNSET && family_of[n] == family_of[t] {
                        component[n] = id;
                        stack.push(n);
                    }
                }
            }
        }
        groups.push(group);
    }

    // absorb singletons; processed by index, repeated until all are placed
    let mut macro_of = vec![UNSET; n_t];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for g in groups.iter().filter(|g| g.len() > 1 || n_t == 1) {
        for &t in g {
            macro_of[t] = members.len();
        }
        members.push(g.clone());
    }
    let mut pending: Vec<usize> = groups.iter().filter(|g| g.len() == 1 && n_t > 1).map(|g| g[0]).collect();
    pending.sort_unstable();
    while !pending.is_empty() {
        let mut still = Vec::new();
        for &t in &pending {
            let best = topo.triangle_edges[t]
                .iter()
                .filter_map(|&e| topo.neighbour(e, t))
                .filter(|&n| macro_of[n] != UNSET)
                .min_by_key(|&n| (members[macro_of[n]].len(), n));
            match best {
                Some(n) => {
                    let m = macro_of[n];
                    macro_of[t] = m;
                    members[m].push(t);
                }
                None => still.push(t),
            }
        }
        if still.len() == pending.len() {
            // isolated run of singletons: pair the first with its lowest neighbour
            let t = still[0];
            let n = topo.triangle_edges[t]
                .iter()
                .filter_map(|&e| topo.neighbour(e, t))
                .min()
                .ok_or_else(|| Error::Partition(format!("triangle {t} has no neighbours")))?;
            macro_of[t] = members.len();
            macro_of[n] = members.len();
            members.push(vec![t, n]);
            still.retain(|&x| x != t && x != n);
        }
        pending = still;
    }
    for m in &mut members {
        m.sort_unstable();
    }

    let mut interior_edges = vec![Vec::new(); members.len()];
    for (e, &(a, b)) in topo.edge_triangles.iter().enumerate() {
        if let Some(b) = b {
            if macro_of[a] == macro_of[b] {
                interior_edges[macro_of[a]].push(e);
            }
        }
    }
    Ok(MacroPartition { macro_of, members, interior_edges })
}

/// Counts macroelements by size, for diagnostics.
pub fn size_histogram(p: &MacroPartition) -> HashMap<usize, usize> {
    let mut h = HashMap::new();
    for m in &p.members {
        *h.entry(m.len()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_edge_topology, generate_initial_mesh, mark_dorfler, refine_rgb, Domain, Genealogy, MarkedSet};

    fn partition(m: &Mesh) -> MacroPartition {
        derive_macroelements(m, &build_edge_topology(m).unwrap()).unwrap()
    }

    fn check_partition(m: &Mesh, p: &MacroPartition) {
        let topo = build_edge_topology(m).unwrap();
        let covered: usize = p.members.iter().map(Vec::len).sum();
        assert_eq!(covered, m.n_triangles());
        for (id, mem) in p.members.iter().enumerate() {
            assert!(mem.len() >= 2);
            for &t in mem {
                assert_eq!(p.macro_of[t], id);
            }
            // edge-connected through interior edges of the macro
            let mut seen = vec![mem[0]];
            let mut i = 0;
            while i < seen.len() {
                let t = seen[i];
                for &e in &p.interior_edges[id] {
                    if let (a, Some(b)) = topo.edge_triangles[e] {
                        let other = if a == t { b } else if b == t { a } else { continue };
                        if !seen.contains(&other) {
                            seen.push(other);
                        }
                    }
                }
                i += 1;
            }
            assert_eq!(seen.len(), mem.len(), "macro {id} not connected");
            for &e in &p.interior_edges[id] {
                assert!(!topo.is_boundary[e]);
            }
        }
    }

    #[test]
    fn uniform_red_groups_of_four() {
        let m = generate_initial_mesh(Domain::UnitSquare, 2).unwrap();
        let p = partition(&m);
        assert_eq!(p.n_macros(), m.n_triangles() / 4);
        for (mem, edges) in p.members.iter().zip(&p.interior_edges) {
            assert_eq!(mem.len(), 4);
            assert_eq!(edges.len(), 3);
        }
        check_partition(&m, &p);
    }

    #[test]
    fn green_and_blue_groups() {
        let base = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            boundary: vec![true; 4],
            genealogy: vec![Genealogy::ROOT; 2],
        };
        let m = refine_rgb(&base, &MarkedSet { marked: vec![0] }).unwrap();
        let p = partition(&m);
        let mut shapes: Vec<_> = p.members.iter().zip(&p.interior_edges).map(|(a, b)| (a.len(), b.len())).collect();
        shapes.sort();
        assert_eq!(shapes, vec![(2, 1), (4, 3)]);

        let m0 = refine_rgb(&base, &MarkedSet::all(2)).unwrap();
        let mut found_blue = false;
        for t in 0..m0.n_triangles() {
            let m = refine_rgb(&m0, &MarkedSet { marked: vec![t] }).unwrap();
            let p = partition(&m);
            check_partition(&m, &p);
            for mem in &p.members {
                if mem.iter().all(|&s| m.genealogy[s].kind == RefinementKind::Blue) {
                    assert_eq!(mem.len(), 3);
                    assert_eq!(p.interior_edges[p.macro_of[mem[0]]].len(), 2);
                    found_blue = true;
                }
            }
        }
        assert!(found_blue);
    }

    #[test]
    fn root_triangle_is_rejected() {
        let base = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![true; 3],
            genealogy: vec![Genealogy::ROOT],
        };
        let topo = build_edge_topology(&base).unwrap();
        assert!(matches!(derive_macroelements(&base, &topo), Err(Error::Partition(_))));
    }

    #[test]
    fn adaptive_sequences_keep_a_valid_partition() {
        let mut m = generate_initial_mesh(Domain::LShape, 1).unwrap();
        for round in 0..6 {
            let ind: Vec<f64> = (0..m.n_triangles())
                .map(|t| {
                    let c = m.centroid(t);
                    1.0 / (1e-3 + c[0].hypot(c[1])) + ((t * 31 + round) % 7) as f64 * 0.01
                })
                .collect();
            m = refine_rgb(&m, &mark_dorfler(&ind, 0.5).unwrap()).unwrap();
            let p = partition(&m);
            check_partition(&m, &p);
        }
        let h = size_histogram(&partition(&m));
        assert!(h.keys().all(|&k| k >= 2));
    }
}
