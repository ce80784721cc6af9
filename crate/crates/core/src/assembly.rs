//! Assembly of the locally stabilised P1-P0 saddle-point system
//!
//! ```text
//! [ A   B^T    ] [u]   [f]
//! [ B  -(C+S)  ] [p] = [0]
//! ```
//!
//! Displacement dofs are interleaved per vertex (`2v`, `2v+1`); pressure dofs
//! are one per triangle.

use std::collections::BTreeMap;

use crate::basis::quadrature_rule;
use crate::geometry::{self, Point};
use crate::mesh::{EdgeTopology, MacroPartition, Mesh};
use crate::sparse::{CsrMatrix, Triplets};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    /// `kappa = lambda`, stress `2 mu eps(u) - p I`
    Herrmann,
    /// `kappa = mu + lambda`, stress `2 mu (eps(u) - div(u) I / 2) - p I`
    Hydrostatic,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Herrmann => "herrmann",
            Formulation::Hydrostatic => "hydrostatic",
        }
    }
}

/// Lamé parameters and the penalty coefficient of the chosen formulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young: f64,
    pub nu: f64,
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub formulation: Formulation,
}

pub type Tensor = [[f64; 2]; 2];

impl MaterialParams {
    /// From Young's modulus and Poisson ratio. Rejects `nu >= 1/2`, where the
    /// discrete system becomes singular.
    pub fn from_engineering(young: f64, nu: f64, formulation: Formulation) -> Result<Self> {
        if !(young > 0.0 && young.is_finite()) {
            return Err(Error::InvalidArgument(format!("Young's modulus {young} must be positive")));
        }
        if !(nu > 0.0 && nu < 0.5) {
            return Err(Error::InvalidArgument(format!("Poisson ratio {nu} must lie in (0, 1/2)")));
        }
        let mu = young / (2.0 * (1.0 + nu));
        let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let kappa = match formulation {
            Formulation::Herrmann => lambda,
            Formulation::Hydrostatic => mu + lambda,
        };
        Ok(MaterialParams { young, nu, mu, lambda, kappa, formulation })
    }

    /// From the shear modulus and Poisson ratio, `E = 2 mu (1 + nu)`.
    pub fn from_shear(mu: f64, nu: f64, formulation: Formulation) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("shear modulus {mu} must be positive")));
        }
        Self::from_engineering(2.0 * mu * (1.0 + nu), nu, formulation)
    }

    /// `1 / (1/kappa + 1/(2 mu))`
    pub fn rho_d(&self) -> f64 {
        1.0 / (1.0 / self.kappa + 1.0 / (2.0 * self.mu))
    }

    /// Stress for displacement gradient `grad` (`grad[a][b] = d u_a / d x_b`) and pressure `p`.
    pub fn stress(&self, grad: &Tensor, p: f64) -> Tensor {
        let div = grad[0][0] + grad[1][1];
        let shift = match self.formulation {
            Formulation::Herrmann => -p,
            Formulation::Hydrostatic => -self.mu * div - p,
        };
        let off = self.mu * (grad[0][1] + grad[1][0]);
        [
            [2.0 * self.mu * grad[0][0] + shift, off],
            [off, 2.0 * self.mu * grad[1][1] + shift],
        ]
    }
}

pub fn material_from_engineering(young: f64, nu: f64, formulation: Formulation) -> Result<MaterialParams> {
    MaterialParams::from_engineering(young, nu, formulation)
}

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub n_vertices: usize,
    pub n_triangles: usize,
    /// Displacement block, `2 n_v x 2 n_v`.
    pub a: CsrMatrix,
    /// Divergence block `B`, `n_t x 2 n_v`; the coupling in the first row is its transpose.
    pub b: CsrMatrix,
    /// Diagonal of the scaled pressure mass matrix.
    pub c: Vec<f64>,
    pub s: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Prescribed displacement dof values.
    pub dirichlet: BTreeMap<usize, f64>,
    /// Location of every displacement dof, for fill-reducing orderings.
    pub dof_coords: Vec<Point>,
}

impl SaddleSystem {
    pub fn n_displacement(&self) -> usize {
        self.a.nrows
    }

    /// The full indefinite matrix as dense rows (small systems and tests only).
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let nu = self.n_displacement();
        let n = nu + self.n_triangles;
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..nu {
            for (j, v) in self.a.row(i) {
                k[i][j] += v;
            }
        }
        for t in 0..self.n_triangles {
            for (j, v) in self.b.row(t) {
                k[nu + t][j] += v;
                k[j][nu + t] += v;
            }
            k[nu + t][nu + t] -= self.c[t];
            for (j, v) in self.s.row(t) {
                k[nu + t][nu + j] -= v;
            }
        }
        k
    }
}

fn element_geometry(mesh: &Mesh, t: usize) -> Result<([Point; 3], f64, [Point; 3])> {
    let p = mesh.corners(t);
    let area = geometry::area(&p);
    if area.is_nan() || area <= 0.0 {
        return Err(Error::DegenerateTriangle(t, area));
    }
    Ok((p, area, geometry::barycentric_gradients(&p)))
}

/// `2 mu (eps(u), eps(v))`, minus `mu (div u, div v)` for the hydrostatic form.
pub fn assemble_displacement_block(mesh: &Mesh, params: &MaterialParams) -> Result<CsrMatrix> {
    let n = 2 * mesh.n_vertices();
    let mut trip = Triplets::with_capacity(n, n, 36 * mesh.n_triangles());
    let mu = params.mu;
    let hydro = params.formulation == Formulation::Hydrostatic;
    for t in 0..mesh.n_triangles() {
        let (_, area, g) = element_geometry(mesh, t)?;
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for a in 0..2 {
                for j in 0..3 {
                    for b in 0..2 {
                        let mut v = g[i][b] * g[j][a];
                        if a == b {
                            v += geometry::dot(g[i], g[j]);
                        }
                        if hydro {
                            v -= g[i][a] * g[j][b];
                        }
                        trip.push(2 * tri[i] + a, 2 * tri[j] + b, mu * area * v);
                    }
                }
            }
        }
    }
    Ok(trip.to_csr())
}

/// `b(v, q) = -(q, div v)`: row per triangle.
pub fn assemble_divergence(mesh: &Mesh) -> Result<CsrMatrix> {
    let mut trip = Triplets::with_capacity(mesh.n_triangles(), 2 * mesh.n_vertices(), 6 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let (_, area, g) = element_geometry(mesh, t)?;
        for (i, &v) in mesh.triangles[t].iter().enumerate() {
            trip.push(t, 2 * v, -area * g[i][0]);
            trip.push(t, 2 * v + 1, -area * g[i][1]);
        }
    }
    Ok(trip.to_csr())
}

/// Diagonal of `(1/kappa) (p, q)`.
pub fn assemble_pressure_mass(mesh: &Mesh, kappa: f64) -> Vec<f64> {
    (0..mesh.n_triangles()).map(|t| mesh.area(t) / kappa).collect()
}

/// Jump stabilisation `(1/2mu) sum_M sum_{E in Gamma_M} h_E int_E [p][q]`.
/// For piecewise constants each edge contributes `h_E^2/(2 mu)` times the
/// difference stencil.
pub fn assemble_stabilisation(topo: &EdgeTopology, macros: &MacroPartition, mu: f64) -> Result<CsrMatrix> {
    let n_t = topo.triangle_edges.len();
    let mut trip = Triplets::new(n_t, n_t);
    for edges in &macros.interior_edges {
        for &e in edges {
            let (k1, k2) = match topo.edge_triangles[e] {
                (a, Some(b)) if !topo.is_boundary[e] => (a, b),
                _ => return Err(Error::BoundaryStabilisationEdge(e)),
            };
            let w = exact_summable(topo.edge_length[e].powi(2) / (2.0 * mu));
            trip.push(k1, k1, w);
            trip.push(k2, k2, w);
            trip.push(k1, k2, -w);
            trip.push(k2, k1, -w);
        }
    }
    Ok(trip.to_csr())
}

/// Truncates to 41 significant bits. A row of S holds at most three edge
/// weights within a few binary orders of each other, so every partial sum is
/// then exact and S annihilates constants without roundoff.
fn exact_summable(w: f64) -> f64 {
    f64::from_bits(w.to_bits() & !0xfff)
}

/// `(f, v)` with the degree-2 rule.
pub fn assemble_load(mesh: &Mesh, body_force: &dyn Fn(Point) -> [f64; 2]) -> Result<Vec<f64>> {
    let rule = quadrature_rule(2)?;
    let mut rhs = vec![0.0; 2 * mesh.n_vertices()];
    for t in 0..mesh.n_triangles() {
        let (p, area, _) = element_geometry(mesh, t)?;
        let tri = mesh.triangles[t];
        for (l, w) in rule.iter() {
            let f = body_force(geometry::from_barycentric(&p, l));
            for i in 0..3 {
                rhs[2 * tri[i]] += area * w * f[0] * l[i];
                rhs[2 * tri[i] + 1] += area * w * f[1] * l[i];
            }
        }
    }
    Ok(rhs)
}

/// Assembles every block and the nodal interpolant of the boundary data.
pub fn assemble_saddle_system(
    mesh: &Mesh,
    topo: &EdgeTopology,
    macros: &MacroPartition,
    params: &MaterialParams,
    body_force: &dyn Fn(Point) -> [f64; 2],
    boundary_data: &dyn Fn(Point) -> [f64; 2],
) -> Result<SaddleSystem> {
    if topo.triangle_edges.len() != mesh.n_triangles() || macros.macro_of.len() != mesh.n_triangles() {
        return Err(Error::MeshMismatch("topology or macroelements belong to another mesh".into()));
    }
    let a = assemble_displacement_block(mesh, params)?;
    let b = assemble_divergence(mesh)?;
    let c = assemble_pressure_mass(mesh, params.kappa);
    let s = assemble_stabilisation(topo, macros, params.mu)?;
    let rhs_u = assemble_load(mesh, body_force)?;
    let mut dirichlet = BTreeMap::new();
    for (v, &on_bd) in mesh.boundary.iter().enumerate() {
        if on_bd {
            let g = boundary_data(mesh.vertices[v]);
            dirichlet.insert(2 * v, g[0]);
            dirichlet.insert(2 * v + 1, g[1]);
        }
    }
    let dof_coords = mesh.vertices.iter().flat_map(|&p| [p, p]).collect();
    Ok(SaddleSystem {
        n_vertices: mesh.n_vertices(),
        n_triangles: mesh.n_triangles(),
        a,
        b,
        c,
        s,
        rhs_u,
        rhs_p: vec![0.0; mesh.n_triangles()],
        dirichlet,
        dof_coords,
    })
}

/// The system restricted to free displacement dofs, with the prescribed
/// values moved to the right-hand side.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// Free displacement dofs (indices into the full numbering), ascending.
    pub free: Vec<usize>,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: Vec<f64>,
    pub s: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Full-length displacement vector holding the prescribed values (zero elsewhere).
    pub prescribed: Vec<f64>,
    pub dof_coords: Vec<Point>,
}

/// Symmetric elimination of the prescribed displacement dofs. `values` must
/// name exactly the dofs in `system.dirichlet`.
pub fn apply_dirichlet(system: &SaddleSystem, values: &BTreeMap<usize, f64>) -> Result<ReducedSystem> {
    let n = system.n_displacement();
    for &dof in system.dirichlet.keys() {
        if !values.contains_key(&dof) {
            return Err(Error::MissingBoundaryValue(dof));
        }
    }
    if let Some(&extra) = values.keys().find(|d| !system.dirichlet.contains_key(d)) {
        return Err(Error::InvalidArgument(format!("dof {extra} is not a boundary dof")));
    }
    let mut prescribed = vec![0.0; n];
    for (&dof, &v) in values {
        prescribed[dof] = v;
    }
    let free: Vec<usize> = (0..n).filter(|d| !values.contains_key(d)).collect();

    let a_g = system.a.mul_vec(&prescribed);
    let b_g = system.b.mul_vec(&prescribed);
    let rhs_u = free.iter().map(|&i| system.rhs_u[i] - a_g[i]).collect();
    let rhs_p = system.rhs_p.iter().zip(&b_g).map(|(r, bg)| r - bg).collect();

    let all_p: Vec<usize> = (0..system.n_triangles).collect();
    Ok(ReducedSystem {
        a: system.a.submatrix(&free, &free),
        b: system.b.submatrix(&all_p, &free),
        c: system.c.clone(),
        s: system.s.clone(),
        rhs_u,
        rhs_p,
        prescribed,
        dof_coords: free.iter().map(|&i| system.dof_coords[i]).collect(),
        free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_edge_topology, derive_macroelements, generate_initial_mesh, Domain, Genealogy, RefinementKind};
    use proptest::prelude::*;

    fn right_triangle(h: f64) -> Mesh {
        Mesh {
            vertices: vec![[0.0, 0.0], [h, 0.0], [0.0, h]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![true; 3],
            genealogy: vec![Genealogy::ROOT],
        }
    }

    fn setup(level: usize) -> (Mesh, EdgeTopology, MacroPartition) {
        let m = generate_initial_mesh(Domain::UnitSquare, level).unwrap();
        let t = build_edge_topology(&m).unwrap();
        let p = derive_macroelements(&m, &t).unwrap();
        (m, t, p)
    }

    #[test]
    fn material_examples() {
        let m = MaterialParams::from_engineering(1.0, 0.25, Formulation::Herrmann).unwrap();
        assert!((m.mu - 0.4).abs() < 1e-15 && (m.lambda - 0.4).abs() < 1e-15 && (m.kappa - 0.4).abs() < 1e-15);

        let m = MaterialParams::from_engineering(1e5, 0.4, Formulation::Hydrostatic).unwrap();
        assert!((m.mu - 1e5 / 2.8).abs() < 1e-9);
        assert!((m.lambda - 4e4 / 0.28).abs() < 1e-8);
        assert_eq!(m.kappa, m.mu + m.lambda);

        // 0.49999 / (1.49999 * 0.00002), evaluated by hand
        let m = MaterialParams::from_engineering(1.0, 0.49999, Formulation::Herrmann).unwrap();
        assert!((m.lambda - 16_666.0).abs() < 0.5, "{}", m.lambda);
        assert!((m.lambda - 0.49999 / (1.49999 * 0.00002)).abs() < 1e-6);

        assert!(MaterialParams::from_engineering(1.0, 0.5, Formulation::Herrmann).is_err());
        assert!(MaterialParams::from_engineering(1.0, 0.7, Formulation::Herrmann).is_err());
        assert!(MaterialParams::from_engineering(-1.0, 0.3, Formulation::Herrmann).is_err());
        let s = MaterialParams::from_shear(100.0, 0.4, Formulation::Herrmann).unwrap();
        assert!((s.mu - 100.0).abs() < 1e-12);
        assert!(s.rho_d() < s.kappa.min(2.0 * s.mu));
    }

    /// Independent route: explicit strain tensors of the vector basis functions.
    fn strain_energy_entry(mu: f64, p: &[Point; 3], i: usize, a: usize, j: usize, b: usize) -> f64 {
        let g = geometry::barycentric_gradients(p);
        let eps = |k: usize, c: usize| -> Tensor {
            let mut grad = [[0.0; 2]; 2];
            grad[c] = g[k];
            [
                [grad[0][0], 0.5 * (grad[0][1] + grad[1][0])],
                [0.5 * (grad[0][1] + grad[1][0]), grad[1][1]],
            ]
        };
        let (e1, e2) = (eps(i, a), eps(j, b));
        let mut s = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                s += e1[r][c] * e2[r][c];
            }
        }
        2.0 * mu * geometry::area(p) * s
    }

    #[test]
    fn single_element_stiffness_matches_hand_integration() {
        let mu = 0.7;
        for h in [1.0, 0.25] {
            let mesh = right_triangle(h);
            let params = MaterialParams::from_shear(mu, 0.3, Formulation::Herrmann).unwrap();
            let a = assemble_displacement_block(&mesh, &params).unwrap();
            // closed form for legs h, independent of h
            assert!((a.get(0, 0) - 1.5 * mu).abs() < 1e-13);
            assert!((a.get(2, 2) - mu).abs() < 1e-13);
            assert!((a.get(3, 4) - 0.5 * mu).abs() < 1e-13);
            assert!(a.get(2, 5).abs() < 1e-13);
            assert!((a.get(5, 5) - mu).abs() < 1e-13);
            let p = mesh.corners(0);
            for i in 0..3 {
                for ca in 0..2 {
                    for j in 0..3 {
                        for cb in 0..2 {
                            let want = strain_energy_entry(mu, &p, i, ca, j, cb);
                            assert!((a.get(2 * i + ca, 2 * j + cb) - want).abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pressure_mass_entry() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [0.2, 0.0], [0.0, 0.2]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![true; 3],
            genealogy: vec![Genealogy::ROOT],
        };
        let c = assemble_pressure_mass(&mesh, 2.0);
        assert!((c[0] - 0.01).abs() < 1e-16);
    }

    #[test]
    fn hydrostatic_is_herrmann_minus_divergence_gram() {
        let (m, _, _) = setup(1);
        let h = MaterialParams::from_shear(1.3, 0.4, Formulation::Herrmann).unwrap();
        let s = MaterialParams::from_shear(1.3, 0.4, Formulation::Hydrostatic).unwrap();
        let ah = assemble_displacement_block(&m, &h).unwrap();
        let as_ = assemble_displacement_block(&m, &s).unwrap();
        // divergence Gram matrix from B: D = B^T diag(1/area) B
        let b = assemble_divergence(&m).unwrap();
        let mut d = vec![vec![0.0; ah.ncols]; ah.nrows];
        for t in 0..m.n_triangles() {
            let row: Vec<_> = b.row(t).collect();
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    d[i][j] += vi * vj / m.area(t);
                }
            }
        }
        for i in 0..ah.nrows {
            for j in 0..ah.ncols {
                let want = ah.get(i, j) - 1.3 * d[i][j];
                assert!((as_.get(i, j) - want).abs() < 1e-12);
            }
        }
        assert!(ah.asymmetry() < 1e-13);
        assert!(as_.asymmetry() < 1e-13);
    }

    #[test]
    fn single_edge_stabilisation_value() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            boundary: vec![true; 4],
            genealogy: vec![Genealogy { parent: Some(0), kind: RefinementKind::Green }; 2],
        };
        let topo = build_edge_topology(&mesh).unwrap();
        let macros = derive_macroelements(&mesh, &topo).unwrap();
        // shared diagonal has length sqrt(0.5); rescale to an edge of length 0.5
        let e = topo.is_boundary.iter().position(|&b| !b).unwrap();
        let mut topo_half = topo.clone();
        topo_half.edge_length[e] = 0.5;
        let s = assemble_stabilisation(&topo_half, &macros, 0.5).unwrap();
        let p = [2.0, 0.0];
        let q = s.mul_vec(&p);
        let value: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
        assert!((value - 1.0).abs() < 1e-12);
        // equal pressures give zero
        let q = s.mul_vec(&[3.0, 3.0]);
        assert!(q.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn boundary_edge_in_macro_is_rejected() {
        let (m, topo, mut macros) = setup(1);
        let e = topo.is_boundary.iter().position(|&b| b).unwrap();
        macros.interior_edges[0].push(e);
        assert!(matches!(assemble_stabilisation(&topo, &macros, 1.0), Err(Error::BoundaryStabilisationEdge(_))));
        assert!(m.n_triangles() > 0);
    }

    #[test]
    fn scaling_in_young_modulus() {
        let (m, topo, macros) = setup(1);
        let p1 = MaterialParams::from_engineering(1.0, 0.35, Formulation::Herrmann).unwrap();
        let p3 = MaterialParams::from_engineering(3.0, 0.35, Formulation::Herrmann).unwrap();
        let a1 = assemble_displacement_block(&m, &p1).unwrap();
        let a3 = assemble_displacement_block(&m, &p3).unwrap();
        for (x, y) in a1.data.iter().zip(&a3.data) {
            assert!((3.0 * x - y).abs() < 1e-12 * y.abs().max(1.0));
        }
        let s1 = assemble_stabilisation(&topo, &macros, p1.mu).unwrap();
        let s3 = assemble_stabilisation(&topo, &macros, p3.mu).unwrap();
        for (x, y) in s1.data.iter().zip(&s3.data) {
            assert!((x / 3.0 - y).abs() < 1e-14);
        }
        // doubling mu halves S
        let s2 = assemble_stabilisation(&topo, &macros, 2.0 * p1.mu).unwrap();
        for (x, y) in s1.data.iter().zip(&s2.data) {
            assert!((x / 2.0 - y).abs() < 1e-15);
        }
    }

    #[test]
    fn patch_residual_vanishes() {
        let (m, topo, macros) = setup(1);
        for form in [Formulation::Herrmann, Formulation::Hydrostatic] {
            let params = MaterialParams::from_shear(1.0, 0.3, form).unwrap();
            let exact = |x: Point| [x[0], -x[1]];
            let sys = assemble_saddle_system(&m, &topo, &macros, &params, &|_| [0.0, 0.0], &exact).unwrap();
            let u: Vec<f64> = m.vertices.iter().flat_map(|&x| exact(x)).collect();
            let au = sys.a.mul_vec(&u);
            for v in 0..m.n_vertices() {
                if !m.boundary[v] {
                    assert!(au[2 * v].abs() < 1e-12 && au[2 * v + 1].abs() < 1e-12);
                }
            }
            assert!(sys.b.mul_vec(&u).iter().all(|r| r.abs() < 1e-12));
        }
    }

    #[test]
    fn dirichlet_toy_elimination() {
        // three displacement dofs, dof 1 free; one pressure dof
        let mut ta = Triplets::new(3, 3);
        let a = [[4.0, -1.0, 0.5], [-1.0, 3.0, -2.0], [0.5, -2.0, 5.0]];
        for i in 0..3 {
            for j in 0..3 {
                ta.push(i, j, a[i][j]);
            }
        }
        let mut tb = Triplets::new(1, 3);
        tb.push(0, 0, 0.3);
        tb.push(0, 1, -0.7);
        tb.push(0, 2, 0.2);
        let dirichlet: BTreeMap<usize, f64> = [(0, 2.0), (2, -1.0)].into_iter().collect();
        let sys = SaddleSystem {
            n_vertices: 0,
            n_triangles: 1,
            a: ta.to_csr(),
            b: tb.to_csr(),
            c: vec![0.1],
            s: CsrMatrix::zeros(1, 1),
            rhs_u: vec![1.0, 2.0, 3.0],
            rhs_p: vec![0.5],
            dirichlet: dirichlet.clone(),
            dof_coords: vec![[0.0, 0.0]; 3],
        };
        let r = apply_dirichlet(&sys, &dirichlet).unwrap();
        assert_eq!(r.free, vec![1]);
        // 2 - (-1*2 + -2*-1) = 2
        assert!((r.rhs_u[0] - 2.0).abs() < 1e-15);
        // 0.5 - (0.3*2 + 0.2*-1) = 0.1
        assert!((r.rhs_p[0] - 0.1).abs() < 1e-15);
        assert_eq!(r.a.get(0, 0), 3.0);
        assert_eq!(r.b.get(0, 0), -0.7);

        let missing: BTreeMap<usize, f64> = [(0, 2.0)].into_iter().collect();
        assert_eq!(apply_dirichlet(&sys, &missing).unwrap_err(), Error::MissingBoundaryValue(2));
    }

    #[test]
    fn zero_boundary_data_keeps_rhs() {
        let (m, topo, macros) = setup(1);
        let params = MaterialParams::from_shear(1.0, 0.3, Formulation::Herrmann).unwrap();
        let f = |x: Point| [x[0].sin(), x[1]];
        let sys = assemble_saddle_system(&m, &topo, &macros, &params, &f, &|_| [0.0, 0.0]).unwrap();
        let r = apply_dirichlet(&sys, &sys.dirichlet).unwrap();
        for (k, &i) in r.free.iter().enumerate() {
            assert_eq!(r.rhs_u[k], sys.rhs_u[i]);
        }
        assert_eq!(r.a, sys.a.submatrix(&r.free, &r.free));
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            triangles: vec![[0, 1, 2]],
            boundary: vec![true; 3],
            genealogy: vec![Genealogy::ROOT],
        };
        let params = MaterialParams::from_shear(1.0, 0.3, Formulation::Herrmann).unwrap();
        assert!(matches!(assemble_displacement_block(&mesh, &params), Err(Error::DegenerateTriangle(0, _))));
    }

    #[test]
    fn graded_stabilisation_kills_constants_exactly() {
        let mut m = generate_initial_mesh(Domain::LShape, 1).unwrap();
        for _ in 0..4 {
            let ind: Vec<f64> = (0..m.n_triangles()).map(|t| 1.0 / (1e-3 + geometry::distance(m.centroid(t), [0.0, 0.0]))).collect();
            m = crate::mesh::refine_rgb(&m, &crate::mesh::mark_dorfler(&ind, 0.5).unwrap()).unwrap();
        }
        let topo = build_edge_topology(&m).unwrap();
        let macros = derive_macroelements(&m, &topo).unwrap();
        for mu in [0.37, 1.0 / 3.0, 1e-2] {
            let s = assemble_stabilisation(&topo, &macros, mu).unwrap();
            assert!(s.mul_vec(&vec![1.0; m.n_triangles()]).iter().all(|&v| v == 0.0));
        }
    }

    proptest! {
        #[test]
        fn stabilisation_is_psd_and_kills_constants(x in proptest::collection::vec(-5.0f64..5.0, 128)) {
            let (m, topo, macros) = setup(2);
            let s = assemble_stabilisation(&topo, &macros, 0.8).unwrap();
            let n = m.n_triangles();
            let ones = vec![1.0; n];
            prop_assert!(s.mul_vec(&ones).iter().all(|&v| v == 0.0));
            let xs: Vec<f64> = (0..n).map(|i| x[i % x.len()] * (1.0 + i as f64 / n as f64)).collect();
            let sx = s.mul_vec(&xs);
            let q: f64 = xs.iter().zip(&sx).map(|(a, b)| a * b).sum();
            prop_assert!(q >= -1e-12);
            prop_assert!(s.asymmetry() == 0.0);
        }
    }
}
