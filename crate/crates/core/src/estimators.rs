//! A posteriori error indicators: the explicit residual estimator and the
//! estimator built from local Poisson problems on bubble spaces.
//!
//! With P1 displacements and P0 pressures every residual is piecewise
//! constant, so all norms are evaluated in closed form.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::assembly::{MaterialParams, Tensor};
use crate::basis::{bubble_space, quadrature_rule, EDGE_GAUSS};
use crate::geometry::{self, Point};
use crate::mesh::{EdgeTopology, Mesh};
use crate::solve::MixedSolution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorWeights {
    /// `h_K (2 mu)^{-1/2}` per triangle, `h_K` the longest edge.
    pub rho_k: Vec<f64>,
    /// `h_E / (2 mu)` per edge.
    pub rho_e: Vec<f64>,
    /// `(1/kappa + 1/(2 mu))^{-1}`
    pub rho_d: f64,
}

pub fn estimator_weights(mesh: &Mesh, topo: &EdgeTopology, params: &MaterialParams) -> EstimatorWeights {
    let s = 1.0 / (2.0 * params.mu).sqrt();
    EstimatorWeights {
        rho_k: (0..mesh.n_triangles()).map(|t| mesh.diameter(t) * s).collect(),
        rho_e: topo.edge_length.iter().map(|h| h / (2.0 * params.mu)).collect(),
        rho_d: params.rho_d(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProjection {
    /// Elementwise mean of the body force.
    pub f_h: Vec<[f64; 2]>,
    /// Data oscillation `rho_K |f - f_h|_K`.
    pub theta: Vec<f64>,
}

/// Red subdivisions applied to the degree-5 rule when integrating the load.
const LOAD_SUBDIVISIONS: usize = 3;

/// The degree-5 rule repeated on the `4^levels` red subtriangles, in
/// barycentric coordinates of the parent; weights sum to one.
fn composite_rule(levels: usize) -> Result<Vec<([f64; 3], f64)>> {
    let base = quadrature_rule(5)?;
    let mut cells = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
    for _ in 0..levels {
        let mid = |a: [f64; 3], b: [f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
        cells = cells
            .iter()
            .flat_map(|&[a, b, c]| {
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
            })
            .collect();
    }
    let w_cell = 1.0 / cells.len() as f64;
    let mut out = Vec::with_capacity(cells.len() * base.len());
    for cell in &cells {
        for (l, w) in base.iter() {
            let mut x = [0.0; 3];
            for k in 0..3 {
                x[k] = l[0] * cell[0][k] + l[1] * cell[1][k] + l[2] * cell[2][k];
            }
            out.push((x, w * w_cell));
        }
    }
    Ok(out)
}

/// Piecewise constant projection of `body_force` and its oscillation, both by
/// a composite degree-5 rule.
pub fn project_load(mesh: &Mesh, body_force: &dyn Fn(Point) -> [f64; 2], weights: &EstimatorWeights) -> Result<LoadProjection> {
    let rule = composite_rule(LOAD_SUBDIVISIONS)?;
    let mut f_h = Vec::with_capacity(mesh.n_triangles());
    let mut theta = Vec::with_capacity(mesh.n_triangles());
    let mut values = Vec::with_capacity(rule.len());
    for t in 0..mesh.n_triangles() {
        let p = mesh.corners(t);
        let area = geometry::area(&p);
        values.clear();
        values.extend(rule.iter().map(|&(l, w)| (body_force(geometry::from_barycentric(&p, l)), w)));
        let mut mean = [0.0; 2];
        for (f, w) in &values {
            mean[0] += w * f[0];
            mean[1] += w * f[1];
        }
        let osc: f64 = values.iter().map(|(f, w)| w * ((f[0] - mean[0]).powi(2) + (f[1] - mean[1]).powi(2))).sum();
        f_h.push(mean);
        theta.push(weights.rho_k[t] * (area * osc).sqrt());
    }
    Ok(LoadProjection { f_h, theta })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementResiduals {
    /// Interior residual `f_h` per triangle.
    pub r_vec: Vec<[f64; 2]>,
    /// `div u_h + p_h / kappa` per triangle.
    pub r_div: Vec<f64>,
    /// Half the normal stress jump per edge, `(sigma_1 - sigma_2) n / 2` with
    /// `n` pointing from the first to the second adjacent triangle; zero on
    /// boundary edges. The value does not depend on which triangle is first.
    pub r_edge: Vec<[f64; 2]>,
}

/// Constant displacement gradient of `u_h` on triangle `t`.
pub fn discrete_gradient(mesh: &Mesh, displacement: &[[f64; 2]], t: usize) -> Tensor {
    let g = geometry::barycentric_gradients(&mesh.corners(t));
    let mut grad = [[0.0; 2]; 2];
    for (i, &v) in mesh.triangles[t].iter().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                grad[a][b] += displacement[v][a] * g[i][b];
            }
        }
    }
    grad
}

/// Unit normal of edge `e` pointing from its first to its second triangle.
fn edge_normal(mesh: &Mesh, topo: &EdgeTopology, e: usize) -> Point {
    let [a, b] = topo.edges[e];
    let d = geometry::sub(mesh.vertices[b], mesh.vertices[a]);
    let len = topo.edge_length[e];
    let mut n = [d[1] / len, -d[0] / len];
    if let (k1, Some(k2)) = topo.edge_triangles[e] {
        if geometry::dot(n, geometry::sub(mesh.centroid(k2), mesh.centroid(k1))) < 0.0 {
            n = [-n[0], -n[1]];
        }
    }
    n
}

pub fn element_residuals(
    mesh: &Mesh,
    topo: &EdgeTopology,
    solution: &MixedSolution,
    f_h: &[[f64; 2]],
    params: &MaterialParams,
) -> Result<ElementResiduals> {
    let nt = mesh.n_triangles();
    if solution.displacement.len() != mesh.n_vertices() || solution.pressure.len() != nt || f_h.len() != nt || topo.triangle_edges.len() != nt {
        return Err(Error::MeshMismatch("solution, load or topology does not match mesh".into()));
    }
    let mut r_div = Vec::with_capacity(nt);
    let mut stress = Vec::with_capacity(nt);
    for t in 0..nt {
        let g = discrete_gradient(mesh, &solution.displacement, t);
        let p = solution.pressure[t];
        r_div.push(g[0][0] + g[1][1] + p / params.kappa);
        stress.push(params.stress(&g, p));
    }
    let r_edge = (0..topo.n_edges())
        .map(|e| match topo.edge_triangles[e] {
            (k1, Some(k2)) => {
                let n = edge_normal(mesh, topo, e);
                let (s1, s2) = (stress[k1], stress[k2]);
                let mut r = [0.0; 2];
                for a in 0..2 {
                    r[a] = 0.5 * ((s1[a][0] - s2[a][0]) * n[0] + (s1[a][1] - s2[a][1]) * n[1]);
                }
                r
            }
            _ => [0.0, 0.0],
        })
        .collect();
    Ok(ElementResiduals { r_vec: f_h.to_vec(), r_div, r_edge })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicators {
    pub eta_rk: Vec<f64>,
    pub eta_ek: Vec<f64>,
    pub eta_jk: Vec<f64>,
    pub theta_k: Vec<f64>,
    pub eta_k: Vec<f64>,
    pub global_eta: f64,
    pub global_theta: f64,
}

impl ErrorIndicators {
    pub fn squared(&self) -> Vec<f64> {
        self.eta_k.iter().map(|e| e * e).collect()
    }
}

fn global(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Explicit residual indicator. Each interior edge contributes its full
/// weighted jump to both neighbours.
pub fn residual_indicator(
    mesh: &Mesh,
    topo: &EdgeTopology,
    residuals: &ElementResiduals,
    weights: &EstimatorWeights,
    theta: &[f64],
) -> ErrorIndicators {
    let nt = mesh.n_triangles();
    let mut eta_rk = Vec::with_capacity(nt);
    let mut eta_ek = Vec::with_capacity(nt);
    let mut eta_jk = Vec::with_capacity(nt);
    for t in 0..nt {
        let area = mesh.area(t);
        let r = residuals.r_vec[t];
        eta_rk.push(weights.rho_k[t] * ((r[0] * r[0] + r[1] * r[1]) * area).sqrt());
        eta_jk.push((weights.rho_d * residuals.r_div[t].powi(2) * area).sqrt());
        let edge_sum: f64 = topo.triangle_edges[t]
            .iter()
            .map(|&e| {
                let re = residuals.r_edge[e];
                weights.rho_e[e] * (re[0] * re[0] + re[1] * re[1]) * topo.edge_length[e]
            })
            .sum();
        eta_ek.push(edge_sum.sqrt());
    }
    let eta_k: Vec<f64> = (0..nt).map(|t| (eta_rk[t].powi(2) + eta_ek[t].powi(2) + eta_jk[t].powi(2)).sqrt()).collect();
    ErrorIndicators {
        global_eta: global(&eta_k),
        global_theta: global(theta),
        eta_rk,
        eta_ek,
        eta_jk,
        theta_k: theta.to_vec(),
        eta_k,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonIndicators {
    pub eta_pk: Vec<f64>,
    pub global_eta: f64,
}

impl PoissonIndicators {
    pub fn squared(&self) -> Vec<f64> {
        self.eta_pk.iter().map(|e| e * e).collect()
    }
}

/// Local stiffness `(grad phi_i, grad phi_j)_K` and right-hand sides for one triangle.
fn local_poisson_problem(
    mesh: &Mesh,
    topo: &EdgeTopology,
    residuals: &ElementResiduals,
    t: usize,
) -> Result<(DMatrix<f64>, [DVector<f64>; 2])> {
    let edges = topo.triangle_edges[t];
    let interior = [!topo.is_boundary[edges[0]], !topo.is_boundary[edges[1]], !topo.is_boundary[edges[2]]];
    let space = bubble_space(t, interior, true)?;
    let n = space.basis_count();
    let p = mesh.corners(t);
    let area = geometry::area(&p);
    let grad_l = geometry::barycentric_gradients(&p);
    let rule = quadrature_rule(5)?;

    let mut k = DMatrix::zeros(n, n);
    let mut mean = vec![0.0; n];
    for (l, w) in rule.iter() {
        let g = space.gradients(l, &grad_l);
        let v = space.values(l);
        for i in 0..n {
            mean[i] += area * w * v[i];
            for j in 0..n {
                k[(i, j)] += area * w * geometry::dot(g[i], g[j]);
            }
        }
    }
    let r = residuals.r_vec[t];
    let mut rhs = [DVector::from_fn(n, |i, _| r[0] * mean[i]), DVector::from_fn(n, |i, _| r[1] * mean[i])];
    for (slot, &k_edge) in space.edge_ids.iter().enumerate() {
        let e = edges[k_edge];
        let re = residuals.r_edge[e];
        // only the bubble of this edge is nonzero on it; B_T vanishes on every edge
        let (i, j) = ((k_edge + 1) % 3, (k_edge + 2) % 3);
        let integral: f64 = EDGE_GAUSS
            .iter()
            .map(|&(s, w)| {
                let mut l = [0.0; 3];
                l[i] = 1.0 - s;
                l[j] = s;
                w * space.values(l)[slot]
            })
            .sum::<f64>()
            * topo.edge_length[e];
        rhs[0][slot] -= re[0] * integral;
        rhs[1][slot] -= re[1] * integral;
    }
    Ok((k, rhs))
}

/// Local Poisson problem indicator `eta_{P,K}`; the divergence part reduces to
/// the closed form `rho_d |R_div|^2 area`.
pub fn poisson_indicator(
    mesh: &Mesh,
    topo: &EdgeTopology,
    residuals: &ElementResiduals,
    weights: &EstimatorWeights,
    params: &MaterialParams,
) -> Result<PoissonIndicators> {
    let mut eta_pk = Vec::with_capacity(mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let (k, rhs) = local_poisson_problem(mesh, topo, residuals, t)?;
        let chol = (k * (2.0 * params.mu)).cholesky().ok_or(Error::Singular(t))?;
        let mut energy = 0.0;
        for b in &rhs {
            let e = chol.solve(b);
            energy += e.dot(b);
        }
        let div = weights.rho_d * residuals.r_div[t].powi(2) * mesh.area(t);
        eta_pk.push((energy.max(0.0) + div).sqrt());
    }
    Ok(PoissonIndicators { global_eta: global(&eta_pk), eta_pk })
}

/// Per-triangle CSV dump of the indicators.
pub fn write_indicators_csv<W: Write>(mut w: W, ind: &ErrorIndicators, poisson: Option<&PoissonIndicators>) -> Result<()> {
    writeln!(w, "triangle_id,eta_RK,eta_EK,eta_JK,theta_K,eta_K,eta_PK")?;
    for t in 0..ind.eta_k.len() {
        let pk = poisson.map(|p| format!("{:.11e}", p.eta_pk[t])).unwrap_or_default();
        writeln!(
            w,
            "{t},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{pk}",
            ind.eta_rk[t], ind.eta_ek[t], ind.eta_jk[t], ind.theta_k[t], ind.eta_k[t]
        )?;
    }
    Ok(())
}
