//! Direct solution of the stabilised saddle-point system.
//!
//! `C + S` is block diagonal with one block per connected group of
//! stabilisation couplings (a macroelement, or a single triangle when no jump
//! terms touch it). Each block is small and positive definite, so the pressure
//! is eliminated exactly:
//!
//! ```text
//! (A + B^T M^{-1} B) u = r_u + B^T M^{-1} r_p,     p = M^{-1} (B u - r_p)
//! ```
//!
//! The condensed displacement matrix is symmetric positive definite and is
//! factored by sparse LDL^T under a nested-dissection ordering.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::assembly::{apply_dirichlet, MaterialParams, ReducedSystem, SaddleSystem};
use crate::mesh::{EdgeTopology, Mesh};
use crate::sparse::{nested_dissection, LdlFactor, Triplets};
use crate::{Error, Result};

/// Residual level above which the solve is reported as inaccurate.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Smallest-to-largest pivot ratio below which the factorisation is flagged.
pub const PIVOT_RATIO_WARNING: f64 = 1e-12;
const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub free_displacement_dofs: usize,
    pub pressure_dofs: usize,
    pub pressure_blocks: usize,
    pub largest_pressure_block: usize,
    pub factor_nnz: usize,
    pub pivot_ratio: f64,
    /// Relative residual of the full (indefinite) reduced system.
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub ill_conditioned: bool,
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    /// Nodal displacements, prescribed values included.
    pub displacement: Vec<[f64; 2]>,
    /// Elementwise constant pressure.
    pub pressure: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl MixedSolution {
    /// Interleaved displacement dof vector.
    pub fn displacement_dofs(&self) -> Vec<f64> {
        self.displacement.iter().flat_map(|u| *u).collect()
    }
}

struct PressureBlock {
    triangles: Vec<usize>,
    /// Free displacement dofs coupled to the block through `B`.
    columns: Vec<usize>,
    /// `B` restricted to the block rows and `columns`.
    b: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

fn pressure_blocks(r: &ReducedSystem) -> Result<Vec<PressureBlock>> {
    let n = r.c.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for (j, _) in r.s.row(i) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut slot = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }

    let mut local = vec![usize::MAX; r.free.len()];
    let mut blocks = Vec::with_capacity(groups.len());
    for triangles in groups {
        let m = triangles.len();
        let mut mass = DMatrix::zeros(m, m);
        let mut columns = Vec::new();
        for (a, &t) in triangles.iter().enumerate() {
            mass[(a, a)] += r.c[t];
            for (j, v) in r.s.row(t) {
                if let Some(b) = triangles.iter().position(|&x| x == j) {
                    mass[(a, b)] += v;
                }
            }
            for (col, _) in r.b.row(t) {
                if local[col] == usize::MAX {
                    local[col] = columns.len();
                    columns.push(col);
                }
            }
        }
        let mut b = DMatrix::zeros(m, columns.len());
        for (a, &t) in triangles.iter().enumerate() {
            for (col, v) in r.b.row(t) {
                b[(a, local[col])] += v;
            }
        }
        for &col in &columns {
            local[col] = usize::MAX;
        }
        let m_inv = mass
            .cholesky()
            .ok_or(Error::Singular(r.free.len() + triangles[0]))?
            .inverse();
        blocks.push(PressureBlock { triangles, columns, b, m_inv });
    }
    Ok(blocks)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `M^{-1} (B u - r_p)` block by block.
fn recover_pressure(r: &ReducedSystem, blocks: &[PressureBlock], u: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; r.c.len()];
    for blk in blocks {
        let rhs = DVector::from_iterator(
            blk.triangles.len(),
            blk.triangles.iter().enumerate().map(|(a, &t)| {
                blk.columns.iter().enumerate().map(|(k, &c)| blk.b[(a, k)] * u[c]).sum::<f64>() - r.rhs_p[t]
            }),
        );
        let pb = &blk.m_inv * rhs;
        for (a, &t) in blk.triangles.iter().enumerate() {
            p[t] = pb[a];
        }
    }
    p
}

/// Residual of the reduced indefinite system and the norm of its right-hand side.
fn full_residual(r: &ReducedSystem, u: &[f64], p: &[f64]) -> (f64, f64) {
    let mut ru = r.a.mul_vec(u);
    r.b.mul_transpose_acc(p, 1.0, &mut ru);
    let mut res: Vec<f64> = ru.iter().zip(&r.rhs_u).map(|(x, f)| x - f).collect();
    let bu = r.b.mul_vec(u);
    let sp = r.s.mul_vec(p);
    for t in 0..p.len() {
        res.push(bu[t] - r.c[t] * p[t] - sp[t] - r.rhs_p[t]);
    }
    let rhs_norm = (norm(&r.rhs_u).powi(2) + norm(&r.rhs_p).powi(2)).sqrt();
    (norm(&res), rhs_norm)
}

/// Solves the assembled system with its own Dirichlet data.
pub fn solve_direct(system: &SaddleSystem) -> Result<MixedSolution> {
    let r = apply_dirichlet(system, &system.dirichlet)?;
    let nf = r.free.len();
    let blocks = pressure_blocks(&r)?;

    let mut trip = Triplets::with_capacity(nf, nf, r.a.nnz() + blocks.iter().map(|b| b.columns.len().pow(2)).sum::<usize>());
    for i in 0..nf {
        for (j, v) in r.a.row(i) {
            trip.push(i, j, v);
        }
    }
    let mut rhs = r.rhs_u.clone();
    for blk in &blocks {
        let w = &blk.m_inv * &blk.b;
        let schur = blk.b.transpose() * &w;
        for (k1, &c1) in blk.columns.iter().enumerate() {
            for (k2, &c2) in blk.columns.iter().enumerate() {
                trip.push(c1, c2, schur[(k1, k2)]);
            }
            // B^T M^{-1} r_p
            let rp: f64 = blk.triangles.iter().enumerate().map(|(a, &t)| w[(a, k1)] * r.rhs_p[t]).sum();
            rhs[c1] += rp;
        }
    }
    let k = trip.to_csr();
    let perm = nested_dissection(&k, &r.dof_coords);
    let factor = LdlFactor::factor(&k, perm)?;
    if !factor.is_positive_definite() {
        let bad = factor.pivots().iter().position(|&d| d <= 0.0).unwrap_or(0);
        return Err(Error::Singular(bad));
    }
    let pivot_ratio = factor.pivot_ratio();
    let ill_conditioned = pivot_ratio < PIVOT_RATIO_WARNING;
    if ill_conditioned {
        warn!("pivot ratio {pivot_ratio:.3e} indicates an ill-conditioned system");
    }

    let mut u = factor.solve(&rhs);
    let mut p = recover_pressure(&r, &blocks, &u);
    let (mut res, rhs_norm) = full_residual(&r, &u, &p);
    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    let mut steps = 0;
    while res / scale > 1e-13 && steps < MAX_REFINEMENT_STEPS {
        let ku = k.mul_vec(&u);
        let corr_rhs: Vec<f64> = rhs.iter().zip(&ku).map(|(b, x)| b - x).collect();
        let du = factor.solve(&corr_rhs);
        let trial: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let trial_p = recover_pressure(&r, &blocks, &trial);
        let (trial_res, _) = full_residual(&r, &trial, &trial_p);
        steps += 1;
        if trial_res >= res {
            break;
        }
        u = trial;
        p = trial_p;
        res = trial_res;
    }
    let relative_residual = res / scale;
    if relative_residual > RESIDUAL_TOLERANCE {
        warn!("relative residual {relative_residual:.3e} exceeds {RESIDUAL_TOLERANCE:e}");
    }
    debug!(
        "solved {} displacement + {} pressure dofs, {} blocks, nnz(L) = {}, residual {:.2e}",
        nf,
        p.len(),
        blocks.len(),
        factor.nnz_l(),
        relative_residual
    );

    let mut full = r.prescribed.clone();
    for (k, &i) in r.free.iter().enumerate() {
        full[i] = u[k];
    }
    let displacement = full.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Ok(MixedSolution {
        displacement,
        pressure: p,
        diagnostics: SolverDiagnostics {
            free_displacement_dofs: nf,
            pressure_dofs: r.c.len(),
            pressure_blocks: blocks.len(),
            largest_pressure_block: blocks.iter().map(|b| b.triangles.len()).max().unwrap_or(0),
            factor_nnz: factor.nnz_l(),
            pivot_ratio,
            relative_residual,
            refinement_steps: steps,
            ill_conditioned,
        },
    })
}

/// Testing `q = 1` in the pressure equation gives
/// `int p_h + kappa int_{boundary} g_I . n = 0` because the jump terms vanish on constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureMeanCheck {
    pub pressure_integral: f64,
    pub boundary_flux: f64,
    pub defect: f64,
    pub tolerance: f64,
}

impl PressureMeanCheck {
    pub fn passed(&self) -> bool {
        self.defect <= self.tolerance
    }
}

pub fn pressure_mean_check(mesh: &Mesh, topo: &EdgeTopology, solution: &MixedSolution, params: &MaterialParams) -> Result<PressureMeanCheck> {
    if solution.pressure.len() != mesh.n_triangles() || solution.displacement.len() != mesh.n_vertices() {
        return Err(Error::MeshMismatch("solution does not match mesh".into()));
    }
    let pressure_integral: f64 = (0..mesh.n_triangles()).map(|t| mesh.area(t) * solution.pressure[t]).sum();
    let mut flux = 0.0;
    let mut g_max: f64 = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            let e = topo.triangle_edges[t][k];
            if !topo.is_boundary[e] {
                continue;
            }
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            // counter-clockwise traversal: outward normal times length
            let n = [pb[1] - pa[1], pa[0] - pb[0]];
            let (ga, gb) = (solution.displacement[a], solution.displacement[b]);
            flux += 0.5 * ((ga[0] + gb[0]) * n[0] + (ga[1] + gb[1]) * n[1]);
            g_max = g_max.max(ga[0].abs()).max(ga[1].abs()).max(gb[0].abs()).max(gb[1].abs());
        }
    }
    let defect = (pressure_integral + params.kappa * flux).abs();
    Ok(PressureMeanCheck {
        pressure_integral,
        boundary_flux: flux,
        defect,
        tolerance: 1e-6 * (1.0 + params.kappa * g_max),
    })
}

/// Pattern-only helper used by tests and benchmarks: the condensed system size.
pub fn condensed_dimension(system: &SaddleSystem) -> usize {
    system.n_displacement() - system.dirichlet.len()
}

#[doc(hidden)]
pub fn dense_reference_solve(system: &SaddleSystem) -> Option<(Vec<f64>, Vec<f64>)> {
    // constrained full system: prescribed rows replaced by identity
    let mut k = system.dense_matrix();
    let nu = system.n_displacement();
    let n = k.len();
    let mut rhs: Vec<f64> = system.rhs_u.iter().chain(&system.rhs_p).copied().collect();
    for (&dof, &g) in &system.dirichlet {
        k[dof] = vec![0.0; n];
        k[dof][dof] = 1.0;
        rhs[dof] = g;
    }
    let k = DMatrix::from_fn(n, n, |i, j| k[i][j]);
    let x = k.lu().solve(&DVector::from_vec(rhs))?;
    Some((x.as_slice()[..nu].to_vec(), x.as_slice()[nu..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_saddle_system, Formulation};
    use crate::geometry::Point;
    use crate::mesh::{build_edge_topology, derive_macroelements, generate_initial_mesh, mark_dorfler, refine_rgb, Domain};

    fn system(mesh: &Mesh, params: &MaterialParams, f: &dyn Fn(Point) -> [f64; 2], g: &dyn Fn(Point) -> [f64; 2]) -> SaddleSystem {
        let topo = build_edge_topology(mesh).unwrap();
        let macros = derive_macroelements(mesh, &topo).unwrap();
        assemble_saddle_system(mesh, &topo, &macros, params, f, g).unwrap()
    }

    fn graded_mesh() -> Mesh {
        let mut m = generate_initial_mesh(Domain::LShape, 1).unwrap();
        for _ in 0..2 {
            let ind: Vec<f64> = (0..m.n_triangles()).map(|t| 1.0 / (1e-3 + crate::geometry::distance(m.centroid(t), [0.0, 0.0]))).collect();
            m = refine_rgb(&m, &mark_dorfler(&ind, 0.3).unwrap()).unwrap();
        }
        m
    }

    #[test]
    fn patch_solution_is_reproduced() {
        for domain in [Domain::UnitSquare, Domain::LShape] {
            let m = generate_initial_mesh(domain, 1).unwrap();
            for form in [Formulation::Herrmann, Formulation::Hydrostatic] {
                let params = MaterialParams::from_engineering(1.0, 0.3, form).unwrap();
                let sol = solve_direct(&system(&m, &params, &|_| [0.0, 0.0], &|x| [x[0], -x[1]])).unwrap();
                for (v, u) in sol.displacement.iter().enumerate() {
                    let x = m.vertices[v];
                    assert!((u[0] - x[0]).abs() < 1e-10 && (u[1] + x[1]).abs() < 1e-10);
                }
                assert!(sol.pressure.iter().all(|p| p.abs() < 1e-10));
                assert!(sol.diagnostics.relative_residual < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = generate_initial_mesh(Domain::UnitSquare, 1).unwrap();
        let params = MaterialParams::from_engineering(1.0, 0.49, Formulation::Herrmann).unwrap();
        let sol = solve_direct(&system(&m, &params, &|_| [0.0, 0.0], &|_| [0.0, 0.0])).unwrap();
        assert!(sol.displacement.iter().all(|u| u[0] == 0.0 && u[1] == 0.0));
        assert!(sol.pressure.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn matches_dense_constrained_solve() {
        let m = graded_mesh();
        let f = |x: Point| [(3.0 * x[0]).sin() + x[1], x[0] * x[1] - 1.0];
        let g = |x: Point| [0.1 * x[1] * x[1], -0.2 * x[0]];
        for form in [Formulation::Herrmann, Formulation::Hydrostatic] {
            let params = MaterialParams::from_engineering(3.0, 0.45, form).unwrap();
            let sys = system(&m, &params, &f, &g);
            let sol = solve_direct(&sys).unwrap();
            let (u, p) = dense_reference_solve(&sys).unwrap();
            let ud = sol.displacement_dofs();
            let scale = u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (a, b) in ud.iter().zip(&u) {
                assert!((a - b).abs() < 1e-9 * scale.max(1.0));
            }
            let pscale = p.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (a, b) in sol.pressure.iter().zip(&p) {
                assert!((a - b).abs() < 1e-9 * pscale.max(1.0));
            }
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let m = graded_mesh();
        let params = MaterialParams::from_engineering(1.0, 0.4999, Formulation::Herrmann).unwrap();
        let f = |x: Point| [x[1], 1.0];
        let sys = system(&m, &params, &f, &|_| [0.0, 0.0]);
        let a = solve_direct(&sys).unwrap();
        let b = solve_direct(&sys).unwrap();
        assert_eq!(a.displacement, b.displacement);
        assert_eq!(a.pressure, b.pressure);
    }

    #[test]
    fn pressure_mean_identity() {
        let m = graded_mesh();
        let topo = build_edge_topology(&m).unwrap();
        let params = MaterialParams::from_engineering(1.0, 0.49999, Formulation::Herrmann).unwrap();
        let g = |x: Point| [x[0] * x[0], 0.3 * x[1]];
        let sol = solve_direct(&system(&m, &params, &|_| [1.0, 0.0], &g)).unwrap();
        let chk = pressure_mean_check(&m, &topo, &sol, &params).unwrap();
        assert!(chk.boundary_flux.abs() > 0.1);
        assert!(chk.passed(), "{chk:?}");
    }

    #[test]
    fn missing_boundary_dof_is_reported() {
        let m = generate_initial_mesh(Domain::UnitSquare, 1).unwrap();
        let params = MaterialParams::from_engineering(1.0, 0.3, Formulation::Herrmann).unwrap();
        let mut sys = system(&m, &params, &|_| [0.0, 0.0], &|_| [0.0, 0.0]);
        let vals = sys.dirichlet.clone();
        sys.dirichlet.remove(&0);
        let mut missing = vals.clone();
        missing.remove(&1);
        sys.dirichlet = vals;
        assert_eq!(apply_dirichlet(&sys, &missing).unwrap_err(), Error::MissingBoundaryValue(1));
    }
}
