//! Benchmark problems with their data, exact solutions and the energy error.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::assembly::{Formulation, MaterialParams, Tensor};
use crate::basis::quadrature_rule;
use crate::geometry::{self, Point};
use crate::mesh::{Domain, Mesh};
use crate::solve::MixedSolution;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// Smooth divergence-free flow on the unit square, zero boundary data.
    Test1,
    /// Unit square with a rough horizontal shear on the top edge.
    Test2,
    /// Corner singularity on the L-shaped domain.
    Test3,
    /// Linear displacement `(x, -y)`, reproduced exactly.
    Patch,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Test1 => "1",
            ProblemId::Test2 => "2",
            ProblemId::Test3 => "3",
            ProblemId::Patch => "patch",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            ProblemId::Test3 => Domain::LShape,
            _ => Domain::UnitSquare,
        }
    }

    /// Reference material: `(shear modulus, nu)` for tests 1, 2 and the patch,
    /// `E = 1e5` for test 3.
    pub fn default_material(self, formulation: Formulation) -> MaterialParams {
        let m = match self {
            ProblemId::Test1 => MaterialParams::from_shear(100.0, 0.4, formulation),
            ProblemId::Test2 => MaterialParams::from_shear(1.0, 0.4, formulation),
            ProblemId::Test3 => MaterialParams::from_engineering(1e5, 0.4, formulation),
            ProblemId::Patch => MaterialParams::from_engineering(1.0, 0.3, formulation),
        };
        m.expect("reference materials are valid")
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "test1" => Ok(ProblemId::Test1),
            "2" | "test2" => Ok(ProblemId::Test2),
            "3" | "test3" => Ok(ProblemId::Test3),
            "patch" => Ok(ProblemId::Patch),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }
}

/// Exponent of the top-edge profile in test 2.
pub const TEST2_EXPONENT: f64 = 0.6;
/// Singular exponent of test 3.
pub const TEST3_ALPHA: f64 = 0.544483736782;
/// Half the interior angle of the re-entrant corner.
pub const TEST3_OMEGA: f64 = 3.0 * PI / 4.0;
const R_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub id: ProblemId,
    pub domain: Domain,
    pub params: MaterialParams,
    c1: f64,
    c2: f64,
}

pub fn make_problem(id: ProblemId, params: MaterialParams) -> Problem {
    let a = TEST3_ALPHA;
    let w = TEST3_OMEGA;
    Problem {
        id,
        domain: id.domain(),
        params,
        c1: -((a + 1.0) * w).cos() / ((a - 1.0) * w).cos(),
        c2: 2.0 * (params.lambda + 2.0 * params.mu) / (params.lambda + params.mu),
    }
}

impl Problem {
    pub fn has_exact(&self) -> bool {
        self.id != ProblemId::Test2
    }

    pub fn body_force(&self, x: Point) -> [f64; 2] {
        match self.id {
            ProblemId::Test1 => {
                let k = 2.0 * self.params.mu * PI.powi(3);
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                [
                    -k * cy * sy * (2.0 * (2.0 * PI * x[0]).cos() - 1.0),
                    k * cx * sx * (2.0 * (2.0 * PI * x[1]).cos() - 1.0),
                ]
            }
            _ => [0.0, 0.0],
        }
    }

    /// Dirichlet data at a boundary point.
    pub fn boundary_value(&self, x: Point) -> [f64; 2] {
        match self.id {
            ProblemId::Test1 => [0.0, 0.0],
            ProblemId::Test2 => {
                if (x[1] - 1.0).abs() < 1e-12 {
                    let base = (1.0 - 4.0 * (x[0] - 0.5).powi(2)).max(0.0);
                    [base.powf(TEST2_EXPONENT), 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
            ProblemId::Test3 | ProblemId::Patch => self.test3_or_patch_u(x),
        }
    }

    fn test3_or_patch_u(&self, x: Point) -> [f64; 2] {
        match self.id {
            ProblemId::Patch => [x[0], -x[1]],
            _ => {
                let (r, theta) = polar(x);
                let (ur, ut) = self.polar_profile(r, theta - PI / 4.0);
                let (s, c) = theta.sin_cos();
                [ur * c - ut * s, ur * s + ut * c]
            }
        }
    }

    /// `(u_r, u_theta)` at radius `r` and angle `phi` from the symmetry axis.
    fn polar_profile(&self, r: f64, phi: f64) -> (f64, f64) {
        let (a, b) = self.angular(phi);
        let scale = r.powf(TEST3_ALPHA) / (2.0 * self.params.mu);
        (scale * a, scale * b)
    }

    fn angular(&self, phi: f64) -> (f64, f64) {
        let al = TEST3_ALPHA;
        let (c1, c2) = (self.c1, self.c2);
        (
            -(al + 1.0) * ((al + 1.0) * phi).cos() + (c2 - al - 1.0) * c1 * ((al - 1.0) * phi).cos(),
            (al + 1.0) * ((al + 1.0) * phi).sin() + (c2 + al - 1.0) * c1 * ((al - 1.0) * phi).sin(),
        )
    }

    fn angular_derivative(&self, phi: f64) -> (f64, f64) {
        let al = TEST3_ALPHA;
        let (c1, c2) = (self.c1, self.c2);
        (
            (al + 1.0).powi(2) * ((al + 1.0) * phi).sin() - (c2 - al - 1.0) * c1 * (al - 1.0) * ((al - 1.0) * phi).sin(),
            (al + 1.0).powi(2) * ((al + 1.0) * phi).cos() + (c2 + al - 1.0) * c1 * (al - 1.0) * ((al - 1.0) * phi).cos(),
        )
    }

    pub fn exact_displacement(&self, x: Point) -> Result<[f64; 2]> {
        match self.id {
            ProblemId::Test1 => {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                Ok([PI * cy * sx * sx * sy, -PI * cx * sy * sy * sx])
            }
            ProblemId::Test2 => Err(Error::NoExactSolution("test problem 2")),
            _ => Ok(self.test3_or_patch_u(x)),
        }
    }

    /// `grad[a][b] = d u_a / d x_b`
    pub fn exact_gradient(&self, x: Point) -> Result<Tensor> {
        match self.id {
            ProblemId::Test1 => {
                let p2 = PI * PI;
                let s2x = (2.0 * PI * x[0]).sin();
                let s2y = (2.0 * PI * x[1]).sin();
                let d = 0.5 * p2 * s2x * s2y;
                Ok([
                    [d, p2 * (PI * x[0]).sin().powi(2) * (2.0 * PI * x[1]).cos()],
                    [-p2 * (2.0 * PI * x[0]).cos() * (PI * x[1]).sin().powi(2), -d],
                ])
            }
            ProblemId::Test2 => Err(Error::NoExactSolution("test problem 2")),
            ProblemId::Patch => Ok([[1.0, 0.0], [0.0, -1.0]]),
            ProblemId::Test3 => {
                let (r, theta) = polar(x);
                let phi = theta - PI / 4.0;
                let scale = r.powf(TEST3_ALPHA) / (2.0 * self.params.mu);
                let (a, b) = self.angular(phi);
                let (da, db) = self.angular_derivative(phi);
                let (s, c) = theta.sin_cos();
                // cartesian u = R(theta) (u_r, u_theta)
                let u = [scale * (a * c - b * s), scale * (a * s + b * c)];
                let du_dr = [TEST3_ALPHA / r * u[0], TEST3_ALPHA / r * u[1]];
                let du_dt = [
                    scale * (da * c - db * s - a * s - b * c),
                    scale * (da * s + db * c + a * c - b * s),
                ];
                let mut g = [[0.0; 2]; 2];
                for k in 0..2 {
                    g[k][0] = c * du_dr[k] - s / r * du_dt[k];
                    g[k][1] = s * du_dr[k] + c / r * du_dt[k];
                }
                Ok(g)
            }
        }
    }

    pub fn exact_pressure(&self, x: Point) -> Result<f64> {
        match self.id {
            ProblemId::Test1 | ProblemId::Patch => Ok(0.0),
            ProblemId::Test2 => Err(Error::NoExactSolution("test problem 2")),
            ProblemId::Test3 => {
                let g = self.exact_gradient(x)?;
                Ok(-self.params.kappa * (g[0][0] + g[1][1]))
            }
        }
    }
}

/// Radius (clamped away from zero) and angle in `(-pi, pi]`. The L-shaped
/// domain covers angles `[-pi/2, pi]`, so the branch cut lies outside it.
fn polar(x: Point) -> (f64, f64) {
    (x[0].hypot(x[1]).max(R_MIN), x[1].atan2(x[0]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyError {
    pub total: f64,
    /// `2 mu |grad(u - u_h)|^2`
    pub displacement: f64,
    /// `(2 mu)^{-1} |p - p_h|^2`
    pub pressure_shear: f64,
    /// `kappa^{-1} |p - p_h|^2`
    pub pressure_bulk: f64,
}

/// Energy norm of the error against exact fields given as closures.
pub fn energy_error_fields(
    mesh: &Mesh,
    displacement: &[[f64; 2]],
    pressure: &[f64],
    params: &MaterialParams,
    exact_gradient: &dyn Fn(Point) -> Result<Tensor>,
    exact_pressure: &dyn Fn(Point) -> Result<f64>,
) -> Result<EnergyError> {
    if displacement.len() != mesh.n_vertices() || pressure.len() != mesh.n_triangles() {
        return Err(Error::MeshMismatch("solution does not match mesh".into()));
    }
    let rule = quadrature_rule(5)?;
    let (mut du, mut dp) = (0.0, 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(t);
        let area = geometry::area(&p);
        let g = geometry::barycentric_gradients(&p);
        let mut gh = [[0.0; 2]; 2];
        for i in 0..3 {
            for a in 0..2 {
                for b in 0..2 {
                    gh[a][b] += displacement[tri[i]][a] * g[i][b];
                }
            }
        }
        for (l, w) in rule.iter() {
            let x = geometry::from_barycentric(&p, l);
            let ge = exact_gradient(x)?;
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += (ge[a][b] - gh[a][b]).powi(2);
                }
            }
            du += area * w * s;
            dp += area * w * (exact_pressure(x)? - pressure[t]).powi(2);
        }
    }
    let displacement = 2.0 * params.mu * du;
    let pressure_shear = dp / (2.0 * params.mu);
    let pressure_bulk = dp / params.kappa;
    Ok(EnergyError {
        total: (displacement + pressure_shear + pressure_bulk).sqrt(),
        displacement,
        pressure_shear,
        pressure_bulk,
    })
}

pub fn energy_error(mesh: &Mesh, solution: &MixedSolution, problem: &Problem) -> Result<EnergyError> {
    if !problem.has_exact() {
        return Err(Error::NoExactSolution("test problem 2"));
    }
    energy_error_fields(
        mesh,
        &solution.displacement,
        &solution.pressure,
        &problem.params,
        &|x| problem.exact_gradient(x),
        &|x| problem.exact_pressure(x),
    )
}
