use super::{refine_rgb, Genealogy, MarkedSet, Mesh};
use crate::geometry::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// (0,1) x (0,1)
    UnitSquare,
    /// (-1,1)^2 minus (-1,0]^2, re-entrant corner at the origin.
    LShape,
}

impl Domain {
    /// Whether `p` lies on the boundary of the (closed) domain, up to `tol`.
    pub fn on_boundary(self, p: Point, tol: f64) -> bool {
        let [x, y] = p;
        match self {
            Domain::UnitSquare => {
                x.abs() < tol || (x - 1.0).abs() < tol || y.abs() < tol || (y - 1.0).abs() < tol
            }
            Domain::LShape => {
                (x + 1.0).abs() < tol && y >= -tol
                    || (x - 1.0).abs() < tol
                    || (y - 1.0).abs() < tol
                    || (y + 1.0).abs() < tol && x >= -tol
                    || x.abs() < tol && y <= tol
                    || y.abs() < tol && x <= tol
            }
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

/// Unit squares (given by lower-left corner) split along their south-west to
/// north-east diagonal.
fn base_mesh(squares: &[Point]) -> Mesh {
    let mut vertices: Vec<Point> = Vec::new();
    let index = |p: Point, vertices: &mut Vec<Point>| -> usize {
        match vertices.iter().position(|&q| q == p) {
            Some(i) => i,
            None => {
                vertices.push(p);
                vertices.len() - 1
            }
        }
    };
    let mut triangles = Vec::new();
    for &[x0, y0] in squares {
        let ll = index([x0, y0], &mut vertices);
        let lr = index([x0 + 1.0, y0], &mut vertices);
        let ur = index([x0 + 1.0, y0 + 1.0], &mut vertices);
        let ul = index([x0, y0 + 1.0], &mut vertices);
        triangles.push([ll, lr, ur]);
        triangles.push([ll, ur, ul]);
    }
    let n_t = triangles.len();
    // every base vertex is a corner of the domain outline
    let boundary = vec![true; vertices.len()];
    Mesh { vertices, triangles, boundary, genealogy: vec![Genealogy::ROOT; n_t] }
}

/// Structured initial mesh: the base split of the domain followed by
/// `refinement_level + 1` uniform red refinements, so every triangle has a
/// red parent.
pub fn generate_initial_mesh(domain: Domain, refinement_level: usize) -> Result<Mesh> {
    if refinement_level < 1 {
        return Err(Error::InvalidArgument(
            "initial refinement level must be at least 1".into(),
        ));
    }
    let squares: &[Point] = match domain {
        Domain::UnitSquare => &[[0.0, 0.0]],
        Domain::LShape => &[[-1.0, 0.0], [0.0, 0.0], [0.0, -1.0]],
    };
    let mut mesh = base_mesh(squares);
    for _ in 0..=refinement_level {
        let all = MarkedSet::all(mesh.n_triangles());
        mesh = refine_rgb(&mesh, &all)?;
    }
    Ok(mesh)
}
