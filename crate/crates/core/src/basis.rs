//! Shape functions on a triangle and the quadrature rules used with them.
//!
//! Everything is expressed in barycentric coordinates `(l0, l1, l2)`; physical
//! gradients come from the constant barycentric gradients of the element.

use crate::geometry::Point;
use crate::{Error, Result};

/// Symmetric triangle rule; weights sum to one and are scaled by the element
/// area at the use site.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

fn orbit3(a: f64, w: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        pts.push(p);
        wts.push(w);
    }
}

/// Rules of exactness degree 1 (centroid), 2 (3 points), 3 (6 points, exact
/// to degree 4) and 5 (7 points).
pub fn quadrature_rule(degree: usize) -> Result<QuadRule> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let exact = match degree {
        1 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(1.0);
            1
        }
        2 => {
            orbit3(1.0 / 6.0, 1.0 / 3.0, &mut points, &mut weights);
            2
        }
        3 => {
            orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut points, &mut weights);
            orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut points, &mut weights);
            4
        }
        5 => {
            points.push([1.0 / 3.0; 3]);
            weights.push(0.225);
            let s = 15f64.sqrt();
            orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0, &mut points, &mut weights);
            orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0, &mut points, &mut weights);
            5
        }
        d => return Err(Error::InvalidArgument(format!("no quadrature rule of degree {d}"))),
    };
    Ok(QuadRule { points, weights, degree: exact })
}

/// Two-point Gauss rule on an edge, as (parameter in [0,1], weight) pairs.
/// Weights sum to one and are scaled by the edge length.
pub const EDGE_GAUSS: [(f64, f64); 2] = [
    (0.211_324_865_405_187_1, 0.5),
    (0.788_675_134_594_812_9, 0.5),
];

/// P1 values and reference gradients (with respect to `(l1, l2)` on the
/// reference triangle `(0,0), (1,0), (0,1)`).
pub fn p1_eval(l: [f64; 3]) -> ([f64; 3], [Point; 3]) {
    (l, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
}

/// Bubble space on one triangle: a quadratic edge bubble `4 l_i l_j` for each
/// interior edge plus the cubic bubble `27 l0 l1 l2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBubbleSpace {
    /// Local edge indices (edge `k` is opposite vertex `k`) carrying an edge bubble.
    pub edge_ids: Vec<usize>,
}

impl LocalBubbleSpace {
    pub fn basis_count(&self) -> usize {
        self.edge_ids.len() + 1
    }

    pub fn values(&self, l: [f64; 3]) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .edge_ids
            .iter()
            .map(|&k| 4.0 * l[(k + 1) % 3] * l[(k + 2) % 3])
            .collect();
        v.push(27.0 * l[0] * l[1] * l[2]);
        v
    }

    /// Physical gradients given the element's barycentric gradients.
    pub fn gradients(&self, l: [f64; 3], grad_l: &[Point; 3]) -> Vec<Point> {
        let comb = |c: [f64; 3]| -> Point {
            [
                c[0] * grad_l[0][0] + c[1] * grad_l[1][0] + c[2] * grad_l[2][0],
                c[0] * grad_l[0][1] + c[1] * grad_l[1][1] + c[2] * grad_l[2][1],
            ]
        };
        let mut g: Vec<Point> = self
            .edge_ids
            .iter()
            .map(|&k| {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let mut c = [0.0; 3];
                c[i] = 4.0 * l[j];
                c[j] = 4.0 * l[i];
                comb(c)
            })
            .collect();
        g.push(comb([27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]]));
        g
    }
}

/// Builds the bubble space of triangle `triangle` from its interior-edge flags
/// (indexed by local edge).
///
/// Triangles with fewer than two interior edges are outside the setting the
/// local problems are designed for; `allow_single_edge` admits exactly one.
pub fn bubble_space(triangle: usize, interior: [bool; 3], allow_single_edge: bool) -> Result<LocalBubbleSpace> {
    let edge_ids: Vec<usize> = (0..3).filter(|&k| interior[k]).collect();
    let needed = if allow_single_edge { 1 } else { 2 };
    if edge_ids.len() < needed {
        return Err(Error::UnsupportedElement(triangle));
    }
    Ok(LocalBubbleSpace { edge_ids })
}
