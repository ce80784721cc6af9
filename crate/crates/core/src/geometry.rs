//! Small planar geometry helpers shared by the mesh, assembly and estimator code.

pub type Point = [f64; 2];

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn distance(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0].hypot(d[1])
}

#[inline]
pub fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Twice the signed area of the triangle (positive for counterclockwise order).
#[inline]
pub fn signed_area2(p: &[Point; 3]) -> f64 {
    (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])
}

#[inline]
pub fn area(p: &[Point; 3]) -> f64 {
    0.5 * signed_area2(p)
}

/// Constant gradients of the three barycentric coordinates.
pub fn barycentric_gradients(p: &[Point; 3]) -> [Point; 3] {
    let a2 = signed_area2(p);
    [
        [(p[1][1] - p[2][1]) / a2, (p[2][0] - p[1][0]) / a2],
        [(p[2][1] - p[0][1]) / a2, (p[0][0] - p[2][0]) / a2],
        [(p[0][1] - p[1][1]) / a2, (p[1][0] - p[0][0]) / a2],
    ]
}

/// Physical point for barycentric coordinates `l`.
#[inline]
pub fn from_barycentric(p: &[Point; 3], l: [f64; 3]) -> Point {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Longest edge length, used as the element diameter.
pub fn diameter(p: &[Point; 3]) -> f64 {
    distance(p[0], p[1]).max(distance(p[1], p[2])).max(distance(p[2], p[0]))
}

/// Smallest interior angle in radians.
pub fn min_angle(p: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let a = sub(p[(k + 1) % 3], p[k]);
            let b = sub(p[(k + 2) % 3], p[k]);
            let c = dot(a, b) / (a[0].hypot(a[1]) * b[0].hypot(b[1]));
            c.clamp(-1.0, 1.0).acos()
        })
        .fold(f64::INFINITY, f64::min)
}
