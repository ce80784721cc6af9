//! Fill-reducing ordering by coordinate-guided nested dissection.
//!
//! The node set is split at the coordinate median along its longer extent; the
//! nodes of the smaller side that touch the other side form the separator and
//! are numbered last. Small subsets are numbered as they come.

use super::CsrMatrix;

const LEAF: usize = 48;

/// Returns `perm` with `perm[new] = old`. `pattern` must be structurally
/// symmetric; `coords[i]` locates node `i`.
pub fn nested_dissection(pattern: &CsrMatrix, coords: &[[f64; 2]]) -> Vec<usize> {
    let n = pattern.nrows;
    assert_eq!(coords.len(), n);
    let mut perm = Vec::with_capacity(n);
    // side[i]: 0 = not in the current subset, 1 = left, 2 = right
    let mut side = vec![0u8; n];
    let nodes: Vec<usize> = (0..n).collect();
    dissect(pattern, coords, nodes, &mut side, &mut perm);
    debug_assert_eq!(perm.len(), n);
    perm
}

fn dissect(pattern: &CsrMatrix, coords: &[[f64; 2]], mut nodes: Vec<usize>, side: &mut [u8], perm: &mut Vec<usize>) {
    if nodes.len() <= LEAF {
        perm.extend_from_slice(&nodes);
        return;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for &i in &nodes {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[i][d]);
            hi[d] = hi[d].max(coords[i][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    let mid = nodes.len() / 2;
    nodes.select_nth_unstable_by(mid, |&a, &b| {
        coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b))
    });
    let right = nodes.split_off(mid);
    let left = nodes;
    for &i in &left {
        side[i] = 1;
    }
    for &i in &right {
        side[i] = 2;
    }
    let touches = |i: usize, other: u8, side: &[u8]| {
        pattern.indices[pattern.indptr[i]..pattern.indptr[i + 1]].iter().any(|&j| side[j] == other)
    };
    let sep_left: Vec<usize> = left.iter().copied().filter(|&i| touches(i, 2, side)).collect();
    let sep_right: Vec<usize> = right.iter().copied().filter(|&i| touches(i, 1, side)).collect();
    for &i in left.iter().chain(&right) {
        side[i] = 0;
    }

    let (sep, a, b) = if sep_left.len() <= sep_right.len() {
        for &i in &sep_left {
            side[i] = 3;
        }
        let a: Vec<usize> = left.into_iter().filter(|&i| side[i] != 3).collect();
        (sep_left, a, right)
    } else {
        for &i in &sep_right {
            side[i] = 3;
        }
        let b: Vec<usize> = right.into_iter().filter(|&i| side[i] != 3).collect();
        (sep_right, left, b)
    };
    for &i in &sep {
        side[i] = 0;
    }
    dissect(pattern, coords, a, side, perm);
    dissect(pattern, coords, b, side, perm);
    perm.extend_from_slice(&sep);
}
