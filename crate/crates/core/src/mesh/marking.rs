use crate::{Error, Result};

/// Triangle indices selected for refinement, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkedSet {
    pub marked: Vec<usize>,
}

impl MarkedSet {
    pub fn all(n_triangles: usize) -> Self {
        MarkedSet { marked: (0..n_triangles).collect() }
    }

    pub fn len(&self) -> usize {
        self.marked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marked.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.marked.binary_search(&t).is_ok()
    }
}

pub fn mark_all(n_triangles: usize) -> MarkedSet {
    MarkedSet::all(n_triangles)
}

/// Dörfler (bulk) marking: the shortest prefix of the triangles sorted by
/// decreasing indicator whose squared indicators sum to at least
/// `theta` times the total. Ties go to the lower triangle index.
///
/// All-zero indicators yield an empty set and a logged warning.
pub fn mark_dorfler(indicator_squares: &[f64], theta: f64) -> Result<MarkedSet> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("bulk parameter {theta} not in (0,1)")));
    }
    if let Some(i) = indicator_squares.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "indicator {i} is {} (must be finite and nonnegative)",
            indicator_squares[i]
        )));
    }
    let total: f64 = indicator_squares.iter().sum();
    if total <= 0.0 {
        log::warn!("all error indicators vanish, nothing marked");
        return Ok(MarkedSet::default());
    }
    let mut order: Vec<usize> = (0..indicator_squares.len()).collect();
    // stable: equal values keep ascending index order
    order.sort_by(|&a, &b| indicator_squares[b].total_cmp(&indicator_squares[a]));

    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &t in &order {
        if indicator_squares[t] <= 0.0 {
            break;
        }
        acc += indicator_squares[t];
        marked.push(t);
        if acc >= target {
            break;
        }
    }
    marked.sort_unstable();
    Ok(MarkedSet { marked })
}
