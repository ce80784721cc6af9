//! Up-looking sparse LDLᵀ factorisation (elimination-tree based, no pivoting)
//! of a symmetric matrix under a fill-reducing permutation.

use super::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factorises the symmetric matrix `a` (full storage) permuted by `perm`.
    /// A zero or non-finite pivot is reported as [`Error::Singular`].
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.nrows;
        assert_eq!(a.ncols, n);
        assert_eq!(perm.len(), n);
        let mut pinv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }

        // symbolic: elimination tree and column counts
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for (j, _) in a.row(perm[k]) {
                let mut i = pinv[j];
                if i < k {
                    while flag[i] != k {
                        if parent[i] == NONE {
                            parent[i] = k;
                        }
                        lnz[i] += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // numeric
        let nnz = lp[n];
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = NONE);
        lnz.iter_mut().for_each(|c| *c = 0);
        for k in 0..n {
            y[k] = 0.0;
            let mut top = n;
            flag[k] = k;
            for (j, v) in a.row(perm[k]) {
                let mut i = pinv[j];
                if i <= k {
                    y[i] += v;
                    let mut len = 0;
                    while flag[i] != k {
                        pattern[len] = i;
                        len += 1;
                        flag[i] = k;
                        i = parent[i];
                    }
                    while len > 0 {
                        top -= 1;
                        len -= 1;
                        pattern[top] = pattern[len];
                    }
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            while top < n {
                let i = pattern[top];
                let yi = y[i];
                y[i] = 0.0;
                let end = lp[i] + lnz[i];
                for p in lp[i]..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[end] = k;
                lx[end] = l_ki;
                lnz[i] += 1;
                top += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(Error::Singular(perm[k]));
            }
        }
        Ok(LdlFactor { n, perm, lp, li, lx, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// min |d| / max |d| over the pivots.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self
            .d
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&v| v > 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
