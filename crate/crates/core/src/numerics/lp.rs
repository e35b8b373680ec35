use serde::{Deserialize, Serialize};

use super::matrix::{dot, DenseMatrix};
use super::NumericsError;
use crate::Scalar;

const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarBound {
    /// `x_j >= 0`
    NonNegative,
    /// `x_j` unrestricted
    Free,
}

/// `opt c^T x  s.t.  A x = b`, each variable either non-negative or free.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub a: DenseMatrix<T>,
    pub b: Vec<T>,
    pub bounds: Vec<VarBound>,
    pub sense: Sense,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult<T> {
    Optimal { value: T, point: Vec<T> },
    Infeasible,
    Unbounded,
}

impl<T: Scalar> LpResult<T> {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpResult::Optimal { .. })
    }

    pub fn point(&self) -> Option<&[T]> {
        match self {
            LpResult::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }

    pub fn value(&self) -> Option<T> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl<T: Scalar> LinearProgram<T> {
    /// Feasibility problem (zero objective) over `A x = b`.
    pub fn feasibility(a: DenseMatrix<T>, b: Vec<T>, bounds: Vec<VarBound>) -> Self {
        let n = a.cols();
        Self {
            objective: vec![T::zero(); n],
            a,
            b,
            bounds,
            sense: Sense::Minimize,
        }
    }

    fn validate(&self) -> Result<(), NumericsError> {
        let n = self.objective.len();
        if self.a.cols() != n || self.bounds.len() != n || self.a.rows() != self.b.len() {
            return Err(NumericsError::Dimension(format!(
                "objective {n}, A {}x{}, b {}, bounds {}",
                self.a.rows(),
                self.a.cols(),
                self.b.len(),
                self.bounds.len()
            )));
        }
        if !self.b.iter().all(|v| v.is_finite()) || !self.a.is_finite() {
            return Err(NumericsError::Dimension("non-finite data".into()));
        }
        Ok(())
    }
}

struct Tableau<T> {
    /// `m` rows of `ncols + 1` entries; last entry is the rhs.
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl<T: Scalar> Tableau<T> {
    fn rhs(&self, i: usize) -> T {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != T::zero() {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = T::zero();
            }
        }
        self.basis[r] = c;
    }

    /// Bland's-rule primal simplex minimizing `cost` over columns `< allowed`.
    /// Returns `false` on unboundedness.
    fn minimize(&mut self, cost: &[T], allowed: usize, tol: T) -> bool {
        for _ in 0..MAX_PIVOTS {
            let m = self.rows.len();
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut r = cost[j];
                for i in 0..m {
                    r -= cost[self.basis[i]] * self.rows[i][j];
                }
                r < -tol
            });
            let Some(j) = entering else {
                return true;
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                let a = self.rows[i][j];
                if a > tol {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - tol
                                || ((ratio - br).abs() <= tol && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return false,
                Some((r, _)) => self.pivot(r, j),
            }
        }
        // Bland's rule terminates; the cap only guards against numerical loops.
        true
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpResult<T>, NumericsError> {
    lp.validate()?;
    let n = lp.objective.len();
    let m = lp.b.len();
    let tol = T::pivot_tol();
    let bscale = lp.b.iter().fold(T::one(), |s, v| s.max(v.abs()));
    let feas_tol = T::lit(1e-9).max(T::epsilon() * T::lit(100.0)) * bscale;

    // column layout: one column per non-negative var, two per free var
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut nc = 0;
    for b in &lp.bounds {
        match b {
            VarBound::NonNegative => {
                col_of.push((nc, None));
                nc += 1;
            }
            VarBound::Free => {
                col_of.push((nc, Some(nc + 1)));
                nc += 2;
            }
        }
    }
    let sign = match lp.sense {
        Sense::Minimize => T::one(),
        Sense::Maximize => -T::one(),
    };
    let mut cost = vec![T::zero(); nc + m];
    for (j, &(p, neg)) in col_of.iter().enumerate() {
        cost[p] = sign * lp.objective[j];
        if let Some(q) = neg {
            cost[q] = -sign * lp.objective[j];
        }
    }

    let ncols = nc + m;
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let flip = if lp.b[i] < T::zero() { -T::one() } else { T::one() };
        let mut row = vec![T::zero(); ncols + 1];
        for (j, &(p, neg)) in col_of.iter().enumerate() {
            let a = flip * lp.a[(i, j)];
            row[p] = a;
            if let Some(q) = neg {
                row[q] = -a;
            }
        }
        row[nc + i] = T::one();
        row[ncols] = flip * lp.b[i];
        rows.push(row);
    }
    let mut tab = Tableau {
        rows,
        basis: (nc..nc + m).collect(),
        ncols,
    };

    // phase 1
    let mut phase1 = vec![T::zero(); ncols];
    for c in phase1.iter_mut().skip(nc) {
        *c = T::one();
    }
    tab.minimize(&phase1, ncols, tol);
    let infeas = (0..m)
        .filter(|&i| tab.basis[i] >= nc)
        .fold(T::zero(), |s, i| s + tab.rhs(i).abs());
    if infeas > feas_tol {
        return Ok(LpResult::Infeasible);
    }

    // drive remaining artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= nc {
            let col = (0..nc)
                .filter(|j| !tab.basis.contains(j))
                .max_by(|&a, &b| {
                    tab.rows[i][a]
                        .abs()
                        .partial_cmp(&tab.rows[i][b].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .filter(|&j| tab.rows[i][j].abs() > tol);
            match col {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // phase 2
    if !tab.minimize(&cost, nc, tol) {
        return Ok(LpResult::Unbounded);
    }

    let mut cols = vec![T::zero(); nc];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < nc {
            cols[b] = tab.rhs(i).max(T::zero());
        }
    }
    let point: Vec<T> = col_of
        .iter()
        .map(|&(p, neg)| match neg {
            Some(q) => cols[p] - cols[q],
            None => cols[p],
        })
        .collect();
    let value = dot(&lp.objective, &point);
    Ok(LpResult::Optimal { value, point })
}
