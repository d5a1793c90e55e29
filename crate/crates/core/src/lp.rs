//! Dense two-phase simplex over exact rationals.
//!
//! Sized for the audit oracles (tens of variables): a full tableau with
//! Bland's rule, so it always terminates and the optimum is exact.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("constraint has {found} coefficients, program has {expected} variables")]
    Shape { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: Q,
    pub x: Vec<Q>,
}

/// `minimize c·x` subject to linear constraints and `x ≥ 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    n: usize,
    cost: Vec<Q>,
    rows: Vec<(Vec<Q>, Relation, Q)>,
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cost: vec![Q::zero(); n],
            rows: Vec::new(),
        }
    }

    pub fn minimize(&mut self, cost: Vec<Q>) -> Result<&mut Self, LpError> {
        if cost.len() != self.n {
            return Err(LpError::Shape {
                expected: self.n,
                found: cost.len(),
            });
        }
        self.cost = cost;
        Ok(self)
    }

    pub fn constrain(&mut self, coeffs: Vec<Q>, rel: Relation, rhs: Q) -> Result<&mut Self, LpError> {
        if coeffs.len() != self.n {
            return Err(LpError::Shape {
                expected: self.n,
                found: coeffs.len(),
            });
        }
        self.rows.push((coeffs, rel, rhs));
        Ok(self)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let slack_count = self.rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let width = self.n + slack_count;
        let mut a = Vec::with_capacity(self.rows.len());
        let mut b = Vec::with_capacity(self.rows.len());
        let mut slack = self.n;
        for (coeffs, rel, rhs) in &self.rows {
            let mut row = coeffs.clone();
            row.resize(width, Q::zero());
            match rel {
                Relation::Le => {
                    row[slack] = Q::one();
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -Q::one();
                    slack += 1;
                }
                Relation::Eq => {}
            }
            let mut rhs = rhs.clone();
            if rhs.is_negative() {
                row.iter_mut().for_each(|v| *v = -v.clone());
                rhs = -rhs;
            }
            a.push(row);
            b.push(rhs);
        }
        let mut cost = self.cost.clone();
        cost.resize(width, Q::zero());
        let (objective, mut x) = solve_standard(a, b, &cost)?;
        x.truncate(self.n);
        Ok(LpSolution { objective, x })
    }
}

struct Tableau {
    /// `m` rows of `cols + 1` entries, last column is the right-hand side.
    rows: Vec<Vec<Q>>,
    /// Reduced costs followed by `-z`.
    obj: Vec<Q>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        if !self.obj[col].is_zero() {
            let f = self.obj[col].clone();
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = col;
    }

    /// Bland's rule iterations restricted to columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.obj[j].is_negative()) else {
                return Ok(());
            };
            let rhs = self.rows.first().map_or(0, |r| r.len() - 1);
            let mut best: Option<(usize, Q)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col].is_positive() {
                    let ratio = &row[rhs] / &row[col];
                    let better = match &best {
                        None => true,
                        Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, col);
        }
    }
}

fn solve_standard(a: Vec<Vec<Q>>, b: Vec<Q>, cost: &[Q]) -> Result<(Q, Vec<Q>), LpError> {
    let m = a.len();
    let n = cost.len();
    if m == 0 {
        if cost.iter().any(|c| c.is_negative()) {
            return Err(LpError::Unbounded);
        }
        return Ok((Q::zero(), vec![Q::zero(); n]));
    }
    // Phase 1 with one artificial per row.
    let cols = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, rhs)) in a.into_iter().zip(b).enumerate() {
        let mut full = row;
        full.resize(cols, Q::zero());
        full[n + i] = Q::one();
        full.push(rhs);
        rows.push(full);
    }
    let mut obj = vec![Q::zero(); cols + 1];
    for row in &rows {
        for j in 0..n {
            obj[j] -= &row[j];
        }
        obj[cols] -= &row[cols];
    }
    let mut t = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
    };
    t.optimize(cols)?;
    if !t.obj[cols].is_zero() {
        return Err(LpError::Infeasible);
    }
    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| !t.rows[r][j].is_zero()) {
                t.pivot(r, col);
            } else {
                t.rows.remove(r);
                t.basis.remove(r);
                continue;
            }
        }
        r += 1;
    }
    // Phase 2 on the original columns.
    for row in t.rows.iter_mut() {
        let rhs = row[cols].clone();
        row.truncate(n);
        row.push(rhs);
    }
    let mut obj: Vec<Q> = cost.to_vec();
    obj.push(Q::zero());
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        let cb = cost[bcol].clone();
        if cb.is_zero() {
            continue;
        }
        for (v, rv) in obj.iter_mut().zip(row) {
            *v -= &cb * rv;
        }
    }
    t.obj = obj;
    t.optimize(n)?;
    let mut x = vec![Q::zero(); n];
    for (row, &bcol) in t.rows.iter().zip(&t.basis) {
        x[bcol] = row[n].clone();
    }
    let objective = -t.obj[n].clone();
    Ok((objective, x))
}

/// Exact `min_r ‖v - Σ_i r_i w_i‖₁` over the probability simplex in `r`,
/// solved with the split-variable LP (`t_j ≥ ±(v - Σ r w)_j`).
pub fn l1_distance_to_hull(v: &[Q], ws: &[Vec<Q>]) -> Result<LpSolution, LpError> {
    let n = v.len();
    let s = ws.len();
    let mut lp = LinearProgram::new(s + n);
    let mut cost = vec![Q::zero(); s];
    cost.extend(std::iter::repeat_n(Q::one(), n));
    lp.minimize(cost)?;
    for j in 0..n {
        let mut upper = vec![Q::zero(); s + n];
        let mut lower = vec![Q::zero(); s + n];
        for (i, w) in ws.iter().enumerate() {
            upper[i] = w[j].clone();
            lower[i] = -w[j].clone();
        }
        upper[s + j] = Q::one();
        lower[s + j] = Q::one();
        lp.constrain(upper, Relation::Ge, v[j].clone())?;
        lp.constrain(lower, Relation::Ge, -v[j].clone())?;
    }
    let mut simplex = vec![Q::one(); s];
    simplex.extend(std::iter::repeat_n(Q::zero(), n));
    lp.constrain(simplex, Relation::Eq, Q::one())?;
    lp.solve()
}
