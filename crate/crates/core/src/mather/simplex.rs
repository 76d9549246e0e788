//! Dense two-phase tableau simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Pricing is Dantzig (most negative reduced cost); after a run of
//! degenerate pivots the solver switches to Bland's rule until the
//! objective moves again, which rules out cycling.

use thiserror::Error;

const COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one optimum {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded along column {0}")]
    Unbounded(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex stopped after {0} pivots")]
    IterationLimit(usize),
}

/// `min c.x` subject to `A x = b`, `x >= 0`; `A` is stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, LpError> {
        if a.len() != b.len() {
            return Err(LpError::Malformed(format!(
                "{} rows but {} right-hand sides",
                a.len(),
                b.len()
            )));
        }
        if let Some(r) = a.iter().position(|row| row.len() != c.len()) {
            return Err(LpError::Malformed(format!(
                "row {r} has {} entries, expected {}",
                a[r].len(),
                c.len()
            )));
        }
        let finite = c
            .iter()
            .chain(&b)
            .chain(a.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(Self { c, a, b })
    }

    pub fn vars(&self) -> usize {
        self.c.len()
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    /// `max_r |(A x - b)_r|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| (row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
    /// Primal feasibility residual against the original constraints.
    pub residual: f64,
}

/// Solves `lp` from scratch.
pub fn lp_simplex(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let mut t = Tableau::phase_one(lp)?;
    t.optimize()?;
    let x = t.primal();
    Ok(LpSolution {
        value: lp.c.iter().zip(&x).map(|(c, x)| c * x).sum(),
        residual: lp.residual(&x),
        x,
        pivots: t.pivots,
    })
}

/// Optimal tableau kept for re-optimization under extra constraints.
#[derive(Clone)]
pub(crate) struct Tableau {
    // rows of [structural columns | rhs]
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    // reduced costs with the negated objective value in the last slot
    obj: Vec<f64>,
    cost: Vec<f64>,
    ncols: usize,
    pivots: usize,
    max_pivots: usize,
}

impl std::fmt::Debug for Tableau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tableau")
            .field("rows", &self.rows.len())
            .field("cols", &self.ncols)
            .field("pivots", &self.pivots)
            .finish()
    }
}

impl Tableau {
    /// Runs phase one and removes artificial variables from the basis,
    /// dropping rows that turn out to be redundant.
    pub(crate) fn phase_one(lp: &LinearProgram) -> Result<Self, LpError> {
        let ncols = lp.vars();
        let nrows = lp.rows();
        let mut rows = Vec::with_capacity(nrows);
        for (row, &b) in lp.a.iter().zip(&lp.b) {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let mut r: Vec<f64> = row.iter().map(|v| sign * v).collect();
            r.push(sign * b);
            rows.push(r);
        }
        // artificial k is column ncols + k; it never re-enters
        let basis: Vec<usize> = (ncols..ncols + nrows).collect();
        let mut phase1 = vec![0.0; ncols + 1];
        for r in &rows {
            for (o, v) in phase1.iter_mut().zip(r) {
                *o -= v;
            }
        }
        let mut t = Self {
            rows,
            basis,
            obj: phase1,
            cost: vec![0.0; ncols],
            ncols,
            pivots: 0,
            max_pivots: 50 * (ncols + nrows) + 1000,
        };
        t.optimize()?;
        let infeas = -t.obj[ncols];
        let scale = 1.0 + lp.b.iter().map(|b| b.abs()).sum::<f64>();
        if infeas > FEAS_TOL * scale {
            return Err(LpError::Infeasible(infeas));
        }

        let mut is_basic = vec![false; ncols];
        for &b in &t.basis {
            if b < ncols {
                is_basic[b] = true;
            }
        }
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] < ncols {
                r += 1;
                continue;
            }
            let entering = (0..ncols)
                .filter(|&q| !is_basic[q])
                .map(|q| (q, t.rows[r][q].abs()))
                .filter(|&(_, a)| a > 1e-9)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match entering {
                Some((q, _)) => {
                    t.pivot(r, q);
                    is_basic[q] = true;
                    r += 1;
                }
                None => {
                    t.rows.remove(r);
                    t.basis.remove(r);
                }
            }
        }
        t.set_objective(&lp.c);
        Ok(t)
    }

    pub(crate) fn set_objective(&mut self, c: &[f64]) {
        assert_eq!(c.len(), self.ncols);
        self.cost = c.to_vec();
        let mut obj = c.to_vec();
        obj.push(0.0);
        for (row, &bv) in self.rows.iter().zip(&self.basis) {
            let cb = if bv < self.ncols { c[bv] } else { 0.0 };
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o -= cb * v;
                }
            }
        }
        self.obj = obj;
    }

    /// Appends `coeffs . x + s = rhs` with a fresh slack `s` made basic.
    /// The current basis must satisfy the new row with `s >= 0`.
    pub(crate) fn add_slack_row(&mut self, coeffs: &[f64], rhs: f64) {
        assert_eq!(coeffs.len(), self.ncols);
        let slack = self.ncols;
        self.ncols += 1;
        for row in &mut self.rows {
            let b = row.pop().unwrap();
            row.push(0.0);
            row.push(b);
        }
        let mut new_row = coeffs.to_vec();
        new_row.push(1.0);
        new_row.push(rhs);
        for (row, &bv) in self.rows.iter().zip(&self.basis) {
            let k = if bv < slack { coeffs[bv] } else { 0.0 };
            if k != 0.0 {
                for (o, v) in new_row.iter_mut().zip(row) {
                    *o -= k * v;
                }
            }
        }
        // phase one left no artificial in the basis, so index `slack` is free
        self.rows.push(new_row);
        self.basis.push(slack);
        let b = self.obj.pop().unwrap();
        self.obj.push(0.0);
        self.obj.push(b);
        self.cost.push(0.0);
    }

    pub(crate) fn ncols(&self) -> usize {
        self.ncols
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let p = self.rows[r][q];
        for v in &mut self.rows[r] {
            *v /= p;
        }
        let pr = std::mem::take(&mut self.rows[r]);
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, a) in row.iter_mut().zip(&pr) {
                    *v -= f * a;
                }
                row[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for (v, a) in self.obj.iter_mut().zip(&pr) {
                *v -= f * a;
            }
            self.obj[q] = 0.0;
        }
        self.rows[r] = pr;
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Primal simplex on the current objective row.
    pub(crate) fn optimize(&mut self) -> Result<(), LpError> {
        let rhs = self.ncols;
        let mut is_basic = vec![false; self.ncols];
        for &b in &self.basis {
            if b < self.ncols {
                is_basic[b] = true;
            }
        }
        let mut stall = 0;
        let mut bland = false;
        loop {
            if self.pivots > self.max_pivots {
                return Err(LpError::IterationLimit(self.pivots));
            }
            let q = if bland {
                (0..self.ncols).find(|&j| !is_basic[j] && self.obj[j] < -COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..self.ncols {
                    let d = self.obj[j];
                    if !is_basic[j] && d < -COST_TOL && best.is_none_or(|b| d < b.1) {
                        best = Some((j, d));
                    }
                }
                best.map(|b| b.0)
            };
            let Some(q) = q else { return Ok(()) };

            let mut leave: Option<(usize, f64, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                let a = row[q];
                if a > PIVOT_TOL {
                    let ratio = row[rhs].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio, la)) => {
                            if ratio < lratio - 1e-12 {
                                true
                            } else if ratio <= lratio + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    a > la
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio, a));
                    }
                }
            }
            let Some((r, ratio, _)) = leave else {
                return Err(LpError::Unbounded(q));
            };
            if ratio <= 1e-12 {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            let old = self.basis[r];
            if old < self.ncols {
                is_basic[old] = false;
            }
            self.pivot(r, q);
            is_basic[q] = true;
        }
    }

    /// Current basic solution over the structural columns.
    pub(crate) fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.ncols];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.ncols {
                x[b] = row[self.ncols].max(0.0);
            }
        }
        x
    }

    /// `c.x` at the current basis.
    pub(crate) fn value(&self) -> f64 {
        self.primal()
            .iter()
            .zip(&self.cost)
            .map(|(x, c)| x * c)
            .sum()
    }
}
