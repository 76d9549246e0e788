//! Uniform periodic grids on the circle and the fields sampled on them.

use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};

/// Nodes `x_i = i * h`, `h = period / n`; indices wrap modulo `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
    period: f64,
}

impl TorusGrid {
    /// Experiments use `n >= 8`; smaller grids are accepted for unit checks.
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(
                "n",
                format!("need at least 2 nodes, got {n}"),
            ));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid(
                "period",
                format!("must be positive, got {period}"),
            ));
        }
        Ok(Self { n, period })
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn h(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Index of the node closest to `x` (periodically).
    pub fn nearest(&self, x: f64) -> usize {
        let s = (x / self.h()).round() as isize;
        self.wrap(s)
    }

    /// Periodic index distance between two nodes.
    pub fn index_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.n - d)
    }
}

/// A real function sampled at the nodes of a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(
                "values",
                format!("expected {} samples, got {}", grid.n(), values.len()),
            ));
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n()],
        }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    /// Samples a formula in `x` at the grid nodes.
    pub fn from_expr(grid: TorusGrid, e: &Expr) -> Result<Self> {
        e.check_vars(&[Var::X])?;
        let values = grid
            .nodes()
            .map(|x| e.eval(&Bindings::new().x(x)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Periodic piecewise-linear interpolation, exact at the nodes.
    pub fn interp(&self, x: f64) -> f64 {
        interp_index(&self.values, x / self.grid.h())
    }

    /// Sup-norm distance over the nodes.
    pub fn sup_diff(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        Ok(sup_diff_slices(&self.values, &other.values))
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec_unchecked(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn shifted(&self, c: f64) -> Field {
        self.map(|v| v + c)
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Field::from_vec_unchecked(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest difference quotient between neighbouring nodes.
    pub fn lipschitz(&self) -> f64 {
        let n = self.values.len();
        let h = self.grid.h();
        (0..n)
            .map(|i| (self.values[(i + 1) % n] - self.values[i]).abs() / h)
            .fold(0.0, f64::max)
    }

    /// Resamples onto another grid of the same period by interpolation.
    pub fn resample(&self, target: TorusGrid) -> Result<Field> {
        if (target.period() - self.grid.period()).abs() > 1e-12 * self.grid.period() {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_vec_unchecked(
            target,
            target.nodes().map(|x| self.interp(x)).collect(),
        ))
    }

    /// Writes `x,value` rows with 17 significant digits.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt17(self.grid.node(i)), fmt17(*v))?;
        }
        Ok(())
    }
}

/// 17-significant-digit scientific formatting used by every CSV artifact.
pub fn fmt17(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.16e}").unwrap();
    s
}

pub(crate) fn sup_diff_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Linear interpolation at fractional index `s` of a periodic sample vector.
/// Indices within 1e-9 of an integer are treated as that node.
#[inline]
pub(crate) fn interp_index(values: &[f64], s: f64) -> f64 {
    let n = values.len();
    let r = s.round();
    if (s - r).abs() <= 1e-9 {
        return values[(r as i64).rem_euclid(n as i64) as usize];
    }
    let fl = s.floor();
    let frac = s - fl;
    let i0 = (fl as i64).rem_euclid(n as i64) as usize;
    let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
    (1.0 - frac) * values[i0] + frac * values[i1]
}
