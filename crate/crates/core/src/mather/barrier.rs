//! Minimal action, Peierls barrier and projected Aubry set by min-plus
//! dynamic programming on node-aligned time steps.
//!
//! With `dt` a multiple of `h / dv`, velocity `v_j` moves a whole number of
//! nodes per step, so the recursion
//! `H_{t+dt}[x][y] = min_j H_t[x][y - s_j] + dt (L[y][j] + c)` is exact on
//! the graph and needs no interpolation.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt17, TorusGrid};
use crate::hamiltonian::LagrangianTable;

pub const DEFAULT_HORIZONS: [f64; 3] = [4.0, 8.0, 16.0];
pub const DEFAULT_AUBRY_TOL: f64 = 1e-6;
const UNREACHED: f64 = 1e30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierTable {
    #[serde(skip)]
    grid: TorusGrid,
    /// Row-major `h[x][y]`.
    pub h: Vec<f64>,
    pub c_used: f64,
    pub aubry_indices: Vec<usize>,
    pub dt: f64,
}

impl BarrierTable {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.h[x * self.grid.n() + y]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.n()).map(|y| self.at(y, y)).collect()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "x,y,h")?;
        let n = self.grid.n();
        for x in 0..n {
            for y in 0..n {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt17(self.grid.node(x)),
                    fmt17(self.grid.node(y)),
                    fmt17(self.at(x, y))
                )?;
            }
        }
        Ok(())
    }
}

/// Node shift per step of each velocity; errors unless every `v_j dt / h`
/// is an integer.
fn shifts(lt: &LagrangianTable, dt: f64) -> Result<Vec<isize>> {
    let h = lt.grid().h();
    lt.vgrid()
        .values()
        .iter()
        .map(|&v| {
            let s = v * dt / h;
            let r = s.round();
            if (s - r).abs() > 1e-9 {
                Err(Error::invalid(
                    "dt",
                    format!("barrier steps must be node-aligned; v*dt/h = {s} for v = {v}"),
                ))
            } else {
                Ok(r as isize)
            }
        })
        .collect()
}

fn resolve_dt(lt: &LagrangianTable, dt: Option<f64>) -> Result<(f64, Vec<isize>)> {
    let dt = dt.unwrap_or_else(|| lt.node_aligned_dt());
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    Ok((dt, shifts(lt, dt)?))
}

/// One relaxation `next[y] = min_j cur[y - s_j] + dt (L[y][j] + c)`.
fn relax(lt: &LagrangianTable, s: &[isize], dt: f64, c: f64, cur: &[f64], next: &mut [f64]) {
    let n = cur.len() as isize;
    for (y, out) in next.iter_mut().enumerate() {
        let row = lt.row(y);
        let mut best = f64::INFINITY;
        for (j, &sj) in s.iter().enumerate() {
            let from = cur[(y as isize - sj).rem_euclid(n) as usize];
            if from < UNREACHED {
                best = best.min(from + dt * (row[j] + c));
            }
        }
        *out = best.min(UNREACHED);
    }
}

/// `h_t(x, y)` after `steps` node-aligned steps of normalized cost `L + c`;
/// unreachable pairs hold `1e30`.
pub fn minimal_action(
    lt: &LagrangianTable,
    c: f64,
    steps: usize,
    dt: Option<f64>,
) -> Result<Vec<f64>> {
    let (dt, s) = resolve_dt(lt, dt)?;
    let n = lt.grid().n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut cur = vec![UNREACHED; n];
            cur[x] = 0.0;
            let mut next = vec![0.0; n];
            for _ in 0..steps {
                relax(lt, &s, dt, c, &cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
            }
            cur
        })
        .collect();
    Ok(rows.concat())
}

/// Barrier surrogate: `min_t h_t` over every step from `t_list[0]` to the
/// last horizon, normalized by `c`.
pub fn peierls_barrier(
    lt: &LagrangianTable,
    c: f64,
    t_list: &[f64],
    dt: Option<f64>,
) -> Result<BarrierTable> {
    if t_list.is_empty() || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] <= 0.0 {
        return Err(Error::invalid(
            "t_list",
            "horizons must be positive and increasing",
        ));
    }
    let (dt, s) = resolve_dt(lt, dt)?;
    let grid = *lt.grid();
    let n = grid.n();
    let first = (t_list[0] / dt).ceil() as usize;
    let last = ((t_list[t_list.len() - 1] / dt).ceil() as usize).max(first);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut cur = vec![UNREACHED; n];
            cur[x] = 0.0;
            let mut next = vec![0.0; n];
            let mut best = vec![f64::INFINITY; n];
            for k in 1..=last {
                relax(lt, &s, dt, c, &cur, &mut next);
                std::mem::swap(&mut cur, &mut next);
                if k >= first {
                    for (b, v) in best.iter_mut().zip(&cur) {
                        *b = b.min(*v);
                    }
                }
            }
            best
        })
        .collect();
    let h = rows.concat();
    if let Some(k) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            node: k / n,
            value: h[k],
        });
    }
    let mut table = BarrierTable {
        grid,
        h,
        c_used: c,
        aubry_indices: Vec::new(),
        dt,
    };
    table.aubry_indices = aubry_set(&table, DEFAULT_AUBRY_TOL);
    Ok(table)
}

/// Exact critical value of the discrete dynamics: minus the minimum cycle
/// mean of `L` on the graph `y - s_j -> y` (Karp's algorithm).
pub fn discrete_critical_value(lt: &LagrangianTable, dt: Option<f64>) -> Result<f64> {
    let (_, s) = resolve_dt(lt, dt)?;
    let n = lt.grid().n();
    let ni = n as isize;
    // d[k][v]: least weight of a k-edge walk ending at v
    let mut d = vec![vec![f64::INFINITY; n]; n + 1];
    d[0].iter_mut().for_each(|v| *v = 0.0);
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k);
        let prev = &prev[k - 1];
        for (y, out) in cur[0].iter_mut().enumerate() {
            let row = lt.row(y);
            let mut best = f64::INFINITY;
            for (j, &sj) in s.iter().enumerate() {
                let from = prev[(y as isize - sj).rem_euclid(ni) as usize];
                best = best.min(from + row[j]);
            }
            *out = best;
        }
    }
    let mut mu = f64::INFINITY;
    for v in 0..n {
        if !d[n][v].is_finite() {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| d[k][v].is_finite())
            .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        mu = mu.min(worst);
    }
    if !mu.is_finite() {
        return Err(Error::invalid("L", "dynamics graph has no cycle"));
    }
    Ok(-mu)
}

/// Barrier normalized by the exact discrete critical value.
pub fn normalized_barrier(
    lt: &LagrangianTable,
    t_list: &[f64],
    dt: Option<f64>,
) -> Result<BarrierTable> {
    let c = discrete_critical_value(lt, dt)?;
    peierls_barrier(lt, c, t_list, dt)
}

/// Nodes `y` with `h(y, y) <= tol`.
pub fn aubry_set(bt: &BarrierTable, tol: f64) -> Vec<usize> {
    (0..bt.grid.n()).filter(|&y| bt.at(y, y) <= tol).collect()
}
