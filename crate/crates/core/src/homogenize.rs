//! Periodic homogenization of `H(x, x/eps, Du, u) = 0` on the unit torus
//! with `eps = 1/k`.
//!
//! `H(x, y, p, u)` must split as `G(x, y, p) + W(x, y, u)`; the split is
//! read off the top-level sum of the formula. The effective Hamiltonian
//! `Hbar(x, p, c)` is the critical value of the cell Hamiltonian
//! `q -> H(x, y, p + q, c)` on the fast torus.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_value, CriticalOptions};
use crate::error::{Error, Result};
use crate::expr::{parse, Bindings, Expr, Var};
use crate::grid::{fmt17, interp_index, sup_diff_slices, Field, TorusGrid};
use crate::hamiltonian::{
    check_midpoint_convexity, legendre, legendre_fn, HamiltonianSpec, VelocityGrid,
};
use crate::semigroup::{stationary_with, step_count, Stationary, StepMode, Stepper};

#[derive(Debug, Clone, PartialEq)]
pub struct HomogProblem {
    pub h: Expr,
    pub dhu: Expr,
    pub lambda1: f64,
    pub lambda2: f64,
    g: Expr,
    w: Expr,
}

fn lattice() -> impl Iterator<Item = (f64, f64, f64)> {
    (0..8).flat_map(|i| {
        (0..16).flat_map(move |j| {
            (0..17).map(move |k| (i as f64 / 8.0, j as f64 / 16.0, -4.0 + 0.5 * k as f64))
        })
    })
}

impl HomogProblem {
    /// Checks variables, the split, `lambda1 <= dHu <= lambda2` with
    /// `lambda1 > 0`, and sampled convexity in `p`.
    pub fn new(h: Expr, dhu: Expr, lambda1: f64, lambda2: f64) -> Result<Self> {
        h.check_vars(&[Var::X, Var::Y, Var::P, Var::U])?;
        dhu.check_vars(&[Var::X, Var::Y, Var::U])?;
        if !(lambda1 > 0.0 && lambda1 <= lambda2 && lambda2.is_finite()) {
            return Err(Error::invalid(
                "Lambda1/Lambda2",
                "need 0 < Lambda1 <= Lambda2 < infinity",
            ));
        }
        let mut g_terms = Vec::new();
        let mut w_terms = Vec::new();
        for (sign, term) in h.additive_terms() {
            match (term.depends_on(Var::P), term.depends_on(Var::U)) {
                (true, true) => {
                    return Err(Error::invalid(
                        "H",
                        format!(
                            "term `{term}` couples p and u; H must split as G(x,y,p) + W(x,y,u)"
                        ),
                    ))
                }
                (_, true) => w_terms.push((sign, term)),
                _ => g_terms.push((sign, term)),
            }
        }
        let hp = Self {
            g: Expr::sum_of(&g_terms),
            w: Expr::sum_of(&w_terms),
            h,
            dhu,
            lambda1,
            lambda2,
        };
        for (x, y, u) in lattice() {
            let d = hp.dhu_at(x, y, u)?;
            if d < lambda1 - 1e-9 || d > lambda2 + 1e-9 {
                return Err(Error::invalid(
                    "dHu",
                    format!("dHu({x}, {y}, {u}) = {d} leaves [{lambda1}, {lambda2}]"),
                ));
            }
        }
        for y in [0.0, 0.25, 0.5, 0.75] {
            check_midpoint_convexity(|x, p| hp.g_at(x, y, p), 6.0, "H")?;
        }
        Ok(hp)
    }

    pub fn from_strs(h: &str, dhu: &str, lambda1: f64, lambda2: f64) -> Result<Self> {
        Self::new(
            parse(h).map_err(|e| Error::from(e).context("H"))?,
            parse(dhu).map_err(|e| Error::from(e).context("dHu"))?,
            lambda1,
            lambda2,
        )
    }

    pub fn g_at(&self, x: f64, y: f64, p: f64) -> Result<f64> {
        Ok(self.g.eval(&Bindings::new().x(x).y(y).p(p))?)
    }

    pub fn w_at(&self, x: f64, y: f64, u: f64) -> Result<f64> {
        Ok(self.w.eval(&Bindings::new().x(x).y(y).u(u))?)
    }

    pub fn h_at(&self, x: f64, y: f64, p: f64, u: f64) -> Result<f64> {
        Ok(self.g_at(x, y, p)? + self.w_at(x, y, u)?)
    }

    pub fn dhu_at(&self, x: f64, y: f64, u: f64) -> Result<f64> {
        Ok(self.dhu.eval(&Bindings::new().x(x).y(y).u(u))?)
    }

    pub fn depends_on_x(&self) -> bool {
        self.h.depends_on(Var::X)
    }

    pub fn depends_on_y(&self) -> bool {
        self.h.depends_on(Var::Y)
    }

    /// `x -> H(x, k x, p, u)` as a split spec on the unit torus.
    pub fn frozen_spec(&self, k: usize, vmax: f64, pmax: f64) -> Result<HamiltonianSpec> {
        let kx = Expr::Bin(
            crate::expr::BinOp::Mul,
            Box::new(Expr::Num(k as f64)),
            Box::new(Expr::Var(Var::X)),
        );
        HamiltonianSpec::new(
            format!("multiscale k={k}"),
            self.g.substitute(Var::Y, &kx),
            self.w.substitute(Var::Y, &kx),
            self.dhu.substitute(Var::Y, &kx),
            self.lambda1.abs().max(self.lambda2.abs()),
            vmax,
            pmax,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogOptions {
    /// Nodes of the fast torus in cell problems.
    pub n_cell: usize,
    pub m: usize,
    pub k: usize,
    pub vmax: f64,
    pub pmax: f64,
    pub critical: CriticalOptions,
    /// Grid of the effective solve.
    pub n_slow: usize,
    pub tol: f64,
    /// Horizon for stationary solves; `None` uses `40 / Lambda1`.
    pub t_max: Option<f64>,
    pub table_tol: f64,
}

impl Default for HomogOptions {
    fn default() -> Self {
        Self {
            n_cell: 64,
            m: 64,
            k: 64,
            vmax: 6.0,
            pmax: 6.0,
            critical: CriticalOptions::default(),
            n_slow: 64,
            tol: 1e-6,
            t_max: None,
            table_tol: 1e-2,
        }
    }
}

impl HomogOptions {
    fn horizon(&self, lambda1: f64) -> f64 {
        self.t_max.unwrap_or(40.0 / lambda1)
    }
}

/// Node-aligned step when admissible, else the largest step with
/// `dt vmax <= period / 2`.
fn default_dt(grid: &TorusGrid, vgrid: &VelocityGrid) -> f64 {
    let aligned = grid.h() / vgrid.dv();
    let cap = grid.period() / (2.0 * vgrid.vmax());
    if aligned <= cap * (1.0 + 1e-12) {
        aligned
    } else {
        cap
    }
}

/// Critical value of `q -> G(x, y, p + q) + offset(y)` on the fast torus.
fn cell_value(
    opts: &HomogOptions,
    p: f64,
    g: impl Fn(f64, f64) -> Result<f64> + Sync,
) -> Result<f64> {
    let grid = TorusGrid::unit(opts.n_cell)?;
    let lt = legendre_fn(
        grid,
        opts.vmax,
        opts.pmax + p.abs(),
        opts.m,
        opts.k,
        |y, q| g(y, p + q),
    )?;
    Ok(critical_value(&lt, &opts.critical)?.c)
}

/// `Hbar(x, p, c)`: critical value of `q -> H(x, y, p + q, c)` in `y`.
pub fn cell_problem(hp: &HomogProblem, x: f64, p: f64, c: f64, opts: &HomogOptions) -> Result<f64> {
    if !(x.is_finite() && p.is_finite() && c.is_finite()) {
        return Err(Error::invalid("cell", "x, p and c must be finite"));
    }
    cell_value(opts, p, |y, q| hp.h_at(x, y, q, c))
        .map_err(|e| e.context(format!("cell problem at x = {x}, p = {p}, c = {c}")))
}

/// `Hbar` on a periodic uniform x-grid times p- and c-grids.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveTable {
    pub x_nodes: Vec<f64>,
    pub p_nodes: Vec<f64>,
    pub c_nodes: Vec<f64>,
    /// Index `(ix * np + ip) * nc + ic`.
    pub values: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl EffectiveTable {
    pub fn at(&self, ix: usize, ip: usize, ic: usize) -> f64 {
        let (np, nc) = (self.p_nodes.len(), self.c_nodes.len());
        self.values[(ix * np + ip) * nc + ic]
    }

    /// Values at `x` (periodic linear in x), for every `(p, c)` node.
    fn slice_at(&self, x: f64) -> Vec<f64> {
        let nx = self.x_nodes.len();
        let block = self.p_nodes.len() * self.c_nodes.len();
        if nx == 1 {
            return self.values.clone();
        }
        let s = x.rem_euclid(1.0) * nx as f64;
        (0..block)
            .map(|b| {
                let col: Vec<f64> = (0..nx).map(|ix| self.values[ix * block + b]).collect();
                interp_index(&col, s)
            })
            .collect()
    }

    /// Trilinear interpolation; linear extrapolation outside the p and c
    /// ranges.
    pub fn interp(&self, x: f64, p: f64, c: f64) -> f64 {
        let slice = self.slice_at(x);
        let nc = self.c_nodes.len();
        let (ip, fp) = bracket(&self.p_nodes, p);
        let (ic, fc) = bracket(&self.c_nodes, c);
        let v = |a: usize, b: usize| slice[a * nc + b];
        let lo = (1.0 - fc) * v(ip, ic) + fc * v(ip, ic + 1);
        let hi = (1.0 - fc) * v(ip + 1, ic) + fc * v(ip + 1, ic + 1);
        (1.0 - fp) * lo + fp * hi
    }

    /// Monotonicity in `c` at rate `lambda1` and convexity in `p`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let (nx, np, nc) = (self.x_nodes.len(), self.p_nodes.len(), self.c_nodes.len());
        for ix in 0..nx {
            for ip in 0..np {
                for ic in 1..nc {
                    let dc = self.c_nodes[ic] - self.c_nodes[ic - 1];
                    let rise = self.at(ix, ip, ic) - self.at(ix, ip, ic - 1);
                    if rise < self.lambda1 * dc - tol {
                        return Err(Error::invalid(
                            "Hbar",
                            format!(
                                "not {}-monotone in c at x = {}, p = {}",
                                self.lambda1, self.x_nodes[ix], self.p_nodes[ip]
                            ),
                        ));
                    }
                }
            }
            for ic in 0..nc {
                for ip in 1..np.saturating_sub(1) {
                    let s0 = (self.at(ix, ip, ic) - self.at(ix, ip - 1, ic))
                        / (self.p_nodes[ip] - self.p_nodes[ip - 1]);
                    let s1 = (self.at(ix, ip + 1, ic) - self.at(ix, ip, ic))
                        / (self.p_nodes[ip + 1] - self.p_nodes[ip]);
                    let span = self.p_nodes[ip + 1] - self.p_nodes[ip - 1];
                    if s1 < s0 - 2.0 * tol / span {
                        return Err(Error::invalid(
                            "Hbar",
                            format!(
                                "not convex in p at x = {}, c = {}",
                                self.x_nodes[ix], self.c_nodes[ic]
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "x,p,c,Hbar")?;
        for (ix, x) in self.x_nodes.iter().enumerate() {
            for (ip, p) in self.p_nodes.iter().enumerate() {
                for (ic, c) in self.c_nodes.iter().enumerate() {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        fmt17(*x),
                        fmt17(*p),
                        fmt17(*c),
                        fmt17(self.at(ix, ip, ic))
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Index of the left node of the bracketing interval and the fraction;
/// the end intervals extend linearly.
fn bracket(nodes: &[f64], t: f64) -> (usize, f64) {
    let n = nodes.len();
    let mut i = nodes.partition_point(|&v| v <= t).saturating_sub(1);
    i = i.min(n - 2);
    (i, (t - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

pub fn uniform_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Tabulates `Hbar` on `x_count` periodic x-nodes (`i / x_count`) and the
/// given p- and c-nodes, then checks the table invariants.
pub fn build_effective_table(
    hp: &HomogProblem,
    x_count: usize,
    p_nodes: &[f64],
    c_nodes: &[f64],
    opts: &HomogOptions,
) -> Result<EffectiveTable> {
    if x_count == 0 || p_nodes.len() < 2 || c_nodes.len() < 2 {
        return Err(Error::invalid(
            "table",
            "need at least 1 x-node and 2 nodes in p and c",
        ));
    }
    for nodes in [p_nodes, c_nodes] {
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("table", "p and c nodes must increase"));
        }
    }
    let x_nodes: Vec<f64> = (0..x_count).map(|i| i as f64 / x_count as f64).collect();
    let (np, nc) = (p_nodes.len(), c_nodes.len());
    let fast_w = hp.w.depends_on(Var::Y);

    let values: Vec<f64> = if fast_w {
        let cells: Vec<(f64, f64, f64)> = x_nodes
            .iter()
            .flat_map(|&x| {
                p_nodes
                    .iter()
                    .flat_map(move |&p| c_nodes.iter().map(move |&c| (x, p, c)))
            })
            .collect();
        cells
            .par_iter()
            .map(|&(x, p, c)| cell_problem(hp, x, p, c, opts))
            .collect::<Result<_>>()?
    } else {
        // Hbar = cell(G)(x, p) + W(x, c)
        let g_x = hp.g.depends_on(Var::X);
        let xs: Vec<f64> = if g_x { x_nodes.clone() } else { vec![0.0] };
        let pairs: Vec<(usize, f64, f64)> = xs
            .iter()
            .enumerate()
            .flat_map(|(ix, &x)| p_nodes.iter().map(move |&p| (ix, x, p)))
            .collect();
        let g_cells: Vec<f64> = pairs
            .par_iter()
            .map(|&(_, x, p)| {
                cell_value(opts, p, |y, q| hp.g_at(x, y, q))
                    .map_err(|e| e.context(format!("cell problem at x = {x}, p = {p}")))
            })
            .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(x_count * np * nc);
        for (ix, &x) in x_nodes.iter().enumerate() {
            let gx = if g_x { ix } else { 0 };
            for ip in 0..np {
                for &c in c_nodes {
                    values.push(g_cells[gx * np + ip] + hp.w_at(x, 0.0, c)?);
                }
            }
        }
        values
    };
    let table = EffectiveTable {
        x_nodes,
        p_nodes: p_nodes.to_vec(),
        c_nodes: c_nodes.to_vec(),
        values,
        lambda1: hp.lambda1,
        lambda2: hp.lambda2,
    };
    table.check_invariants(opts.table_tol)?;
    Ok(table)
}

/// Stationary solution of `Hbar(x, Du, u) = 0` on `opts.n_slow` nodes.
///
/// The Lagrangian of the piecewise-linear table row is the maximum of
/// `p v - Hbar` over the p-nodes; its c-dependence is interpolated
/// linearly and evaluated at the current node value.
pub fn solve_effective(et: &EffectiveTable, opts: &HomogOptions) -> Result<Stationary> {
    let grid = TorusGrid::unit(opts.n_slow)?;
    let vgrid = VelocityGrid::new(opts.vmax, opts.m)?;
    let dt = default_dt(&grid, &vgrid);
    if dt * et.lambda2 > 0.5 + 1e-12 {
        return Err(Error::Cfl(format!(
            "dt*Lambda2 = {} exceeds 1/2",
            dt * et.lambda2
        )));
    }
    let n = grid.n();
    let mv = vgrid.len();
    let nc = et.c_nodes.len();
    let np = et.p_nodes.len();
    // lbar[(i * nc + k) * mv + j]
    let mut lbar = Vec::with_capacity(n * nc * mv);
    for i in 0..n {
        let slice = et.slice_at(grid.node(i));
        for k in 0..nc {
            for &v in vgrid.values() {
                let best = (0..np)
                    .map(|l| et.p_nodes[l] * v - slice[l * nc + k])
                    .fold(f64::NEG_INFINITY, f64::max);
                lbar.push(best);
            }
        }
    }
    let feet: Vec<f64> = vgrid.values().iter().map(|v| -v * dt / grid.h()).collect();
    let step = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .with_min_len(64)
            .map(|i| {
                let (k, f) = bracket(&et.c_nodes, u[i]);
                let lo = &lbar[(i * nc + k) * mv..(i * nc + k + 1) * mv];
                let hi = &lbar[(i * nc + k + 1) * mv..(i * nc + k + 2) * mv];
                (0..mv)
                    .map(|j| {
                        let l = (1.0 - f) * lo[j] + f * hi[j];
                        interp_index(u, i as f64 + feet[j]) + dt * l
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };
    let horizon = opts.horizon(et.lambda1);
    let max_steps = step_count(horizon, dt).max(1);
    let mut u = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for k in 1..=max_steps {
        let next = step(&u);
        if let Some((node, &value)) = next.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        residual = sup_diff_slices(&next, &u) / dt;
        u = next;
        if residual <= opts.tol {
            return Ok(Stationary {
                field: Field::new(grid, u)?,
                residual,
                steps: k,
            });
        }
    }
    Err(Error::NotConverged { horizon, residual })
}

/// Stationary solution of `H(x, k x, Du, u) = 0` on `k * n_per_period`
/// nodes (`eps = 1/k`).
pub fn solve_multiscale(
    hp: &HomogProblem,
    k: usize,
    n_per_period: usize,
    opts: &HomogOptions,
) -> Result<Stationary> {
    if k == 0 || n_per_period < 2 {
        return Err(Error::invalid(
            "eps",
            "need eps = 1/k with k >= 1 and n_per_period >= 2",
        ));
    }
    let spec = hp.frozen_spec(k, opts.vmax, opts.pmax)?;
    let grid = TorusGrid::unit(k * n_per_period)?;
    let lt = legendre(&spec, grid, opts.m, opts.k)?;
    let dt = default_dt(&grid, lt.vgrid()).min(0.5 / spec.lambda_bound);
    let st = Stepper::new(&spec, &lt, dt, StepMode::Explicit)?;
    stationary_with(&st, &Field::zeros(grid), opts.tol, opts.horizon(hp.lambda1))
        .map_err(|e| e.context(format!("multiscale solve at eps = 1/{k}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateResult {
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln eps`; `None` when the
    /// errors sit at the noise level.
    pub slope: Option<f64>,
    pub c_fit: f64,
    #[serde(skip)]
    pub ubar: Field,
}

impl RateResult {
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "eps,error,sqrt_eps_ratio")?;
        for (e, err) in self.eps.iter().zip(&self.errors) {
            writeln!(
                out,
                "{},{},{}",
                fmt17(*e),
                fmt17(*err),
                fmt17(err / e.sqrt())
            )?;
        }
        Ok(())
    }
}

/// Options of the rate experiment besides the solver ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub x_count: usize,
    pub p_range: f64,
    pub p_count: usize,
    pub c_range: (f64, f64),
    pub c_count: usize,
    /// Errors below this are treated as exact.
    pub noise_floor: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            x_count: 9,
            p_range: 2.0,
            p_count: 17,
            c_range: (-2.0, 2.0),
            c_count: 5,
            noise_floor: 1e-9,
        }
    }
}

/// `sup |u^eps - ubar|` over the ladder `eps = 1/k`, with `ubar` solved on
/// the slow grid and interpolated onto each fine grid.
pub fn rate_experiment(
    hp: &HomogProblem,
    ks: &[usize],
    n_per_period: usize,
    opts: &HomogOptions,
    rate: &RateOptions,
) -> Result<RateResult> {
    if ks.is_empty() {
        return Err(Error::invalid("eps_list", "empty"));
    }
    let x_count = if hp.depends_on_x() { rate.x_count } else { 1 };
    let p_nodes = uniform_nodes(-rate.p_range, rate.p_range, rate.p_count);
    let c_nodes = uniform_nodes(rate.c_range.0, rate.c_range.1, rate.c_count);
    let table = build_effective_table(hp, x_count, &p_nodes, &c_nodes, opts)?;
    let ubar = solve_effective(&table, opts)?.field;
    let mut eps = Vec::new();
    let mut errors = Vec::new();
    for &k in ks {
        let fine = solve_multiscale(hp, k, n_per_period, opts)?.field;
        let coarse = ubar.resample(*fine.grid())?;
        eps.push(1.0 / k as f64);
        errors.push(fine.sup_diff(&coarse)?);
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e > rate.noise_floor)
        .map(|(&e, &err)| (e.ln(), err.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    let c_fit = eps
        .iter()
        .zip(&errors)
        .map(|(e, err)| err / e.sqrt())
        .fold(0.0, f64::max);
    Ok(RateResult {
        eps,
        errors,
        slope,
        c_fit,
        ubar,
    })
}

/// `E(p)` for `G = p^2 + b cos(2 pi y)`: `b` below the flat region
/// `|p| <= int sqrt(b - b cos)`, otherwise the root of
/// `int_0^1 sqrt(E - b cos(2 pi y)) dy = |p|` (midpoint quadrature, bisection).
pub fn cosine_cell_oracle(p: f64, b: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let action = |e: f64| -> f64 {
        let n = 20_000;
        (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) / n as f64;
                (e - b * (tau * y).cos()).max(0.0).sqrt()
            })
            .sum::<f64>()
            / n as f64
    };
    let b = b.abs();
    if p.abs() <= action(b) {
        return b;
    }
    let (mut lo, mut hi) = (b, b + p * p + 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if action(mid) < p.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Random smooth periodic field used by the property suites.
pub fn random_smooth_field(grid: TorusGrid, seed: u64, amplitude: f64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let tau = 2.0 * std::f64::consts::PI;
    Field::from_fn(grid, |x| {
        amplitude
            * coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = tau * (k + 1) as f64 * x;
                    (a * w.cos() + b * w.sin()) / (k + 1) as f64
                })
                .sum::<f64>()
    })
}
