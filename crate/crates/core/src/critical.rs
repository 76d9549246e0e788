//! Critical values of `u`-independent Hamiltonians.
//!
//! Two estimators are run side by side: the vanishing-discount limit
//! `lambda u_lambda -> -c` (extrapolated linearly to `lambda = 0`) and the
//! long-time slope of `T_t 0`. Both act on a [`LagrangianTable`], so a
//! potential term is folded in with [`LagrangianTable::with_potential`].

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, sup_diff_slices, Field};
use crate::hamiltonian::{HamiltonianSpec, LagrangianTable};
use crate::semigroup::{step_count, Direction, Stepper};

pub const DEFAULT_SCHEDULE: [f64; 3] = [4e-2, 2e-2, 1e-2];
pub const DEFAULT_CROSS_TOL: f64 = 2e-2;
pub const DEFAULT_HORIZON: f64 = 16.0;
const DIVERGENCE_BOUND: f64 = 1e6;
const HOWARD_MAX_ITER: usize = 1000;
// Fit residuals above this mark the lambda dependence as non-linear.
const NONLINEAR_FLAG: f64 = 1e-4;

/// Which estimators to run; `Agree` runs both and compares them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Discount,
    Longtime,
    #[default]
    Agree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalOptions {
    /// Strictly decreasing discount rates.
    pub schedule: Vec<f64>,
    /// `None` picks the node-aligned step `h / dv` when admissible.
    pub dt: Option<f64>,
    pub tol: f64,
    /// Long-time horizon `T`; the slope is taken over `[T/2, T]`.
    pub horizon: f64,
    pub cross_tol: f64,
    pub method: Method,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self {
            schedule: DEFAULT_SCHEDULE.to_vec(),
            dt: None,
            tol: 1e-6,
            horizon: DEFAULT_HORIZON,
            cross_tol: DEFAULT_CROSS_TOL,
            method: Method::Agree,
        }
    }
}

impl CriticalOptions {
    /// Time step used on `lt`.
    pub fn resolve_dt(&self, lt: &LagrangianTable) -> f64 {
        if let Some(dt) = self.dt {
            return dt;
        }
        let aligned = lt.node_aligned_dt();
        let cap = lt.grid().period() / (2.0 * lt.vgrid().vmax());
        if aligned <= cap * (1.0 + 1e-12) {
            aligned
        } else {
            cap
        }
    }

    fn validate(&self) -> Result<()> {
        if self.method != Method::Longtime {
            if self.schedule.len() < 2 {
                return Err(Error::invalid(
                    "lambda_schedule",
                    "needs at least 2 entries",
                ));
            }
            if self.schedule.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
                return Err(Error::invalid(
                    "lambda_schedule",
                    "entries must be positive",
                ));
            }
            if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::invalid(
                    "lambda_schedule",
                    "must be strictly decreasing",
                ));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("T", "must be positive"));
        }
        if !(self.cross_tol > 0.0) {
            return Err(Error::invalid("cross_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountSample {
    pub lambda: f64,
    pub mean_lambda_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValueResult {
    pub c: f64,
    pub method: Method,
    pub c_discount: Option<f64>,
    pub c_longtime: Option<f64>,
    /// Discounted solution at the smallest rate (or the long-time profile),
    /// shifted to mean zero.
    pub u_corrector: Field,
    pub diagnostics: Vec<DiscountSample>,
    pub fit_slope: Option<f64>,
    pub fit_residual: Option<f64>,
    /// Set when the samples deviate from the linear model by more than 1e-4.
    pub nonlinear: bool,
    pub dt: f64,
    pub cross_tol: f64,
}

impl CriticalValueResult {
    /// Both estimators ran and differ by more than `cross_tol`.
    pub fn disagreement(&self) -> Option<Error> {
        match (self.c_discount, self.c_longtime) {
            (Some(d), Some(l)) if (d - l).abs() > self.cross_tol => Some(Error::Disagreement {
                discount: d,
                longtime: l,
            }),
            _ => None,
        }
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "lambda,mean_lambda_u")?;
        for s in &self.diagnostics {
            writeln!(out, "{},{}", fmt17(s.lambda), fmt17(s.mean_lambda_u))?;
        }
        Ok(())
    }
}

/// Greedy policy for `min_j [u(foot) + dt L]`.
fn greedy(st: &Stepper<'_>, u: &[f64]) -> Vec<(usize, f64)> {
    let m = st.velocities();
    (0..u.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for j in 0..m {
                let v = u[st.foot_node(i, j)] + st.step_cost(i, j);
                if v < best.1 {
                    best = (j, v);
                }
            }
            best
        })
        .collect()
}

/// Solves `u_i = beta (u_{succ(i)} + cost_i)` on a functional graph.
fn evaluate_policy(succ: &[usize], cost: &[f64], lambda_dt: f64) -> Vec<f64> {
    let n = succ.len();
    let beta = 1.0 / (1.0 + lambda_dt);
    let log_beta = -lambda_dt.ln_1p();
    let mut u = vec![0.0; n];
    // 0 unseen, 1 on the current path, 2 solved
    let mut state = vec![0u8; n];
    let mut path = Vec::new();
    for start in 0..n {
        if state[start] == 2 {
            continue;
        }
        path.clear();
        let mut k = start;
        while state[k] == 0 {
            state[k] = 1;
            path.push(k);
            k = succ[k];
        }
        if state[k] == 1 {
            let pos = path.iter().position(|&q| q == k).unwrap();
            let cycle = &path[pos..];
            let len = cycle.len();
            let (mut s, mut b) = (0.0, 1.0);
            for &q in cycle {
                b *= beta;
                s += b * cost[q];
            }
            let denom = -(len as f64 * log_beta).exp_m1();
            u[cycle[0]] = s / denom;
            state[cycle[0]] = 2;
            for t in (1..len).rev() {
                let q = cycle[t];
                u[q] = beta * (u[succ[q]] + cost[q]);
                state[q] = 2;
            }
            path.truncate(pos);
        }
        for &q in path.iter().rev() {
            u[q] = beta * (u[succ[q]] + cost[q]);
            state[q] = 2;
        }
    }
    u
}

/// Policy iteration on the node-aligned graph; exact up to rounding.
fn howard(st: &Stepper<'_>, lambda: f64, warm: &[f64]) -> Result<Vec<f64>> {
    let n = warm.len();
    let ldt = lambda * st.dt();
    let mut policy: Vec<usize> = greedy(st, warm).into_iter().map(|b| b.0).collect();
    for _ in 0..HOWARD_MAX_ITER {
        let succ: Vec<usize> = (0..n).map(|i| st.foot_node(i, policy[i])).collect();
        let cost: Vec<f64> = (0..n).map(|i| st.step_cost(i, policy[i])).collect();
        let u = evaluate_policy(&succ, &cost, ldt);
        if u.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence { lambda });
        }
        let mut changed = false;
        for (i, (j, best)) in greedy(st, &u).into_iter().enumerate() {
            let current = u[succ[i]] + cost[i];
            if best < current - 1e-12 * (1.0 + current.abs()) {
                policy[i] = j;
                changed = true;
            }
        }
        if !changed {
            return Ok(u);
        }
    }
    Err(Error::NotConverged {
        horizon: f64::INFINITY,
        residual: f64::NAN,
    })
}

/// Value iteration `u <- beta T(u)` until `sup |u' - u| / dt <= tol`.
fn value_iteration(st: &Stepper<'_>, lambda: f64, tol: f64, warm: &[f64]) -> Result<Vec<f64>> {
    let dt = st.dt();
    let beta = 1.0 / (1.0 + lambda * dt);
    // contraction beta per step; 40 / (lambda dt) steps reduce any start by e^-40
    let max_steps = ((40.0 / (lambda * dt)).ceil() as usize).max(1);
    let mut u = warm.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..max_steps {
        let next: Vec<f64> = st
            .step_values(&u, Direction::Backward)?
            .into_iter()
            .map(|v| beta * v)
            .collect();
        if next.iter().any(|v| !(v.abs() <= DIVERGENCE_BOUND)) {
            return Err(Error::Divergence { lambda });
        }
        residual = sup_diff_slices(&next, &u) / dt;
        u = next;
        if residual <= tol {
            return Ok(u);
        }
    }
    Err(Error::NotConverged {
        horizon: max_steps as f64 * dt,
        residual,
    })
}

fn discounted_with(st: &Stepper<'_>, lambda: f64, tol: f64, warm: &[f64]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    if lambda * st.dt() >= 1.0 {
        return Err(Error::invalid("lambda", "dt*lambda must be below 1"));
    }
    if st.node_aligned() {
        match howard(st, lambda, warm) {
            Ok(u) => return Ok(u),
            Err(Error::NotConverged { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    value_iteration(st, lambda, tol, warm)
}

/// Fixed point of `u(x_i) <- min_j [u(x_i - v_j dt) + dt L_ij] / (1 + lambda dt)`.
pub fn discounted_solve(lt: &LagrangianTable, lambda: f64, dt: f64, tol: f64) -> Result<Field> {
    let st = Stepper::u_independent(lt, dt)?;
    let warm = vec![0.0; lt.grid().n()];
    let u = discounted_with(&st, lambda, tol, &warm)?;
    Field::new(*lt.grid(), u)
}

/// `(c, profile)` with `c = -(mean T_T 0 - mean T_{T/2} 0) / (T/2)` and
/// `profile = T_T 0 + c T` recentred to mean zero.
fn longtime(st: &Stepper<'_>, horizon: f64) -> Result<(f64, Vec<f64>)> {
    let grid = *st.grid();
    let half = step_count(horizon / 2.0, st.dt()).max(1);
    let zero = Field::zeros(grid);
    let u1 = st.iterate(&zero, Direction::Backward, half)?;
    let u2 = st.iterate(&u1, Direction::Backward, half)?;
    let span = half as f64 * st.dt();
    let c = -(u2.mean() - u1.mean()) / span;
    let mean = u2.mean();
    Ok((c, u2.values().iter().map(|v| v - mean).collect()))
}

/// Least-squares line `y = a + b x`; returns `(a, b, max residual)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let r = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).abs())
        .fold(0.0, f64::max);
    (a, b, r)
}

/// Critical value of the `u`-independent Hamiltonian whose Lagrangian is `lt`.
pub fn critical_value(lt: &LagrangianTable, opts: &CriticalOptions) -> Result<CriticalValueResult> {
    opts.validate()?;
    let dt = opts.resolve_dt(lt);
    let st = Stepper::u_independent(lt, dt)?;
    let grid = *lt.grid();

    let long = if opts.method != Method::Discount {
        Some(longtime(&st, opts.horizon)?)
    } else {
        None
    };

    let mut diagnostics = Vec::new();
    let mut corrector = None;
    if opts.method != Method::Longtime {
        for &lambda in &opts.schedule {
            let warm: Vec<f64> = match &long {
                Some((c, w)) => w.iter().map(|v| v - c / lambda).collect(),
                None => vec![0.0; grid.n()],
            };
            let u = discounted_with(&st, lambda, opts.tol, &warm)
                .map_err(|e| e.context(format!("discounted solve at lambda = {lambda}")))?;
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            diagnostics.push(DiscountSample {
                lambda,
                mean_lambda_u: lambda * mean,
            });
            corrector = Some(u.iter().map(|v| v - mean).collect::<Vec<_>>());
        }
    }

    let (c_discount, fit_slope, fit_residual) = if diagnostics.is_empty() {
        (None, None, None)
    } else {
        let xs: Vec<f64> = diagnostics.iter().map(|s| s.lambda).collect();
        let ys: Vec<f64> = diagnostics.iter().map(|s| -s.mean_lambda_u).collect();
        let (a, b, r) = linear_fit(&xs, &ys);
        (Some(a), Some(b), Some(r))
    };
    let c_longtime = long.as_ref().map(|l| l.0);
    let profile = corrector
        .or_else(|| long.map(|l| l.1))
        .expect("at least one estimator runs");

    let (c, method) = match (c_discount, c_longtime) {
        (Some(d), Some(l)) if (d - l).abs() <= opts.cross_tol => (d, Method::Agree),
        (Some(d), _) => (d, Method::Discount),
        (None, Some(l)) => (l, Method::Longtime),
        (None, None) => unreachable!(),
    };

    Ok(CriticalValueResult {
        c,
        method,
        c_discount,
        c_longtime,
        u_corrector: Field::new(grid, profile)?,
        diagnostics,
        fit_slope,
        fit_residual,
        nonlinear: fit_residual.is_some_and(|r| r > NONLINEAR_FLAG),
        dt,
        cross_tol: opts.cross_tol,
    })
}

/// Samples of `eps -> c(G + W(x, u_-(x) + eps))` and the one-sided
/// derivatives at `eps = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CEpsCurve {
    pub eps_samples: Vec<f64>,
    pub c_values: Vec<f64>,
    pub d_minus: Option<f64>,
    pub d_plus: Option<f64>,
}

impl CEpsCurve {
    /// Sorts the samples by `eps`; derivatives are left unset.
    pub fn from_samples(eps: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if eps.len() != c.len() {
            return Err(Error::invalid("eps_list", "sample length mismatch"));
        }
        let mut pairs: Vec<(f64, f64)> = eps.into_iter().zip(c).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            eps_samples: pairs.iter().map(|p| p.0).collect(),
            c_values: pairs.iter().map(|p| p.1).collect(),
            d_minus: None,
            d_plus: None,
        })
    }

    fn value_at(&self, eps: f64) -> Option<f64> {
        let scale = eps.abs().max(1e-300);
        self.eps_samples
            .iter()
            .position(|&e| (e - eps).abs() <= 1e-9 * scale.max(1e-12))
            .map(|k| self.c_values[k])
    }

    /// Largest `|c(e1) - c(e2)| - lambda |e1 - e2|` over sample pairs.
    pub fn lipschitz_excess(&self, lambda: f64) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for a in 0..self.eps_samples.len() {
            for b in a + 1..self.eps_samples.len() {
                let dc = (self.c_values[a] - self.c_values[b]).abs();
                let de = (self.eps_samples[a] - self.eps_samples[b]).abs();
                worst = worst.max(dc - lambda * de);
            }
        }
        worst
    }

    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "eps,c")?;
        for (e, c) in self.eps_samples.iter().zip(&self.c_values) {
            writeln!(out, "{},{}", fmt17(*e), fmt17(*c))?;
        }
        Ok(())
    }
}

/// Second-order one-sided differences at 0: `D-` from `{-2h, -h, 0}` and
/// `D+` from `{0, h, 2h}`, `h` the smallest `|eps|` of each sign.
pub fn one_sided_derivatives(curve: &mut CEpsCurve) -> Result<(f64, f64)> {
    let c0 = curve
        .value_at(0.0)
        .ok_or_else(|| Error::InsufficientSamples("eps = 0 missing".into()))?;
    let hm = curve
        .eps_samples
        .iter()
        .copied()
        .filter(|&e| e < 0.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let hp = curve
        .eps_samples
        .iter()
        .copied()
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !hm.is_finite() || !hp.is_finite() {
        return Err(Error::InsufficientSamples(
            "need samples of both signs".into(),
        ));
    }
    let get = |e: f64| {
        curve
            .value_at(e)
            .ok_or_else(|| Error::InsufficientSamples(format!("eps = {e} missing")))
    };
    let (cm1, cm2) = (get(hm)?, get(2.0 * hm)?);
    let (cp1, cp2) = (get(hp)?, get(2.0 * hp)?);
    let h = -hm;
    let d_minus = (3.0 * c0 - 4.0 * cm1 + cm2) / (2.0 * h);
    let d_plus = (-3.0 * c0 + 4.0 * cp1 - cp2) / (2.0 * hp);
    curve.d_minus = Some(d_minus);
    curve.d_plus = Some(d_plus);
    Ok((d_minus, d_plus))
}

/// Builds `c(eps)` for each entry of `eps_list`. `lt` must be the Lagrangian
/// of `spec.g`.
pub fn c_eps_curve(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_minus: &Field,
    eps_list: &[f64],
    opts: &CriticalOptions,
) -> Result<CEpsCurve> {
    if u_minus.grid() != lt.grid() {
        return Err(Error::GridMismatch);
    }
    if !eps_list.contains(&0.0) {
        return Err(Error::InsufficientSamples("eps_list must contain 0".into()));
    }
    let neg = eps_list.iter().filter(|&&e| e < 0.0).count();
    let pos = eps_list.iter().filter(|&&e| e > 0.0).count();
    if neg < 2 || pos < 2 {
        return Err(Error::InsufficientSamples(
            "eps_list needs two values of each sign".into(),
        ));
    }
    let cs = eps_list
        .par_iter()
        .map(|&eps| {
            let pot = spec.w_field(&u_minus.shifted(eps))?;
            let shifted = lt.with_potential(&pot)?;
            critical_value(&shifted, opts)
                .map(|r| r.c)
                .map_err(|e| e.context(format!("c(eps) at eps = {eps}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut curve = CEpsCurve::from_samples(eps_list.to_vec(), cs)?;
    one_sided_derivatives(&mut curve)?;
    Ok(curve)
}
