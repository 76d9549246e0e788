//! Semi-Lagrangian realizations of the backward and forward Lax-Oleinik
//! semigroups for `u_t + G(x, Du) + W(x, u) = 0`.
//!
//! One backward step is
//!
//! ```text
//! u'(x_i) = min_j [ u(x_i - v_j dt) + dt L(x_i, v_j) ] - dt W(x_i, u(x_i))
//! ```
//!
//! and one forward step is the mirror image with `max`, `+ v_j dt` and the
//! signs of the running cost and contact term flipped. Foot points are
//! evaluated by periodic linear interpolation.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, sup_diff_slices, Field, TorusGrid};
use crate::hamiltonian::{HamiltonianSpec, LagrangianTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    #[default]
    Explicit,
    Picard,
}

const PICARD_TOL: f64 = 1e-13;
const PICARD_MAX_ITER: usize = 50;
const PAR_MIN_LEN: usize = 64;

/// Precomputed one-step operator for a fixed table, time step and mode.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    spec: Option<&'a HamiltonianSpec>,
    table: &'a LagrangianTable,
    dt: f64,
    mode: StepMode,
    // foot point of node i under velocity j is i + offset[j] + frac[j]
    offset: Vec<isize>,
    frac: Vec<f64>,
    // dt * L[i][j]
    cost: Vec<f64>,
    // W(x_i) when W does not read u
    w_static: Option<Vec<f64>>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        spec: &'a HamiltonianSpec,
        table: &'a LagrangianTable,
        dt: f64,
        mode: StepMode,
    ) -> Result<Self> {
        if dt * spec.lambda_bound > 0.5 + 1e-12 {
            return Err(Error::Cfl(format!(
                "dt*Lambda = {} exceeds 1/2",
                dt * spec.lambda_bound
            )));
        }
        let mut stepper = Self::build(Some(spec), table, dt, mode)?;
        if spec.is_u_independent() {
            let grid = table.grid();
            stepper.w_static = Some(
                (0..grid.n())
                    .map(|i| spec.w_at(grid.node(i), 0.0))
                    .collect::<Result<_>>()?,
            );
        }
        Ok(stepper)
    }

    /// Stepper for a `u`-independent Hamiltonian whose Lagrangian is `table`.
    pub fn u_independent(table: &'a LagrangianTable, dt: f64) -> Result<Self> {
        Self::build(None, table, dt, StepMode::Explicit)
    }

    fn build(
        spec: Option<&'a HamiltonianSpec>,
        table: &'a LagrangianTable,
        dt: f64,
        mode: StepMode,
    ) -> Result<Self> {
        let grid = table.grid();
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let vmax = table.vgrid().vmax();
        if dt * vmax > grid.period() / 2.0 + 1e-12 {
            return Err(Error::Cfl(format!(
                "dt*vmax = {} exceeds half the period",
                dt * vmax
            )));
        }
        let h = grid.h();
        let mut offset = Vec::with_capacity(table.m());
        let mut frac = Vec::with_capacity(table.m());
        for &v in table.vgrid().values() {
            let s = -v * dt / h;
            let r = s.round();
            if (s - r).abs() <= 1e-9 {
                offset.push(r as isize);
                frac.push(0.0);
            } else {
                let f = s.floor();
                offset.push(f as isize);
                frac.push(s - f);
            }
        }
        let cost = table.values().iter().map(|l| dt * l).collect();
        Ok(Self {
            spec,
            table,
            dt,
            mode,
            offset,
            frac,
            cost,
            w_static: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &TorusGrid {
        self.table.grid()
    }

    /// Whether every foot point lands exactly on a node.
    pub fn node_aligned(&self) -> bool {
        self.frac.iter().all(|&f| f == 0.0)
    }

    pub(crate) fn velocities(&self) -> usize {
        self.offset.len()
    }

    /// Foot node of `x_i - v_j dt`; meaningful only when node-aligned.
    #[inline]
    pub(crate) fn foot_node(&self, i: usize, j: usize) -> usize {
        (i as isize + self.offset[j]).rem_euclid(self.grid().n() as isize) as usize
    }

    /// `dt * L[i][j]`.
    #[inline]
    pub(crate) fn step_cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.offset.len() + j]
    }

    #[inline]
    fn foot(&self, u: &[f64], i: usize, j: usize, sign: isize) -> f64 {
        let n = u.len() as isize;
        // backward: i + offset + frac; forward: i - offset - frac
        let (base, f) = if sign > 0 {
            (i as isize + self.offset[j], self.frac[j])
        } else if self.frac[j] == 0.0 {
            (i as isize - self.offset[j], 0.0)
        } else {
            (i as isize - self.offset[j] - 1, 1.0 - self.frac[j])
        };
        let k0 = base.rem_euclid(n) as usize;
        if f == 0.0 {
            u[k0]
        } else {
            let k1 = if k0 + 1 == u.len() { 0 } else { k0 + 1 };
            (1.0 - f) * u[k0] + f * u[k1]
        }
    }

    /// `min_j [u(x_i - v_j dt) + dt L_ij]` (backward) or
    /// `max_j [u(x_i + v_j dt) - dt L_ij]` (forward).
    #[inline]
    fn transport(&self, u: &[f64], i: usize, dir: Direction) -> f64 {
        let m = self.offset.len();
        let cost = &self.cost[i * m..(i + 1) * m];
        match dir {
            Direction::Backward => (0..m)
                .map(|j| self.foot(u, i, j, 1) + cost[j])
                .fold(f64::INFINITY, f64::min),
            Direction::Forward => (0..m)
                .map(|j| self.foot(u, i, j, -1) - cost[j])
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    #[inline]
    fn w_at(&self, i: usize, u: f64) -> Result<f64> {
        if let Some(ws) = &self.w_static {
            return Ok(ws[i]);
        }
        match self.spec {
            Some(spec) => spec.w_at(self.table.grid().node(i), u),
            None => Ok(0.0),
        }
    }

    fn node_update(&self, u: &[f64], i: usize, dir: Direction) -> Result<f64> {
        let a = self.transport(u, i, dir);
        let sign = match dir {
            Direction::Backward => -1.0,
            Direction::Forward => 1.0,
        };
        let explicit = a + sign * self.dt * self.w_at(i, u[i])?;
        if self.mode == StepMode::Explicit || self.spec.is_none() || self.w_static.is_some() {
            return Ok(explicit);
        }
        let mut y = explicit;
        let mut delta = f64::INFINITY;
        for _ in 0..PICARD_MAX_ITER {
            let next = a + sign * self.dt * self.w_at(i, y)?;
            delta = (next - y).abs();
            y = next;
            if delta <= PICARD_TOL * y.abs().max(1.0) {
                return Ok(y);
            }
        }
        Err(Error::Picard {
            node: i,
            last_delta: delta,
        })
    }

    /// One step on raw node values.
    pub fn step_values(&self, u: &[f64], dir: Direction) -> Result<Vec<f64>> {
        let out: Vec<f64> = (0..u.len())
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(|i| self.node_update(u, i, dir))
            .collect::<Result<_>>()?;
        if let Some((node, &value)) = out.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { node, value });
        }
        Ok(out)
    }

    pub fn step(&self, u: &Field, dir: Direction) -> Result<Field> {
        if u.grid() != self.table.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_vec_unchecked(
            *u.grid(),
            self.step_values(u.values(), dir)?,
        ))
    }

    /// Applies `steps` steps in direction `dir`.
    pub fn iterate(&self, u: &Field, dir: Direction, steps: usize) -> Result<Field> {
        let mut cur = u.values().to_vec();
        for k in 0..steps {
            cur = self.step_values(&cur, dir).map_err(|e| match e {
                Error::NonFinite { .. } => Error::Blowup {
                    time: (k + 1) as f64 * self.dt,
                },
                e => e,
            })?;
        }
        Ok(Field::from_vec_unchecked(*u.grid(), cur))
    }

    /// One-step truncation error per unit time on `u`, measured against
    /// `u -/+ dt H(x, Du, u)` with centered differences for `Du`.
    pub fn consistency_error(&self, u: &Field, dir: Direction) -> Result<f64> {
        let spec = self
            .spec
            .ok_or_else(|| Error::invalid("spec", "consistency needs the Hamiltonian"))?;
        let next = self.step(u, dir)?;
        let g = u.grid();
        let n = g.n();
        let sign = match dir {
            Direction::Backward => -1.0,
            Direction::Forward => 1.0,
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let du = (u.get((i + 1) % n) - u.get((i + n - 1) % n)) / (2.0 * g.h());
            let h = spec.h_at(g.node(i), du, u.get(i))?;
            let predicted = u.get(i) + sign * self.dt * h;
            worst = worst.max((next.get(i) - predicted).abs() / self.dt);
        }
        Ok(worst)
    }
}

pub fn backward_step(
    u: &Field,
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    dt: f64,
    mode: StepMode,
) -> Result<Field> {
    Stepper::new(spec, lt, dt, mode)?.step(u, Direction::Backward)
}

pub fn forward_step(
    u: &Field,
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    dt: f64,
    mode: StepMode,
) -> Result<Field> {
    Stepper::new(spec, lt, dt, mode)?.step(u, Direction::Forward)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveResult {
    /// `(t, field)` pairs with strictly increasing `t`, starting at `t = 0`.
    pub snapshots: Vec<(f64, Field)>,
    pub final_field: Field,
    pub dt: f64,
    pub steps: usize,
    /// Discrete Lipschitz constant of each snapshot.
    pub lipschitz: Vec<f64>,
}

impl EvolveResult {
    /// Streams `t,x,value` rows followed by a `steps,final_residual` summary.
    pub fn write_csv(&self, out: &mut impl Write, final_residual: f64) -> io::Result<()> {
        writeln!(out, "t,x,value")?;
        for (t, f) in &self.snapshots {
            for (i, v) in f.values().iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt17(*t),
                    fmt17(f.grid().node(i)),
                    fmt17(*v)
                )?;
            }
        }
        writeln!(out, "steps,final_residual")?;
        writeln!(out, "{},{}", self.steps, fmt17(final_residual))
    }
}

/// Number of steps covering the horizon `t` with step `dt`.
pub fn step_count(t: f64, dt: f64) -> usize {
    ((t / dt) - 1e-9).ceil().max(0.0) as usize
}

#[allow(clippy::too_many_arguments)]
pub fn evolve(
    phi: &Field,
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    horizon: f64,
    dt: f64,
    mode: StepMode,
    direction: Direction,
    snap_every: usize,
) -> Result<EvolveResult> {
    let stepper = Stepper::new(spec, lt, dt, mode)?;
    evolve_with(&stepper, phi, horizon, direction, snap_every)
}

pub fn evolve_with(
    stepper: &Stepper<'_>,
    phi: &Field,
    horizon: f64,
    direction: Direction,
    snap_every: usize,
) -> Result<EvolveResult> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("T", "horizon must be positive"));
    }
    if phi.grid() != stepper.grid() {
        return Err(Error::GridMismatch);
    }
    let snap_every = snap_every.max(1);
    let dt = stepper.dt();
    let steps = step_count(horizon, dt);
    let mut snapshots = vec![(0.0, phi.clone())];
    let mut cur = phi.values().to_vec();
    for k in 1..=steps {
        cur = stepper.step_values(&cur, direction).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Blowup {
                time: k as f64 * dt,
            },
            e => e,
        })?;
        if k % snap_every == 0 || k == steps {
            snapshots.push((
                k as f64 * dt,
                Field::from_vec_unchecked(*phi.grid(), cur.clone()),
            ));
        }
    }
    let lipschitz = snapshots.iter().map(|(_, f)| f.lipschitz()).collect();
    Ok(EvolveResult {
        final_field: snapshots
            .last()
            .map(|s| s.1.clone())
            .unwrap_or_else(|| phi.clone()),
        snapshots,
        dt,
        steps,
        lipschitz,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub field: Field,
    /// `sup |u_{k+1} - u_k| / dt` at the returned field.
    pub residual: f64,
    pub steps: usize,
}

/// Evolves backward until the residual per unit time drops to `tol`.
pub fn stationary_solve(
    phi0: &Field,
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    dt: f64,
    tol: f64,
    t_max: f64,
) -> Result<Stationary> {
    let stepper = Stepper::new(spec, lt, dt, StepMode::Explicit)?;
    stationary_with(&stepper, phi0, tol, t_max)
}

pub fn stationary_with(
    stepper: &Stepper<'_>,
    phi0: &Field,
    tol: f64,
    t_max: f64,
) -> Result<Stationary> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if phi0.grid() != stepper.grid() {
        return Err(Error::GridMismatch);
    }
    let dt = stepper.dt();
    let max_steps = step_count(t_max, dt).max(1);
    let mut cur = phi0.values().to_vec();
    let mut residual = f64::INFINITY;
    for k in 1..=max_steps {
        let next = stepper
            .step_values(&cur, Direction::Backward)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Blowup {
                    time: k as f64 * dt,
                },
                e => e,
            })?;
        residual = sup_diff_slices(&next, &cur) / dt;
        cur = next;
        if residual <= tol {
            return Ok(Stationary {
                field: Field::from_vec_unchecked(*phi0.grid(), cur),
                residual,
                steps: k,
            });
        }
    }
    Err(Error::NotConverged {
        horizon: t_max,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{builtin, legendre, params};
    use std::f64::consts::PI;

    fn setup(name: &str, p: &[(&str, &str)], n: usize) -> (HamiltonianSpec, LagrangianTable) {
        let map = p
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let spec = builtin(name, &map).unwrap();
        let lt = legendre(&spec, TorusGrid::unit(n).unwrap(), 64, 64).unwrap();
        (spec, lt)
    }

    #[test]
    fn zero_is_fixed_for_free_eikonal() {
        let (spec, lt) = setup("eikonal", &[("V", "0")], 64);
        let z = Field::zeros(*lt.grid());
        for mode in [StepMode::Explicit, StepMode::Picard] {
            assert!(
                backward_step(&z, &spec, &lt, 1e-3, mode)
                    .unwrap()
                    .sup_norm()
                    < 1e-20
            );
            assert!(forward_step(&z, &spec, &lt, 1e-3, mode).unwrap().sup_norm() < 1e-20);
        }
    }

    #[test]
    fn constant_data_follow_euler_for_linear_contact() {
        let (spec, lt) = setup("linear_contact", &[("a", "1"), ("V", "0")], 32);
        let dt = 1e-2;
        let delta = 0.37;
        let u = Field::constant(*lt.grid(), delta);
        let b = backward_step(&u, &spec, &lt, dt, StepMode::Explicit).unwrap();
        let f = forward_step(&u, &spec, &lt, dt, StepMode::Explicit).unwrap();
        for i in 0..32 {
            assert!((b.get(i) - delta * (1.0 - dt)).abs() < 1e-15);
            assert!((f.get(i) - delta * (1.0 + dt)).abs() < 1e-15);
        }
        // picard resolves u' = delta - dt u' exactly
        let bp = backward_step(&u, &spec, &lt, dt, StepMode::Picard).unwrap();
        assert!((bp.get(0) - delta / (1.0 + dt)).abs() < 1e-13);
        let diff = bp.sup_diff(&b).unwrap();
        assert!(diff <= 2.0 * dt * dt * delta);
    }

    #[test]
    fn one_step_matches_refined_velocity_brute_force() {
        let (spec, lt) = setup("eikonal", &[("V", "0")], 128);
        let g = *lt.grid();
        let u = Field::from_fn(g, |x| (2.0 * PI * x).cos()).unwrap();
        let dt = 1e-3;
        let next = backward_step(&u, &spec, &lt, dt, StepMode::Explicit).unwrap();
        // refine the velocity search: 1e5 velocities, same interpolant, exact L = v^2/4
        let brute = (0..100_000)
            .map(|k| -4.0 + 8.0 * k as f64 / 99_999.0)
            .map(|v| u.interp(-v * dt) + dt * v * v / 4.0)
            .fold(f64::INFINITY, f64::min);
        assert!(
            (next.get(0) - brute).abs() < 1e-6,
            "{} vs {}",
            next.get(0),
            brute
        );
    }

    #[test]
    fn evolve_linear_contact_decays_like_euler() {
        let (spec, lt) = setup("linear_contact", &[("a", "1"), ("V", "0")], 16);
        let phi = Field::constant(*lt.grid(), 1.0);
        let dt = 1e-3;
        let r = evolve(
            &phi,
            &spec,
            &lt,
            1.0,
            dt,
            StepMode::Explicit,
            Direction::Backward,
            100,
        )
        .unwrap();
        assert_eq!(r.steps, 1000);
        let e = (-1.0f64).exp();
        assert!((r.final_field.get(3) - e).abs() <= e * dt);
        assert_eq!(r.snapshots.first().unwrap().0, 0.0);
        assert!((r.snapshots.last().unwrap().0 - 1.0).abs() < 1e-12);
        assert!(r.snapshots.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(r.snapshots.last().unwrap().1, r.final_field);
    }

    #[test]
    fn evolve_negative_contact_grows() {
        let (spec, lt) = setup("linear_contact", &[("a", "-1"), ("V", "0")], 16);
        let phi = Field::constant(*lt.grid(), -0.01);
        let r = evolve(
            &phi,
            &spec,
            &lt,
            3.0,
            1e-3,
            StepMode::Explicit,
            Direction::Backward,
            500,
        )
        .unwrap();
        let want = -0.01 * 3.0f64.exp();
        assert!((r.final_field.get(0) - want).abs() < 3.0 * 1e-3 * want.abs());
    }

    #[test]
    fn u_independent_evolution_commutes_with_constants() {
        let (spec, lt) = setup("eikonal", &[("V", "cos(2*pi*x)")], 64);
        let g = *lt.grid();
        let phi = Field::from_fn(g, |x| (2.0 * PI * x).sin() * 0.3).unwrap();
        let c = 0.75;
        let a = evolve(
            &phi,
            &spec,
            &lt,
            0.5,
            1e-3,
            StepMode::Explicit,
            Direction::Backward,
            100,
        )
        .unwrap();
        let b = evolve(
            &phi.shifted(c),
            &spec,
            &lt,
            0.5,
            1e-3,
            StepMode::Explicit,
            Direction::Backward,
            100,
        )
        .unwrap();
        for ((_, fa), (_, fb)) in a.snapshots.iter().zip(&b.snapshots) {
            for i in 0..g.n() {
                assert!((fb.get(i) - fa.get(i) - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_linear_contact_reaches_zero() {
        let (spec, lt) = setup("linear_contact", &[("a", "1"), ("V", "0")], 16);
        let phi = Field::constant(*lt.grid(), 0.7);
        let tol = 1e-6;
        let s = stationary_solve(&phi, &spec, &lt, 1e-2, tol, 50.0).unwrap();
        assert!(s.residual <= tol);
        assert!(s.field.sup_norm() <= tol / 1.0);
    }

    #[test]
    fn stationary_example_ex_stays_at_phi() {
        let (spec, lt) = setup(
            "example_ex",
            &[
                ("phi", "sin(2*pi*x)/(2*pi)"),
                ("dphi", "cos(2*pi*x)"),
                ("theta", "0.5"),
                ("zeta", "1"),
            ],
            128,
        );
        let g = *lt.grid();
        let phi = Field::from_fn(g, |x| (2.0 * PI * x).sin() / (2.0 * PI)).unwrap();
        let s = stationary_solve(&phi, &spec, &lt, 1e-3, 1e-6, 60.0).unwrap();
        let dev = s.field.sup_diff(&phi).unwrap();
        assert!(dev < 5e-3, "fixed point drifted {dev} from phi");
        let again = backward_step(&s.field, &spec, &lt, 1e-3, StepMode::Explicit).unwrap();
        assert!(again.sup_diff(&s.field).unwrap() / 1e-3 <= 1e-6);
    }

    #[test]
    fn unnormalized_eikonal_stalls_at_consistency_level() {
        let (spec, lt) = setup("eikonal", &[("V", "cos(2*pi*x) - 1")], 64);
        let phi = Field::zeros(*lt.grid());
        match stationary_solve(&phi, &spec, &lt, 1e-3, 1e-10, 2.0) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual < 0.1),
            Ok(s) => assert!(s.residual <= 1e-10),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn step_conditions_are_enforced() {
        let (spec, lt) = setup("linear_contact", &[("a", "1"), ("V", "0")], 16);
        let u = Field::zeros(*lt.grid());
        assert!(matches!(
            backward_step(&u, &spec, &lt, 0.6, StepMode::Explicit),
            Err(Error::Cfl(_))
        ));
        let (spec0, lt0) = setup("eikonal", &[("V", "0")], 16);
        assert!(matches!(
            backward_step(&u, &spec0, &lt0, 0.2, StepMode::Explicit),
            Err(Error::Cfl(_))
        ));
        let other = Field::zeros(TorusGrid::unit(8).unwrap());
        assert_eq!(
            backward_step(&other, &spec, &lt, 1e-3, StepMode::Explicit),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn explicit_and_picard_agree_to_second_order() {
        let ex = params([
            ("phi", "sin(2*pi*x)/(2*pi)"),
            ("dphi", "cos(2*pi*x)"),
            ("theta", "0.5"),
            ("zeta", "1"),
        ]);
        let spec = builtin("example_ex", &ex).unwrap();
        let lt = legendre(&spec, TorusGrid::unit(64).unwrap(), 64, 64).unwrap();
        let u = Field::from_fn(*lt.grid(), |x| 0.2 * (2.0 * PI * x).cos() + 0.1).unwrap();
        let mut diffs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let a = backward_step(&u, &spec, &lt, dt, StepMode::Explicit).unwrap();
            let b = backward_step(&u, &spec, &lt, dt, StepMode::Picard).unwrap();
            let d = a.sup_diff(&b).unwrap();
            assert!(d <= 4.0 * spec.lambda_bound * dt * dt, "dt {dt}: {d}");
            diffs.push(d);
        }
        assert!(diffs[0] / diffs[1] > 3.0, "{diffs:?}");
    }
}
