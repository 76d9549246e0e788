//! Stability and instability criteria for a stationary solution `u_-`.
//!
//! * (A3) holds when `c(G + W(x, u_-) - zeta dWu(x, u_-)) < 0` for some
//!   `zeta > 0`; (A4) is the same test with `+ zeta`.
//! * The global criterion checks `a >= 0` and `a > 0` on the projected
//!   Aubry set of `G` for `W = a(x) u`.
//!
//! The remaining probes evolve perturbations of `u_-` and measure decay
//! slopes, escape times and an empirical basin radius.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{critical_value, CriticalOptions};
use crate::error::{Error, Result};
use crate::grid::{fmt17, sup_diff_slices, Field};
use crate::hamiltonian::{HamiltonianSpec, LagrangianTable};
use crate::mather::barrier::{discrete_critical_value, peierls_barrier, DEFAULT_HORIZONS};
use crate::mather::{extremal_integral, solve_occupational, Sense, DEFAULT_FACE_TOL};
use crate::semigroup::{step_count, Direction, StepMode, Stepper};

pub const DEFAULT_ZETA_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_MARGIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A3,
    A4,
    #[serde(rename = "corollary_a")]
    CorollaryA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZetaValue {
    pub zeta: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub margin: f64,
    pub zeta_found: Option<f64>,
    pub c_values: Vec<ZetaValue>,
    /// Minimum of `int dWu(x, u_-) dmu` over the optimal face.
    #[serde(rename = "A_estimate")]
    pub a_estimate: Option<f64>,
    /// Maximum over the same face.
    #[serde(rename = "A_max")]
    pub a_max: Option<f64>,
    #[serde(rename = "Delta_estimate")]
    pub delta_estimate: Option<f64>,
    pub decay_slope: Option<f64>,
    /// Critical value of `G` (global criterion only).
    pub c_g: Option<f64>,
    pub aubry_indices: Option<Vec<usize>>,
    /// `min a` over the Aubry set (global criterion only).
    pub a0: Option<f64>,
    pub notes: Vec<String>,
}

impl StabilityReport {
    fn empty(condition: Condition, margin: f64) -> Self {
        Self {
            condition,
            verdict: Verdict::Inconclusive,
            margin,
            zeta_found: None,
            c_values: Vec::new(),
            a_estimate: None,
            a_max: None,
            delta_estimate: None,
            decay_slope: None,
            c_g: None,
            aubry_indices: None,
            a0: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub zeta_grid: Vec<f64>,
    pub margin: f64,
    pub critical: CriticalOptions,
    pub face_tol: f64,
    /// Skip the occupational LP (it dominates the cost on fine grids).
    pub with_lp: bool,
    pub horizons: Vec<f64>,
    pub aubry_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            zeta_grid: DEFAULT_ZETA_GRID.to_vec(),
            margin: DEFAULT_MARGIN,
            critical: CriticalOptions::default(),
            face_tol: DEFAULT_FACE_TOL,
            with_lp: true,
            horizons: DEFAULT_HORIZONS.to_vec(),
            aubry_tol: 1e-6,
        }
    }
}

/// Evaluates (A3) or (A4) on the `zeta` grid. `lt` is the Lagrangian of
/// `spec.g`.
pub fn check_condition(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_minus: &Field,
    which: Condition,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let sign = match which {
        Condition::A3 => -1.0,
        Condition::A4 => 1.0,
        Condition::CorollaryA => {
            return Err(Error::invalid("condition", "use check_corollary_a"));
        }
    };
    if u_minus.grid() != lt.grid() {
        return Err(Error::GridMismatch);
    }
    if opts.zeta_grid.is_empty() || opts.zeta_grid.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::invalid("zeta_grid", "entries must be positive"));
    }
    let dwu = spec.dwu_field(u_minus)?;
    let base = lt.with_potential(&spec.w_field(u_minus)?)?;

    let c_values = opts
        .zeta_grid
        .par_iter()
        .map(|&zeta| {
            let shifted = base.with_potential(&dwu.map(|d| sign * zeta * d))?;
            let r = critical_value(&shifted, &opts.critical)
                .map_err(|e| e.context(format!("critical value at zeta = {zeta}")))?;
            Ok(ZetaValue { zeta, c: r.c })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = StabilityReport::empty(which, opts.margin);
    report.zeta_found = c_values.iter().find(|z| z.c < -opts.margin).map(|z| z.zeta);
    report.verdict = if report.zeta_found.is_some() {
        Verdict::Holds
    } else if c_values.iter().all(|z| z.c > opts.margin) {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    report.c_values = c_values;

    if opts.with_lp {
        let mu = solve_occupational(&base, None)?;
        let (lo, hi) = rayon::join(
            || extremal_integral(&mu, &dwu, Sense::Min, opts.face_tol),
            || extremal_integral(&mu, &dwu, Sense::Max, opts.face_tol),
        );
        report.a_estimate = Some(lo?);
        report.a_max = Some(hi?);
    }
    Ok(report)
}

/// Global criterion for `W = a(x) u`: `a >= 0` everywhere and `a > margin`
/// on the projected Aubry set of `G`. `lt` is the Lagrangian of `G`.
pub fn check_corollary_a(
    lt: &LagrangianTable,
    a_field: &Field,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    if a_field.grid() != lt.grid() {
        return Err(Error::GridMismatch);
    }
    if a_field.min() < 0.0 {
        return Err(Error::invalid(
            "a",
            format!("must be nonnegative, min is {}", a_field.min()),
        ));
    }
    let mut report = StabilityReport::empty(Condition::CorollaryA, opts.margin);
    let cr = critical_value(lt, &opts.critical)?;
    let c_exact = discrete_critical_value(lt, None)?;
    if (cr.c - c_exact).abs() > opts.critical.cross_tol {
        report.notes.push(format!(
            "critical value estimate {} differs from the discrete value {c_exact}",
            cr.c
        ));
    }
    report.c_g = Some(cr.c);
    let bt = peierls_barrier(lt, c_exact, &opts.horizons, None)?;
    let aubry = crate::mather::aubry_set(&bt, opts.aubry_tol);
    let a0 = aubry
        .iter()
        .map(|&i| a_field.get(i))
        .fold(f64::INFINITY, f64::min);
    report.verdict = if a0 > opts.margin {
        Verdict::Holds
    } else {
        Verdict::Fails
    };
    report.a0 = Some(a0);
    report.aubry_indices = Some(aubry);
    Ok(report)
}

/// `(t, sup |u(t) - u_-|)` samples.
pub type DeviationSeries = Vec<(f64, f64)>;

pub fn write_series_csv(series: &[(f64, f64)], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "t,sup_dev")?;
    for (t, d) in series {
        writeln!(out, "{},{}", fmt17(*t), fmt17(*d))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// The larger of the two slopes.
    pub slope: f64,
    pub slope_plus: f64,
    pub slope_minus: f64,
    pub window: (f64, f64),
    /// Samples below the noise floor forced a shorter window.
    pub shrunk: bool,
    pub noise_floor: f64,
    #[serde(skip)]
    pub plus: DeviationSeries,
    #[serde(skip)]
    pub minus: DeviationSeries,
}

fn deviation_series(
    st: &Stepper<'_>,
    u_minus: &Field,
    phi: Vec<f64>,
    horizon: f64,
    stop: impl Fn(f64, f64) -> bool,
) -> Result<DeviationSeries> {
    let dt = st.dt();
    let steps = step_count(horizon, dt);
    let mut cur = phi;
    let mut out = vec![(0.0, sup_diff_slices(&cur, u_minus.values()))];
    for k in 1..=steps {
        cur = st
            .step_values(&cur, Direction::Backward)
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::Blowup {
                    time: k as f64 * dt,
                },
                e => e,
            })?;
        let t = k as f64 * dt;
        let d = sup_diff_slices(&cur, u_minus.values());
        out.push((t, d));
        if stop(t, d) {
            break;
        }
    }
    Ok(out)
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = points.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    stl / stt
}

/// Slope of `ln dev` against `t` on `[lo, hi]`, using only samples above
/// `floor`; shrinks the window to the last stretch above the floor.
fn windowed_slope(series: &[(f64, f64)], lo: f64, hi: f64, floor: f64) -> Result<(f64, bool, f64)> {
    let inside: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= lo - 1e-12 && t <= hi + 1e-12)
        .collect();
    let above: Vec<(f64, f64)> = inside.iter().copied().take_while(|p| p.1 > floor).collect();
    let shrunk = above.len() < inside.len();
    if above.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "deviation under the noise floor {floor:e} on the fit window"
        )));
    }
    let end = above.last().unwrap().0;
    Ok((fit_slope(&above), shrunk, end))
}

/// Decay exponent of perturbations `u_- +/- delta` (target bound
/// `limsup ln |u - u_-| / t <= -A`). `window` defaults to `[T/2, T]`.
#[allow(clippy::too_many_arguments)]
pub fn decay_exponent(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_minus: &Field,
    delta: f64,
    horizon: f64,
    dt: f64,
    window: Option<(f64, f64)>,
) -> Result<DecayFit> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let (lo, hi) = window.unwrap_or((horizon / 2.0, horizon));
    if !(lo < hi && hi <= horizon + 1e-12) {
        return Err(Error::invalid("fit_window", "need t_lo < t_hi <= T"));
    }
    let st = Stepper::new(spec, lt, dt, StepMode::Explicit)?;
    // distance of u_- from the discrete fixed point is about residual / rate
    let one = st.step_values(u_minus.values(), Direction::Backward)?;
    let residual = sup_diff_slices(&one, u_minus.values()) / dt;
    let floor = (50.0 * residual).max(1e-12 * (1.0 + u_minus.sup_norm()));

    let run = |s: f64| {
        deviation_series(
            &st,
            u_minus,
            u_minus.values().iter().map(|v| v + s * delta).collect(),
            hi,
            |_, _| false,
        )
    };
    let (plus, minus) = rayon::join(|| run(1.0), || run(-1.0));
    let (plus, minus) = (plus?, minus?);
    let (sp, shp, ep) = windowed_slope(&plus, lo, hi, floor)?;
    let (sm, shm, em) = windowed_slope(&minus, lo, hi, floor)?;
    Ok(DecayFit {
        slope: sp.max(sm),
        slope_plus: sp,
        slope_minus: sm,
        window: (lo, ep.min(em)),
        shrunk: shp || shm,
        noise_floor: floor,
        plus,
        minus,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub escaped: bool,
    /// Largest deviation observed.
    pub sup_dev: f64,
    pub t_escape: Option<f64>,
    #[serde(skip)]
    pub series: DeviationSeries,
}

/// Evolves `u_- - eps` and reports whether the deviation reaches
/// `delta_target` before `T`.
pub fn instability_probe(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_minus: &Field,
    eps: f64,
    delta_target: f64,
    horizon: f64,
    dt: f64,
) -> Result<ProbeResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", "must lie in (0, 1)"));
    }
    if !(delta_target > eps) {
        return Err(Error::invalid("Delta", "must exceed eps"));
    }
    let st = Stepper::new(spec, lt, dt, StepMode::Explicit)?;
    let phi = u_minus.values().iter().map(|v| v - eps).collect();
    let series = deviation_series(&st, u_minus, phi, horizon, |_, d| d >= delta_target)?;
    let t_escape = series.iter().find(|p| p.1 >= delta_target).map(|p| p.0);
    Ok(ProbeResult {
        escaped: t_escape.is_some(),
        sup_dev: series.iter().map(|p| p.1).fold(0.0, f64::max),
        t_escape,
        series,
    })
}

/// Largest tested `delta` in `(0, delta_hi]` for which both `u_- +/- delta`
/// come within `delta / 2` of `u_-` by time `T`; six bisection rounds.
pub fn basin_estimate(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_minus: &Field,
    horizon: f64,
    dt: f64,
    delta_hi: f64,
) -> Result<f64> {
    if !(delta_hi > 0.0) {
        return Err(Error::invalid("delta_hi", "must be positive"));
    }
    let st = Stepper::new(spec, lt, dt, StepMode::Explicit)?;
    let returns = |delta: f64| -> bool {
        [1.0, -1.0].iter().all(|&s| {
            let phi = u_minus.values().iter().map(|v| v + s * delta).collect();
            match deviation_series(&st, u_minus, phi, horizon, |_, d| d <= delta / 2.0) {
                Ok(series) => series.last().is_some_and(|p| p.1 <= delta / 2.0),
                Err(_) => false,
            }
        })
    };
    if returns(delta_hi) {
        return Ok(delta_hi);
    }
    let (mut lo, mut hi) = (0.0, delta_hi);
    for _ in 0..6 {
        let mid = 0.5 * (lo + hi);
        if returns(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use crate::hamiltonian::{builtin, legendre, params};

    fn setup(a: &str, v: &str, n: usize) -> (HamiltonianSpec, LagrangianTable, Field) {
        let spec = builtin("linear_contact", &params([("a", a), ("V", v)])).unwrap();
        let grid = TorusGrid::unit(n).unwrap();
        let lt = legendre(&spec, grid, 32, 32).unwrap();
        (spec, lt, Field::zeros(grid))
    }

    #[test]
    fn linear_contact_conditions() {
        let (spec, lt, u) = setup("1", "0", 32);
        let r =
            check_condition(&spec, &lt, &u, Condition::A3, &StabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.zeta_found, Some(0.25));
        for z in &r.c_values {
            assert!((z.c + z.zeta).abs() < 1e-6);
        }
        assert!((r.a_estimate.unwrap() - 1.0).abs() < 1e-9);
        let r4 =
            check_condition(&spec, &lt, &u, Condition::A4, &StabilityOptions::default()).unwrap();
        assert_eq!(r4.verdict, Verdict::Fails);

        let (spec, lt, u) = setup("-1", "0", 32);
        let r =
            check_condition(&spec, &lt, &u, Condition::A4, &StabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let r3 =
            check_condition(&spec, &lt, &u, Condition::A3, &StabilityOptions::default()).unwrap();
        assert_eq!(r3.verdict, Verdict::Fails);
    }

    #[test]
    fn decay_of_linear_contact() {
        let (spec, lt, u) = setup("1", "0", 32);
        let fit = decay_exponent(&spec, &lt, &u, 0.1, 6.0, 1e-3, None).unwrap();
        assert!((fit.slope + 1.0).abs() < 5e-2, "{fit:?}");
        assert!(!fit.shrunk);
    }

    #[test]
    fn eikonal_does_not_decay() {
        let spec = builtin("eikonal", &params([("V", "0")])).unwrap();
        let grid = TorusGrid::unit(32).unwrap();
        let lt = legendre(&spec, grid, 32, 32).unwrap();
        let u = Field::zeros(grid);
        let fit = decay_exponent(&spec, &lt, &u, 0.1, 4.0, 1e-2, None).unwrap();
        assert!(fit.slope.abs() < 5e-2);
    }

    #[test]
    fn escape_time_of_unstable_constant() {
        let (spec, lt, u) = setup("-1", "0", 32);
        let p = instability_probe(&spec, &lt, &u, 0.01, 0.5, 6.0, 1e-3).unwrap();
        assert!(p.escaped);
        assert!((p.t_escape.unwrap() - 50f64.ln()).abs() < 0.1);

        let (spec, lt, u) = setup("1", "0", 32);
        let p = instability_probe(&spec, &lt, &u, 0.01, 0.5, 3.0, 1e-3).unwrap();
        assert!(!p.escaped);
        assert!(p.series.last().unwrap().1 < 0.01);
        assert!(instability_probe(&spec, &lt, &u, 0.5, 0.4, 3.0, 1e-3).is_err());
    }

    #[test]
    fn basins() {
        let (spec, lt, u) = setup("1", "0", 16);
        assert_eq!(basin_estimate(&spec, &lt, &u, 2.0, 1e-2, 0.5).unwrap(), 0.5);
        let (spec, lt, u) = setup("-1", "0", 16);
        assert_eq!(basin_estimate(&spec, &lt, &u, 2.0, 1e-2, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn corollary_cases() {
        let grid = TorusGrid::unit(32).unwrap();
        let g =
            HamiltonianSpec::from_strs("p^2 + cos(2*pi*x) - 1", "0", "0", 0.0, 4.0, 4.0).unwrap();
        let lt = legendre(&g, grid, 16, 32).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let a = Field::from_fn(grid, |x| 2.0 + (tau * x).sin()).unwrap();
        let r = check_corollary_a(&lt, &a, &StabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.aubry_indices.as_deref(), Some(&[0usize][..]));
        assert!((r.a0.unwrap() - 2.0).abs() < 1e-12);

        let free = HamiltonianSpec::from_strs("p^2", "0", "0", 0.0, 4.0, 4.0).unwrap();
        let lt = legendre(&free, grid, 16, 32).unwrap();
        let a = Field::from_fn(grid, |x| (0.5 * tau * x).sin().powi(2)).unwrap();
        let r = check_corollary_a(&lt, &a, &StabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        let r = check_corollary_a(&lt, &Field::zeros(grid), &StabilityOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        let neg = Field::constant(grid, -0.1);
        assert!(check_corollary_a(&lt, &neg, &StabilityOptions::default()).is_err());
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let (spec, lt, u) = setup("1", "0", 16);
        let r =
            check_condition(&spec, &lt, &u, Condition::A3, &StabilityOptions::default()).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["condition"], "A3");
        assert_eq!(json["verdict"], "holds");
        assert!(json.get("A_estimate").is_some());
        assert!(json.get("Delta_estimate").is_some());
    }
}
