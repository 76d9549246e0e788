//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails or overruns its time budget.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakkam::critical::{c_eps_curve, critical_value, one_sided_derivatives};
use weakkam::hamiltonian::{builtin, legendre, params};
use weakkam::homogenize::{rate_experiment, HomogOptions, HomogProblem, RateOptions, RateResult};
use weakkam::mather::{
    aubry_set, extremal_range, normalized_barrier, solve_occupational, DEFAULT_FACE_TOL,
    DEFAULT_HORIZONS,
};
use weakkam::semigroup::{evolve, stationary_solve, StepMode};
use weakkam::stability::{
    check_condition, check_corollary_a, decay_exponent, instability_probe, StabilityOptions,
};
use weakkam::{
    CEpsCurve, Condition, CriticalOptions, Direction, Field, HamiltonianSpec, LagrangianTable,
    Stepper, TorusGrid, Verdict,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn tau() -> f64 {
    2.0 * std::f64::consts::PI
}

fn table(spec: &HamiltonianSpec, n: usize, m: usize) -> LagrangianTable {
    legendre(spec, TorusGrid::unit(n).unwrap(), m, 64).unwrap()
}

fn example_ex() -> HamiltonianSpec {
    builtin(
        "example_ex",
        &params([
            ("phi", "sin(2*pi*x)/(2*pi)"),
            ("dphi", "cos(2*pi*x)"),
            ("theta", "0.5"),
            ("zeta", "1"),
        ]),
    )
    .unwrap()
}

fn phi(grid: TorusGrid) -> Field {
    Field::from_fn(grid, |x| (tau() * x).sin() / tau()).unwrap()
}

fn linear_contact(a: &str) -> HamiltonianSpec {
    builtin("linear_contact", &params([("a", a), ("V", "0")])).unwrap()
}

fn c1_contact_ode() -> Outcome {
    let spec = linear_contact("1");
    let lt = table(&spec, 256, 64);
    let one = Field::constant(*lt.grid(), 1.0);
    let r = evolve(
        &one,
        &spec,
        &lt,
        1.0,
        1e-3,
        StepMode::Explicit,
        Direction::Backward,
        1000,
    )
    .map_err(|e| e.to_string())?;
    let err = r.final_field.map(|v| v - (-1f64).exp()).sup_norm();
    ensure(err <= 2e-3, format!("|u(1) - 1/e| = {err:.3e} > 2e-3"))?;
    Ok(format!("|u(1) - 1/e| = {err:.3e}"))
}

fn c2_eikonal_critical() -> Outcome {
    let spec = HamiltonianSpec::from_strs("p^2 + cos(2*pi*x)", "0", "0", 0.0, 4.0, 4.0).unwrap();
    let r = critical_value(&table(&spec, 256, 64), &CriticalOptions::default())
        .map_err(|e| e.to_string())?;
    let (cd, cl) = (r.c_discount.unwrap(), r.c_longtime.unwrap());
    ensure((r.c - 1.0).abs() <= 2e-2, format!("c = {}", r.c))?;
    ensure(
        (cd - cl).abs() <= 2e-2,
        format!("discount {cd} vs long-time {cl}"),
    )?;
    Ok(format!(
        "c = {:.6}, discount {cd:.6}, long-time {cl:.6}",
        r.c
    ))
}

fn c3_lp_cross_check() -> Outcome {
    let mut lines = Vec::new();
    let ex = example_ex();
    let grid = TorusGrid::unit(128).unwrap();
    let ex_lt = table(&ex, 128, 48);
    let h_minus = ex_lt
        .with_potential(&ex.w_field(&phi(grid)).unwrap())
        .unwrap();
    let cases = [
        (
            "eikonal",
            table(
                &HamiltonianSpec::from_strs("p^2 + cos(2*pi*x)", "0", "0", 0.0, 4.0, 4.0).unwrap(),
                128,
                48,
            ),
        ),
        (
            "(p+0.7)^2",
            table(
                &HamiltonianSpec::from_strs("(p + 0.7)^2", "0", "0", 0.0, 4.0, 4.0).unwrap(),
                128,
                48,
            ),
        ),
        ("example_ex H-", h_minus),
    ];
    for (name, lt) in cases {
        let c = critical_value(&lt, &CriticalOptions::default())
            .map_err(|e| e.to_string())?
            .c;
        let mu = solve_occupational(&lt, None).map_err(|e| e.to_string())?;
        ensure(
            (mu.value() + c).abs() <= 1e-2,
            format!("{name}: LP value {} vs -c = {}", mu.value(), -c),
        )?;
        lines.push(format!("{name}: {:.5} vs {:.5}", mu.value(), -c));
    }
    Ok(lines.join("; "))
}

type Pair = (f64, f64);

/// `(D-, D+)` by finite differences and `(min, max)` of the extremal
/// integrals of `dWu` over Mather measures.
fn derivative_pair(
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u: &Field,
    curves: &mut Vec<CEpsCurve>,
) -> Result<(Pair, Pair), String> {
    let eps = [-0.04, -0.02, 0.0, 0.02, 0.04];
    let mut curve =
        c_eps_curve(spec, lt, u, &eps, &CriticalOptions::default()).map_err(|e| e.to_string())?;
    let d = one_sided_derivatives(&mut curve).map_err(|e| e.to_string())?;
    curves.push(curve);
    let base = lt.with_potential(&spec.w_field(u).unwrap()).unwrap();
    let mu = solve_occupational(&base, None).map_err(|e| e.to_string())?;
    let range = extremal_range(&mu, &spec.dwu_field(u).unwrap(), DEFAULT_FACE_TOL)
        .map_err(|e| e.to_string())?;
    Ok((d, range))
}

fn c4_and_c10(curves: &mut Vec<CEpsCurve>) -> Outcome {
    let mut lines = Vec::new();
    let cases: Vec<(&str, HamiltonianSpec, f64, bool)> = vec![
        ("linear_contact a=1", linear_contact("1"), 1.0, false),
        ("linear_contact a=-1", linear_contact("-1"), -1.0, false),
        ("example_ex", example_ex(), 0.5, true),
    ];
    for (name, spec, exact, use_phi) in cases {
        let lt = table(&spec, 128, 48);
        let u = if use_phi {
            phi(*lt.grid())
        } else {
            Field::zeros(*lt.grid())
        };
        let ((dm, dp), (lo, hi)) = derivative_pair(&spec, &lt, &u, curves)?;
        for (label, v) in [("D-", dm), ("D+", dp), ("min", lo), ("max", hi)] {
            ensure(
                (v - exact).abs() <= 5e-2,
                format!("{name}: {label} = {v}, expected {exact}"),
            )?;
        }
        ensure(
            (dm - lo).abs() <= 5e-2 && (dp - hi).abs() <= 5e-2,
            format!("{name}: D-/D+ = {dm}/{dp}, extremal {lo}/{hi}"),
        )?;
        lines.push(format!(
            "{name}: D- {dm:.4} D+ {dp:.4} LP [{lo:.4}, {hi:.4}]"
        ));
    }
    Ok(lines.join("; "))
}

fn c5_decay() -> Outcome {
    let spec = example_ex();
    let lt = table(&spec, 128, 64);
    let grid = *lt.grid();
    let opts = StabilityOptions::default();
    let r =
        check_condition(&spec, &lt, &phi(grid), Condition::A3, &opts).map_err(|e| e.to_string())?;
    ensure(
        r.verdict == Verdict::Holds,
        format!("A3 verdict {:?}", r.verdict),
    )?;
    let a = r.a_estimate.unwrap();
    let dt = 1e-2;
    let u_minus = stationary_solve(&phi(grid), &spec, &lt, dt, 1e-9, 200.0)
        .map_err(|e| e.to_string())?
        .field;
    let fit =
        decay_exponent(&spec, &lt, &u_minus, 0.05, 16.0, dt, None).map_err(|e| e.to_string())?;
    ensure(
        fit.slope <= -0.25,
        format!("slope {} > -0.25 (A_estimate {a})", fit.slope),
    )?;
    Ok(format!(
        "A3 holds, A_estimate {a:.4}, slope {:.4} on [{:.1}, {:.1}]",
        fit.slope, fit.window.0, fit.window.1
    ))
}

fn c6_instability() -> Outcome {
    let spec = linear_contact("-1");
    let lt = table(&spec, 64, 64);
    let u = Field::zeros(*lt.grid());
    let mut lines = Vec::new();
    for (eps, horizon) in [(0.01, 6.0), (0.001, 8.0)] {
        let p = instability_probe(&spec, &lt, &u, eps, 0.5, horizon, 1e-3)
            .map_err(|e| e.to_string())?;
        let expect = (0.5 / eps).ln();
        let t = p
            .t_escape
            .ok_or(format!("eps {eps}: no escape by T = {horizon}"))?;
        ensure(
            (t - expect).abs() <= 0.1,
            format!("eps {eps}: t = {t}, expected {expect}"),
        )?;
        lines.push(format!(
            "eps {eps}: t_escape {t:.4} (ln {:.0} = {expect:.4})",
            0.5 / eps
        ));
    }
    Ok(lines.join("; "))
}

fn c7_corollary() -> Outcome {
    let spec = builtin(
        "corollary_a",
        &params([("a", "2 + sin(2*pi*x)"), ("V", "cos(2*pi*x)"), ("c", "1")]),
    )
    .unwrap();
    let lt = table(&spec, 128, 64);
    let grid = *lt.grid();
    let a = Field::from_fn(grid, |x| 2.0 + (tau() * x).sin()).unwrap();
    let r = check_corollary_a(&lt, &a, &StabilityOptions::default()).map_err(|e| e.to_string())?;
    ensure(
        r.verdict == Verdict::Holds,
        format!("verdict {:?}", r.verdict),
    )?;
    let dt = lt.node_aligned_dt();
    let run = |c: f64| {
        evolve(
            &Field::constant(grid, c),
            &spec,
            &lt,
            40.0,
            dt,
            StepMode::Explicit,
            Direction::Backward,
            usize::MAX,
        )
        .map(|r| r.final_field)
    };
    let (up, down) = rayon::join(|| run(2.0), || run(-2.0));
    let gap = up
        .map_err(|e| e.to_string())?
        .sup_diff(&down.map_err(|e| e.to_string())?)
        .unwrap();
    ensure(gap <= 1e-2, format!("gap at T = 40 is {gap}"))?;
    Ok(format!(
        "holds, a0 = {:.4}, gap at T=40 {gap:.3e}",
        r.a0.unwrap()
    ))
}

fn c8_rate() -> Outcome {
    let hp = HomogProblem::from_strs("u + p^2 + 0.5*cos(2*pi*y)", "1", 1.0, 1.0).unwrap();
    let opts = HomogOptions::default();
    let ks = [8, 16, 32, 64];
    let run = |npp: usize| -> Result<RateResult, String> {
        rate_experiment(&hp, &ks, npp, &opts, &RateOptions::default()).map_err(|e| e.to_string())
    };
    let coarse = run(32)?;
    let fine = run(64)?;
    let slope = coarse.slope.ok_or("errors at noise level")?;
    ensure(slope >= 0.4, format!("slope {slope} < 0.4"))?;
    let ratio = fine.c_fit / coarse.c_fit;
    ensure(
        (0.8..=1.2).contains(&ratio),
        format!("c_fit {} vs {} under doubling", coarse.c_fit, fine.c_fit),
    )?;
    Ok(format!(
        "slope {slope:.3}, errors {:?}, c_fit {:.4} -> {:.4}",
        coarse
            .errors
            .iter()
            .map(|e| format!("{e:.2e}"))
            .collect::<Vec<_>>(),
        coarse.c_fit,
        fine.c_fit
    ))
}

fn random_field(grid: TorusGrid, rng: &mut ChaCha8Rng) -> Field {
    let k: Vec<(f64, f64, f64)> = (1..=4)
        .map(|_| {
            (
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.5..0.5),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        k.iter()
            .enumerate()
            .map(|(i, (a, b, c))| {
                let w = tau() * (i + 1) as f64 * x;
                (a * w.cos() + b * w.sin()) / (i + 1) as f64 + c / 4.0
            })
            .sum()
    })
    .unwrap()
}

fn c9_semigroup_suite() -> Outcome {
    let builtins: Vec<(&str, HamiltonianSpec)> = vec![
        (
            "eikonal",
            builtin("eikonal", &params([("V", "cos(2*pi*x)")])).unwrap(),
        ),
        (
            "linear_contact a=1",
            builtin(
                "linear_contact",
                &params([("a", "1"), ("V", "cos(2*pi*x)")]),
            )
            .unwrap(),
        ),
        (
            "linear_contact a=-1",
            builtin(
                "linear_contact",
                &params([("a", "-1"), ("V", "cos(2*pi*x)")]),
            )
            .unwrap(),
        ),
        ("example_ex", example_ex()),
        (
            "corollary_a",
            builtin(
                "corollary_a",
                &params([("a", "2 + sin(2*pi*x)"), ("V", "cos(2*pi*x)"), ("c", "1")]),
            )
            .unwrap(),
        ),
    ];
    let dt = 5e-3;
    let steps = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_slack_use: f64 = 0.0;
    for (name, spec) in &builtins {
        let lt = table(spec, 128, 64);
        let grid = *lt.grid();
        let st = Stepper::new(spec, &lt, dt, StepMode::Explicit).map_err(|e| e.to_string())?;
        let monotone = spec.is_nonincreasing_in_u().unwrap();
        let lip = 1.0 + spec.lambda_bound * dt;
        for trial in 0..50 {
            let u = random_field(grid, &mut rng);
            let v = random_field(grid, &mut rng);
            let tu = st.step(&u, Direction::Backward).unwrap();
            let tv = st.step(&v, Direction::Backward).unwrap();
            let d = tu.sup_diff(&tv).unwrap();
            let bound = lip * u.sup_diff(&v).unwrap();
            ensure(
                d <= bound + 1e-12,
                format!("{name} #{trial}: {d} > {bound}"),
            )?;

            if monotone {
                let above = u.zip_with(&v, |a, b| a + (b - a).abs()).unwrap();
                let ta = st.step(&above, Direction::Backward).unwrap();
                let bad = ta.zip_with(&tu, |a, b| b - a).unwrap().max();
                ensure(
                    bad <= 0.0,
                    format!("{name} #{trial}: order broken by {bad}"),
                )?;
            }

            let c_scheme = st
                .consistency_error(&u, Direction::Backward)
                .unwrap()
                .max(st.consistency_error(&u, Direction::Forward).unwrap());
            let slack = 2.0 * steps as f64 * dt * c_scheme + 1e-12;
            let down = st.iterate(&u, Direction::Backward, steps).unwrap();
            let back = st.iterate(&down, Direction::Forward, steps).unwrap();
            let excess = back.zip_with(&u, |a, b| a - b).unwrap().max();
            ensure(
                excess <= slack,
                format!("{name} #{trial}: T+T- - id = {excess} > {slack}"),
            )?;
            let up = st.iterate(&u, Direction::Forward, steps).unwrap();
            let round = st.iterate(&up, Direction::Backward, steps).unwrap();
            let deficit = u.zip_with(&round, |a, b| a - b).unwrap().max();
            ensure(
                deficit <= slack,
                format!("{name} #{trial}: id - T-T+ = {deficit} > {slack}"),
            )?;
            worst_slack_use = worst_slack_use.max(excess.max(deficit) / slack);
        }
    }
    Ok(format!(
        "{} builtins x 50 pairs, worst ordering excess {:.1}% of slack",
        builtins.len(),
        100.0 * worst_slack_use
    ))
}

fn c10_lipschitz(curves: &[CEpsCurve], lambdas: &[f64]) -> Outcome {
    ensure(!curves.is_empty(), "no curves were constructed")?;
    let mut worst = f64::NEG_INFINITY;
    for (curve, &l) in curves.iter().zip(lambdas) {
        let e = curve.lipschitz_excess(l);
        ensure(e <= 4e-2, format!("excess {e}"))?;
        worst = worst.max(e);
    }
    Ok(format!("{} curves, worst excess {worst:.3e}", curves.len()))
}

fn c11_support_in_aubry() -> Outcome {
    let mut lines = Vec::new();
    let ex = example_ex();
    let ex_lt = table(&ex, 128, 64);
    let h_minus = ex_lt
        .with_potential(&ex.w_field(&phi(*ex_lt.grid())).unwrap())
        .unwrap();
    let eik = HamiltonianSpec::from_strs("p^2 + cos(2*pi*x)", "0", "0", 0.0, 4.0, 4.0).unwrap();
    for (name, lt) in [
        ("eikonal", table(&eik, 128, 64)),
        ("example_ex H-", h_minus),
    ] {
        let grid = *lt.grid();
        let mu = solve_occupational(&lt, None).map_err(|e| e.to_string())?;
        let bt = normalized_barrier(&lt, &DEFAULT_HORIZONS, None).map_err(|e| e.to_string())?;
        let aubry = aubry_set(&bt, 1e-6);
        ensure(!aubry.is_empty(), format!("{name}: empty Aubry set"))?;
        let support = mu.support_nodes(1e-9);
        for &s in &support {
            let d = aubry
                .iter()
                .map(|&a| grid.index_distance(s, a))
                .min()
                .unwrap();
            ensure(
                d <= 1,
                format!("{name}: support node {s} is {d} cells from the Aubry set"),
            )?;
        }
        lines.push(format!(
            "{name}: support {support:?} within Aubry {aubry:?}"
        ));
    }
    Ok(lines.join("; "))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: Box<dyn FnOnce() -> Outcome>,
}

fn main() -> ExitCode {
    // criteria 4 and 10 share the curves
    let curves = std::rc::Rc::new(std::cell::RefCell::new(Vec::new()));
    let c4_curves = curves.clone();
    let c10_curves = curves.clone();
    let secs = Duration::from_secs;
    let criteria = vec![
        Criterion {
            id: 1,
            name: "contact ODE exactness",
            budget: secs(5),
            run: Box::new(c1_contact_ode),
        },
        Criterion {
            id: 2,
            name: "eikonal critical value",
            budget: secs(30),
            run: Box::new(c2_eikonal_critical),
        },
        Criterion {
            id: 3,
            name: "LP / critical cross-check",
            budget: secs(60),
            run: Box::new(c3_lp_cross_check),
        },
        Criterion {
            id: 4,
            name: "one-sided derivatives of c(eps) vs extremal integrals",
            budget: secs(120),
            run: Box::new(move || c4_and_c10(&mut c4_curves.borrow_mut())),
        },
        Criterion {
            id: 5,
            name: "decay under A3",
            budget: secs(60),
            run: Box::new(c5_decay),
        },
        Criterion {
            id: 6,
            name: "instability escape time",
            budget: secs(30),
            run: Box::new(c6_instability),
        },
        Criterion {
            id: 7,
            name: "global stability corollary",
            budget: secs(60),
            run: Box::new(c7_corollary),
        },
        Criterion {
            id: 8,
            name: "homogenization rate",
            budget: secs(300),
            run: Box::new(c8_rate),
        },
        Criterion {
            id: 9,
            name: "semigroup property suite",
            budget: secs(60),
            run: Box::new(c9_semigroup_suite),
        },
        Criterion {
            id: 10,
            name: "c(eps) Lipschitz invariant",
            budget: secs(10),
            run: Box::new(move || c10_lipschitz(&c10_curves.borrow(), &[1.0, 1.0, 0.5])),
        },
        Criterion {
            id: 11,
            name: "Mather support inside the Aubry set",
            budget: secs(120),
            run: Box::new(c11_support_in_aubry),
        },
    ];

    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {:?}", c.budget)),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({}) [{:.1}s]: {}",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
