//! Experiment dispatch, artifact writing and exit-code mapping.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use weakkam::critical::{c_eps_curve, critical_value, one_sided_derivatives};
use weakkam::hamiltonian::legendre;
use weakkam::homogenize::{random_smooth_field, rate_experiment, HomogOptions, RateOptions};
use weakkam::mather::{
    aubry_set, extremal_range, normalized_barrier, solve_occupational, DEFAULT_AUBRY_TOL,
    DEFAULT_FACE_TOL,
};
use weakkam::semigroup::{evolve, stationary_solve};
use weakkam::stability::{
    basin_estimate, check_condition, check_corollary_a, decay_exponent, instability_probe,
    write_series_csv, StabilityOptions,
};
use weakkam::{
    parse, Condition, CriticalOptions, Direction, Error, Field, HamiltonianSpec, LagrangianTable,
    StepMode, Stepper, TorusGrid, Verdict,
};

use crate::config::{Command, ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    SolverFailure = 1,
    ConfigError = 2,
    PropertyFailure = 3,
}

impl Status {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("output directory {0} is locked by another run")]
    Locked(PathBuf),
}

impl RunError {
    pub fn status(&self) -> Status {
        match self {
            RunError::Config(_) | RunError::Locked(_) => Status::ConfigError,
            RunError::Solver(e) => solver_status(e),
            RunError::Io(_) => Status::SolverFailure,
        }
    }
}

fn solver_status(e: &Error) -> Status {
    match e {
        Error::At { source, .. } => solver_status(source),
        Error::InvalidParameter { .. } | Error::Expr(_) | Error::Cfl(_) => Status::ConfigError,
        Error::Disagreement { .. } => Status::PropertyFailure,
        _ => Status::SolverFailure,
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

/// Exclusive claim on an output directory, released on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(".weakkam.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(DirLock(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(RunError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Writes artifacts into the output directory, each starting with the
/// resolved config.
struct Artifacts<'a> {
    dir: &'a Path,
    cfg: &'a ExperimentConfig,
    written: Vec<PathBuf>,
}

impl Artifacts<'_> {
    fn csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> io::Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# config: {}", self.cfg.header_json())?;
        body(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// JSON document `{"config": ..., "report": ...}`.
    fn json(&mut self, name: &str, report: &impl Serialize) -> io::Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, T: Serialize> {
            config: &'a ExperimentConfig,
            report: &'a T,
        }
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(
            &mut w,
            &Doc {
                config: self.cfg,
                report,
            },
        )
        .map_err(io::Error::other)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}

/// Runs the experiment into `out` (or the config's `output_dir`). Failures
/// leave a `diagnostic.txt` next to any partial artifacts.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> RunOutcome {
    let dir = out.unwrap_or(&cfg.output_dir).to_path_buf();
    if let Err(e) = fs::create_dir_all(&dir) {
        return RunOutcome {
            status: Status::SolverFailure,
            summary: format!("cannot create {}: {e}", dir.display()),
            artifacts: Vec::new(),
        };
    }
    let lock = match DirLock::acquire(&dir) {
        Ok(l) => l,
        Err(e) => {
            return RunOutcome {
                status: e.status(),
                summary: e.to_string(),
                artifacts: Vec::new(),
            }
        }
    };
    let mut art = Artifacts {
        dir: &dir,
        cfg,
        written: Vec::new(),
    };
    let result = dispatch(cfg, &mut art);
    let (status, summary) = match result {
        Ok((status, summary)) => (status, summary),
        Err(e) => (e.status(), format!("{}: {e}", cfg.command)),
    };
    if status != Status::Success {
        let path = dir.join("diagnostic.txt");
        let text = format!(
            "# config: {}\nstatus: {}\n{}\n",
            cfg.header_json(),
            status.code(),
            summary
        );
        if fs::write(&path, text).is_ok() {
            art.written.push(path);
        }
    }
    let artifacts = art.written;
    drop(lock);
    RunOutcome {
        status,
        summary,
        artifacts,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Inconclusive => "inconclusive",
    }
}

type Dispatch = Result<(Status, String), RunError>;

fn dispatch(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    match cfg.command {
        Command::Evolve => cmd_evolve(cfg, art),
        Command::Stationary => cmd_stationary(cfg, art),
        Command::Critical => cmd_critical(cfg, art),
        Command::Ceps => cmd_ceps(cfg, art),
        Command::Mather => cmd_mather(cfg, art),
        Command::Barrier => cmd_barrier(cfg, art),
        Command::Stability => cmd_stability(cfg, art),
        Command::Instability => cmd_instability(cfg, art),
        Command::Corollary => cmd_corollary(cfg, art),
        Command::Homogenize => cmd_homogenize(cfg, art),
        Command::ExampleEx => cmd_example_ex(cfg, art),
    }
}

fn grid(cfg: &ExperimentConfig) -> Result<TorusGrid, Error> {
    TorusGrid::unit(cfg.numerics.n)
}

fn table(cfg: &ExperimentConfig) -> Result<LagrangianTable, Error> {
    legendre(cfg.spec(), grid(cfg)?, cfg.numerics.m, cfg.numerics.k)
}

fn field(cfg: &ExperimentConfig, src: &str) -> Result<Field, Error> {
    Field::from_expr(grid(cfg)?, &parse(src)?)
}

fn critical_opts(cfg: &ExperimentConfig, horizon: Option<f64>) -> CriticalOptions {
    let n = &cfg.numerics;
    CriticalOptions {
        schedule: n.lambda_schedule.clone(),
        // marching commands keep their dt for the semigroup only
        dt: if cfg.command.steps_in_time() {
            None
        } else {
            n.dt
        },
        tol: n.tol,
        horizon: horizon.unwrap_or(weakkam::critical::DEFAULT_HORIZON),
        cross_tol: n.cross_tol,
        method: n.method,
    }
}

fn stability_opts(cfg: &ExperimentConfig) -> StabilityOptions {
    StabilityOptions {
        zeta_grid: cfg.numerics.zeta_grid.clone(),
        margin: cfg.numerics.margin,
        critical: critical_opts(cfg, None),
        horizons: cfg.numerics.horizons.clone(),
        ..StabilityOptions::default()
    }
}

/// `u_minus` formula when given, else the stationary solution from `phi0`.
fn u_minus(cfg: &ExperimentConfig, lt: &LagrangianTable) -> Result<Field, Error> {
    if let Some(src) = &cfg.u_minus {
        return field(cfg, src);
    }
    let phi0 = field(cfg, &cfg.phi0)?;
    let t_max = if cfg.command == Command::Stationary {
        cfg.numerics.horizon
    } else {
        200.0
    };
    Ok(
        stationary_solve(&phi0, cfg.spec(), lt, cfg.dt(), cfg.numerics.tol, t_max)
            .map_err(|e| e.context("stationary solution u_-"))?
            .field,
    )
}

/// `L - W(x, u)`: the Lagrangian of `G + W(x, u(x))`.
fn frozen(
    cfg: &ExperimentConfig,
    lt: &LagrangianTable,
    u: &Field,
) -> Result<LagrangianTable, Error> {
    lt.with_potential(&cfg.spec().w_field(u)?)
}

/// Frozen-potential point: `u_minus` if given, zero otherwise.
fn frozen_point(cfg: &ExperimentConfig) -> Result<Field, Error> {
    match &cfg.u_minus {
        Some(src) => field(cfg, src),
        None => Ok(Field::zeros(grid(cfg)?)),
    }
}

fn cmd_evolve(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let n = &cfg.numerics;
    let lt = table(cfg)?;
    let phi = field(cfg, &cfg.phi0)?;
    let r = evolve(
        &phi,
        cfg.spec(),
        &lt,
        n.horizon,
        cfg.dt(),
        n.mode,
        n.direction,
        n.snap_every,
    )?;
    let st = Stepper::new(cfg.spec(), &lt, cfg.dt(), n.mode)?;
    let next = st.step(&r.final_field, n.direction)?;
    let residual = next.sup_diff(&r.final_field)? / cfg.dt();
    art.csv("evolve.csv", |w| r.write_csv(w, residual))?;
    art.csv("final.csv", |w| r.final_field.write_csv(w))?;
    let mut summary = format!(
        "evolve: T={} steps={} final_residual={residual:.3e} range=[{:.6}, {:.6}]",
        n.horizon,
        r.steps,
        r.final_field.min(),
        r.final_field.max()
    );
    if n.property_trials > 0 {
        match property_sweep(cfg, &st)? {
            None => summary.push_str(&format!("; {} property trials passed", n.property_trials)),
            Some(msg) => return Ok((Status::PropertyFailure, format!("{summary}; {msg}"))),
        }
    }
    Ok((Status::Success, summary))
}

/// Seeded one-step checks: `(1 + Lambda dt)`-nonexpansion and, when
/// `dWu <= 0`, monotonicity.
fn property_sweep(cfg: &ExperimentConfig, st: &Stepper<'_>) -> Result<Option<String>, Error> {
    let spec = cfg.spec();
    let g = grid(cfg)?;
    let lip = 1.0 + spec.lambda_bound * cfg.dt();
    let monotone = spec.is_nonincreasing_in_u()?;
    for t in 0..cfg.numerics.property_trials as u64 {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(2 * t);
        let u = random_smooth_field(g, seed, 0.3)?;
        let v = random_smooth_field(g, seed + 1, 0.3)?;
        let (tu, tv) = (
            st.step(&u, Direction::Backward)?,
            st.step(&v, Direction::Backward)?,
        );
        let d = tu.sup_diff(&tv)?;
        let bound = lip * u.sup_diff(&v)?;
        if d > bound + 1e-12 {
            return Ok(Some(format!("trial {t}: nonexpansion {d} > {bound}")));
        }
        if monotone {
            let above = u.zip_with(&v, |a, b| a.max(b))?;
            let ta = st.step(&above, Direction::Backward)?;
            if ta.zip_with(&tu, |a, b| b - a)?.max() > 0.0 {
                return Ok(Some(format!("trial {t}: monotonicity violated")));
            }
        }
    }
    Ok(None)
}

fn cmd_stationary(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let lt = table(cfg)?;
    let phi0 = field(cfg, &cfg.phi0)?;
    let s = stationary_solve(
        &phi0,
        cfg.spec(),
        &lt,
        cfg.dt(),
        cfg.numerics.tol,
        cfg.numerics.horizon,
    )?;
    art.csv("stationary.csv", |w| s.field.write_csv(w))?;
    Ok((
        Status::Success,
        format!(
            "stationary: residual={:.3e} after {} steps, range=[{:.6}, {:.6}]",
            s.residual,
            s.steps,
            s.field.min(),
            s.field.max()
        ),
    ))
}

fn cmd_critical(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let lt = frozen(cfg, &table(cfg)?, &frozen_point(cfg)?)?;
    let r = critical_value(&lt, &critical_opts(cfg, Some(cfg.numerics.horizon)))?;
    art.csv("critical.csv", |w| r.write_csv(w))?;
    art.csv("corrector.csv", |w| r.u_corrector.write_csv(w))?;
    let mut summary = format!("c={:.4}±{}", r.c, r.cross_tol);
    if let Some(d) = r.c_discount {
        summary.push_str(&format!(" discount={d:.6}"));
    }
    if let Some(l) = r.c_longtime {
        summary.push_str(&format!(" longtime={l:.6}"));
    }
    if r.nonlinear {
        summary.push_str(" (discount samples deviate from the linear model)");
    }
    match r.disagreement() {
        Some(e) => Ok((Status::PropertyFailure, format!("{summary}; {e}"))),
        None => Ok((Status::Success, summary)),
    }
}

fn cmd_ceps(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let spec = cfg.spec();
    let lt = table(cfg)?;
    let u = u_minus(cfg, &lt)?;
    let mut curve = c_eps_curve(
        spec,
        &lt,
        &u,
        &cfg.numerics.eps_list,
        &critical_opts(cfg, None),
    )?;
    let (dm, dp) = one_sided_derivatives(&mut curve)?;
    let excess = curve.lipschitz_excess(spec.lambda_bound);
    art.csv("ceps.csv", |w| curve.write_csv(w))?;
    let summary = format!("D-c(0)={dm:.4} D+c(0)={dp:.4} lipschitz_excess={excess:.3e}");
    if excess > 4e-2 {
        return Ok((
            Status::PropertyFailure,
            format!("{summary}; c(eps) breaks the Lambda-Lipschitz bound"),
        ));
    }
    Ok((Status::Success, summary))
}

fn cmd_mather(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let u = frozen_point(cfg)?;
    let lt = frozen(cfg, &table(cfg)?, &u)?;
    let mu = solve_occupational(&lt, None)?;
    let c = critical_value(&lt, &critical_opts(cfg, None))?.c;
    art.csv("mather.csv", |w| mu.write_csv(w))?;
    let support: Vec<String> = mu
        .support_nodes(1e-9)
        .iter()
        .map(|&i| format!("{:.4}", lt.grid().node(i)))
        .collect();
    let mut summary = format!(
        "min int L dmu={:.6} (-c={:.6}) mean_velocity={:.4} support=[{}]",
        mu.value(),
        -c,
        mu.mean_velocity(),
        support.join(", ")
    );
    if !cfg.spec().is_u_independent() {
        let (lo, hi) = extremal_range(&mu, &cfg.spec().dwu_field(&u)?, DEFAULT_FACE_TOL)?;
        summary.push_str(&format!(" int dWu in [{lo:.4}, {hi:.4}]"));
    }
    if (mu.value() + c).abs() > 1e-2 {
        return Ok((
            Status::PropertyFailure,
            format!("{summary}; LP value and critical value disagree"),
        ));
    }
    Ok((Status::Success, summary))
}

fn cmd_barrier(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let lt = frozen(cfg, &table(cfg)?, &frozen_point(cfg)?)?;
    let bt = normalized_barrier(&lt, &cfg.numerics.horizons, cfg.numerics.dt)?;
    let aubry = aubry_set(&bt, DEFAULT_AUBRY_TOL);
    art.csv("barrier.csv", |w| bt.write_csv(w))?;
    art.csv("aubry.csv", |w| {
        writeln!(w, "index,x")?;
        for &i in &aubry {
            writeln!(w, "{i},{}", weakkam::grid::fmt17(bt.grid().node(i)))?;
        }
        Ok(())
    })?;
    let xs: Vec<String> = aubry
        .iter()
        .map(|&i| format!("{:.4}", bt.grid().node(i)))
        .collect();
    Ok((
        Status::Success,
        format!(
            "c_used={:.6} aubry_set ({} nodes)=[{}]",
            bt.c_used,
            aubry.len(),
            xs.join(", ")
        ),
    ))
}

/// Runs the (A3)/(A4) check and the matching dynamic probe. Returns the
/// status, summary and report.
fn stability_core(
    cfg: &ExperimentConfig,
    spec: &HamiltonianSpec,
    lt: &LagrangianTable,
    u_exact: &Field,
    art: &mut Artifacts<'_>,
) -> Result<(Status, String, weakkam::StabilityReport), RunError> {
    let n = &cfg.numerics;
    let mut report = check_condition(spec, lt, u_exact, cfg.condition, &stability_opts(cfg))?;
    let mut summary = format!("{:?} {}", cfg.condition, verdict_name(report.verdict));
    let mut status = Status::Success;
    if let Some(a) = report.a_estimate {
        summary.push_str(&format!(" A_estimate={a:.4}"));
    }
    if let Some(z) = report.zeta_found {
        summary.push_str(&format!(" zeta={z}"));
    }
    if report.verdict != Verdict::Holds {
        return Ok((status, summary, report));
    }
    // the dynamic probes start from the discrete stationary point
    let u = stationary_solve(u_exact, spec, lt, cfg.dt(), 1e-9, 200.0)
        .map(|s| s.field)
        .unwrap_or_else(|_| u_exact.clone());
    match cfg.condition {
        Condition::A3 => {
            let fit = decay_exponent(spec, lt, &u, n.delta, n.horizon, cfg.dt(), None)?;
            art.csv("decay.csv", |w| write_series_csv(&fit.plus, w))?;
            report.decay_slope = Some(fit.slope);
            if fit.shrunk {
                report
                    .notes
                    .push("decay fit window shrunk to stay above the noise floor".into());
            }
            let basin = basin_estimate(spec, lt, &u, n.horizon, cfg.dt(), n.big_delta)?;
            report.delta_estimate = Some(basin);
            summary.push_str(&format!(
                " decay_slope={:.4} Delta_estimate={basin:.4}",
                fit.slope
            ));
            if let Some(a) = report.a_estimate {
                if fit.slope > -a / 2.0 {
                    status = Status::PropertyFailure;
                    summary.push_str(&format!("; decay slope above -A/2 = {:.4}", -a / 2.0));
                }
            }
        }
        Condition::A4 => {
            let p = instability_probe(spec, lt, &u, n.eps, n.big_delta, n.horizon, cfg.dt())?;
            art.csv("instability.csv", |w| write_series_csv(&p.series, w))?;
            summary.push_str(&match p.t_escape {
                Some(t) => format!(" escaped t={t:.4}"),
                None => format!(" not escaped by T={}", n.horizon),
            });
        }
        Condition::CorollaryA => {}
    }
    Ok((status, summary, report))
}

fn cmd_stability(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    if cfg.condition == Condition::CorollaryA {
        return cmd_corollary(cfg, art);
    }
    let lt = table(cfg)?;
    let u = u_minus(cfg, &lt)?;
    let (status, summary, report) = stability_core(cfg, cfg.spec(), &lt, &u, art)?;
    art.json("report.json", &report)?;
    Ok((status, summary))
}

fn cmd_instability(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let n = &cfg.numerics;
    let lt = table(cfg)?;
    let u = u_minus(cfg, &lt)?;
    let p = instability_probe(cfg.spec(), &lt, &u, n.eps, n.big_delta, n.horizon, cfg.dt())?;
    art.csv("instability.csv", |w| write_series_csv(&p.series, w))?;
    let summary = match p.t_escape {
        Some(t) => format!("escaped t={t:.4} (eps={}, Delta={})", n.eps, n.big_delta),
        None => format!(
            "not escaped by T={} (eps={}, Delta={}, max deviation {:.4e})",
            n.horizon, n.eps, n.big_delta, p.sup_dev
        ),
    };
    Ok((Status::Success, summary))
}

fn cmd_corollary(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let spec = cfg.spec();
    let lt = table(cfg)?;
    let g = *lt.grid();
    let a = match &cfg.a {
        Some(src) => field(cfg, src)?,
        None => spec.dwu_field(&Field::zeros(g))?,
    };
    let mut report = check_corollary_a(&lt, &a, &stability_opts(cfg))?;
    let run = |c: f64| {
        evolve(
            &Field::constant(g, c),
            spec,
            &lt,
            cfg.numerics.horizon,
            cfg.dt(),
            StepMode::Explicit,
            Direction::Backward,
            usize::MAX,
        )
        .map(|r| r.final_field)
    };
    let (up, down) = rayon::join(|| run(2.0), || run(-2.0));
    let (up, down) = (up?, down?);
    let gap = up.sup_diff(&down)?;
    report.notes.push(format!(
        "evolutions from +2 and -2 differ by {gap:.3e} at T={}",
        cfg.numerics.horizon
    ));
    art.json("report.json", &report)?;
    art.csv("limit.csv", |w| up.write_csv(w))?;
    let summary = format!(
        "corollary {} a0={:.4} gap(T={})={gap:.3e}",
        verdict_name(report.verdict),
        report.a0.unwrap_or(f64::NAN),
        cfg.numerics.horizon
    );
    if report.verdict == Verdict::Holds && gap > 1e-2 {
        return Ok((
            Status::PropertyFailure,
            format!("{summary}; evolutions did not merge"),
        ));
    }
    Ok((Status::Success, summary))
}

fn cmd_homogenize(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let hp = cfg.homog_problem()?;
    let n = &cfg.numerics;
    let opts = HomogOptions {
        m: n.m,
        k: n.k,
        vmax: n.vmax,
        pmax: n.pmax,
        tol: n.tol,
        critical: critical_opts(cfg, None),
        ..HomogOptions::default()
    };
    let ks: Vec<usize> = n
        .eps_list
        .iter()
        .map(|e| (1.0 / e).round() as usize)
        .collect();
    let r = rate_experiment(&hp, &ks, n.n_per_period, &opts, &RateOptions::default())?;
    art.csv("rate.csv", |w| r.write_csv(w))?;
    art.csv("ubar.csv", |w| r.ubar.write_csv(w))?;
    let slope = r
        .slope
        .map_or("n/a (errors at noise level)".to_string(), |s| {
            format!("{s:.3}")
        });
    let summary = format!("slope={slope} C_fit={:.4}", r.c_fit);
    let mut order: Vec<(f64, f64)> = r
        .eps
        .iter()
        .copied()
        .zip(r.errors.iter().copied())
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    if order
        .windows(2)
        .any(|w| w[1].1 > w[0].1 * (1.0 + 1e-6) + 1e-9)
    {
        return Ok((
            Status::PropertyFailure,
            format!("{summary}; errors grow along the eps ladder"),
        ));
    }
    Ok((Status::Success, summary))
}

fn cmd_example_ex(cfg: &ExperimentConfig, art: &mut Artifacts<'_>) -> Dispatch {
    let ex = cfg
        .example_ex
        .as_ref()
        .expect("example-ex configs carry parameters");
    let spec = cfg.spec();
    let lt = table(cfg)?;
    let phi = field(cfg, &ex.phi)?;
    let (mut status, mut summary, report) = stability_core(cfg, spec, &lt, &phi, art)?;
    let mut curve = c_eps_curve(
        spec,
        &lt,
        &phi,
        &cfg.numerics.eps_list,
        &critical_opts(cfg, None),
    )?;
    let (dm, dp) = one_sided_derivatives(&mut curve)?;
    art.csv("ceps.csv", |w| curve.write_csv(w))?;
    summary.push_str(&format!(
        " D-c(0)={dm:.4} D+c(0)={dp:.4} (theta={})",
        ex.theta
    ));
    if report.verdict != Verdict::Holds {
        status = Status::PropertyFailure;
        summary.push_str("; expected the condition to hold");
    }
    art.json("report.json", &report)?;
    Ok((status, summary))
}
