//! Split Hamiltonians `H(x, p, u) = G(x, p) + W(x, u)`, their discrete
//! Legendre transform, and the named builtin instances.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Bindings, Expr, Var};
use crate::grid::{Field, TorusGrid};

pub const DEFAULT_VMAX: f64 = 4.0;
pub const DEFAULT_PMAX: f64 = 4.0;

const CHECK_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianSpec {
    pub name: String,
    #[serde(serialize_with = "ser_expr")]
    pub g: Expr,
    #[serde(serialize_with = "ser_expr")]
    pub w: Expr,
    #[serde(serialize_with = "ser_expr")]
    pub dwu: Expr,
    pub lambda_bound: f64,
    pub vmax: f64,
    pub pmax: f64,
}

fn ser_expr<S: serde::Serializer>(e: &Expr, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

impl HamiltonianSpec {
    /// Validates variable usage, the bound `|dWu| <= lambda_bound` and
    /// midpoint convexity of `G` in `p` on sampled lattices.
    pub fn new(
        name: impl Into<String>,
        g: Expr,
        w: Expr,
        dwu: Expr,
        lambda_bound: f64,
        vmax: f64,
        pmax: f64,
    ) -> Result<Self> {
        g.check_vars(&[Var::X, Var::P])?;
        w.check_vars(&[Var::X, Var::U])?;
        dwu.check_vars(&[Var::X, Var::U])?;
        if !(lambda_bound.is_finite() && lambda_bound >= 0.0) {
            return Err(Error::invalid(
                "Lambda",
                "must be a finite nonnegative number",
            ));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(Error::invalid("vmax", "must be positive"));
        }
        if !(pmax > 0.0 && pmax.is_finite()) {
            return Err(Error::invalid("pmax", "must be positive"));
        }
        let spec = Self {
            name: name.into(),
            g,
            w,
            dwu,
            lambda_bound,
            vmax,
            pmax,
        };
        spec.check_lambda_bound()?;
        spec.check_convexity()?;
        Ok(spec)
    }

    pub fn from_strs(
        g: &str,
        w: &str,
        dwu: &str,
        lambda_bound: f64,
        vmax: f64,
        pmax: f64,
    ) -> Result<Self> {
        Self::new(
            "custom",
            parse(g).map_err(|e| Error::from(e).context("G"))?,
            parse(w).map_err(|e| Error::from(e).context("W"))?,
            parse(dwu).map_err(|e| Error::from(e).context("dWu"))?,
            lambda_bound,
            vmax,
            pmax,
        )
    }

    pub fn with_truncation(mut self, vmax: f64, pmax: f64) -> Self {
        self.vmax = vmax;
        self.pmax = pmax;
        self
    }

    pub fn g_at(&self, x: f64, p: f64) -> Result<f64> {
        Ok(self.g.eval(&Bindings::new().x(x).p(p))?)
    }

    pub fn w_at(&self, x: f64, u: f64) -> Result<f64> {
        Ok(self.w.eval(&Bindings::new().x(x).u(u))?)
    }

    pub fn dwu_at(&self, x: f64, u: f64) -> Result<f64> {
        Ok(self.dwu.eval(&Bindings::new().x(x).u(u))?)
    }

    pub fn h_at(&self, x: f64, p: f64, u: f64) -> Result<f64> {
        Ok(self.g_at(x, p)? + self.w_at(x, u)?)
    }

    /// True when `W` does not read `u`.
    pub fn is_u_independent(&self) -> bool {
        !self.w.depends_on(Var::U)
    }

    /// `W(x_i, f_i)` at every node.
    pub fn w_field(&self, u: &Field) -> Result<Field> {
        let g = *u.grid();
        Field::new(
            g,
            (0..g.n())
                .map(|i| self.w_at(g.node(i), u.get(i)))
                .collect::<Result<_>>()?,
        )
    }

    /// `dWu(x_i, f_i)` at every node.
    pub fn dwu_field(&self, u: &Field) -> Result<Field> {
        let g = *u.grid();
        Field::new(
            g,
            (0..g.n())
                .map(|i| self.dwu_at(g.node(i), u.get(i)))
                .collect::<Result<_>>()?,
        )
    }

    /// Whether `dWu <= 0` on the sampled lattice (monotone comparison holds).
    pub fn is_nonincreasing_in_u(&self) -> Result<bool> {
        for (x, u) in lattice() {
            if self.dwu_at(x, u)? > 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn check_lambda_bound(&self) -> Result<()> {
        let tol = 1e-9 * (1.0 + self.lambda_bound);
        for (x, u) in lattice() {
            let d = self.dwu_at(x, u)?;
            if d.abs() > self.lambda_bound + tol {
                return Err(Error::invalid(
                    "Lambda",
                    format!(
                        "|dWu({x}, {u})| = {} exceeds the bound {}",
                        d.abs(),
                        self.lambda_bound
                    ),
                ));
            }
        }
        Ok(())
    }

    fn check_convexity(&self) -> Result<()> {
        check_midpoint_convexity(|x, p| self.g_at(x, p), self.pmax, "G")
    }

    /// Sampled growth check: `G(x, ±pmax)` exceeds `max_x G(x, 0)` at every
    /// sampled `x`. Coercivity itself cannot be certified from samples.
    pub fn growth_on_lattice(&self) -> Result<bool> {
        let xs: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let mut top = f64::NEG_INFINITY;
        for &x in &xs {
            top = top.max(self.g_at(x, 0.0)?);
        }
        for &x in &xs {
            if self.g_at(x, self.pmax)? <= top || self.g_at(x, -self.pmax)? <= top {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn lattice() -> impl Iterator<Item = (f64, f64)> {
    (0..64).flat_map(|i| (0..17).map(move |k| (i as f64 / 64.0, -4.0 + 0.5 * k as f64)))
}

pub(crate) fn check_midpoint_convexity(
    f: impl Fn(f64, f64) -> Result<f64>,
    pmax: f64,
    what: &str,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(CHECK_SEED);
    for _ in 0..256 {
        let x: f64 = rng.gen_range(0.0..1.0);
        let p1: f64 = rng.gen_range(-pmax..pmax);
        let p2: f64 = rng.gen_range(-pmax..pmax);
        let mid = f(x, 0.5 * (p1 + p2))?;
        let avg = 0.5 * (f(x, p1)? + f(x, p2)?);
        if mid > avg + 1e-9 * avg.abs().max(1.0) {
            return Err(Error::invalid(
                what,
                format!("not convex in p at x = {x}: midpoint of {p1} and {p2}"),
            ));
        }
    }
    Ok(())
}

/// Symmetric velocity grid on `[-vmax, vmax]` that always contains `v = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityGrid {
    vmax: f64,
    values: Vec<f64>,
}

impl VelocityGrid {
    /// An even `m` is bumped to `m + 1` so that zero is a grid velocity.
    pub fn new(vmax: f64, m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::invalid("m", "velocity grid needs at least 3 points"));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(Error::invalid("vmax", "must be positive"));
        }
        let count = if m.is_multiple_of(2) { m + 1 } else { m };
        let half = (count - 1) / 2;
        let dv = vmax / half as f64;
        let values = (0..count).map(|j| (j as f64 - half as f64) * dv).collect();
        Ok(Self { vmax, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn dv(&self) -> f64 {
        self.values[1] - self.values[0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn zero_index(&self) -> usize {
        (self.values.len() - 1) / 2
    }
}

/// `L[i][j] = L(x_i, v_j)`, row-major over grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianTable {
    grid: TorusGrid,
    vgrid: VelocityGrid,
    l: Vec<f64>,
    boundary_hits: usize,
}

impl LagrangianTable {
    pub fn from_values(grid: TorusGrid, vgrid: VelocityGrid, l: Vec<f64>) -> Result<Self> {
        if l.len() != grid.n() * vgrid.len() {
            return Err(Error::invalid("L", "table size does not match grids"));
        }
        if let Some((k, &value)) = l.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: k / vgrid.len(),
                value,
            });
        }
        Ok(Self {
            grid,
            vgrid,
            l,
            boundary_hits: 0,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    pub fn m(&self) -> usize {
        self.vgrid.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.vgrid.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.vgrid.len();
        &self.l[i * m..(i + 1) * m]
    }

    pub fn values(&self) -> &[f64] {
        &self.l
    }

    /// Number of `(x_i, v_j)` entries whose maximizing momentum sat on the
    /// truncation boundary `±pmax`; nonzero means `pmax` is too small for
    /// the velocity range.
    pub fn boundary_hits(&self) -> usize {
        self.boundary_hits
    }

    /// Lagrangian of `G + potential(x)`: subtracts the potential row-wise.
    pub fn with_potential(&self, potential: &Field) -> Result<Self> {
        if *potential.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.vgrid.len();
        let l = self
            .l
            .iter()
            .enumerate()
            .map(|(k, &v)| v - potential.get(k / m))
            .collect();
        Ok(Self { l, ..self.clone() })
    }

    /// Lagrangian of `G + k` for a constant `k`.
    pub fn shifted(&self, k: f64) -> Self {
        Self {
            l: self.l.iter().map(|v| v - k).collect(),
            ..self.clone()
        }
    }

    /// `min_j L[i][j]` per node, which equals `-G(x_i, 0)`.
    pub fn row_minima(&self) -> Vec<f64> {
        (0..self.grid.n())
            .map(|i| self.row(i).iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// Time step for which every foot point `x_i - v_j dt` is a node.
    pub fn node_aligned_dt(&self) -> f64 {
        self.grid.h() / self.vgrid.dv()
    }
}

/// Discrete Legendre transform of the spec's `G` on `grid`.
pub fn legendre(
    spec: &HamiltonianSpec,
    grid: TorusGrid,
    m: usize,
    k: usize,
) -> Result<LagrangianTable> {
    legendre_fn(grid, spec.vmax, spec.pmax, m, k, |x, p| spec.g_at(x, p))
}

/// Discrete Legendre transform of an arbitrary `(x, p) -> G` evaluator:
/// sampled maximum of `p v - G(x, p)` over `k` momenta in `[-pmax, pmax]`,
/// refined by golden-section search on the bracketing interval.
pub fn legendre_fn<F>(
    grid: TorusGrid,
    vmax: f64,
    pmax: f64,
    m: usize,
    k: usize,
    g: F,
) -> Result<LagrangianTable>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if m < 16 {
        return Err(Error::invalid(
            "m",
            format!("need at least 16 velocities, got {m}"),
        ));
    }
    if k < 16 {
        return Err(Error::invalid(
            "k",
            format!("need at least 16 momenta, got {k}"),
        ));
    }
    if !(pmax > 0.0 && pmax.is_finite()) {
        return Err(Error::invalid("pmax", "must be positive"));
    }
    let vgrid = VelocityGrid::new(vmax, m)?;
    let dp = 2.0 * pmax / (k - 1) as f64;
    let momenta: Vec<f64> = (0..k).map(|l| -pmax + l as f64 * dp).collect();

    let rows: Vec<(Vec<f64>, usize)> = (0..grid.n())
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let gs = momenta
                .iter()
                .map(|&p| {
                    let v = g(x, p)?;
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite { node: i, value: v })
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let mut hits = 0;
            let mut row = Vec::with_capacity(vgrid.len());
            for &v in vgrid.values() {
                let (best_l, best) = momenta
                    .iter()
                    .zip(&gs)
                    .map(|(&p, &gp)| p * v - gp)
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (l, val)| {
                        if val > acc.1 {
                            (l, val)
                        } else {
                            acc
                        }
                    });
                if best_l == 0 || best_l == k - 1 {
                    hits += 1;
                }
                let lo = momenta[best_l.saturating_sub(1)];
                let hi = momenta[(best_l + 1).min(k - 1)];
                let refined = golden_max(|p| Ok(p * v - g(x, p)?), lo, hi)?;
                row.push(best.max(refined));
            }
            Ok((row, hits))
        })
        .collect::<Result<_>>()?;

    let boundary_hits = rows.iter().map(|r| r.1).sum();
    let l = rows.into_iter().flat_map(|r| r.0).collect();
    let mut table = LagrangianTable::from_values(grid, vgrid, l)?;
    table.boundary_hits = boundary_hits;
    Ok(table)
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..48 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(fc.max(fd))
}

/// Looks up a builtin instance. Parameters are formula strings; constants
/// are accepted as formulas without variables.
///
/// * `eikonal` (`V`): `G = p^2 + V(x)`, `W = 0`
/// * `linear_contact` (`a`, `V`): `G = p^2 + V(x)`, `W = a u`
/// * `example_ex` (`phi`, `dphi`, `theta`, `zeta`): `G = zeta p^2`,
///   `W = -(dphi^2 - theta) u + (dphi^2 - theta) phi - zeta dphi^2`
/// * `corollary_a` (`a`, `V`, `c`): `G = p^2 + V(x) - c`, `W = a(x) u`
pub fn builtin(name: &str, params: &BTreeMap<String, String>) -> Result<HamiltonianSpec> {
    let get = |key: &str| -> Result<String> {
        params
            .get(key)
            .cloned()
            .ok_or_else(|| Error::invalid(key, format!("builtin `{name}` requires `{key}`")))
    };
    let get_or = |key: &str, default: &str| params.get(key).cloned().unwrap_or(default.into());
    let formula = |key: &str, src: &str, vars: &[Var]| -> Result<Expr> {
        let e = parse(src).map_err(|e| Error::from(e).context(key.to_string()))?;
        e.check_vars(vars)
            .map_err(|e| Error::from(e).context(key.to_string()))?;
        Ok(e)
    };
    let constant = |key: &str, src: &str| -> Result<f64> {
        formula(key, src, &[])?
            .eval(&Bindings::new())
            .map_err(|e| Error::from(e).context(key.to_string()))
    };
    let build = |g: String, w: String, dwu: String, lambda: f64| -> Result<HamiltonianSpec> {
        HamiltonianSpec::new(
            name,
            parse(&g)?,
            parse(&w)?,
            parse(&dwu)?,
            lambda,
            DEFAULT_VMAX,
            DEFAULT_PMAX,
        )
    };

    match name {
        "eikonal" => {
            let v = get_or("V", "0");
            formula("V", &v, &[Var::X])?;
            build(format!("p^2 + ({v})"), "0".into(), "0".into(), 0.0)
        }
        "linear_contact" => {
            let a = constant("a", &get("a")?)?;
            let v = get_or("V", "0");
            formula("V", &v, &[Var::X])?;
            build(
                format!("p^2 + ({v})"),
                format!("({a}) * u"),
                format!("{a}"),
                a.abs(),
            )
        }
        "example_ex" => {
            let phi = get("phi")?;
            let dphi = get("dphi")?;
            formula("phi", &phi, &[Var::X])?;
            formula("dphi", &dphi, &[Var::X])?;
            let theta = constant("theta", &get("theta")?)?;
            let zeta = constant("zeta", &get("zeta")?)?;
            if theta <= 0.0 || zeta <= 0.0 {
                return Err(Error::invalid("theta/zeta", "both must be positive"));
            }
            let s = format!("(({dphi})^2 - ({theta}))");
            let dwu = format!("({theta}) - ({dphi})^2");
            let lambda = sampled_sup_abs(&parse(&dwu)?)?;
            build(
                format!("({zeta}) * p^2"),
                format!("-{s} * u + {s} * ({phi}) - ({zeta}) * ({dphi})^2"),
                dwu,
                lambda,
            )
        }
        "corollary_a" => {
            let a = get("a")?;
            let a_e = formula("a", &a, &[Var::X])?;
            let v = get_or("V", "0");
            formula("V", &v, &[Var::X])?;
            let c = constant("c", &get_or("c", "0"))?;
            let lambda = sampled_sup_abs(&a_e)?;
            build(
                format!("p^2 + ({v}) - ({c})"),
                format!("({a}) * u"),
                a,
                lambda,
            )
        }
        other => Err(Error::invalid(
            "builtin",
            format!(
                "unknown builtin `{other}` (expected eikonal, linear_contact, example_ex, corollary_a)"
            ),
        )),
    }
}

/// `max |e(x)|` over 4096 equispaced points of the unit circle.
fn sampled_sup_abs(e: &Expr) -> Result<f64> {
    let mut m: f64 = 0.0;
    for i in 0..4096 {
        let v = e.eval(&Bindings::new().x(i as f64 / 4096.0).u(0.0))?;
        m = m.max(v.abs());
    }
    Ok(m)
}

pub fn params<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(g: &str) -> HamiltonianSpec {
        HamiltonianSpec::from_strs(g, "0", "0", 0.0, 4.0, 4.0).unwrap()
    }

    #[test]
    fn velocity_grid_contains_zero() {
        let vg = VelocityGrid::new(4.0, 64).unwrap();
        assert_eq!(vg.len(), 65);
        assert_eq!(vg.get(vg.zero_index()), 0.0);
        assert!((vg.dv() - 0.125).abs() < 1e-15);
        assert_eq!(vg.get(0), -4.0);
        assert_eq!(vg.get(64), 4.0);
        assert_eq!(VelocityGrid::new(2.0, 33).unwrap().len(), 33);
    }

    #[test]
    fn legendre_of_quadratic() {
        let g = TorusGrid::unit(16).unwrap();
        let lt = legendre(&quad("p^2"), g, 64, 64).unwrap();
        let vg = lt.vgrid().clone();
        let j0 = vg.zero_index();
        let j2 = vg.values().iter().position(|&v| v == 2.0).unwrap();
        for i in 0..g.n() {
            assert!(lt.at(i, j0).abs() < 1e-12);
            assert!((lt.at(i, j2) - 1.0).abs() < 1e-9);
            for (j, &v) in vg.values().iter().enumerate() {
                assert!((lt.at(i, j) - v * v / 4.0).abs() < 1e-9);
            }
        }
        assert_eq!(lt.boundary_hits(), 0);
    }

    #[test]
    fn legendre_with_potential_matches_brute_force() {
        let g = TorusGrid::unit(32).unwrap();
        let spec = quad("p^2 + cos(2*pi*x)");
        let lt = legendre(&spec, g, 64, 64).unwrap();
        let j2 = lt.vgrid().values().iter().position(|&v| v == 2.0).unwrap();
        // brute force over 1e5 momenta
        let brute = (0..100_000)
            .map(|l| -4.0 + 8.0 * l as f64 / 99_999.0)
            .map(|p| p * 2.0 - spec.g_at(0.0, p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((lt.at(0, j2) - brute).abs() < 1e-8);
        assert!(lt.at(0, j2).abs() < 1e-9);
    }

    #[test]
    fn table_invariants() {
        let g = TorusGrid::unit(16).unwrap();
        let spec = quad("0.5*p^2 + abs(p) + sin(2*pi*x)*p/3");
        let lt = legendre(&spec, g, 32, 48).unwrap();
        let vg = lt.vgrid();
        for i in 0..g.n() {
            let x = g.node(i);
            for j in 0..vg.len() {
                for l in 0..200 {
                    let p = -4.0 + 8.0 * l as f64 / 199.0;
                    assert!(lt.at(i, j) >= p * vg.get(j) - spec.g_at(x, p).unwrap() - 1e-12);
                }
                if j > 0 && j + 1 < vg.len() {
                    let mid = lt.at(i, j);
                    assert!(mid <= 0.5 * (lt.at(i, j - 1) + lt.at(i, j + 1)) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn fenchel_identity_at_zero_momentum() {
        let g = TorusGrid::unit(32).unwrap();
        for src in [
            "p^2 + cos(2*pi*x)",
            "2*p^2 - sin(2*pi*x)",
            "abs(p) + x",
            "p^4 + p^2",
        ] {
            let spec = quad(src);
            let lt = legendre(&spec, g, 64, 64).unwrap();
            for (i, m) in lt.row_minima().into_iter().enumerate() {
                let g0 = spec.g_at(g.node(i), 0.0).unwrap();
                assert!((m + g0).abs() < 1e-6, "{src}: {m} vs {}", -g0);
            }
        }
    }

    #[test]
    fn legendre_is_antitone_in_g() {
        let g = TorusGrid::unit(16).unwrap();
        let small = legendre(&quad("p^2"), g, 32, 32).unwrap();
        let large = legendre(&quad("p^2 + 0.3 + 0.1*cos(2*pi*x)^2"), g, 32, 32).unwrap();
        for (a, b) in small.values().iter().zip(large.values()) {
            assert!(b <= a);
        }
    }

    #[test]
    fn builtin_examples() {
        let lc = builtin("linear_contact", &params([("a", "1"), ("V", "0")])).unwrap();
        assert_eq!(lc.lambda_bound, 1.0);
        for x in [0.0, 0.3, 0.77] {
            assert_eq!(lc.dwu_at(x, 5.0).unwrap(), 1.0);
        }

        let ex = builtin(
            "example_ex",
            &params([
                ("phi", "sin(2*pi*x)/(2*pi)"),
                ("dphi", "cos(2*pi*x)"),
                ("theta", "0.5"),
                ("zeta", "1"),
            ]),
        )
        .unwrap();
        assert!((ex.lambda_bound - 0.5).abs() < 1e-12);
        for x in [0.0, 0.1, 0.25, 0.6] {
            let c = (2.0 * std::f64::consts::PI * x).cos();
            assert!((ex.dwu_at(x, 0.3).unwrap() - (0.5 - c * c)).abs() < 1e-12);
        }

        let ca = builtin(
            "corollary_a",
            &params([("a", "2+sin(2*pi*x)"), ("V", "cos(2*pi*x)"), ("c", "1")]),
        )
        .unwrap();
        assert!((ca.lambda_bound - 3.0).abs() < 1e-12);
        assert!((ca.dwu_at(0.25, 0.0).unwrap() - 3.0).abs() < 1e-12);
        assert!((ca.g_at(0.0, 0.0).unwrap() - 0.0).abs() < 1e-12);

        assert!(builtin("nope", &BTreeMap::new()).is_err());
        assert!(builtin("linear_contact", &BTreeMap::new()).is_err());
    }

    #[test]
    fn example_ex_phi_solves_the_stationary_equation() {
        let ex = builtin(
            "example_ex",
            &params([
                ("phi", "sin(2*pi*x)/(2*pi)"),
                ("dphi", "cos(2*pi*x)"),
                ("theta", "0.5"),
                ("zeta", "1"),
            ]),
        )
        .unwrap();
        for k in 0..50 {
            let x = k as f64 / 50.0;
            let phi = (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI);
            let dphi = (2.0 * std::f64::consts::PI * x).cos();
            assert!(ex.h_at(x, dphi, phi).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(HamiltonianSpec::from_strs("p^2", "2*u", "2", 1.0, 4.0, 4.0).is_err());
        assert!(HamiltonianSpec::from_strs("-p^2", "0", "0", 0.0, 4.0, 4.0).is_err());
        assert!(HamiltonianSpec::from_strs("p^2 + u", "0", "0", 0.0, 4.0, 4.0).is_err());
        assert!(HamiltonianSpec::from_strs("p^2", "sin(u)", "cos(u)", 1.0, 4.0, 4.0).is_ok());
    }
}
