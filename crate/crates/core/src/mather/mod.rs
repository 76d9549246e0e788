//! Closed occupational measures on grid x velocity-grid, the linear
//! program minimizing the action over them, extremal integrals over the
//! optimal face, and the Peierls barrier.
//!
//! Closedness is imposed against the hat functions `e_k` of the grid with
//! centred-difference gradients. After scaling by `2h` the constraint for
//! node `k` reads `sum_j v_j (w[k-1][j] - w[k+1][j]) = 0`.

pub mod barrier;
pub mod simplex;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, Field, TorusGrid};
use crate::hamiltonian::{LagrangianTable, VelocityGrid};
use simplex::{LinearProgram, Tableau};

pub use barrier::{
    aubry_set, discrete_critical_value, minimal_action, normalized_barrier, peierls_barrier,
    BarrierTable, DEFAULT_AUBRY_TOL, DEFAULT_HORIZONS,
};
pub use simplex::{lp_simplex, LpError, LpSolution};

/// Entries of `L` at or above this are treated as forbidden velocities.
pub const L_CLIP: f64 = 1e6;
pub const DEFAULT_FACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Optimal closed probability measure for `L - potential`.
#[derive(Debug, Clone)]
pub struct OccupationalMeasure {
    grid: TorusGrid,
    vgrid: VelocityGrid,
    weights: Vec<f64>,
    value: f64,
    // LP columns: flat (i, j) index and cost
    columns: Vec<usize>,
    cost: Vec<f64>,
    tableau: Tableau,
}

impl OccupationalMeasure {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn vgrid(&self) -> &VelocityGrid {
        &self.vgrid
    }

    /// `sum w (L - potential)` at the optimum.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Row-major `n x m` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.vgrid.len() + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass of the column above node `i`.
    pub fn node_mass(&self, i: usize) -> f64 {
        let m = self.vgrid.len();
        self.weights[i * m..(i + 1) * m].iter().sum()
    }

    /// Nodes whose column mass exceeds `threshold`.
    pub fn support_nodes(&self, threshold: f64) -> Vec<usize> {
        (0..self.grid.n())
            .filter(|&i| self.node_mass(i) > threshold)
            .collect()
    }

    pub fn mean_velocity(&self) -> f64 {
        let m = self.vgrid.len();
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.vgrid.get(k % m))
            .sum()
    }

    /// `sum_ij w_ij f(x_i)`.
    pub fn integral(&self, f: &Field) -> Result<f64> {
        if *f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.vgrid.len();
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * f.get(k / m))
            .sum())
    }

    /// `max_k |sum_ij w_ij v_j De_k(x_i)|` with the centred-difference
    /// gradient of the hat function at node `k`.
    pub fn closedness_residual(&self) -> f64 {
        let n = self.grid.n();
        let flux: Vec<f64> = (0..n)
            .map(|i| {
                (0..self.vgrid.len())
                    .map(|j| self.at(i, j) * self.vgrid.get(j))
                    .sum()
            })
            .collect();
        let scale = 1.0 / (2.0 * self.grid.h());
        (0..n)
            .map(|k| ((flux[(k + n - 1) % n] - flux[(k + 1) % n]) * scale).abs())
            .fold(0.0, f64::max)
    }

    /// `x,v,weight` rows; weights below 1e-12 are omitted.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "x,v,weight")?;
        let m = self.vgrid.len();
        for (k, &w) in self.weights.iter().enumerate() {
            if w >= 1e-12 {
                writeln!(
                    out,
                    "{},{},{}",
                    fmt17(self.grid.node(k / m)),
                    fmt17(self.vgrid.get(k % m)),
                    fmt17(w)
                )?;
            }
        }
        Ok(())
    }
}

/// Minimizes `sum w_ij (L_ij - potential_i)` over closed probability
/// weights. Entries with `L >= 1e6` are left out of the program.
pub fn solve_occupational(
    lt: &LagrangianTable,
    potential: Option<&Field>,
) -> Result<OccupationalMeasure> {
    let grid = *lt.grid();
    let n = grid.n();
    if n < 4 {
        return Err(Error::invalid(
            "n",
            "occupational LP needs at least 4 nodes",
        ));
    }
    if let Some(p) = potential {
        if *p.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let vgrid = lt.vgrid().clone();
    let m = vgrid.len();
    let mut columns = Vec::new();
    let mut cost = Vec::new();
    for i in 0..n {
        let pot = potential.map_or(0.0, |p| p.get(i));
        for j in 0..m {
            let l = lt.at(i, j);
            if l < L_CLIP {
                columns.push(i * m + j);
                cost.push(l - pot);
            }
        }
    }
    let zero = vgrid.zero_index();
    if (0..n).all(|i| !columns.contains(&(i * m + zero))) {
        return Err(Error::invalid(
            "L",
            "resting velocity is forbidden at every node",
        ));
    }

    let mut a = vec![vec![0.0; columns.len()]; n + 1];
    for (col, &flat) in columns.iter().enumerate() {
        let (i, j) = (flat / m, flat % m);
        let v = vgrid.get(j);
        a[0][col] = 1.0;
        // w[i][j] enters the row of node i + 1 with +v and of node i - 1 with -v
        a[1 + (i + 1) % n][col] += v;
        a[1 + (i + n - 1) % n][col] -= v;
    }
    let mut b = vec![0.0; n + 1];
    b[0] = 1.0;
    let lp = LinearProgram::new(cost.clone(), a, b)?;
    let mut tableau = Tableau::phase_one(&lp)?;
    tableau.optimize()?;
    let x = tableau.primal();
    let mut weights = vec![0.0; n * m];
    for (&flat, &w) in columns.iter().zip(&x) {
        weights[flat] = w;
    }
    let value = cost.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(OccupationalMeasure {
        grid,
        vgrid,
        weights,
        value,
        columns,
        cost,
        tableau,
    })
}

/// Optimizes `sum w_ij f(x_i)` over measures of the base program whose
/// action is within `face_tol` of the optimum.
pub fn extremal_integral(
    base: &OccupationalMeasure,
    f: &Field,
    sense: Sense,
    face_tol: f64,
) -> Result<f64> {
    if *f.grid() != base.grid {
        return Err(Error::GridMismatch);
    }
    if !(face_tol > 0.0) {
        return Err(Error::invalid("face_tol", "must be positive"));
    }
    let m = base.vgrid.len();
    let sign = match sense {
        Sense::Min => 1.0,
        Sense::Max => -1.0,
    };
    let mut t = base.tableau.clone();
    t.add_slack_row(&base.cost, base.value + face_tol);
    let mut obj: Vec<f64> = base
        .columns
        .iter()
        .map(|&flat| sign * f.get(flat / m))
        .collect();
    obj.resize(t.ncols(), 0.0);
    t.set_objective(&obj);
    t.optimize()?;
    Ok(sign * t.value())
}

/// `(min, max)` of the extremal integral, computed concurrently.
pub fn extremal_range(base: &OccupationalMeasure, f: &Field, face_tol: f64) -> Result<(f64, f64)> {
    let (lo, hi) = rayon::join(
        || extremal_integral(base, f, Sense::Min, face_tol),
        || extremal_integral(base, f, Sense::Max, face_tol),
    );
    Ok((lo?, hi?))
}
