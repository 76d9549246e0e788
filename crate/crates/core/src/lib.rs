//! Numerical laboratory for contact-type Hamilton-Jacobi equations
//! `u_t + G(x, Du) + W(x, u) = 0` on the circle.
//!
//! The crate evolves the backward and forward Lax-Oleinik semigroups with a
//! monotone semi-Lagrangian scheme, computes critical values by vanishing
//! discount and long-time averaging, solves the Mather occupational-measure
//! linear program, tabulates Peierls barriers, and runs the stability,
//! instability and homogenization experiments built on top of them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod critical;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hamiltonian;
pub mod homogenize;
pub mod mather;
pub mod semigroup;
pub mod stability;

pub use critical::{CEpsCurve, CriticalOptions, CriticalValueResult, Method};
pub use error::{Error, Result};
pub use expr::{parse, Bindings, Expr, ExprError, Var};
pub use grid::{Field, TorusGrid};
pub use hamiltonian::{HamiltonianSpec, LagrangianTable, VelocityGrid};
pub use mather::{BarrierTable, OccupationalMeasure, Sense};
pub use semigroup::{Direction, EvolveResult, StepMode, Stepper};
pub use stability::{Condition, StabilityReport, Verdict};
