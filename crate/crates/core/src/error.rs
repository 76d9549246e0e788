use thiserror::Error;

use crate::expr::ExprError;
use crate::mather::simplex::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("step condition violated: {0}")]
    Cfl(String),
    #[error("picard iteration did not converge at node {node} (last update {last_delta:e})")]
    Picard { node: usize, last_delta: f64 },
    #[error("evolution produced non-finite values at t = {time}")]
    Blowup { time: f64 },
    #[error("no convergence within horizon {horizon}: last residual {residual:e}")]
    NotConverged { horizon: f64, residual: f64 },
    #[error("discounted iteration diverged (|u| > 1e6) for lambda = {lambda}")]
    Divergence { lambda: f64 },
    #[error("estimators disagree: discount {discount}, long-time {longtime}")]
    Disagreement { discount: f64, longtime: f64 },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{context}: {source}")]
    At {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::At {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
