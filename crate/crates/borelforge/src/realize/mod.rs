//! Smooth realizations of prescribed jets and of filtered completion prefixes.

mod borel;
mod filtered;
mod glue;
mod strata;

use serde::{Deserialize, Serialize};

use crate::jets::JetError;
use crate::smoothfn::cutoff::CutoffError;
use crate::smoothfn::expr::{ExprError, SmoothExpr};
use crate::smoothfn::set::SetDescriptor;
use crate::verify::VerifyError;

pub use borel::{borel_realize, borel_schedule, borel_term_expr, multi_borel, BorelRealization};
pub use filtered::{ensure_positive, realize_filtered, FilteredRealization, Positivity};
pub use glue::{glue, GlueCell};
pub use strata::{whitney_extend_strata, StrataRealization};

/// Scales below this are refused unless the caller lowers the floor.
pub const DEFAULT_EPS_MIN: f64 = 1e-300;

#[derive(Debug, thiserror::Error)]
pub enum RealizeError {
    #[error("term {term}: no admissible scale above {eps_min:e}")]
    ScheduleUnderflow { term: usize, eps_min: f64 },
    #[error("base point {0:?} is not interior to the region")]
    NotInterior(Vec<f64>),
    #[error("points {0} and {1} are too close for the requested order")]
    Separation(usize, usize),
    #[error("term {term}: measured vanishing order {measured:.2} at {at:?}, declared {declared}")]
    VanishingOrder { term: usize, at: Vec<f64>, measured: f64, declared: usize },
    #[error("incompatible field: {0}")]
    Incompatible(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("sup |f| is not finite on the window")]
    NotFinite,
    #[error("dimension mismatch")]
    Dimension,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Copy, Debug)]
pub struct RealizeOptions {
    pub eps_min: f64,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        RealizeOptions { eps_min: DEFAULT_EPS_MIN }
    }
}

/// Per-term scales with the tail bounds they were chosen against.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Schedule {
    /// `eps[k]` for term `k`.
    pub eps: Vec<f64>,
    /// `bounds[k][l]`: bound on `sup |d^l term_k|`, for `l < k`.
    pub bounds: Vec<Vec<f64>>,
    /// Allowed size of each bound (`1/k!`).
    pub limits: Vec<f64>,
}

impl Schedule {
    pub fn holds(&self) -> bool {
        self.eps.windows(2).all(|w| w[1] <= w[0])
            && self.bounds.iter().zip(&self.limits).all(|(b, lim)| b.iter().all(|v| *v <= *lim))
    }

    /// Largest ratio of a bound to its limit (0 when there are none).
    pub fn worst_ratio(&self) -> f64 {
        self.bounds
            .iter()
            .zip(&self.limits)
            .flat_map(|(b, lim)| b.iter().map(move |v| v / lim))
            .fold(0.0, f64::max)
    }
}

/// First terms `g_1, ..., g_N` of a completion series, with `g_j` in the
/// `j`-th ideal (vanishing to order `orders[j-1]` on `zero_set`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionPrefix {
    pub zero_set: SetDescriptor,
    pub terms: Vec<SmoothExpr>,
    /// Declared vanishing orders; `j` for term `j` when omitted.
    #[serde(default)]
    pub orders: Option<Vec<usize>>,
}

impl CompletionPrefix {
    pub fn new(zero_set: SetDescriptor, terms: Vec<SmoothExpr>) -> CompletionPrefix {
        CompletionPrefix { zero_set, terms, orders: None }
    }

    pub fn declared_order(&self, j: usize) -> usize {
        self.orders.as_ref().and_then(|o| o.get(j - 1).copied()).unwrap_or(j)
    }
}
