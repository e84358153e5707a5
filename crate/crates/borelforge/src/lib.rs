//! Synthesis of smooth functions with prescribed jets, flat functions along
//! chains of closed sets, and exact checks for univariate polynomial
//! filtrations. Every construction comes with a numerical verification
//! path that does not trust the construction's internals.

pub mod constraints;
pub mod filtration;
pub mod flatzero;
pub mod jets;
pub mod quad;
pub mod realize;
pub mod rational;
pub mod smoothfn;
pub mod verify;

pub use rational::Rat;
pub use smoothfn::expr::{ExprBuilder, ExprError, SmoothExpr};
pub use smoothfn::set::{Region, SetDescriptor};
