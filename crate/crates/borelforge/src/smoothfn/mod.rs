//! Smooth functions on boxes in dimension 1 and 2.

pub mod cutoff;
pub mod expr;
pub mod mollify;
pub mod series;
pub mod set;
pub mod univariate;
