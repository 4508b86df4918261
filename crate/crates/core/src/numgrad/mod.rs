//! Reverse-mode differentiation and first-order optimization.

pub mod adam;
pub mod mlp;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{Mlp, DEFAULT_NEGATIVE_SLOPE};
pub use tape::{logistic, Tape, Var};
