#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod cable;
pub mod cli;
pub mod conductor;
pub mod config;
pub mod error;
pub mod fiber;
pub mod field;
pub mod format;
pub mod lead;
pub mod linalg;
pub mod output;
pub mod phantom;
pub mod scenario;
pub mod stimulus;
pub mod volume;

pub use error::{Error, Result};
