#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod dictionary;
pub mod error;
pub mod imaging;
pub mod io;
pub mod linalg;
pub mod model;
pub mod propagation;
pub mod solvers;
pub mod synthesis;
pub mod testutil;

pub use error::{Error, Result};
