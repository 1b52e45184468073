pub mod cli;
pub mod error;
pub mod eval;
pub mod excitation;
pub mod models;
pub mod numcore;
pub mod plant;
pub mod store;

pub use error::{Error, Result};
