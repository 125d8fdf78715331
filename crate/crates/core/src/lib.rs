pub mod assemble;
pub mod cellsolve;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod svg;

pub use error::{Error, Result};
