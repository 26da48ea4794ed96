pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod physics;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
