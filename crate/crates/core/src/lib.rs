pub mod assignment;
pub mod association;
pub mod bench;
pub mod error;
pub mod evaluation;
pub mod interpolation;
pub mod io;
pub mod model;
pub mod plot;
pub mod posture;
pub mod review;
pub mod search;
pub mod simulator;

pub use error::{Error, Result};
