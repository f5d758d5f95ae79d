pub mod contour;
pub mod deviation;
pub mod error;
pub mod exec;
pub mod geom;
pub mod matching;
pub mod pipeline;
pub mod training;

pub use error::{Error, Result};
