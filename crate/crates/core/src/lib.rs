pub mod bayes_linear;
mod binio;
pub mod error;
pub mod experiments;
pub mod hashing;
pub mod metrics;
pub mod ranker;
pub mod representation;
pub mod sim;

pub use error::{Error, Result};
