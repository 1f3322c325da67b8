pub mod admittance;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod power;
pub mod precoding;
pub mod topology;

pub use error::{Error, Result};
