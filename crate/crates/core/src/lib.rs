pub mod bound;
pub mod cli;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod numfmt;
pub mod oracle;
pub mod pointcloud;
pub mod quadrature;
pub mod spatial;
pub mod specialfn;

pub use error::{Error, Result};
