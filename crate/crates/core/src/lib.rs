pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod encoder;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod topics;
pub mod train;
pub mod user;
