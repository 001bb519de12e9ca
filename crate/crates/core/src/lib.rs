//! Feature-based representativeness analysis for collections of demand
//! time series.

pub mod benchmarks;
pub mod coverage;
pub mod dataset;
pub mod demand_class;
pub mod embedding;
pub mod error;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod selection;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
