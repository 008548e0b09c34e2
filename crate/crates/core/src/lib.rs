//! Foreign-object-debris detection in confined spaces from point-cloud maps.

pub mod cli;
pub mod config;
pub mod covariance;
pub mod discrepancy;
pub mod error;
pub mod geom;
pub mod io;
pub mod pipeline;
pub mod reference;
pub mod report;
pub mod scenegen;
pub mod service;
pub mod tuning;
pub mod waypoint;

pub use error::{Error, Result};
