//! Verification lab for metallic Riemannian structures on coordinate charts.

pub mod chart;
pub mod cli;
pub mod error;
pub mod expr;
pub mod genbundle;
pub mod genconn;
pub mod lifts;
pub mod metallic;
pub mod report;

pub use error::{Error, Result};
