pub mod analytic;
pub mod campaign;
pub mod config;
pub mod error;
pub mod field;
pub mod ledger;
pub mod link;
pub mod report;
pub mod rx;
pub mod signal;
pub mod ssfm;
pub mod units;

pub use error::{Error, Result};
