//! File formats, data loading, Monte Carlo experiments and JSON output
//! around [`setid_core`].

pub mod error;
pub mod formats;
pub mod interval_csv;
pub mod mc;
pub mod output;

pub use error::{Error, Result};
