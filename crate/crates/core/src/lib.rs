#![no_std]

extern crate alloc;

pub mod designs;
pub mod error;
pub mod inference;
pub mod interval_iv;
pub mod model;
pub mod overid;
pub mod qp;
pub mod regsf;
pub mod stats;

pub use error::{Error, Result};
