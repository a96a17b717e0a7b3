pub mod coding;
pub mod dimension;
pub mod error;
pub mod exact;
pub mod harness;
pub mod interval;
pub mod maps;
pub mod measures;
pub mod recurrence;
pub mod seed;

pub use error::{Error, Result};
