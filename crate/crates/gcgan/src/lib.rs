//! Files, folders and the `gcgan` command line around `gcgan-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod images;
pub mod log;
pub mod run;
pub mod stats;
pub mod toy;
pub mod translate;

pub use error::{Error, Result};
pub use gcgan_core as core;
