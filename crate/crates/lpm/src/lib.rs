//! File formats, experiment presets, timing and the `lpm` command line for
//! the phasor models in `phasor-core`.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod json;
pub mod timing;

pub use error::{LpmError, Result};
