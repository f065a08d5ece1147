//! File-system side of the mislearning toolkit: CSV ingestion, TOML
//! configuration, the staged pipeline and the tables it writes.
//!
//! The numerics live in `mislearn_core`; this crate only loads inputs,
//! runs stages in parallel where that is safe and serializes output.

pub mod config;
pub mod error;
pub mod fit;
pub mod io;
pub mod pipeline;
pub mod regress;
pub mod simulate;
pub mod xsec;

pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
