//! Numerical core for measuring mislearning under structural breaks.
//!
//! The crate is `no_std` (it needs `alloc`): every routine here is a pure
//! function of its inputs. File formats, configuration and the command line
//! live in the `mislearn` companion crate.

#![no_std]

extern crate alloc;

pub mod calendar;
pub mod error;
pub mod hp;
pub mod linalg;
pub mod math;
pub mod mislearning;
pub mod mixture;
pub mod optimize;
pub mod outcomes;
pub mod panel;
pub mod predictive;
pub mod regime;
pub mod regression;
pub mod simulate;
pub mod stable;
pub mod xsec;

pub use calendar::MonthIndex;
pub use error::{Error, Result};
pub use panel::{ExogenousSeries, ReturnPanel, TimeSeries};
