//! Pipeline drivers, configuration, and file formats for the diffraction
//! simulator; the numerics live in `trdiff-core`.

pub mod config;
pub mod drivers;
pub mod output;
pub mod units;
pub mod validate;
