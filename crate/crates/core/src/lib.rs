//! Encoding-model engine for aligning network-derived feature matrices with
//! fMRI and MEG recordings.
//!
//! The crate is organised along the analysis flow:
//!
//! * [`datamodel`]: domain types and the binary/text interchange formats.
//! * [`featprep`]: word→TR grouping, delayed designs and normalization.
//! * [`ridge`]: per-output ridge regression with nested cross-validation.
//! * [`evalcls`]: searchlight chunk classification (fMRI) and sensor-location
//!   set classification (MEG).
//! * [`stats`]: empirical FDP thresholding, shared accuracy, ROI summaries and
//!   paired task comparisons.

// Links OpenBLAS/LAPACK for ndarray and ndarray-linalg.
extern crate blas_src;

pub mod datamodel;
pub mod error;
pub mod evalcls;
pub mod featprep;
pub mod linalg;
pub mod ridge;
pub mod stats;

pub use error::{Error, FormatError, Result};
