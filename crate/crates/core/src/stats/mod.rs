//! Empirical FDP thresholding, shared accuracy, ROI summaries and paired
//! task comparisons.

mod fdp;
mod paired;
mod region;
mod shared;

pub use fdp::{fdp_threshold, fdp_threshold_values, DELTA_STEPS};
pub use paired::{
    benjamini_hochberg, pair_probe_rows, paired_test_bh, read_probe_csv, ProbeRow, TaskComparison, TaskOutcomes,
};
pub use region::{region_fractions, region_summary, RegionRow, Selection};
pub use shared::{shared_accuracy, SharedAccuracy};
