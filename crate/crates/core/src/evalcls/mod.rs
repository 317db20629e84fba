//! Classification-based evaluation of held-out predictions.
//!
//! fMRI: for each voxel, a chunk of recorded TRs restricted to the voxel's
//! 2-hop cortical neighborhood is matched against the predicted chunk for the
//! same TRs and a predicted chunk from elsewhere; the closer one (Euclidean)
//! is chosen. MEG: the same game with sets of words at one sensor location
//! and time bin.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, fold, block)`,
//! where a block is a fixed run of voxels (or one sensor location). Within a
//! block draws are consumed in a fixed order, so the output does not depend
//! on how blocks are spread across threads.

mod fmri;
mod meg;
mod neighborhood;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use fmri::{classify_fmri, classify_fmri_folds, VOXEL_BLOCK};
pub use meg::{classify_meg, classify_meg_folds, location_sensors, SENSORS_PER_LOCATION};
pub use neighborhood::{build_neighborhoods, NeighborhoodMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// TRs per chunk (fMRI) or words per set (MEG).
    pub chunk_len: usize,
    pub n_repeats: usize,
    pub seed: u64,
    /// Keep the distractor chunk/set from overlapping the true one.
    pub disjoint_distractors: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            chunk_len: 20,
            n_repeats: 1000,
            seed: 0,
            disjoint_distractors: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chunk_len == 0 {
            return Err(Error::Config("chunk length must be at least 1".into()));
        }
        if self.n_repeats == 0 {
            return Err(Error::Config("repeat count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random stream for one `(seed, fold, block)` cell.
pub fn block_rng(seed: u64, fold: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fold.to_le_bytes());
    key[16..24].copy_from_slice(&block.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Start rows of a true chunk and a distractor chunk of length `len` in
/// `0..n`. Pairs are drawn uniformly from all ordered pairs that are
/// disjoint (or merely distinct when `disjoint` is false).
pub fn chunk_pair<R: Rng>(rng: &mut R, n: usize, len: usize, disjoint: bool) -> (usize, usize) {
    let starts = n - len + 1;
    loop {
        let s = rng.random_range(0..starts);
        let d = rng.random_range(0..starts);
        let ok = if disjoint { s.abs_diff(d) >= len } else { s != d };
        if ok {
            return (s, d);
        }
    }
}

/// 1 for a correct choice, 0.5 for an exact tie, 0 otherwise.
#[inline]
pub(crate) fn score(d_correct: f64, d_distractor: f64) -> f64 {
    if d_correct < d_distractor {
        1.0
    } else if d_correct == d_distractor {
        0.5
    } else {
        0.0
    }
}
