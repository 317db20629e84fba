use serde::Serialize;

/// Outcome of the empirical FDP threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceResult {
    /// First margin δ whose estimated FDP is at most `q`; `None` when the
    /// sweep exhausted without reaching `q` (nothing is rejected then).
    pub delta_final: Option<f64>,
    /// `rejected[i]` iff accuracy `i` ≥ 0.5 + `delta_final`.
    pub rejected: Vec<bool>,
    pub q: f64,
    /// `(δ, FDP estimate)` for every margin visited, in increasing δ.
    pub fdp_trace: Vec<(f64, f64)>,
}

impl SignificanceResult {
    pub fn threshold_found(&self) -> bool {
        self.delta_final.is_some()
    }

    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|r| **r).count()
    }

    pub fn rejected_indices(&self) -> Vec<usize> {
        self.rejected
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.then_some(i))
            .collect()
    }
}
