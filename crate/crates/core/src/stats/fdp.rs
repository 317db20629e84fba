use crate::datamodel::{AccuracyMap, SignificanceResult};
use crate::error::{Error, Result};

/// Margins are `k / 1000` for `k = 1..DELTA_STEPS`.
pub const DELTA_STEPS: u32 = 499;

/// Sweeps δ upward from 0.001 in steps of 0.001 and stops at the first δ
/// whose estimated false discovery proportion
///
/// ```text
/// (1 + #{acc ≤ 0.5 − δ}) / max(1, #{acc ≥ 0.5 + δ})
/// ```
///
/// is at most `q`. Outputs with accuracy ≥ 0.5 + δ are then rejected. When
/// no δ qualifies nothing is rejected and `delta_final` is `None`.
pub fn fdp_threshold(acc: &AccuracyMap, q: f64) -> Result<SignificanceResult> {
    fdp_threshold_values(acc.as_slice(), q)
}

/// [`fdp_threshold`] on a bare slice of accuracies.
pub fn fdp_threshold_values(acc: &[f64], q: f64) -> Result<SignificanceResult> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("q must lie in (0, 1], got {q}")));
    }
    if let Some(a) = acc.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Data(format!("accuracy {a} outside [0, 1]")));
    }
    let mut sorted = acc.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();

    let mut trace = Vec::new();
    for k in 1..=DELTA_STEPS {
        let lo = f64::from(500 - k) / 1000.0;
        let hi = f64::from(500 + k) / 1000.0;
        let n_low = sorted.partition_point(|&a| a <= lo);
        let n_high = n - sorted.partition_point(|&a| a < hi);
        let fdp = (1 + n_low) as f64 / n_high.max(1) as f64;
        let delta = f64::from(k) / 1000.0;
        trace.push((delta, fdp));
        if fdp <= q {
            return Ok(SignificanceResult {
                delta_final: Some(delta),
                rejected: acc.iter().map(|&a| a >= hi).collect(),
                q,
                fdp_trace: trace,
            });
        }
    }
    Ok(SignificanceResult {
        delta_final: None,
        rejected: vec![false; n],
        q,
        fdp_trace: trace,
    })
}
