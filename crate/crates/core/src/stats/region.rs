use serde::Serialize;

use crate::datamodel::{Roi, RoiLabels};
use crate::error::{Error, Result};

/// Voxels counted as explained: accuracy at or above a threshold, or an
/// explicit mask (e.g. significant voxels).
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    Accuracy(&'a [f64]),
    Mask(&'a [bool]),
}

impl Selection<'_> {
    fn len(&self) -> usize {
        match self {
            Selection::Accuracy(a) => a.len(),
            Selection::Mask(m) => m.len(),
        }
    }

    fn selected(&self, i: usize, threshold: f64) -> bool {
        match self {
            Selection::Accuracy(a) => a[i] >= threshold,
            Selection::Mask(m) => m[i],
        }
    }
}

/// One row of the ROI table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRow {
    pub roi: Roi,
    /// Per-subject fraction of selected voxels; `None` for an empty ROI.
    pub fractions: Vec<Option<f64>>,
    /// Mean over subjects with a defined fraction.
    pub mean: Option<f64>,
    /// Standard error of that mean (sample standard deviation over √m);
    /// zero for a single subject.
    pub stderr: Option<f64>,
}

/// Per-ROI fraction of selected voxels for one subject, over the seven
/// language regions (voxels labelled `none` are ignored).
pub fn region_fractions(sel: Selection<'_>, rois: &RoiLabels, threshold: f64) -> Result<Vec<(Roi, Option<f64>)>> {
    if sel.len() != rois.len() {
        return Err(Error::Data(format!(
            "map has {} voxels, ROI labels cover {}",
            sel.len(),
            rois.len()
        )));
    }
    let mut total = [0usize; 8];
    let mut hit = [0usize; 8];
    for (i, roi) in rois.labels.iter().enumerate() {
        let k = *roi as usize;
        total[k] += 1;
        hit[k] += usize::from(sel.selected(i, threshold));
    }
    Ok(Roi::ALL
        .iter()
        .filter(|r| **r != Roi::None)
        .map(|&r| {
            let k = r as usize;
            (r, (total[k] > 0).then(|| hit[k] as f64 / total[k] as f64))
        })
        .collect())
}

/// [`region_fractions`] for each subject, with mean and standard error of
/// the per-subject fractions.
pub fn region_summary(subjects: &[(Selection<'_>, &RoiLabels)], threshold: f64) -> Result<Vec<RegionRow>> {
    if subjects.is_empty() {
        return Err(Error::Data("region summary needs at least one map".into()));
    }
    let per_subject = subjects
        .iter()
        .map(|(sel, rois)| region_fractions(*sel, rois, threshold))
        .collect::<Result<Vec<_>>>()?;
    let n_rois = per_subject[0].len();
    Ok((0..n_rois)
        .map(|k| {
            let fractions: Vec<Option<f64>> = per_subject.iter().map(|s| s[k].1).collect();
            let defined: Vec<f64> = fractions.iter().flatten().copied().collect();
            let (mean, stderr) = mean_stderr(&defined);
            RegionRow {
                roi: per_subject[0][k].0,
                fractions,
                mean,
                stderr,
            }
        })
        .collect())
}

fn mean_stderr(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let m = xs.len();
    if m == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
    (Some(mean), Some((var / m as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[Roi]) -> RoiLabels {
        RoiLabels { labels: v.to_vec() }
    }

    #[test]
    fn whole_roi_above_threshold() {
        let rois = labels(&[Roi::G1b; 4]);
        let f = region_fractions(Selection::Accuracy(&[0.9; 4]), &rois, 0.7).unwrap();
        assert_eq!(f[1], (Roi::G1b, Some(1.0)));
        assert_eq!(f[0], (Roi::G1a, None));
        assert_eq!(f.len(), 7);
    }

    #[test]
    fn threshold_is_inclusive_and_mask_ignores_it() {
        let rois = labels(&[Roi::G2a, Roi::G2a]);
        let f = region_fractions(Selection::Accuracy(&[0.7, 0.69]), &rois, 0.7).unwrap();
        assert_eq!(f[2].1, Some(0.5));
        let f = region_fractions(Selection::Mask(&[false, true]), &rois, 0.7).unwrap();
        assert_eq!(f[2].1, Some(0.5));
    }

    #[test]
    fn thirty_percent_of_group2_across_identical_subjects() {
        let mut rois = Vec::new();
        let mut acc = Vec::new();
        for r in [Roi::G2a, Roi::G2b, Roi::G2c, Roi::G2d, Roi::G2e] {
            for i in 0..10 {
                rois.push(r);
                acc.push(if i < 3 { 0.75 } else { 0.55 });
            }
        }
        let rois = labels(&rois);
        let subjects = vec![(Selection::Accuracy(&acc), &rois); 2];
        let rows = region_summary(&subjects, 0.7).unwrap();
        for row in rows.iter().filter(|r| r.roi.is_group2()) {
            assert_eq!(row.mean, Some(0.3));
            assert_eq!(row.stderr, Some(0.0));
        }
        let g1a = &rows[0];
        assert_eq!(g1a.mean, None);
        assert_eq!(g1a.fractions, vec![None, None]);
    }

    #[test]
    fn mean_and_stderr_over_subjects() {
        let rois = labels(&[Roi::G1a; 2]);
        let a = [0.8, 0.8];
        let b = [0.8, 0.1];
        let rows = region_summary(&[(Selection::Accuracy(&a), &rois), (Selection::Accuracy(&b), &rois)], 0.7).unwrap();
        assert_eq!(rows[0].fractions, vec![Some(1.0), Some(0.5)]);
        assert_eq!(rows[0].mean, Some(0.75));
        // sample sd of {1, 0.5} is √0.125; over √2
        assert_eq!(rows[0].stderr, Some(0.25));
    }

    #[test]
    fn length_mismatch() {
        let rois = labels(&[Roi::G1a]);
        assert!(region_fractions(Selection::Mask(&[true, false]), &rois, 0.7).is_err());
        assert!(region_summary(&[], 0.7).is_err());
    }
}
