use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, FormatError, Result};

/// Per-item binary outcomes of one task under two model variants, aligned by
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcomes {
    pub task: String,
    pub variant: Vec<bool>,
    pub base: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskComparison {
    pub task: String,
    pub n_items: usize,
    pub mean_variant: f64,
    pub mean_base: f64,
    /// Paired t statistic; `None` when every difference is zero.
    pub t: Option<f64>,
    pub p_value: f64,
    pub bh_rejected: bool,
    /// BH-rejected at `q` and `p ≤ alpha`.
    pub significant: bool,
    #[serde(skip)]
    pub variant: Vec<bool>,
    #[serde(skip)]
    pub base: Vec<bool>,
}

/// Paired t-test of variant vs base on per-item differences (two-sided),
/// then Benjamini–Hochberg across tasks at level `q`.
///
/// If all differences are equal the statistic degenerates: a zero mean gives
/// `p = 1`, a nonzero mean gives `p = 0` with an infinite `t`.
pub fn paired_test_bh(tasks: &[TaskOutcomes], alpha: f64, q: f64) -> Result<Vec<TaskComparison>> {
    if !(alpha > 0.0 && alpha < 1.0) || !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("invalid alpha {alpha} or q {q}")));
    }
    let mut out = Vec::with_capacity(tasks.len());
    for task in tasks {
        let n = task.variant.len();
        if task.base.len() != n {
            return Err(Error::Data(format!(
                "task {}: {} variant items vs {} base items",
                task.task,
                n,
                task.base.len()
            )));
        }
        if n < 2 {
            return Err(Error::Data(format!("task {}: need at least 2 items", task.task)));
        }
        let d: Vec<f64> = task
            .variant
            .iter()
            .zip(&task.base)
            .map(|(&v, &b)| f64::from(u8::from(v)) - f64::from(u8::from(b)))
            .collect();
        let (t, p) = paired_t(&d)?;
        let mean = |xs: &[bool]| xs.iter().filter(|x| **x).count() as f64 / n as f64;
        out.push(TaskComparison {
            task: task.task.clone(),
            n_items: n,
            mean_variant: mean(&task.variant),
            mean_base: mean(&task.base),
            t,
            p_value: p,
            bh_rejected: false,
            significant: false,
            variant: task.variant.clone(),
            base: task.base.clone(),
        });
    }
    let p: Vec<f64> = out.iter().map(|c| c.p_value).collect();
    for (c, r) in out.iter_mut().zip(benjamini_hochberg(&p, q)) {
        c.bh_rejected = r;
        c.significant = r && c.p_value <= alpha;
    }
    Ok(out)
}

fn paired_t(d: &[f64]) -> Result<(Option<f64>, f64)> {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            (None, 1.0)
        } else {
            (Some(f64::INFINITY.copysign(mean)), 0.0)
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((Some(t), (2.0 * dist.cdf(-t.abs())).min(1.0)))
}

/// Benjamini–Hochberg step-up: rejects the `k` smallest p-values, `k` being
/// the largest rank with `p₍ₖ₎ ≤ k q / m`.
pub fn benjamini_hochberg(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let k = (1..=m)
        .rev()
        .find(|&k| p[order[k - 1]] <= k as f64 * q / m as f64)
        .unwrap_or(0);
    let mut rejected = vec![false; m];
    for &i in &order[..k] {
        rejected[i] = true;
    }
    rejected
}

/// One line of a probe outcome file.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
pub struct ProbeRow {
    pub condition: String,
    pub item_id: String,
    #[serde(deserialize_with = "outcome_flag", serialize_with = "write_flag")]
    pub outcome: bool,
    pub correct_verb: String,
    pub incorrect_verb: String,
}

fn outcome_flag<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim() {
        "1" | "true" | "True" => Ok(true),
        "0" | "false" | "False" => Ok(false),
        other => Err(serde::de::Error::custom(format!("outcome must be 0/1, got {other:?}"))),
    }
}

fn write_flag<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

/// Reads `condition,item_id,outcome,correct_verb,incorrect_verb` rows.
pub fn read_probe_csv(path: &Path) -> Result<Vec<ProbeRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["condition", "item_id", "outcome", "correct_verb", "incorrect_verb"];
    if headers.iter().ne(expected) {
        return Err(Error::format(
            path,
            FormatError::Parse {
                line: 1,
                message: format!("expected header {}", expected.join(",")),
            },
        ));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
        return Error::io(path, io);
    }
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::format(
        path,
        FormatError::Parse {
            line,
            message: e.to_string(),
        },
    )
}

/// Aligns two probe runs by `(condition, item_id)`, keeping the condition
/// order of `base`. Every base item must appear exactly once in `variant`
/// and vice versa.
pub fn pair_probe_rows(variant: &[ProbeRow], base: &[ProbeRow]) -> Result<Vec<TaskOutcomes>> {
    let mut lookup: HashMap<(&str, &str), bool> = HashMap::with_capacity(variant.len());
    for r in variant {
        if lookup.insert((&r.condition, &r.item_id), r.outcome).is_some() {
            return Err(Error::Data(format!("duplicate item {}/{} in variant run", r.condition, r.item_id)));
        }
    }
    let mut tasks: Vec<TaskOutcomes> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for r in base {
        if !seen.insert((&r.condition, &r.item_id)) {
            return Err(Error::Data(format!("duplicate item {}/{} in base run", r.condition, r.item_id)));
        }
        let v = lookup
            .get(&(r.condition.as_str(), r.item_id.as_str()))
            .ok_or_else(|| Error::Data(format!("item {}/{} missing from variant run", r.condition, r.item_id)))?;
        let k = *index.entry(&r.condition).or_insert_with(|| {
            tasks.push(TaskOutcomes {
                task: r.condition.clone(),
                variant: Vec::new(),
                base: Vec::new(),
            });
            tasks.len() - 1
        });
        tasks[k].variant.push(*v);
        tasks[k].base.push(r.outcome);
    }
    if lookup.len() != base.len() {
        return Err(Error::Data("variant run has items absent from the base run".into()));
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn task(variant: Vec<bool>, base: Vec<bool>) -> TaskOutcomes {
        TaskOutcomes {
            task: "t".into(),
            variant,
            base,
        }
    }

    /// Textbook step-up: scan every k and keep the largest that passes.
    fn bh_oracle(p: &[f64], q: f64) -> Vec<bool> {
        let m = p.len();
        let mut sorted = p.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut k_max = 0;
        for k in 1..=m {
            if sorted[k - 1] <= k as f64 / m as f64 * q {
                k_max = k;
            }
        }
        if k_max == 0 {
            return vec![false; m];
        }
        let cut = sorted[k_max - 1];
        p.iter().map(|&x| x <= cut).collect()
    }

    #[test]
    fn bh_textbook_example() {
        assert_eq!(benjamini_hochberg(&[0.001, 0.04, 0.2], 0.05), vec![true, false, false]);
        assert_eq!(benjamini_hochberg(&[0.2, 0.001, 0.03], 0.05), vec![false, true, true]);
        assert!(benjamini_hochberg(&[], 0.05).is_empty());
    }

    #[test]
    fn identical_outcomes_not_significant() {
        let v = vec![true, false, true, true];
        let c = paired_test_bh(&[task(v.clone(), v)], 0.01, 0.05).unwrap();
        assert_eq!(c[0].t, None);
        assert_eq!(c[0].p_value, 1.0);
        assert!(!c[0].significant);
    }

    #[test]
    fn two_hundred_flips_in_19440() {
        let n = 19440;
        let base = vec![false; n];
        let variant: Vec<bool> = (0..n).map(|i| i < 200).collect();
        let c = paired_test_bh(&[task(variant, base)], 0.01, 0.05).unwrap();
        // closed form for k ones among n differences
        let (k, nf) = (200.0, n as f64);
        let mean = k / nf;
        let var = (k - nf * mean * mean) / (nf - 1.0);
        let t = mean / (var / nf).sqrt();
        assert!((c[0].t.unwrap() - t).abs() < 1e-9);
        assert!((t - 14.2).abs() < 0.1);
        assert!(c[0].p_value < 1e-30);
        assert!(c[0].significant);
    }

    #[test]
    fn constant_nonzero_difference_gives_zero_p() {
        let c = paired_test_bh(&[task(vec![true; 5], vec![false; 5])], 0.01, 0.05).unwrap();
        assert_eq!(c[0].p_value, 0.0);
        assert_eq!(c[0].t, Some(f64::INFINITY));
        assert!(c[0].significant);
    }

    #[test]
    fn t_matches_small_hand_case() {
        // d = [1, 0, 1, 1]: mean 0.75, sd 0.5, t = 0.75 / 0.25 = 3, df 3
        let c = paired_test_bh(&[task(vec![true, true, true, true], vec![false, true, false, false])], 0.01, 0.05).unwrap();
        assert!((c[0].t.unwrap() - 3.0).abs() < 1e-12);
        // two-sided p for t=3, df=3
        assert!((c[0].p_value - 0.05766888).abs() < 1e-6);
    }

    #[test]
    fn mismatched_items() {
        assert!(paired_test_bh(&[task(vec![true], vec![true, false])], 0.01, 0.05).is_err());
    }

    fn row(cond: &str, id: &str, outcome: bool) -> ProbeRow {
        ProbeRow {
            condition: cond.into(),
            item_id: id.into(),
            outcome,
            correct_verb: "is".into(),
            incorrect_verb: "are".into(),
        }
    }

    #[test]
    fn pairing_aligns_by_item() {
        let base = vec![row("a", "1", false), row("b", "1", true), row("a", "2", true)];
        let variant = vec![row("a", "2", false), row("a", "1", true), row("b", "1", true)];
        let tasks = pair_probe_rows(&variant, &base).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!(tasks[0].task, "a");
        assert_eq!(tasks[0].variant, vec![true, false]);
        assert_eq!(tasks[0].base, vec![false, true]);
        assert!(pair_probe_rows(&variant[..2], &base).is_err());
        assert!(pair_probe_rows(&variant, &base[..2]).is_err());
    }

    #[test]
    fn probe_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("probe.csv");
        std::fs::write(
            &path,
            "condition,item_id,outcome,correct_verb,incorrect_verb\nsimple,0,1,is,are\nsimple,1,0,runs,run\n",
        )
        .unwrap();
        let rows = read_probe_csv(&path).unwrap();
        assert_eq!(rows, vec![row("simple", "0", true), ProbeRow {
            condition: "simple".into(),
            item_id: "1".into(),
            outcome: false,
            correct_verb: "runs".into(),
            incorrect_verb: "run".into(),
        }]);
        std::fs::write(&path, "condition,item,outcome\n").unwrap();
        assert!(read_probe_csv(&path).is_err());
        std::fs::write(&path, "condition,item_id,outcome,correct_verb,incorrect_verb\nx,0,2,a,b\n").unwrap();
        assert!(read_probe_csv(&path).is_err());
    }

    proptest! {
        #[test]
        fn bh_matches_step_up_oracle(p in proptest::collection::vec(0.0f64..=1.0, 0..60), q in 0.01f64..0.5) {
            prop_assert_eq!(benjamini_hochberg(&p, q), bh_oracle(&p, q));
        }
    }
}
