//! Report files: significance, ROI tables, shared accuracy, sweeps and
//! context-vs-word comparisons.
//!
//! CSV reports produced by a run start with a `# config_hash: <hex>` line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use brainalign_core::datamodel::{Roi, RoiLabels, SignificanceResult};
use brainalign_core::stats::{region_fractions, RegionRow, Selection, SharedAccuracy};
use brainalign_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::svg::{line_plot, Series};

struct CsvOut {
    path: PathBuf,
    w: std::io::BufWriter<std::fs::File>,
}

impl CsvOut {
    fn create(path: &Path, hash: Option<&str>, header: &str) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = CsvOut {
            path: path.to_path_buf(),
            w: std::io::BufWriter::new(file),
        };
        if let Some(h) = hash {
            out.line(format_args!("# config_hash: {h}"))?;
        }
        out.line(format_args!("{header}"))?;
        Ok(out)
    }

    fn line(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        writeln!(self.w, "{args}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct SignificanceJson {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    config_hash: Option<String>,
    q: f64,
    threshold_found: bool,
    delta_final: Option<f64>,
    n_outputs: usize,
    n_rejected: usize,
    rejected: Vec<usize>,
}

/// Writes `significance.json` and `fdp_trace.csv` into `dir`.
pub fn write_significance(dir: &Path, hash: Option<&str>, r: &SignificanceResult) -> Result<()> {
    let json = SignificanceJson {
        config_hash: hash.map(str::to_owned),
        q: r.q,
        threshold_found: r.threshold_found(),
        delta_final: r.delta_final,
        n_outputs: r.rejected.len(),
        n_rejected: r.n_rejected(),
        rejected: r.rejected_indices(),
    };
    write_json(&dir.join("significance.json"), &json)?;
    let mut csv = CsvOut::create(&dir.join("fdp_trace.csv"), hash, "delta,fdp")?;
    for (d, f) in &r.fdp_trace {
        csv.line(format_args!("{d},{f}"))?;
    }
    csv.finish()
}

/// Rejection mask stored in a `significance.json`.
pub fn read_significance_mask(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let json: SignificanceJson =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut mask = vec![false; json.n_outputs];
    for i in json.rejected {
        *mask
            .get_mut(i)
            .ok_or_else(|| Error::Data(format!("{}: rejected index {i} out of range", path.display())))? = true;
    }
    Ok(mask)
}

/// One line of a run's ROI table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoiRow {
    pub roi: Roi,
    pub n_voxels: usize,
    pub frac_above_threshold: Option<f64>,
    pub frac_significant: Option<f64>,
}

pub fn roi_rows(acc: &[f64], significant: &[bool], rois: &RoiLabels, threshold: f64) -> Result<Vec<RoiRow>> {
    let above = region_fractions(Selection::Accuracy(acc), rois, threshold)?;
    let sig = region_fractions(Selection::Mask(significant), rois, threshold)?;
    Ok(above
        .into_iter()
        .zip(sig)
        .map(|((roi, a), (_, s))| RoiRow {
            roi,
            n_voxels: rois.labels.iter().filter(|r| **r == roi).count(),
            frac_above_threshold: a,
            frac_significant: s,
        })
        .collect())
}

pub fn write_roi_table(path: &Path, hash: Option<&str>, rows: &[RoiRow]) -> Result<()> {
    let mut csv = CsvOut::create(path, hash, "roi,region,n_voxels,frac_above_threshold,frac_significant")?;
    for r in rows {
        csv.line(format_args!(
            "{},\"{}\",{},{},{}",
            r.roi,
            r.roi.region_name(),
            r.n_voxels,
            opt(r.frac_above_threshold),
            opt(r.frac_significant)
        ))?;
    }
    csv.finish()
}

/// Multi-subject ROI summary: mean, standard error and one column per subject.
pub fn write_region_summary(path: &Path, rows: &[RegionRow]) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.fractions.len());
    let subjects: Vec<String> = (0..m).map(|s| format!(",subject_{s}")).collect();
    let mut csv = CsvOut::create(path, None, &format!("roi,region,mean,stderr{}", subjects.concat()))?;
    for r in rows {
        let per: Vec<String> = r.fractions.iter().map(|f| format!(",{}", opt(*f))).collect();
        csv.line(format_args!(
            "{},\"{}\",{},{}{}",
            r.roi,
            r.roi.region_name(),
            opt(r.mean),
            opt(r.stderr),
            per.concat()
        ))?;
    }
    csv.finish()
}

pub fn write_shared(path: &Path, a: &[f64], b: &[f64], union: &[f64], shared: &SharedAccuracy) -> Result<()> {
    let cols = shared.values.ncols();
    let mut csv = CsvOut::create(path, None, "row,col,a,b,union,shared")?;
    for (i, s) in shared.as_slice().iter().enumerate() {
        csv.line(format_args!("{},{},{},{},{},{}", i / cols, i % cols, a[i], b[i], union[i], s))?;
    }
    csv.finish()
}

// ---------------------------------------------------------------- sweeps

/// One accuracy map of a layer × context sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub layer: u32,
    pub context: u32,
    pub accuracy: PathBuf,
    /// `significance.json` of the same run; needed for the union mask.
    #[serde(default)]
    pub significance: Option<PathBuf>,
}

/// Voxels over which sweep curves are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskSelector {
    /// Union of the significant voxels of every entry.
    UnionSignificant,
    All,
    /// Rejections stored in one `significance.json`.
    Significance(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub entries: Vec<SweepEntry>,
    /// Layer subtracted to form adjusted curves.
    #[serde(default)]
    pub baseline_layer: Option<u32>,
    #[serde(default = "default_mask")]
    pub mask: MaskSelector,
    /// Paired maps (same layer and context) subtracted to form delta curves.
    #[serde(default)]
    pub paired: Vec<SweepEntry>,
}

fn default_mask() -> MaskSelector {
    MaskSelector::UnionSignificant
}

/// A sweep map already in memory.
#[derive(Debug, Clone, Copy)]
pub struct SweepMap<'a> {
    pub layer: u32,
    pub context: u32,
    pub accuracy: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub layer: u32,
    pub context: u32,
    pub mean: f64,
    /// Minus the baseline layer at the same context.
    pub adjusted: Option<f64>,
    /// Minus the paired map at the same layer and context.
    pub delta: Option<f64>,
}

fn masked_mean(acc: &[f64], mask: &[bool]) -> f64 {
    let (sum, n) = acc
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .fold((0.0, 0usize), |(s, n), (a, _)| (s + a, n + 1));
    sum / n as f64
}

/// Mean accuracy over `mask` for every map, with adjusted and delta curves.
pub fn sweep_curves(
    maps: &[SweepMap<'_>],
    mask: &[bool],
    baseline_layer: Option<u32>,
    paired: &[SweepMap<'_>],
) -> Result<Vec<CurvePoint>> {
    if !mask.iter().any(|m| *m) {
        return Err(Error::Data("sweep voxel mask is empty".into()));
    }
    for m in maps.iter().chain(paired) {
        if m.accuracy.len() != mask.len() {
            return Err(Error::Data(format!(
                "map (layer {}, context {}) has {} outputs, mask has {}",
                m.layer,
                m.context,
                m.accuracy.len(),
                mask.len()
            )));
        }
    }
    let means: BTreeMap<(u32, u32), f64> = maps
        .iter()
        .map(|m| ((m.layer, m.context), masked_mean(m.accuracy, mask)))
        .collect();
    let paired_means: BTreeMap<(u32, u32), f64> = paired
        .iter()
        .map(|m| ((m.layer, m.context), masked_mean(m.accuracy, mask)))
        .collect();
    Ok(means
        .iter()
        .map(|(&(layer, context), &mean)| CurvePoint {
            layer,
            context,
            mean,
            adjusted: baseline_layer.and_then(|b| means.get(&(b, context)).map(|base| mean - base)),
            delta: paired_means.get(&(layer, context)).map(|p| mean - p),
        })
        .collect())
}

/// Loads the maps of `spec`, builds the mask and writes `sweep.csv` plus one
/// SVG per curve family into `out`.
pub fn sweep_report(spec: &SweepSpec, out: &Path) -> Result<Vec<CurvePoint>> {
    use brainalign_core::datamodel::read_accuracy_map;
    if spec.entries.is_empty() {
        return Err(Error::Config("sweep has no entries".into()));
    }
    let load = |e: &SweepEntry| read_accuracy_map(&e.accuracy).map(|m| m.as_slice().to_vec());
    let maps: Vec<Vec<f64>> = spec.entries.iter().map(load).collect::<Result<_>>()?;
    let paired: Vec<Vec<f64>> = spec.paired.iter().map(load).collect::<Result<_>>()?;
    let n = maps[0].len();
    let (mask, mask_note) = match &spec.mask {
        MaskSelector::All => (vec![true; n], "all outputs".to_string()),
        MaskSelector::Significance(p) => (read_significance_mask(p)?, format!("significant in {}", p.display())),
        MaskSelector::UnionSignificant => {
            let mut union = vec![false; n];
            for e in &spec.entries {
                let p = e.significance.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "entry (layer {}, context {}) lacks a significance file for the union mask",
                        e.layer, e.context
                    ))
                })?;
                let m = read_significance_mask(p)?;
                if m.len() != n {
                    return Err(Error::Data(format!("{}: mask length {} vs {n}", p.display(), m.len())));
                }
                union.iter_mut().zip(&m).for_each(|(u, x)| *u |= *x);
            }
            (union, "union of significant outputs across entries".to_string())
        }
    };
    fn views<'a>(entries: &[SweepEntry], maps: &'a [Vec<f64>]) -> Vec<SweepMap<'a>> {
        entries
            .iter()
            .zip(maps)
            .map(|(e, m)| SweepMap {
                layer: e.layer,
                context: e.context,
                accuracy: m,
            })
            .collect()
    }
    let (sm, pm) = (views(&spec.entries, &maps), views(&spec.paired, &paired));
    let curves = sweep_curves(&sm, &mask, spec.baseline_layer, &pm)?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(
        &out.join("sweep_meta.json"),
        &serde_json::json!({
            "mask": mask_note,
            "mask_size": mask.iter().filter(|m| **m).count(),
            "baseline_layer": spec.baseline_layer,
        }),
    )?;
    let mut csv = CsvOut::create(&out.join("sweep.csv"), None, "layer,context,mean,adjusted,delta")?;
    for p in &curves {
        csv.line(format_args!(
            "{},{},{},{},{}",
            p.layer,
            p.context,
            p.mean,
            opt(p.adjusted),
            opt(p.delta)
        ))?;
    }
    csv.finish()?;

    let family = |pick: &dyn Fn(&CurvePoint) -> Option<f64>| -> Vec<Series> {
        let mut by_layer: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
        for p in &curves {
            if let Some(y) = pick(p) {
                by_layer.entry(p.layer).or_default().push((f64::from(p.context), y));
            }
        }
        by_layer
            .into_iter()
            .map(|(l, pts)| Series {
                label: format!("layer {l}"),
                points: pts,
            })
            .collect()
    };
    let plots: [(&str, &str, Vec<Series>); 3] = [
        ("sweep_mean.svg", "mean accuracy", family(&|p| Some(p.mean))),
        ("sweep_adjusted.svg", "accuracy minus baseline layer", family(&|p| p.adjusted)),
        ("sweep_delta.svg", "accuracy minus paired run", family(&|p| p.delta)),
    ];
    for (name, ylabel, series) in plots {
        if series.iter().any(|s| !s.points.is_empty()) {
            let path = out.join(name);
            std::fs::write(&path, line_plot(&series, "context length", ylabel)).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(curves)
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Partition {
    LongOnly,
    WordOnly,
    Both,
    Neither,
}

impl Partition {
    pub const ALL: [Partition; 4] = [Partition::LongOnly, Partition::WordOnly, Partition::Both, Partition::Neither];

    pub fn as_str(self) -> &'static str {
        match self {
            Partition::LongOnly => "long-only",
            Partition::WordOnly => "word-only",
            Partition::Both => "both",
            Partition::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<Partition>,
    /// Counts per ROI in `Partition::ALL` order; `None` roi row holds the
    /// voxels outside the language regions.
    pub crosstab: Vec<(Roi, [usize; 4])>,
    pub totals: [usize; 4],
}

/// Splits voxels by which representation predicts them significantly.
pub fn compare_context_vs_word(long: &[bool], word: &[bool], rois: Option<&RoiLabels>) -> Result<Comparison> {
    if long.len() != word.len() {
        return Err(Error::Data(format!("masks have {} and {} voxels", long.len(), word.len())));
    }
    if let Some(r) = rois {
        if r.len() != long.len() {
            return Err(Error::Data(format!("{} ROI labels for {} voxels", r.len(), long.len())));
        }
    }
    let labels: Vec<Partition> = long
        .iter()
        .zip(word)
        .map(|(&l, &w)| match (l, w) {
            (true, false) => Partition::LongOnly,
            (false, true) => Partition::WordOnly,
            (true, true) => Partition::Both,
            (false, false) => Partition::Neither,
        })
        .collect();
    let mut totals = [0usize; 4];
    let mut by_roi: BTreeMap<Roi, [usize; 4]> = Roi::ALL.iter().map(|&r| (r, [0; 4])).collect();
    for (i, &p) in labels.iter().enumerate() {
        totals[p as usize] += 1;
        if let Some(r) = rois {
            by_roi.get_mut(&r.labels[i]).expect("all regions present")[p as usize] += 1;
        }
    }
    let crosstab = if rois.is_some() { by_roi.into_iter().collect() } else { Vec::new() };
    Ok(Comparison {
        labels,
        crosstab,
        totals,
    })
}

/// Writes `partition.csv` and, when ROI labels were given, `crosstab.csv`.
pub fn write_comparison(out: &Path, c: &Comparison) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut csv = CsvOut::create(&out.join("partition.csv"), None, "voxel_index,label")?;
    for (i, p) in c.labels.iter().enumerate() {
        csv.line(format_args!("{i},{}", p.as_str()))?;
    }
    csv.finish()?;
    let header = "roi,long-only,word-only,both,neither";
    let mut csv = CsvOut::create(&out.join("crosstab.csv"), None, header)?;
    for (roi, n) in &c.crosstab {
        csv.line(format_args!("{roi},{},{},{},{}", n[0], n[1], n[2], n[3]))?;
    }
    let t = c.totals;
    csv.line(format_args!("total,{},{},{},{}", t[0], t[1], t[2], t[3]))?;
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use brainalign_core::stats::fdp_threshold_values;

    #[test]
    fn significance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut acc = vec![0.95; 30];
        acc.push(0.2);
        let r = fdp_threshold_values(&acc, 0.05).unwrap();
        write_significance(dir.path(), Some("abc"), &r).unwrap();
        assert_eq!(read_significance_mask(&dir.path().join("significance.json")).unwrap(), r.rejected);
        let trace = std::fs::read_to_string(dir.path().join("fdp_trace.csv")).unwrap();
        assert!(trace.starts_with("# config_hash: abc\ndelta,fdp\n0.001,"));
    }

    #[test]
    fn identical_and_self_baseline_curves_are_zero() {
        let a = [0.6, 0.7, 0.8];
        let b = [0.5, 0.9, 0.7];
        let maps = [
            SweepMap { layer: 1, context: 5, accuracy: &a },
            SweepMap { layer: 2, context: 5, accuracy: &b },
        ];
        let mask = [true, true, false];
        let curves = sweep_curves(&maps, &mask, Some(1), &maps).unwrap();
        assert_eq!(curves[0].adjusted, Some(0.0));
        assert!(curves.iter().all(|p| p.delta == Some(0.0)));
        assert!((curves[0].mean - 0.65).abs() < 1e-15);
        assert!((curves[1].adjusted.unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn sweep_argmax_follows_construction() {
        // layer 2 wins for contexts beyond 15, layer 1 before
        let contexts = [1u32, 5, 10, 15, 20, 25, 30];
        let mut owned = Vec::new();
        for &k in &contexts {
            for layer in 1..=3u32 {
                let v = match layer {
                    1 => 0.6,
                    2 if k > 15 => 0.7,
                    2 => 0.55,
                    _ => 0.58,
                };
                owned.push((layer, k, vec![v; 4]));
            }
        }
        let maps: Vec<SweepMap<'_>> = owned
            .iter()
            .map(|(l, k, a)| SweepMap { layer: *l, context: *k, accuracy: a })
            .collect();
        let curves = sweep_curves(&maps, &[true; 4], None, &[]).unwrap();
        for &k in &contexts {
            let best = curves
                .iter()
                .filter(|p| p.context == k)
                .max_by(|a, b| a.mean.total_cmp(&b.mean))
                .unwrap();
            assert_eq!(best.layer, if k > 15 { 2 } else { 1 });
        }
    }

    #[test]
    fn sweep_errors() {
        let a = [0.6, 0.7];
        let maps = [SweepMap { layer: 1, context: 1, accuracy: &a }];
        assert!(sweep_curves(&maps, &[false, false], None, &[]).is_err());
        assert!(sweep_curves(&maps, &[true], None, &[]).is_err());
    }

    #[test]
    fn partition_cases() {
        let m = [true, false, true, false];
        let same = compare_context_vs_word(&m, &m, None).unwrap();
        assert!(same
            .labels
            .iter()
            .all(|p| matches!(p, Partition::Both | Partition::Neither)));
        let disjoint = compare_context_vs_word(&[true, false, false], &[false, true, false], None).unwrap();
        assert_eq!(disjoint.totals, [1, 1, 0, 1]);
        assert!(compare_context_vs_word(&[true], &[true, false], None).is_err());
    }

    #[test]
    fn crosstab_counts() {
        let rois = RoiLabels {
            labels: vec![Roi::G1b, Roi::G1b, Roi::G2a, Roi::G2a, Roi::G2a, Roi::None],
        };
        let long = [false, true, true, true, false, true];
        let word = [true, true, false, false, false, false];
        let c = compare_context_vs_word(&long, &word, Some(&rois)).unwrap();
        let get = |r: Roi| c.crosstab.iter().find(|(x, _)| *x == r).unwrap().1;
        assert_eq!(get(Roi::G1b), [0, 1, 1, 0]);
        assert_eq!(get(Roi::G2a), [2, 0, 0, 1]);
        assert_eq!(get(Roi::None), [1, 0, 0, 0]);
        assert_eq!(c.totals, [3, 1, 1, 1]);
    }

    proptest::proptest! {
        #[test]
        fn crosstab_rows_sum_to_totals(cells in proptest::collection::vec((proptest::bool::ANY, proptest::bool::ANY, 0usize..8), 0..200)) {
            let long: Vec<bool> = cells.iter().map(|c| c.0).collect();
            let word: Vec<bool> = cells.iter().map(|c| c.1).collect();
            let rois = RoiLabels { labels: cells.iter().map(|c| Roi::ALL[c.2]).collect() };
            let c = compare_context_vs_word(&long, &word, Some(&rois)).unwrap();
            let mut summed = [0usize; 4];
            for (_, n) in &c.crosstab {
                for k in 0..4 {
                    summed[k] += n[k];
                }
            }
            proptest::prop_assert_eq!(summed, c.totals);
            proptest::prop_assert_eq!(c.totals.iter().sum::<usize>(), cells.len());
            let both = long.iter().zip(&word).filter(|(l, w)| **l && **w).count();
            proptest::prop_assert_eq!(c.totals[Partition::Both as usize], both);
        }
    }
}
