//! End-to-end run: load → design → ridge fit → classification → FDP
//! threshold → reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use brainalign_core::datamodel::{
    read_adjacency, read_brain_dataset, read_feature_matrix, read_rois, write_accuracy_map, write_encoding_fit,
    write_fold_weights, write_matrix, AccuracyMap, Alignment, Dtype, FeatureMatrix, FmriData, MegData,
    Recording, SignificanceResult, FEATURE_MAGIC,
};
use brainalign_core::evalcls::{build_neighborhoods, classify_fmri_folds, classify_meg_folds, NeighborhoodMap};
use brainalign_core::featprep::{build_delayed, group_by_tr};
use brainalign_core::linalg::pin_blas_threads;
use brainalign_core::ridge::{fit_eval_folds_with, FitOptions, FitOutput, WeightPolicy};
use brainalign_core::stats::fdp_threshold;
use brainalign_core::{Error, Result};
use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{roi_rows, write_roi_table, write_significance};

/// What a finished run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub config_hash: String,
    pub accuracy: AccuracyMap,
    pub significance: SignificanceResult,
    pub timing: Vec<(&'static str, f64)>,
}

struct Timer {
    start: Instant,
    laps: Vec<(&'static str, f64)>,
}

impl Timer {
    fn new() -> Self {
        Timer {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        let secs = (now - self.start).as_secs_f64();
        log::info!("{stage}: {secs:.2} s");
        self.laps.push((stage, secs));
        self.start = now;
    }
}

fn stage(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| e.in_stage(name)
}

/// Runs the whole analysis described by `cfg` and writes every artifact
/// into `cfg.out`. Parallel stages use the current rayon pool.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate().map_err(stage("config"))?;
    pin_blas_threads();
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save(&out.join("config.json"))?;
    let hash = cfg.hash();
    let mut timer = Timer::new();

    let features = read_feature_matrix(&cfg.features).map_err(stage("load"))?;
    let brain = read_brain_dataset(&cfg.brain).map_err(stage("load"))?;
    let rois = cfg.rois.as_deref().map(read_rois).transpose().map_err(stage("load"))?;
    timer.lap("load");

    let accuracy = match &brain.recording {
        Recording::Fmri(f) => run_fmri(cfg, &features, f, &mut timer)?,
        Recording::Meg(m) => {
            if rois.is_some() {
                log::warn!("ROI labels are ignored for MEG recordings");
            }
            run_meg(cfg, &features, m, &mut timer)?
        }
    };
    write_accuracy_map(&accuracy, &out.join("accuracy.baam"))?;

    let significance = fdp_threshold(&accuracy, cfg.q).map_err(stage("significance"))?;
    write_significance(out, Some(&hash), &significance)?;
    timer.lap("significance");

    if let (Some(rois), Recording::Fmri(_)) = (&rois, &brain.recording) {
        let rows = roi_rows(accuracy.as_slice(), &significance.rejected, rois, cfg.threshold).map_err(stage("report"))?;
        write_roi_table(&out.join("roi_table.csv"), Some(&hash), &rows)?;
        timer.lap("report");
    }

    write_timing(&out.join("timing.json"), &hash, &timer.laps)?;
    Ok(RunSummary {
        out: out.clone(),
        config_hash: hash,
        accuracy,
        significance,
        timing: timer.laps,
    })
}

/// TR-aligned delayed design for an fMRI recording.
pub fn fmri_design(features: &FeatureMatrix, fmri: &FmriData, delays: &[usize]) -> Result<Array2<f64>> {
    let n_trs = fmri.n_trs();
    let tr = match features.alignment() {
        Alignment::Word => {
            if features.n_rows() != fmri.word_onsets.len() {
                return Err(Error::Data(format!(
                    "features have {} word rows, recording has {} words",
                    features.n_rows(),
                    fmri.word_onsets.len()
                )));
            }
            group_by_tr(features, &fmri.word_onsets, n_trs)?
        }
        Alignment::Tr => {
            if features.n_rows() != n_trs {
                return Err(Error::Data(format!(
                    "features have {} TR rows, recording has {n_trs} TRs",
                    features.n_rows()
                )));
            }
            features.clone()
        }
    };
    Ok(build_delayed(&tr, delays)?.values)
}

fn fit(cfg: &RunConfig, design: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<FitOutput> {
    let fit_dir = cfg.out.join("fit");
    std::fs::create_dir_all(&fit_dir).map_err(|e| Error::io(&fit_dir, e))?;
    let opts = FitOptions {
        norm: cfg.norm,
        weights: if cfg.save_weights {
            WeightPolicy::Stream
        } else {
            WeightPolicy::Skip
        },
    };
    let output = fit_eval_folds_with(design, targets, cfg.folds, &cfg.lambda_grid, opts, |k, f| {
        match &f.weights {
            Some(w) => write_fold_weights(&fit_dir, k, w),
            None => Ok(()),
        }
    })?;
    write_encoding_fit(&output.fit, &fit_dir)?;
    let pred_dir = cfg.out.join("predictions");
    std::fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
    for (k, p) in output.folds.iter().enumerate() {
        write_matrix(&pred_dir.join(format!("fold{k}.pred.bafm")), FEATURE_MAGIC, Dtype::F32, &p.predicted)?;
    }
    Ok(output)
}

fn run_fmri(cfg: &RunConfig, features: &FeatureMatrix, fmri: &FmriData, timer: &mut Timer) -> Result<AccuracyMap> {
    let adjacency = cfg
        .adjacency
        .as_deref()
        .ok_or_else(|| Error::Config("fMRI runs need --adjacency".into()).in_stage("config"))?;
    let graph = read_adjacency(adjacency, fmri.n_voxels()).map_err(stage("load"))?;
    let nbhd = build_neighborhoods(&graph);
    let design = fmri_design(features, fmri, &cfg.delays).map_err(stage("design"))?;
    timer.lap("design");

    let output = fit(cfg, design.view(), fmri.data.view()).map_err(stage("ridge"))?;
    drop(design);
    timer.lap("ridge");

    let folds: Vec<_> = output
        .folds
        .iter()
        .map(|f| (f.observed.view(), f.predicted.view()))
        .collect();
    let acc = classify_fmri_folds(&folds, &nbhd, &cfg.classifier).map_err(stage("classify"))?;
    timer.lap("classify");
    Ok(acc)
}

/// Ridge fit and searchlight classification in memory, using the fold,
/// λ-grid, normalization and classifier settings of `cfg`. Nothing is
/// written.
pub fn evaluate_fmri(
    design: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    nbhd: &NeighborhoodMap,
    cfg: &RunConfig,
) -> Result<AccuracyMap> {
    let opts = FitOptions {
        norm: cfg.norm,
        weights: WeightPolicy::Skip,
    };
    let output = fit_eval_folds_with(design, targets, cfg.folds, &cfg.lambda_grid, opts, |_, _| Ok(()))
        .map_err(stage("ridge"))?;
    let folds: Vec<_> = output
        .folds
        .iter()
        .map(|f| (f.observed.view(), f.predicted.view()))
        .collect();
    classify_fmri_folds(&folds, nbhd, &cfg.classifier).map_err(stage("classify"))
}

fn run_meg(cfg: &RunConfig, features: &FeatureMatrix, meg: &MegData, timer: &mut Timer) -> Result<AccuracyMap> {
    if features.alignment() != Alignment::Word || features.n_rows() != meg.n_words() {
        return Err(Error::Data(format!(
            "MEG runs need one word-aligned feature row per word ({}), got {} rows",
            meg.n_words(),
            features.n_rows()
        ))
        .in_stage("design"));
    }
    let (s, t) = (meg.n_sensors(), meg.n_timebins());
    let targets = meg
        .data
        .to_shape((meg.n_words(), s * t))
        .map_err(|e| Error::Data(e.to_string()))?;
    timer.lap("design");

    let output = fit(cfg, features.values().view(), targets.view()).map_err(stage("ridge"))?;
    timer.lap("ridge");

    let shaped: Vec<_> = output
        .folds
        .iter()
        .map(|f| {
            let n = f.val_rows.len();
            let obs = f.observed.view().into_shape_with_order((n, s, t)).expect("standard layout");
            let pred = f.predicted.view().into_shape_with_order((n, s, t)).expect("standard layout");
            (obs, pred)
        })
        .collect();
    let acc = classify_meg_folds(&shaped, &meg.sensor_locations, &cfg.classifier).map_err(stage("classify"))?;
    timer.lap("classify");
    Ok(acc)
}

#[derive(Serialize)]
struct Timing<'a> {
    config_hash: &'a str,
    stages: Vec<StageTime>,
    total_seconds: f64,
}

#[derive(Serialize)]
struct StageTime {
    stage: &'static str,
    seconds: f64,
}

fn write_timing(path: &Path, hash: &str, laps: &[(&'static str, f64)]) -> Result<()> {
    let t = Timing {
        config_hash: hash,
        stages: laps.iter().map(|&(stage, seconds)| StageTime { stage, seconds }).collect(),
        total_seconds: laps.iter().map(|l| l.1).sum(),
    };
    let text = serde_json::to_string_pretty(&t).expect("timing serializes") + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
