use ndarray::{Array2, ArrayView3};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::{block_rng, score, ClassifierConfig};
use crate::datamodel::{AccuracyMap, Granularity};
use crate::error::{Error, Result};

pub const SENSORS_PER_LOCATION: usize = 3;

/// Groups sensor indices by location id. Ids must run over `0..n_locations`
/// with exactly three sensors each.
pub fn location_sensors(sensor_locations: &[usize]) -> Result<Vec<[usize; SENSORS_PER_LOCATION]>> {
    let n_loc = sensor_locations.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::with_capacity(SENSORS_PER_LOCATION); n_loc];
    for (s, &loc) in sensor_locations.iter().enumerate() {
        groups[loc].push(s);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(loc, g)| {
            <[usize; SENSORS_PER_LOCATION]>::try_from(g.as_slice()).map_err(|_| {
                Error::Data(format!(
                    "location {loc} has {} sensors, expected {SENSORS_PER_LOCATION}",
                    g.len()
                ))
            })
        })
        .collect()
}

/// Word-set classification per (sensor location, time bin) for one
/// prediction tensor (`words × sensors × timebins`).
pub fn classify_meg(
    truth: ArrayView3<'_, f64>,
    pred: ArrayView3<'_, f64>,
    sensor_locations: &[usize],
    cfg: &ClassifierConfig,
) -> Result<AccuracyMap> {
    let acc = fold_accuracy(truth, pred, sensor_locations, cfg, 0)?;
    AccuracyMap::new(acc, cfg.n_repeats, Granularity::SensorLocationTimebin)
}

/// Per-fold classification averaged over folds.
pub fn classify_meg_folds(
    folds: &[(ArrayView3<'_, f64>, ArrayView3<'_, f64>)],
    sensor_locations: &[usize],
    cfg: &ClassifierConfig,
) -> Result<AccuracyMap> {
    let Some(((t0, p0), rest)) = folds.split_first() else {
        return Err(Error::Data("no folds to classify".into()));
    };
    let mut sum = fold_accuracy(*t0, *p0, sensor_locations, cfg, 0)?;
    for (k, (t, p)) in rest.iter().enumerate() {
        sum += &fold_accuracy(*t, *p, sensor_locations, cfg, k as u64 + 1)?;
    }
    sum /= folds.len() as f64;
    AccuracyMap::new(sum, cfg.n_repeats * folds.len(), Granularity::SensorLocationTimebin)
}

fn fold_accuracy(
    truth: ArrayView3<'_, f64>,
    pred: ArrayView3<'_, f64>,
    sensor_locations: &[usize],
    cfg: &ClassifierConfig,
    fold: u64,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if truth.dim() != pred.dim() {
        return Err(Error::Data(format!(
            "recorded {:?} and predicted {:?} shapes differ",
            truth.dim(),
            pred.dim()
        )));
    }
    let (n_words, n_sensors, n_bins) = truth.dim();
    if sensor_locations.len() != n_sensors {
        return Err(Error::Data(format!(
            "{} sensor locations for {n_sensors} sensors",
            sensor_locations.len()
        )));
    }
    let locations = location_sensors(sensor_locations)?;
    let set = cfg.chunk_len;
    if n_words < 2 * set {
        return Err(Error::Data(format!("{n_words} words is too few for two sets of {set}")));
    }
    if truth.iter().chain(pred.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Data("classifier inputs contain non-finite values".into()));
    }

    let rows: Vec<Vec<f64>> = locations
        .par_iter()
        .enumerate()
        .map(|(loc, sensors)| {
            let mut rng = block_rng(cfg.seed, fold, loc as u64);
            (0..n_bins)
                .map(|bin| {
                    let mut total = 0.0;
                    for _ in 0..cfg.n_repeats {
                        let (words, others) = if cfg.disjoint_distractors {
                            let idx = sample(&mut rng, n_words, 2 * set).into_vec();
                            let (a, b) = idx.split_at(set);
                            (a.to_vec(), b.to_vec())
                        } else {
                            (
                                sample(&mut rng, n_words, set).into_vec(),
                                sample(&mut rng, n_words, set).into_vec(),
                            )
                        };
                        let (mut d_true, mut d_other) = (0.0, 0.0);
                        for (&w, &o) in words.iter().zip(&others) {
                            for &s in sensors {
                                let x = truth[[w, s, bin]];
                                let a = x - pred[[w, s, bin]];
                                let b = x - pred[[o, s, bin]];
                                d_true += a * a;
                                d_other += b * b;
                            }
                        }
                        total += score(d_true, d_other);
                    }
                    total / cfg.n_repeats as f64
                })
                .collect()
        })
        .collect();
    let n_loc = rows.len();
    Ok(Array2::from_shape_vec((n_loc, n_bins), rows.concat()).expect("one row per location"))
}
