//! Synthetic datasets with planted signal, for tests and acceptance runs.

use std::io::Write;
use std::path::{Path, PathBuf};

use brainalign_core::datamodel::{
    write_adjacency, write_brain_dataset, write_feature_matrix, AdjacencyGraph, Alignment, BrainDataset, Dtype,
    FeatureMatrix, FeatureMeta, FmriData, MegData, Recording,
};
use brainalign_core::evalcls::NeighborhoodMap;
use brainalign_core::featprep::{build_delayed, group_by_tr, normalize_owned};
use brainalign_core::{Error, Result};
use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GraphKind {
    /// 4-connected square grid, voxels numbered row by row.
    Lattice,
    /// Uniform points in the unit square joined within a radius giving mean
    /// degree about 6; voxels numbered by x coordinate.
    RandomGeometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_trs: usize,
    pub n_voxels: usize,
    /// Word feature dimension.
    pub d: usize,
    /// Fraction of voxels carrying signal; they are the lowest indices.
    pub frac_signal: f64,
    /// Signal-to-noise variance ratio of planted voxels; infinite means
    /// noise-free.
    pub snr: f64,
    pub graph: GraphKind,
    pub seed: u64,
    pub words_per_tr: usize,
    pub delays: Vec<usize>,
}

impl SynthParams {
    pub fn new(n_trs: usize, n_voxels: usize, d: usize, frac_signal: f64, snr: f64, seed: u64) -> Self {
        SynthParams {
            n_trs,
            n_voxels,
            d,
            frac_signal,
            snr,
            graph: GraphKind::Lattice,
            seed,
            words_per_tr: 4,
            delays: vec![1, 2, 3, 4],
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.frac_signal) {
            return Err(Error::Config(format!("frac_signal must lie in [0, 1], got {}", self.frac_signal)));
        }
        if !(self.snr > 0.0) {
            return Err(Error::Config(format!("snr must be positive, got {}", self.snr)));
        }
        if self.n_trs < 2 || self.n_voxels == 0 || self.d == 0 || self.words_per_tr == 0 {
            return Err(Error::Config("degenerate synthetic sizes".into()));
        }
        Ok(())
    }

    pub fn n_signal(&self) -> usize {
        (self.frac_signal * self.n_voxels as f64).round() as usize
    }
}

pub struct SynthData {
    pub features: FeatureMatrix,
    pub brain: BrainDataset,
    pub graph: AdjacencyGraph,
    /// `planted[i]` iff output `i` carries signal.
    pub planted: Vec<bool>,
}

/// Word features iid N(0, 1); each signal voxel is a random linear read-out
/// of the normalized delayed TR design plus unit-variance Gaussian noise.
/// Values are rounded to f32 so the in-memory data equal what is written.
pub fn synth_generate(p: &SynthParams) -> Result<SynthData> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n_words = p.n_trs * p.words_per_tr;
    let words = gaussian((n_words, p.d), &mut rng);
    let meta = FeatureMeta {
        model_name: "synthetic".into(),
        dataset_id: format!("synth-{}", p.seed),
        ..FeatureMeta::default()
    };
    let features = FeatureMatrix::new(words, Alignment::Word, meta)?.with_dtype(Dtype::F32);
    let onsets: Vec<usize> = (0..n_words).map(|w| w / p.words_per_tr).collect();
    let tr = group_by_tr(&features, &onsets, p.n_trs)?;
    let (z, _) = normalize_owned(build_delayed(&tr, &p.delays)?.values)?;

    let n_signal = p.n_signal();
    let mut data = Array2::<f64>::zeros((p.n_trs, p.n_voxels));
    plant(z.view(), data.slice_mut(s![.., ..n_signal]), p.snr, &mut rng);
    let noise_sd = if p.snr.is_finite() { 1.0 } else { 0.0 };
    for x in data.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *x = round_f32(*x + noise_sd * e);
    }

    let mut fmri = FmriData::new(data, 2.0, onsets)?;
    fmri.word_seconds = Some(2.0 / p.words_per_tr as f64);
    let graph = match p.graph {
        GraphKind::Lattice => lattice(p.n_voxels),
        GraphKind::RandomGeometric => random_geometric(p.n_voxels, &mut rng),
    };
    Ok(SynthData {
        features,
        brain: BrainDataset {
            recording: Recording::Fmri(fmri),
            dtype: Dtype::F32,
        },
        graph,
        planted: (0..p.n_voxels).map(|i| i < n_signal).collect(),
    })
}

/// MEG counterpart: `n_locations` triples of sensors, the first
/// `frac_signal` of them carrying a linear read-out of the word features at
/// every time bin.
pub fn synth_meg(
    n_words: usize,
    n_locations: usize,
    n_bins: usize,
    d: usize,
    frac_signal: f64,
    snr: f64,
    seed: u64,
) -> Result<(FeatureMatrix, BrainDataset, Vec<bool>)> {
    if !(0.0..=1.0).contains(&frac_signal) || !(snr > 0.0) || n_words < 2 || n_locations == 0 || n_bins == 0 {
        return Err(Error::Config("degenerate synthetic MEG parameters".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = gaussian((n_words, d), &mut rng);
    let (z, _) = normalize_owned(words.clone())?;
    let n_sensors = 3 * n_locations;
    let n_signal = (frac_signal * n_locations as f64).round() as usize;
    let mut flat = Array2::<f64>::zeros((n_words, n_sensors * n_bins));
    plant(z.view(), flat.slice_mut(s![.., ..3 * n_signal * n_bins]), snr, &mut rng);
    let noise_sd = if snr.is_finite() { 1.0 } else { 0.0 };
    for x in flat.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *x = round_f32(*x + noise_sd * e);
    }
    let data = Array3::from_shape_vec((n_words, n_sensors, n_bins), flat.into_raw_vec_and_offset().0)
        .expect("sizes agree");
    let mut meg = MegData::new(data, 1000.0 / n_bins as f64, (0..n_sensors).map(|s| s / 3).collect())?;
    meg.word_ms = Some(1000.0);
    let features = FeatureMatrix::new(words, Alignment::Word, FeatureMeta::default())?.with_dtype(Dtype::F32);
    let planted = (0..n_locations).map(|l| l < n_signal).collect();
    let brain = BrainDataset {
        recording: Recording::Meg(meg),
        dtype: Dtype::F32,
    };
    Ok((features, brain, planted))
}

fn gaussian(shape: (usize, usize), rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || round_f32(rng.sample(StandardNormal)))
}

fn round_f32(x: f64) -> f64 {
    x as f32 as f64
}

/// Fills `out` with `z · w` for Gaussian `w`, each column scaled to variance
/// `snr` (or 1 when `snr` is infinite).
fn plant(z: ArrayView2<'_, f64>, mut out: ndarray::ArrayViewMut2<'_, f64>, snr: f64, rng: &mut ChaCha8Rng) {
    let scale = if snr.is_finite() { snr.sqrt() } else { 1.0 };
    const BLOCK: usize = 512;
    let n = out.ncols();
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let w = gaussian((z.ncols(), end - start), rng);
        let mut block = z.dot(&w);
        for mut col in block.axis_iter_mut(Axis(1)) {
            let mean = col.mean().unwrap_or(0.0);
            let sd = col.mapv(|v| (v - mean) * (v - mean)).mean().unwrap_or(0.0).sqrt();
            if sd > 0.0 {
                col.mapv_inplace(|v| (v - mean) / sd * scale);
            }
        }
        out.slice_mut(s![.., start..end]).assign(&block);
    }
}

/// 4-connected grid of `ceil(√n)` columns.
pub fn lattice(n: usize) -> AdjacencyGraph {
    let w = (n as f64).sqrt().ceil().max(1.0) as usize;
    let mut edges = Vec::with_capacity(2 * n);
    for i in 0..n {
        if (i % w) + 1 < w && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + w < n {
            edges.push((i, i + w));
        }
    }
    AdjacencyGraph::new(n, edges).expect("lattice edges are valid")
}

fn random_geometric(n: usize, rng: &mut ChaCha8Rng) -> AdjacencyGraph {
    let mut pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let r = (6.0 / (std::f64::consts::PI * n as f64)).sqrt();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if pts[j].0 - pts[i].0 >= r {
                break;
            }
            let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
            if dx * dx + dy * dy < r * r {
                edges.push((i, j));
            }
        }
    }
    AdjacencyGraph::new(n, edges).expect("geometric edges are valid")
}

/// Voxels whose searchlight holds no planted voxel: the ones for which a
/// significant accuracy is a false discovery.
pub fn searchlight_null(nbhd: &NeighborhoodMap, planted: &[bool]) -> Vec<bool> {
    (0..nbhd.len())
        .map(|i| nbhd.members(i).iter().all(|&j| !planted[j]))
        .collect()
}

/// Paths written by [`write_synth`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub features: PathBuf,
    pub brain: PathBuf,
    pub adjacency: Option<PathBuf>,
    pub planted: PathBuf,
}

/// Writes `features.bafm`, `brain.babd`, `adjacency.csv` (fMRI) and
/// `planted.csv` into `dir`.
pub fn write_synth(
    dir: &Path,
    features: &FeatureMatrix,
    brain: &BrainDataset,
    graph: Option<&AdjacencyGraph>,
    planted: &[bool],
) -> Result<SynthPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = SynthPaths {
        features: dir.join("features.bafm"),
        brain: dir.join("brain.babd"),
        adjacency: graph.map(|_| dir.join("adjacency.csv")),
        planted: dir.join("planted.csv"),
    };
    write_feature_matrix(features, &paths.features)?;
    write_brain_dataset(brain, &paths.brain)?;
    if let (Some(g), Some(p)) = (graph, &paths.adjacency) {
        write_adjacency(g, p)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(&paths.planted).map_err(|e| Error::io(&paths.planted, e))?);
    let io = |e| Error::io(&paths.planted, e);
    writeln!(out, "index,planted").map_err(io)?;
    for (i, p) in planted.iter().enumerate() {
        writeln!(out, "{i},{}", u8::from(*p)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use brainalign_core::evalcls::build_neighborhoods;

    #[test]
    fn shapes_and_planted_prefix() {
        let p = SynthParams::new(40, 30, 5, 0.2, 2.0, 1);
        let d = synth_generate(&p).unwrap();
        assert_eq!(d.features.values().dim(), (160, 5));
        let f = d.brain.as_fmri().unwrap();
        assert_eq!(f.data.dim(), (40, 30));
        assert_eq!(d.planted.iter().filter(|x| **x).count(), 6);
        assert!(d.planted[..6].iter().all(|x| *x));
        assert_eq!(d.graph.n_voxels(), 30);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = SynthParams::new(20, 10, 3, 0.5, 1.0, 7);
        let a = synth_generate(&p).unwrap();
        let b = synth_generate(&p).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.brain, b.brain);
        let c = synth_generate(&SynthParams { seed: 8, ..p }).unwrap();
        assert_ne!(a.brain, c.brain);
    }

    #[test]
    fn noise_free_signal_is_exact_readout() {
        let p = SynthParams::new(30, 4, 3, 1.0, f64::INFINITY, 2);
        let d = synth_generate(&p).unwrap();
        let y = &d.brain.as_fmri().unwrap().data;
        for c in 0..4 {
            let col = y.column(c);
            let var = col.mapv(|v| v * v).mean().unwrap();
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn lattice_degrees() {
        let g = lattice(9);
        assert_eq!(g.neighbors(4), &[1, 3, 5, 7]);
        assert_eq!(g.neighbors(0), &[1, 3]);
        let g = lattice(7);
        assert_eq!(g.neighbors(6), &[3]);
    }

    #[test]
    fn geometric_graph_has_local_edges() {
        let p = SynthParams {
            graph: GraphKind::RandomGeometric,
            ..SynthParams::new(10, 400, 2, 0.1, 1.0, 3)
        };
        let d = synth_generate(&p).unwrap();
        let mean_deg = 2.0 * d.graph.edges().len() as f64 / 400.0;
        assert!((3.0..9.0).contains(&mean_deg), "{mean_deg}");
    }

    #[test]
    fn null_set_excludes_planted_neighborhoods() {
        let g = lattice(16);
        let nb = build_neighborhoods(&g);
        let planted: Vec<bool> = (0..16).map(|i| i < 4).collect();
        let null = searchlight_null(&nb, &planted);
        // rows 0..2 within two hops of the first row
        assert!(null[..12].iter().all(|x| !x));
        assert!(null[12..].iter().all(|x| *x));
    }

    #[test]
    fn meg_shapes() {
        let (f, b, planted) = synth_meg(50, 4, 5, 3, 0.5, 2.0, 1).unwrap();
        assert_eq!(f.n_rows(), 50);
        let m = b.as_meg().unwrap();
        assert_eq!(m.data.dim(), (50, 12, 5));
        assert_eq!(planted, vec![true, true, false, false]);
    }

    #[test]
    fn bad_parameters() {
        assert!(synth_generate(&SynthParams::new(20, 10, 3, 1.5, 1.0, 0)).is_err());
        assert!(synth_generate(&SynthParams::new(20, 10, 3, 0.5, 0.0, 0)).is_err());
        assert!(synth_generate(&SynthParams::new(1, 10, 3, 0.5, 1.0, 0)).is_err());
    }
}
