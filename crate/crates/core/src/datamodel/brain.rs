use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Array3, CowArray, Ix2};
use serde::{Deserialize, Serialize};

use super::{binfmt, Dtype, BRAIN_MAGIC};
use crate::error::{Error, FormatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Fmri,
    Meg,
}

/// fMRI recording: one row per TR, one column per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct FmriData {
    pub data: Array2<f64>,
    pub tr_seconds: f64,
    /// TR index of every presented word, in presentation order.
    pub word_onsets: Vec<usize>,
    /// Presentation duration of one word, when the stimulus is fixed-rate.
    pub word_seconds: Option<f64>,
}

/// MEG recording: words × sensors × time bins after word onset.
#[derive(Debug, Clone, PartialEq)]
pub struct MegData {
    pub data: Array3<f64>,
    pub bin_ms: f64,
    /// Location id of every sensor (sensor index → location).
    pub sensor_locations: Vec<usize>,
    pub word_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrainDataset {
    pub recording: Recording,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recording {
    Fmri(FmriData),
    Meg(MegData),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "modality", rename_all = "lowercase")]
enum Sidecar {
    Fmri {
        dtype: Dtype,
        tr_seconds: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        word_seconds: Option<f64>,
        word_onsets: Vec<usize>,
    },
    Meg {
        dtype: Dtype,
        bin_ms: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        word_ms: Option<f64>,
        sensor_locations: Vec<usize>,
    },
}

impl FmriData {
    pub fn new(data: Array2<f64>, tr_seconds: f64, word_onsets: Vec<usize>) -> Result<Self> {
        let d = FmriData {
            data,
            tr_seconds,
            word_onsets,
            word_seconds: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn n_trs(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_voxels(&self) -> usize {
        self.data.ncols()
    }

    fn validate(&self) -> Result<()> {
        if !(self.tr_seconds > 0.0 && self.tr_seconds.is_finite()) {
            return Err(Error::Data(format!("tr_seconds must be positive, got {}", self.tr_seconds)));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("fMRI data has a non-finite value at flat index {i}")));
        }
        let n = self.n_trs();
        if let Some((w, &t)) = self.word_onsets.iter().enumerate().find(|(_, &t)| t >= n) {
            return Err(Error::Data(format!("word {w} has onset TR {t} but the recording has {n} TRs")));
        }
        if let Some(ws) = self.word_seconds {
            self.validate_fixed_rate(ws)?;
        }
        Ok(())
    }

    /// Number of words presented during each TR.
    pub fn words_per_tr(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_trs()];
        for &t in &self.word_onsets {
            counts[t] += 1;
        }
        counts
    }

    /// Checks a fixed-rate presentation: onsets are in time order and every
    /// TR that holds words holds `tr_seconds / word_seconds` of them, except
    /// the last one, which may be partial.
    pub fn validate_fixed_rate(&self, word_seconds: f64) -> Result<()> {
        let per_tr = self.tr_seconds / word_seconds;
        let expected = per_tr.round() as usize;
        if expected == 0 || (per_tr - expected as f64).abs() > 1e-9 {
            return Err(Error::Data(format!(
                "TR of {}s is not a whole number of {word_seconds}s words",
                self.tr_seconds
            )));
        }
        if self.word_onsets.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Data("word onsets are not in presentation order".into()));
        }
        let counts = self.words_per_tr();
        let last = self.word_onsets.last().copied();
        for (t, &c) in counts.iter().enumerate() {
            let ok = c == 0 || c == expected || (Some(t) == last && c < expected);
            if !ok {
                return Err(Error::Data(format!("TR {t} holds {c} words, expected {expected}")));
            }
        }
        Ok(())
    }
}

impl MegData {
    pub fn new(data: Array3<f64>, bin_ms: f64, sensor_locations: Vec<usize>) -> Result<Self> {
        let d = MegData {
            data,
            bin_ms,
            sensor_locations,
            word_ms: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn n_words(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_sensors(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_timebins(&self) -> usize {
        self.data.dim().2
    }

    fn validate(&self) -> Result<()> {
        if !(self.bin_ms > 0.0 && self.bin_ms.is_finite()) {
            return Err(Error::Data(format!("bin_ms must be positive, got {}", self.bin_ms)));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("MEG data has a non-finite value at flat index {i}")));
        }
        if self.sensor_locations.len() != self.n_sensors() {
            return Err(Error::Data(format!(
                "{} sensor locations for {} sensors",
                self.sensor_locations.len(),
                self.n_sensors()
            )));
        }
        if let Some(word_ms) = self.word_ms {
            let covered = self.n_timebins() as f64 * self.bin_ms;
            if (covered - word_ms).abs() > 1e-9 * word_ms.max(1.0) {
                return Err(Error::Data(format!(
                    "{} bins of {}ms cover {covered}ms but words last {word_ms}ms",
                    self.n_timebins(),
                    self.bin_ms
                )));
            }
        }
        Ok(())
    }
}

impl BrainDataset {
    pub fn fmri(data: FmriData) -> Self {
        BrainDataset {
            recording: Recording::Fmri(data),
            dtype: Dtype::F32,
        }
    }

    pub fn meg(data: MegData) -> Self {
        BrainDataset {
            recording: Recording::Meg(data),
            dtype: Dtype::F32,
        }
    }

    pub fn modality(&self) -> Modality {
        match self.recording {
            Recording::Fmri(_) => Modality::Fmri,
            Recording::Meg(_) => Modality::Meg,
        }
    }

    /// Regression targets: TR × voxel for fMRI, word × (sensor·timebin) for
    /// MEG (sensor-major, so output `s * n_timebins + τ` is sensor `s` at bin `τ`).
    pub fn targets(&self) -> CowArray<'_, f64, Ix2> {
        match &self.recording {
            Recording::Fmri(f) => f.data.view().into(),
            Recording::Meg(m) => {
                let (w, s, t) = m.data.dim();
                m.data
                    .to_shape((w, s * t))
                    .expect("element count is preserved")
            }
        }
    }

    pub fn as_fmri(&self) -> Option<&FmriData> {
        match &self.recording {
            Recording::Fmri(f) => Some(f),
            Recording::Meg(_) => None,
        }
    }

    pub fn as_meg(&self) -> Option<&MegData> {
        match &self.recording {
            Recording::Meg(m) => Some(m),
            Recording::Fmri(_) => None,
        }
    }
}

pub fn read_brain_dataset(path: &Path) -> Result<BrainDataset> {
    let bytes = binfmt::read_file(path)?;
    let sidecar: Sidecar = binfmt::read_sidecar(path)?;
    let fmt = |e: FormatError| Error::format(path, e);

    let mut r = binfmt::Reader::new(&bytes);
    r.magic(BRAIN_MAGIC).map_err(fmt)?;
    r.version().map_err(fmt)?;
    let modality = r.u8().map_err(fmt)?;
    let (recording, dtype) = match (modality, sidecar) {
        (
            0,
            Sidecar::Fmri {
                dtype,
                tr_seconds,
                word_seconds,
                word_onsets,
            },
        ) => {
            let trs = r.u64().map_err(fmt)? as usize;
            let voxels = r.u64().map_err(fmt)? as usize;
            let values = r.payload(dtype, trs * voxels).map_err(fmt)?;
            let data = Array2::from_shape_vec((trs, voxels), values).unwrap();
            let f = FmriData {
                data,
                tr_seconds,
                word_onsets,
                word_seconds,
            };
            f.validate().map_err(|e| binfmt::sidecar_error(path, e.to_string()))?;
            (Recording::Fmri(f), dtype)
        }
        (
            1,
            Sidecar::Meg {
                dtype,
                bin_ms,
                word_ms,
                sensor_locations,
            },
        ) => {
            let words = r.u64().map_err(fmt)? as usize;
            let sensors = r.u64().map_err(fmt)? as usize;
            let bins = r.u64().map_err(fmt)? as usize;
            let values = r.payload(dtype, words * sensors * bins).map_err(fmt)?;
            let data = Array3::from_shape_vec((words, sensors, bins), values).unwrap();
            let m = MegData {
                data,
                bin_ms,
                sensor_locations,
                word_ms,
            };
            m.validate().map_err(|e| binfmt::sidecar_error(path, e.to_string()))?;
            (Recording::Meg(m), dtype)
        }
        (0 | 1, _) => return Err(binfmt::sidecar_error(path, "sidecar modality disagrees with the header")),
        (other, _) => return Err(fmt(FormatError::UnknownModality(other))),
    };
    Ok(BrainDataset { recording, dtype })
}

pub fn write_brain_dataset(ds: &BrainDataset, path: &Path) -> Result<()> {
    let mut w = binfmt::create(path)?;
    let io = |e| Error::io(path, e);
    w.write_all(BRAIN_MAGIC).map_err(io)?;
    w.write_all(&binfmt::FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    let sidecar = match &ds.recording {
        Recording::Fmri(f) => {
            w.write_all(&[0]).map_err(io)?;
            for d in [f.n_trs(), f.n_voxels()] {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
            }
            binfmt::write_payload(&mut w, ds.dtype, f.data.iter().copied()).map_err(io)?;
            Sidecar::Fmri {
                dtype: ds.dtype,
                tr_seconds: f.tr_seconds,
                word_seconds: f.word_seconds,
                word_onsets: f.word_onsets.clone(),
            }
        }
        Recording::Meg(m) => {
            w.write_all(&[1]).map_err(io)?;
            for d in [m.n_words(), m.n_sensors(), m.n_timebins()] {
                w.write_all(&(d as u64).to_le_bytes()).map_err(io)?;
            }
            binfmt::write_payload(&mut w, ds.dtype, m.data.iter().copied()).map_err(io)?;
            Sidecar::Meg {
                dtype: ds.dtype,
                bin_ms: m.bin_ms,
                word_ms: m.word_ms,
                sensor_locations: m.sensor_locations.clone(),
            }
        }
    };
    w.flush().map_err(io)?;
    binfmt::write_sidecar(path, &sidecar)
}
