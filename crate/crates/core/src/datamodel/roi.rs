use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

/// Language-network regions of interest. Group 1 regions respond to words and
/// sequences, group 2 regions to sequences only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Roi {
    /// Inferior frontal gyrus.
    #[serde(rename = "1a")]
    G1a,
    /// Middle/superior temporal.
    #[serde(rename = "1b")]
    G1b,
    /// Lateral middle/superior frontal.
    #[serde(rename = "2a")]
    G2a,
    /// Supramarginal gyrus / posterior superior temporal / angular gyrus.
    #[serde(rename = "2b")]
    G2b,
    /// Precuneus.
    #[serde(rename = "2c")]
    G2c,
    /// Medial superior frontal.
    #[serde(rename = "2d")]
    G2d,
    /// Medial orbito-frontal.
    #[serde(rename = "2e")]
    G2e,
    #[serde(rename = "none")]
    None,
}

impl Roi {
    pub const ALL: [Roi; 8] = [
        Roi::G1a,
        Roi::G1b,
        Roi::G2a,
        Roi::G2b,
        Roi::G2c,
        Roi::G2d,
        Roi::G2e,
        Roi::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Roi::G1a => "1a",
            Roi::G1b => "1b",
            Roi::G2a => "2a",
            Roi::G2b => "2b",
            Roi::G2c => "2c",
            Roi::G2d => "2d",
            Roi::G2e => "2e",
            Roi::None => "none",
        }
    }

    pub fn region_name(self) -> &'static str {
        match self {
            Roi::G1a => "Inferior Frontal Gyrus",
            Roi::G1b => "Middle/Superior Temporal",
            Roi::G2a => "Lateral Middle/Superior Frontal",
            Roi::G2b => "Supramarginal Gyrus / Posterior Superior Temporal / Angular Gyrus",
            Roi::G2c => "Precuneus",
            Roi::G2d => "Medial Superior Frontal",
            Roi::G2e => "Medial Orbito-Frontal",
            Roi::None => "outside the language network",
        }
    }

    pub fn is_group2(self) -> bool {
        matches!(self, Roi::G2a | Roi::G2b | Roi::G2c | Roi::G2d | Roi::G2e)
    }
}

impl fmt::Display for Roi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Roi {
    type Err = FormatError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Roi::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| FormatError::UnknownLabel(s.to_string()))
    }
}

/// One ROI label per voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiLabels {
    pub labels: Vec<Roi>,
}

impl RoiLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Deserialize)]
struct Row {
    voxel_index: usize,
    label: String,
}

/// Reads a `voxel_index,label` CSV (with header). Every voxel index in
/// `0..n` must appear exactly once.
pub fn read_rois(path: &Path) -> Result<RoiLabels> {
    let fmt = |e| Error::format(path, e);
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut slots: Vec<Option<Roi>> = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| {
            fmt(FormatError::Parse {
                line,
                message: e.to_string(),
            })
        })?;
        let roi: Roi = row.label.parse().map_err(fmt)?;
        if row.voxel_index >= slots.len() {
            slots.resize(row.voxel_index + 1, None);
        }
        if slots[row.voxel_index].replace(roi).is_some() {
            return Err(fmt(FormatError::Parse {
                line,
                message: format!("voxel {} labelled twice", row.voxel_index),
            }));
        }
    }
    let labels = slots
        .into_iter()
        .enumerate()
        .map(|(v, r)| r.ok_or_else(|| fmt(FormatError::DimensionMismatch(format!("voxel {v} has no label")))))
        .collect::<Result<Vec<_>>>()?;
    Ok(RoiLabels { labels })
}

pub fn write_rois(rois: &RoiLabels, path: &Path) -> Result<()> {
    let mut w = super::binfmt::create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "voxel_index,label").map_err(io)?;
    for (i, r) in rois.labels.iter().enumerate() {
        writeln!(w, "{i},{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}
