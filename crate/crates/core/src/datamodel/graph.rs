use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, FormatError, Result};

/// Undirected voxel adjacency on the cortical sheet.
///
/// Edges are stored once each as `(min, max)` in sorted order; neighbor lists
/// are precomputed in compressed form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    n_voxels: usize,
    edges: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl AdjacencyGraph {
    pub fn new(n_voxels: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> std::result::Result<Self, FormatError> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(FormatError::SelfLoop(i));
            }
            if i >= n_voxels || j >= n_voxels {
                return Err(FormatError::EdgeOutOfRange(i, j, n_voxels));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(FormatError::DuplicateEdge(i, j));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();

        let mut degree = vec![0usize; n_voxels];
        for &(i, j) in &edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(n_voxels + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n_voxels].to_vec();
        let mut neighbors = vec![0; offsets[n_voxels]];
        for &(i, j) in &edges {
            neighbors[fill[i]] = j;
            fill[i] += 1;
            neighbors[fill[j]] = i;
            fill[j] += 1;
        }
        for v in 0..n_voxels {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Ok(AdjacencyGraph {
            n_voxels,
            edges,
            offsets,
            neighbors,
        })
    }

    pub fn n_voxels(&self) -> usize {
        self.n_voxels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbors of voxel `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Parses an `i,j` edge list (0-indexed, one edge per line). Blank lines and
/// lines starting with `#` are ignored.
pub fn read_adjacency(path: &Path, n_voxels: usize) -> Result<AdjacencyGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt = |e| Error::format(path, e);
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |s: Option<&str>| -> std::result::Result<usize, FormatError> {
            s.map(str::trim).and_then(|s| s.parse().ok()).ok_or(FormatError::Parse {
                line: lineno + 1,
                message: format!("expected \"i,j\", got {line:?}"),
            })
        };
        let mut parts = line.split(',');
        let i = parse(parts.next()).map_err(fmt)?;
        let j = parse(parts.next()).map_err(fmt)?;
        if parts.next().is_some() {
            return Err(fmt(FormatError::Parse {
                line: lineno + 1,
                message: format!("expected \"i,j\", got {line:?}"),
            }));
        }
        edges.push((i, j));
    }
    AdjacencyGraph::new(n_voxels, edges).map_err(fmt)
}

pub fn write_adjacency(g: &AdjacencyGraph, path: &Path) -> Result<()> {
    let mut w = super::binfmt::create(path)?;
    let io = |e| Error::io(path, e);
    for &(i, j) in g.edges() {
        writeln!(w, "{i},{j}").map_err(io)?;
    }
    w.flush().map_err(io)
}
