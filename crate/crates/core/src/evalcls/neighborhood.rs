use crate::datamodel::AdjacencyGraph;

/// Closed 2-hop neighborhoods: `N(i)` holds `i`, its neighbors and their
/// neighbors, sorted ascending. Stored as one flat list with offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodMap {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl NeighborhoodMap {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn members(&self, i: usize) -> &[usize] {
        &self.members[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn size(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Every voxel on its own.
    pub fn singletons(n: usize) -> Self {
        NeighborhoodMap {
            offsets: (0..=n).collect(),
            members: (0..n).collect(),
        }
    }
}

pub fn build_neighborhoods(g: &AdjacencyGraph) -> NeighborhoodMap {
    let n = g.n_voxels();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut members = Vec::new();
    let mut stamp = vec![usize::MAX; n];
    offsets.push(0);
    let mut local = Vec::new();
    for i in 0..n {
        local.clear();
        let mut add = |v: usize, local: &mut Vec<usize>| {
            if stamp[v] != i {
                stamp[v] = i;
                local.push(v);
            }
        };
        add(i, &mut local);
        for &j in g.neighbors(i) {
            add(j, &mut local);
            for &k in g.neighbors(j) {
                add(k, &mut local);
            }
        }
        local.sort_unstable();
        members.extend_from_slice(&local);
        offsets.push(members.len());
    }
    NeighborhoodMap { offsets, members }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, VecDeque};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bfs_depth2(g: &AdjacencyGraph, i: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; g.n_voxels()];
        dist[i] = 0;
        let mut queue = VecDeque::from([i]);
        while let Some(u) = queue.pop_front() {
            for &w in g.neighbors(u) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        (0..g.n_voxels()).filter(|&v| dist[v] <= 2).collect()
    }

    #[test]
    fn path_graph() {
        let g = AdjacencyGraph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let nb = build_neighborhoods(&g);
        assert_eq!(nb.members(0), &[0, 1, 2]);
        assert_eq!(nb.members(1), &[0, 1, 2, 3]);
        assert_eq!(nb.size(3), 3);
    }

    #[test]
    fn isolated_voxel() {
        let g = AdjacencyGraph::new(3, vec![(0, 1)]).unwrap();
        let nb = build_neighborhoods(&g);
        assert_eq!(nb.members(2), &[2]);
        assert_eq!(nb.members(0), &[0, 1]);
        assert_eq!(NeighborhoodMap::singletons(3).members(2), &[2]);
    }

    #[test]
    fn random_graph_matches_bfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mut edges = BTreeSet::new();
            for _ in 0..60 {
                let a = rng.random_range(0..50);
                let b = rng.random_range(0..50);
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            let g = AdjacencyGraph::new(50, edges).unwrap();
            let nb = build_neighborhoods(&g);
            for i in 0..50 {
                assert_eq!(nb.members(i), bfs_depth2(&g, i).as_slice());
            }
        }
    }
}
