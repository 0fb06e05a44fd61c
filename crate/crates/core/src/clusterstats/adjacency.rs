//! Channel adjacency graphs for spatio-temporal clustering.

use crate::model::ChannelLayout;
use crate::{Error, Result};
use std::collections::BTreeSet;

/// Undirected channel graph (symmetric, no self-edges). Every layout
/// channel appears as a node even when it has no edges.
#[derive(Debug, Clone)]
pub struct Adjacency {
    names: Vec<String>,
    edges: BTreeSet<(usize, usize)>,
}

impl Adjacency {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Edges as index pairs `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_edge(&self, a: &str, b: &str) -> bool {
        let (Some(i), Some(j)) = (self.index(a), self.index(b)) else {
            return false;
        };
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Neighbor indices of `name`, remapped into `data_names` order.
    /// Errors when `name` (or a neighbor present in the data) is not covered.
    pub(crate) fn neighbors_of(&self, name: &str, data_names: &[String]) -> Result<Vec<usize>> {
        let own = self
            .index(name)
            .ok_or_else(|| Error::AdjacencyMissingChannel(name.to_string()))?;
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            let other = if a == own {
                b
            } else if b == own {
                a
            } else {
                continue;
            };
            if let Some(idx) = data_names.iter().position(|n| n == &self.names[other]) {
                out.push(idx);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Radius graph: an edge for every pair closer than `radius`.
    pub fn from_radius(layout: &ChannelLayout, radius: f64) -> Result<Self> {
        let mut edges = BTreeSet::new();
        check_distinct(layout)?;
        for i in 0..layout.len() {
            for j in i + 1..layout.len() {
                if dist(layout.xy[i], layout.xy[j]) <= radius {
                    edges.insert((i, j));
                }
            }
        }
        Ok(Self {
            names: layout.names.clone(),
            edges,
        })
    }

    /// Graph with no edges (channels never merge spatially).
    pub fn empty(names: Vec<String>) -> Self {
        Self {
            names,
            edges: BTreeSet::new(),
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn check_distinct(layout: &ChannelLayout) -> Result<()> {
    for i in 0..layout.len() {
        for j in i + 1..layout.len() {
            if dist(layout.xy[i], layout.xy[j]) < 1e-12 {
                return Err(Error::DuplicatePositions(
                    layout.names[i].clone(),
                    layout.names[j].clone(),
                ));
            }
        }
    }
    Ok(())
}

/// Symmetrized k-nearest-neighbor adjacency.
///
/// Each channel's neighbor list holds its `k` nearest channels; a distance
/// tie group that would overflow `k` is dropped entirely (deterministic —
/// no arbitrary tie-breaking), and an edge requires membership in *both*
/// lists. On a unit 3×3 grid with `k = 4` this yields exactly the rook-move
/// edges.
pub fn build_adjacency(layout: &ChannelLayout, k: usize) -> Result<Adjacency> {
    check_distinct(layout)?;
    let n = layout.len();
    let knn: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(layout.xy[i], layout.xy[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut kept = BTreeSet::new();
            let mut idx = 0;
            while idx < others.len() && kept.len() < k {
                // group of (near-)equal distances
                let d = others[idx].0;
                let mut end = idx + 1;
                while end < others.len() && (others[end].0 - d).abs() <= 1e-9 * d.max(1e-9) {
                    end += 1;
                }
                if kept.len() + (end - idx) > k {
                    break;
                }
                for &(_, j) in &others[idx..end] {
                    kept.insert(j);
                }
                idx = end;
            }
            kept
        })
        .collect();

    let mut edges = BTreeSet::new();
    for i in 0..n {
        for &j in &knn[i] {
            if j > i && knn[j].contains(&i) {
                edges.insert((i, j));
            }
        }
    }
    Ok(Adjacency {
        names: layout.names.clone(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3x3() -> ChannelLayout {
        let mut names = Vec::new();
        let mut xy = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                names.push(format!("E{r}{c}"));
                xy.push((c as f64, r as f64));
            }
        }
        ChannelLayout::new(names, xy).unwrap()
    }

    #[test]
    fn two_channels_single_edge() {
        let layout =
            ChannelLayout::new(vec!["a".into(), "b".into()], vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let adj = build_adjacency(&layout, 4).unwrap();
        assert_eq!(adj.edge_count(), 1);
        assert!(adj.contains_edge("a", "b"));
    }

    #[test]
    fn unit_grid_k4_gives_rook_moves() {
        let adj = build_adjacency(&grid3x3(), 4).unwrap();
        // 12 rook edges on a 3x3 grid
        assert_eq!(adj.edge_count(), 12);
        for r in 0..3 {
            for c in 0..3 {
                if c + 1 < 3 {
                    assert!(adj.contains_edge(&format!("E{r}{c}"), &format!("E{r}{}", c + 1)));
                }
                if r + 1 < 3 {
                    assert!(adj.contains_edge(&format!("E{r}{c}"), &format!("E{}{c}", r + 1)));
                }
            }
        }
        assert!(!adj.contains_edge("E00", "E11"));
    }

    #[test]
    fn edges_are_symmetric() {
        let adj = build_adjacency(&grid3x3(), 4).unwrap();
        for (a, b) in adj.edges() {
            let (na, nb) = (&adj.names()[a], &adj.names()[b]);
            assert!(adj.contains_edge(na, nb));
            assert!(adj.contains_edge(nb, na));
        }
    }

    #[test]
    fn duplicate_positions_rejected() {
        let layout =
            ChannelLayout::new(vec!["a".into(), "b".into()], vec![(0.0, 0.0), (0.0, 0.0)]).unwrap();
        assert!(matches!(
            build_adjacency(&layout, 2),
            Err(Error::DuplicatePositions(_, _))
        ));
    }

    #[test]
    fn radius_graph_on_grid() {
        let adj = Adjacency::from_radius(&grid3x3(), 1.0).unwrap();
        assert_eq!(adj.edge_count(), 12);
    }
}
