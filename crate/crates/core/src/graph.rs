//! Directed neighborhood graph with per-node edge lists sorted by length.

use std::cmp::Ordering;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::NodeId;

/// A directed edge with its precomputed length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: NodeId,
    pub length: f32,
}

impl Edge {
    pub fn new(target: NodeId, length: f32) -> Self {
        Edge { target, length }
    }

    /// Order used for adjacency lists: ascending length, then target id.
    #[inline]
    pub fn order(&self, other: &Edge) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then(self.target.cmp(&other.target))
    }
}

/// Adjacency-list graph over `0..n`.
///
/// Every list is sorted by [`Edge::order`] and holds no duplicate targets and
/// no self-loops.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    adjacency: Vec<Vec<Edge>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from raw lists, sorting them and rejecting duplicates,
    /// self-loops and out-of-range targets.
    pub fn from_adjacency(mut adjacency: Vec<Vec<Edge>>) -> Result<Self> {
        for list in &mut adjacency {
            list.sort_by(Edge::order);
        }
        let g = Graph { adjacency };
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn neighbors(&self, id: NodeId) -> &[Edge] {
        &self.adjacency[id as usize]
    }

    pub fn outdegree(&self, id: NodeId) -> usize {
        self.adjacency[id as usize].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn mean_outdegree(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.edge_count() as f64 / self.len() as f64
        }
    }

    pub fn indegrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.len()];
        for list in &self.adjacency {
            for e in list {
                deg[e.target as usize] += 1;
            }
        }
        deg
    }

    pub fn contains_edge(&self, source: NodeId, target: NodeId) -> bool {
        self.adjacency
            .get(source as usize)
            .is_some_and(|l| l.iter().any(|e| e.target == target))
    }

    /// Appends an isolated node and returns its id.
    pub fn add_node(&mut self) -> NodeId {
        self.adjacency.push(Vec::new());
        (self.adjacency.len() - 1) as NodeId
    }

    fn check_pair(&self, source: NodeId, target: NodeId) -> Result<()> {
        let len = self.len();
        for id in [source, target] {
            if id as usize >= len {
                return Err(Error::NodeOutOfRange { id, len });
            }
        }
        if source == target {
            return Err(Error::SelfLoop(source));
        }
        Ok(())
    }

    /// Inserts `source -> target`, computing the length from `dataset`.
    /// Returns `false` if the edge was already present.
    pub fn insert_edge(&mut self, dataset: &Dataset, source: NodeId, target: NodeId) -> Result<bool> {
        self.check_pair(source, target)?;
        dataset.check_id(source)?;
        dataset.check_id(target)?;
        let length = dataset.distance(source, target) as f32;
        Ok(self.insert_sorted(source, Edge::new(target, length)))
    }

    /// Inserts an edge whose length is already known.
    pub fn insert_edge_with_length(&mut self, source: NodeId, target: NodeId, length: f32) -> Result<bool> {
        self.check_pair(source, target)?;
        if !(length >= 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!("edge length {length}")));
        }
        Ok(self.insert_sorted(source, Edge::new(target, length)))
    }

    /// Sorted insert with duplicate suppression. Callers guarantee the pair is
    /// valid. A duplicate target always carries the same length, so it sits at
    /// the binary-search position.
    pub(crate) fn insert_sorted(&mut self, source: NodeId, edge: Edge) -> bool {
        let list = &mut self.adjacency[source as usize];
        match list.binary_search_by(|e| e.order(&edge)) {
            Ok(_) => false,
            Err(pos) => {
                if list.iter().any(|e| e.target == edge.target) {
                    return false;
                }
                list.insert(pos, edge);
                true
            }
        }
    }

    /// Appends an edge that is known to sort after every existing edge of
    /// `source` and to be new.
    pub(crate) fn push_sorted(&mut self, source: NodeId, edge: Edge) {
        let list = &mut self.adjacency[source as usize];
        debug_assert!(list.last().map_or(true, |l| l.order(&edge) == Ordering::Less));
        debug_assert!(list.iter().all(|e| e.target != edge.target));
        list.push(edge);
    }

    /// Reverses every edge.
    pub fn transpose(&self) -> Graph {
        let mut out = vec![Vec::new(); self.len()];
        for (source, list) in self.adjacency.iter().enumerate() {
            for e in list {
                out[e.target as usize].push(Edge::new(source as NodeId, e.length));
            }
        }
        for list in &mut out {
            list.sort_by(Edge::order);
        }
        Graph { adjacency: out }
    }

    /// Keeps each node's `k` shortest edges.
    pub fn truncated(&self, k: usize) -> Graph {
        Graph {
            adjacency: self
                .adjacency
                .iter()
                .map(|l| l[..l.len().min(k)].to_vec())
                .collect(),
        }
    }

    pub fn adjacency(&self) -> &[Vec<Edge>] {
        &self.adjacency
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        for (source, list) in self.adjacency.iter().enumerate() {
            for (i, e) in list.iter().enumerate() {
                if e.target as usize >= len {
                    return Err(Error::NodeOutOfRange { id: e.target, len });
                }
                if e.target as usize == source {
                    return Err(Error::SelfLoop(e.target));
                }
                if !(e.length >= 0.0 && e.length.is_finite()) {
                    return Err(Error::Invariant(format!(
                        "edge {source}->{} has length {}",
                        e.target, e.length
                    )));
                }
                if i > 0 && list[i - 1].order(e) != Ordering::Less {
                    return Err(Error::Invariant(format!(
                        "adjacency of node {source} is not strictly sorted at position {i}"
                    )));
                }
            }
            let mut targets: Vec<NodeId> = list.iter().map(|e| e.target).collect();
            targets.sort_unstable();
            if targets.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invariant(format!(
                    "duplicate target in adjacency of node {source}"
                )));
            }
        }
        Ok(())
    }

    /// Checks stored lengths against the dataset within relative `tol`.
    pub fn validate_lengths(&self, dataset: &Dataset, tol: f64) -> Result<()> {
        if dataset.len() != self.len() {
            return Err(Error::Invariant(format!(
                "graph has {} nodes but dataset has {}",
                self.len(),
                dataset.len()
            )));
        }
        for (source, list) in self.adjacency.iter().enumerate() {
            for e in list {
                let d = dataset.distance(source as NodeId, e.target);
                if (d - e.length as f64).abs() > tol * d.max(1e-12) && (d - e.length as f64).abs() > 1e-6 {
                    return Err(Error::Invariant(format!(
                        "edge {source}->{} stores {} but distance is {d}",
                        e.target, e.length
                    )));
                }
            }
        }
        Ok(())
    }

    /// Degree and edge-length statistics.
    pub fn stats(&self) -> Result<GraphStats> {
        if self.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let n = self.len();
        let tail = (n as f64 * 0.05).ceil().max(1.0) as usize;

        let mut out: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        let mean_top5_outdegree = out[..tail].iter().sum::<usize>() as f64 / tail as f64;

        let mut inn = self.indegrees();
        inn.sort_unstable();
        let mean_bottom5_indegree = inn[..tail].iter().sum::<usize>() as f64 / tail as f64;

        let incoming = self.transpose().truncated(10);
        let (sum, count) = incoming
            .adjacency
            .iter()
            .flatten()
            .fold((0.0f64, 0usize), |(s, c), e| (s + e.length as f64, c + 1));
        let mean_indegree_distance = if count == 0 { 0.0 } else { sum / count as f64 };

        Ok(GraphStats {
            mean_top5_outdegree,
            mean_bottom5_indegree,
            mean_indegree_distance,
            mean_outdegree: self.mean_outdegree(),
        })
    }
}

/// Degree statistics of a graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphStats {
    /// Mean outdegree of the 5% of nodes with the highest outdegree.
    pub mean_top5_outdegree: f64,
    /// Mean indegree of the 5% of nodes with the lowest indegree.
    pub mean_bottom5_indegree: f64,
    /// Mean length of each node's (at most) 10 shortest incoming edges.
    pub mean_indegree_distance: f64,
    pub mean_outdegree: f64,
}
