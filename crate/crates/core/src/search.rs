//! Best-first k-nearest-neighbor search over a neighborhood graph.
//!
//! Exploration starts from a set of seed nodes and expands the closest
//! frontier node first. A node is expanded only while its distance to the
//! query is within `r * (1 + epsilon)`, where `r` is the distance of the
//! current k-th best result. Edge lengths are stored, so scanning a node's
//! neighbors in edge order costs no distance computation; only query
//! distances are counted.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::visited::VisitedSet;
use crate::vptree::VpTree;
use crate::NodeId;

/// Default number of random seeds per query.
pub const DEFAULT_RANDOM_SEEDS: usize = 10;

/// Number of neighbors scanned per expanded node under dynamic degree
/// adjustment: `10^(we * epsilon) + e0`.
pub fn effective_edge_limit(epsilon: f64, e0: u32, we: f64) -> f64 {
    10f64.powf(we * epsilon) + e0 as f64
}

/// Parameters of the dynamic per-node edge limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicDegree {
    pub e0: u32,
    pub we: f64,
}

impl Default for DynamicDegree {
    fn default() -> Self {
        DynamicDegree { e0: 30, we: 20.0 }
    }
}

/// How many neighbors of an expanded node are examined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EdgeLimit {
    #[default]
    Unbounded,
    Fixed(usize),
    Dynamic(DynamicDegree),
}

impl EdgeLimit {
    pub fn resolve(&self, epsilon: f64) -> f64 {
        match *self {
            EdgeLimit::Unbounded => f64::INFINITY,
            EdgeLimit::Fixed(n) => n as f64,
            EdgeLimit::Dynamic(d) => effective_edge_limit(epsilon, d.e0, d.we),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub k: usize,
    pub epsilon: f64,
    pub edge_limit: EdgeLimit,
}

impl SearchParams {
    pub fn new(k: usize, epsilon: f64) -> Self {
        SearchParams {
            k,
            epsilon,
            edge_limit: EdgeLimit::Unbounded,
        }
    }

    pub fn with_edge_limit(mut self, edge_limit: EdgeLimit) -> Self {
        self.edge_limit = edge_limit;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} < 0", self.epsilon)));
        }
        match self.edge_limit {
            EdgeLimit::Fixed(0) => Err(Error::InvalidParameter("edge limit must be positive".into())),
            EdgeLimit::Dynamic(d) if !(d.we > 0.0) => {
                Err(Error::InvalidParameter(format!("we {} must be positive", d.we)))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: NodeId,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchResult {
    /// Ascending by distance, then id.
    pub hits: Vec<Hit>,
    pub distance_computations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    id: NodeId,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

#[inline]
fn exploration_radius(r: f64, epsilon: f64) -> f64 {
    if r.is_infinite() || epsilon.is_infinite() {
        f64::INFINITY
    } else {
        r * (1.0 + epsilon)
    }
}

/// Reusable per-query scratch space. Not shared between threads.
#[derive(Debug)]
pub struct Searcher {
    visited: VisitedSet,
    nodes: usize,
    frontier: BinaryHeap<Reverse<Candidate>>,
    results: BinaryHeap<Candidate>,
}

impl Searcher {
    pub fn new(nodes: usize) -> Self {
        Searcher {
            visited: VisitedSet::for_nodes(nodes),
            nodes,
            frontier: BinaryHeap::new(),
            results: BinaryHeap::new(),
        }
    }

    fn prepare(&mut self, nodes: usize) {
        if crate::visited::hash_size(nodes, crate::visited::DEFAULT_HASH_BITS)
            != self.visited.table_size()
        {
            self.visited = VisitedSet::for_nodes(nodes);
        } else {
            self.visited.clear();
        }
        self.nodes = nodes;
        self.frontier.clear();
        self.results.clear();
    }

    /// Searches `graph` for the `k` nearest vectors of `dataset` to `q`.
    pub fn search(
        &mut self,
        graph: &Graph,
        dataset: &Dataset,
        seeds: &[NodeId],
        q: &[f32],
        params: &SearchParams,
    ) -> Result<SearchResult> {
        dataset.check_query(q)?;
        if dataset.len() != graph.len() {
            return Err(Error::Invariant(format!(
                "graph has {} nodes but dataset has {}",
                graph.len(),
                dataset.len()
            )));
        }
        self.search_by(graph, seeds, params, |id| dataset.distance_to(q, id))
    }

    /// Same as [`Searcher::search`] with a caller-supplied query distance.
    /// `distance` is invoked exactly once per evaluated node.
    pub fn search_by<F>(
        &mut self,
        graph: &Graph,
        seeds: &[NodeId],
        params: &SearchParams,
        mut distance: F,
    ) -> Result<SearchResult>
    where
        F: FnMut(NodeId) -> f64,
    {
        params.validate()?;
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let n = graph.len();
        if let Some(&bad) = seeds.iter().find(|&&s| s as usize >= n) {
            return Err(Error::NodeOutOfRange { id: bad, len: n });
        }
        self.prepare(n);

        let k = params.k;
        let epsilon = params.epsilon;
        let limit = params.edge_limit.resolve(epsilon);
        let mut computations = 0usize;
        let mut r = f64::INFINITY;

        let results = &mut self.results;
        let mut admit = |c: Candidate, r: &mut f64| {
            if c.distance <= *r {
                results.push(c);
                if results.len() > k {
                    results.pop();
                }
                if results.len() == k {
                    *r = results.peek().map_or(f64::INFINITY, |w| w.distance);
                }
            }
        };

        for &s in seeds {
            if !self.visited.insert(s) {
                continue;
            }
            let c = Candidate {
                distance: distance(s),
                id: s,
            };
            computations += 1;
            self.frontier.push(Reverse(c));
            admit(c, &mut r);
        }

        while let Some(Reverse(s)) = self.frontier.pop() {
            if s.distance > exploration_radius(r, epsilon) {
                break;
            }
            let mut p = 1usize;
            for e in graph.neighbors(s.id) {
                if p as f64 > limit {
                    break;
                }
                if self.visited.insert(e.target) {
                    let c = Candidate {
                        distance: distance(e.target),
                        id: e.target,
                    };
                    computations += 1;
                    if c.distance <= exploration_radius(r, epsilon) {
                        self.frontier.push(Reverse(c));
                    }
                    admit(c, &mut r);
                }
                p += 1;
            }
        }

        let hits = std::mem::take(&mut self.results)
            .into_sorted_vec()
            .into_iter()
            .map(|c| Hit {
                id: c.id,
                distance: c.distance,
            })
            .collect();
        Ok(SearchResult {
            hits,
            distance_computations: computations,
        })
    }

    /// Runs one query with seeds drawn according to `config`. Distances spent
    /// on seeding (tree routing) are included in the count.
    pub fn query(
        &mut self,
        graph: &Graph,
        dataset: &Dataset,
        q: &[f32],
        query_index: u64,
        epsilon: f64,
        config: &SearchConfig<'_>,
    ) -> Result<SearchResult> {
        let params = SearchParams {
            k: config.k,
            epsilon,
            edge_limit: config.edge_limit,
        };
        match config.seeding {
            Seeding::Tree(tree) => {
                dataset.check_query(q)?;
                let seeds = tree.seeds(dataset, q);
                let mut res = self.search(graph, dataset, seeds.ids, q, &params)?;
                res.distance_computations += seeds.computations;
                Ok(res)
            }
            Seeding::Random { count, rng_seed } => {
                let seeds = seeds_random(
                    graph.len(),
                    count.min(graph.len()),
                    per_query_seed(rng_seed, query_index),
                )?;
                self.search(graph, dataset, &seeds, q, &params)
            }
        }
    }
}

fn per_query_seed(base: u64, query_index: u64) -> u64 {
    base ^ query_index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One-shot search with fresh scratch space.
pub fn knn_search(
    graph: &Graph,
    dataset: &Dataset,
    seeds: &[NodeId],
    q: &[f32],
    params: &SearchParams,
) -> Result<SearchResult> {
    Searcher::new(graph.len()).search(graph, dataset, seeds, q, params)
}

/// `count` distinct node ids drawn uniformly from `0..n`.
pub fn seeds_random(n: usize, count: usize, rng_seed: u64) -> Result<Vec<NodeId>> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if count > n {
        return Err(Error::NotEnoughNodes {
            requested: count,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(rand::seq::index::sample(&mut rng, n, count)
        .into_iter()
        .map(|i| i as NodeId)
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub enum Seeding<'a> {
    Tree(&'a VpTree),
    /// Fresh random seeds per query, derived from `rng_seed` and the query
    /// index.
    Random { count: usize, rng_seed: u64 },
}

/// Everything about a query except epsilon.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig<'a> {
    pub k: usize,
    pub edge_limit: EdgeLimit,
    pub seeding: Seeding<'a>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Metric;

    #[test]
    fn edge_limit_examples() {
        assert_eq!(effective_edge_limit(0.0, 30, 20.0), 31.0);
        assert!((effective_edge_limit(0.1, 30, 20.0) - 130.0).abs() < 1e-9);
        assert!((effective_edge_limit(0.05, 30, 20.0) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn edge_limit_is_increasing() {
        let mut prev = effective_edge_limit(0.0, 7, 3.0);
        assert_eq!(prev, 8.0);
        for i in 1..100 {
            let v = effective_edge_limit(i as f64 * 0.01, 7, 3.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn single_node_graph() {
        let ds = Dataset::from_rows(2, Metric::Euclidean, &[[1.0f32, 1.0]]).unwrap();
        let g = Graph::new(1);
        let res = knn_search(&g, &ds, &[0], &[4.0, 5.0], &SearchParams::new(1, 0.0)).unwrap();
        assert_eq!(res.hits, vec![Hit { id: 0, distance: 5.0 }]);
        assert_eq!(res.distance_computations, 1);
    }

    #[test]
    fn errors() {
        let ds = Dataset::from_rows(2, Metric::Euclidean, &[[1.0f32, 1.0]]).unwrap();
        let g = Graph::new(1);
        let p = SearchParams::new(1, 0.0);
        assert!(matches!(knn_search(&g, &ds, &[], &[0.0, 0.0], &p), Err(Error::EmptySeeds)));
        assert!(matches!(
            knn_search(&g, &ds, &[0], &[0.0], &p),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(knn_search(&g, &ds, &[0], &[0.0, 0.0], &SearchParams::new(0, 0.0)).is_err());
        assert!(knn_search(&g, &ds, &[3], &[0.0, 0.0], &p).is_err());
    }

    #[test]
    fn duplicate_seeds_are_evaluated_once() {
        let ds = Dataset::from_rows(1, Metric::Euclidean, &[[0.0f32], [1.0]]).unwrap();
        let mut g = Graph::new(2);
        g.insert_edge(&ds, 0, 1).unwrap();
        let res = knn_search(&g, &ds, &[0, 0, 0], &[0.2], &SearchParams::new(2, 0.0)).unwrap();
        assert_eq!(res.distance_computations, 2);
        assert_eq!(res.hits.len(), 2);
    }

    #[test]
    fn fixed_edge_limit_caps_scan() {
        // star: node 0 points at 1..=5
        let rows: Vec<[f32; 1]> = (0..6).map(|i| [i as f32]).collect();
        let ds = Dataset::from_rows(1, Metric::Euclidean, &rows).unwrap();
        let mut g = Graph::new(6);
        for t in 1..6 {
            g.insert_edge(&ds, 0, t).unwrap();
        }
        let p = SearchParams::new(6, f64::INFINITY).with_edge_limit(EdgeLimit::Fixed(2));
        let res = knn_search(&g, &ds, &[0], &[0.0], &p).unwrap();
        assert_eq!(res.distance_computations, 3);
        let ids: Vec<_> = res.hits.iter().map(|h| h.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn random_seeds() {
        let mut all = seeds_random(10, 10, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(seeds_random(1000, 10, 42).unwrap(), seeds_random(1000, 10, 42).unwrap());
        let mut s = seeds_random(1000, 10, 42).unwrap();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 10);
        assert!(matches!(seeds_random(5, 6, 0), Err(Error::NotEnoughNodes { .. })));
    }
}
