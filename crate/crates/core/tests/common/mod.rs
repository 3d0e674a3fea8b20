#![allow(dead_code)]

use onng::{Dataset, Graph, Metric, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn uniform(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.gen::<f32>()).collect();
    Dataset::from_flat(dim, Metric::Euclidean, data).unwrap()
}

/// Each node gets up to `degree` random distinct targets with true lengths.
pub fn random_graph(dataset: &Dataset, degree: usize, seed: u64) -> Graph {
    let n = dataset.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for s in 0..n as NodeId {
        let d = rng.gen_range(0..=degree.min(n - 1));
        for _ in 0..d {
            let t = rng.gen_range(0..n as NodeId);
            if t != s {
                g.insert_edge(dataset, s, t).unwrap();
            }
        }
    }
    g
}

/// Exact k-nearest-neighbor lists by sorting every distance.
pub fn sorted_neighbors(dataset: &Dataset, q: &[f32], k: usize, skip: Option<NodeId>) -> Vec<(f64, NodeId)> {
    let mut all: Vec<(f64, NodeId)> = (0..dataset.len() as NodeId)
        .filter(|&i| Some(i) != skip)
        .map(|i| {
            let v = dataset.vector(i);
            let d: f64 = q
                .iter()
                .zip(v)
                .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            (d, i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

pub fn exact_knng(dataset: &Dataset, k: usize) -> Graph {
    let mut g = Graph::new(dataset.len());
    for s in 0..dataset.len() as NodeId {
        for (_, t) in sorted_neighbors(dataset, dataset.vector(s), k, Some(s)) {
            g.insert_edge(dataset, s, t).unwrap();
        }
    }
    g
}

pub fn edge_set(g: &Graph) -> Vec<(NodeId, NodeId)> {
    let mut v: Vec<_> = (0..g.len() as NodeId)
        .flat_map(|s| g.neighbors(s).iter().map(move |e| (s, e.target)))
        .collect();
    v.sort_unstable();
    v
}
