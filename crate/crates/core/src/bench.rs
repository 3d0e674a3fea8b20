//! Exact ground truth, recall, and precision/computation sweeps.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::construction::{construct_anng, construct_graph, ConstructionParams};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optimizer::{epsilon_for_precision, Endpoint, GraphEvaluator};
use crate::search::{EdgeLimit, Hit, SearchConfig, Searcher, Seeding};
use crate::vptree::VpTree;
use crate::NodeId;

/// Default number of results per query.
pub const DEFAULT_K: usize = 20;
/// Ground-truth depth computed by default.
pub const DEFAULT_TRUTH_DEPTH: usize = 100;
const TIMING_REPETITIONS: usize = 3;

/// Exact `k` nearest neighbors by full scan, ties broken by id.
pub fn brute_force_knn(dataset: &Dataset, q: &[f32], k: usize) -> Result<Vec<Hit>> {
    dataset.check_query(q)?;
    if k > dataset.len() {
        return Err(Error::NotEnoughNodes {
            requested: k,
            available: dataset.len(),
        });
    }
    let mut all: Vec<Hit> = (0..dataset.len() as NodeId)
        .map(|id| Hit {
            id,
            distance: dataset.distance_to(q, id),
        })
        .collect();
    let cmp = |a: &Hit, b: &Hit| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id));
    if k < all.len() && k > 0 {
        all.select_nth_unstable_by(k - 1, cmp);
    }
    all.truncate(k);
    all.sort_by(cmp);
    Ok(all)
}

/// Exact neighbor lists, one per query, sorted ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    lists: Vec<Vec<Hit>>,
}

impl GroundTruth {
    /// Computes `depth` exact neighbors per query, in parallel over queries.
    pub fn compute(dataset: &Dataset, queries: &Dataset, depth: usize) -> Result<Self> {
        let depth = depth.min(dataset.len());
        let lists = (0..queries.len() as NodeId)
            .into_par_iter()
            .map(|i| brute_force_knn(dataset, queries.vector(i), depth))
            .collect::<Result<_>>()?;
        Ok(GroundTruth { lists })
    }

    /// Rebuilds distances for id lists read from disk.
    pub fn from_ids(dataset: &Dataset, queries: &Dataset, ids: &[Vec<NodeId>]) -> Result<Self> {
        if ids.len() != queries.len() {
            return Err(Error::Format(format!(
                "{} ground-truth lists for {} queries",
                ids.len(),
                queries.len()
            )));
        }
        let lists = ids
            .iter()
            .enumerate()
            .map(|(i, list)| {
                list.iter()
                    .map(|&id| {
                        dataset.check_id(id)?;
                        Ok(Hit {
                            id,
                            distance: dataset.distance_to(queries.vector(i as NodeId), id),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(GroundTruth { lists })
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn list(&self, query: usize) -> &[Hit] {
        &self.lists[query]
    }

    pub fn ids(&self) -> Vec<Vec<NodeId>> {
        self.lists
            .iter()
            .map(|l| l.iter().map(|h| h.id).collect())
            .collect()
    }

    /// Shortest list length.
    pub fn depth(&self) -> usize {
        self.lists.iter().map(Vec::len).min().unwrap_or(0)
    }
}

/// Fraction of the first `k` true neighbors found among the first `k` hits.
pub fn recall(hits: &[Hit], truth: &[Hit], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let truth = &truth[..truth.len().min(k)];
    let found = hits
        .iter()
        .take(k)
        .filter(|h| truth.iter().any(|t| t.id == h.id))
        .count();
    found as f64 / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub precision: f64,
    pub mean_computations: f64,
    pub mean_query_seconds: f64,
}

/// Precision/computation trade-off of one graph, ordered by epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl EvalCurve {
    /// Mean computations at `precision`, linearly interpolated between the
    /// first pair of adjacent points that brackets it.
    pub fn computations_at(&self, precision: f64) -> Option<f64> {
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (lo, hi) = if a.precision <= b.precision { (a, b) } else { (b, a) };
            if lo.precision <= precision && precision <= hi.precision {
                if hi.precision == lo.precision {
                    return Some(lo.mean_computations.min(hi.mean_computations));
                }
                let t = (precision - lo.precision) / (hi.precision - lo.precision);
                return Some(lo.mean_computations + t * (hi.mean_computations - lo.mean_computations));
            }
        }
        self.points
            .iter()
            .find(|p| p.precision == precision)
            .map(|p| p.mean_computations)
    }

    /// Mean computations needed to reach at least `precision`: the
    /// interpolated value inside the measured range, the cheapest point when
    /// every point already exceeds it, `None` when no point reaches it.
    pub fn computations_reaching(&self, precision: f64) -> Option<f64> {
        self.computations_at(precision).or_else(|| {
            self.points
                .iter()
                .filter(|p| p.precision >= precision)
                .map(|p| p.mean_computations)
                .min_by(f64::total_cmp)
        })
    }

    pub fn max_precision(&self) -> f64 {
        self.points.iter().map(|p| p.precision).fold(0.0, f64::max)
    }
}

/// Writes `graph_label,epsilon,precision,mean_computations,mean_query_us`
/// rows for every curve, with a header.
pub fn write_curves_csv<W: Write>(mut w: W, curves: &[EvalCurve]) -> Result<()> {
    writeln!(w, "graph_label,epsilon,precision,mean_computations,mean_query_us")?;
    for c in curves {
        for p in &c.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                c.label,
                p.epsilon,
                p.precision,
                p.mean_computations,
                p.mean_query_seconds * 1e6
            )?;
        }
    }
    Ok(())
}

/// Runs the query batch at each epsilon on a single thread. Counts come from
/// the first pass; the reported time is the median of three passes.
pub fn sweep(
    graph: &Graph,
    dataset: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
    epsilons: &[f64],
    search: &SearchConfig<'_>,
    label: &str,
) -> Result<EvalCurve> {
    if epsilons.is_empty() {
        return Err(Error::InvalidParameter("no epsilon values".into()));
    }
    if queries.is_empty() {
        return Err(Error::EmptyQueries);
    }
    if truth.len() != queries.len() {
        return Err(Error::InvalidParameter("query and ground-truth counts differ".into()));
    }
    let mut epsilons = epsilons.to_vec();
    epsilons.sort_by(f64::total_cmp);
    let mut searcher = Searcher::new(graph.len());
    let nq = queries.len();
    let mut points = Vec::with_capacity(epsilons.len());
    for eps in epsilons {
        let mut times = Vec::with_capacity(TIMING_REPETITIONS);
        let mut precision = 0.0;
        let mut computations = 0usize;
        for rep in 0..TIMING_REPETITIONS {
            let start = Instant::now();
            for i in 0..nq {
                let res = searcher.query(graph, dataset, queries.vector(i as NodeId), i as u64, eps, search)?;
                if rep == 0 {
                    precision += recall(&res.hits, truth.list(i), search.k);
                    computations += res.distance_computations;
                }
            }
            times.push(start.elapsed().as_secs_f64() / nq as f64);
        }
        times.sort_by(f64::total_cmp);
        points.push(CurvePoint {
            epsilon: eps,
            precision: precision / nq as f64,
            mean_computations: computations as f64 / nq as f64,
            mean_query_seconds: times[times.len() / 2],
        });
    }
    Ok(EvalCurve {
        label: label.to_string(),
        points,
    })
}

/// Settings for [`scaling_study`].
#[derive(Debug, Clone, Copy)]
pub struct ScalingConfig {
    pub construction: ConstructionParams,
    pub k: usize,
    pub edge_limit: EdgeLimit,
    pub target_recall: f64,
    pub tolerance: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub epsilon: f64,
    pub precision: f64,
    pub mean_computations: f64,
    pub mean_outdegree: f64,
}

/// For each size, builds the full pipeline on the first `n` vectors and
/// records the mean computations needed to reach the target recall.
pub fn scaling_study(
    base: &Dataset,
    queries: &Dataset,
    sizes: &[usize],
    config: &ScalingConfig,
) -> Result<Vec<ScalingRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sizes must be strictly ascending".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n > base.len() || n == 0 {
            return Err(Error::NotEnoughNodes {
                requested: n,
                available: base.len(),
            });
        }
        let data = base.prefix(n);
        let anng = construct_anng(&data, config.construction.kc, config.construction.epsilon_c, config.rng_seed)?;
        let pipeline = construct_graph(&anng, &config.construction)?;
        let tree = VpTree::build(&data, config.rng_seed)?;
        let truth = GroundTruth::compute(&data, queries, config.k)?;
        let eval = GraphEvaluator {
            graph: &pipeline.graph,
            dataset: &data,
            queries,
            truth: &truth,
            search: SearchConfig {
                k: config.k,
                edge_limit: config.edge_limit,
                seeding: Seeding::Tree(&tree),
            },
        };
        let m = epsilon_for_precision(&eval, config.target_recall, config.tolerance, Endpoint::Upper)?;
        rows.push(ScalingRow {
            n,
            epsilon: m.epsilon,
            precision: m.precision,
            mean_computations: m.mean_computations,
            mean_outdegree: pipeline.graph.mean_outdegree(),
        });
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(mut w: W, rows: &[ScalingRow]) -> Result<()> {
    writeln!(w, "n,epsilon,precision,mean_computations,mean_outdegree")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.n, r.epsilon, r.precision, r.mean_computations, r.mean_outdegree
        )?;
    }
    Ok(())
}

/// Rough in-memory footprint of vectors plus edges, in bytes.
pub fn estimate_memory_bytes(graph: &Graph, dataset: &Dataset) -> usize {
    dataset.as_flat().len() * 4 + graph.edge_count() * 8 + graph.len() * std::mem::size_of::<Vec<u8>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Metric;

    fn hit(id: NodeId) -> Hit {
        Hit { id, distance: 0.0 }
    }

    #[test]
    fn brute_force_small() {
        let ds = Dataset::from_rows(2, Metric::Euclidean, &[[0.0f32, 0.0], [1.0, 0.0], [5.0, 0.0]]).unwrap();
        let hits = brute_force_knn(&ds, &[0.9, 0.0], 2).unwrap();
        assert_eq!(hits.iter().map(|h| h.id).collect::<Vec<_>>(), vec![1, 0]);
        let all = brute_force_knn(&ds, &[0.9, 0.0], 3).unwrap();
        assert_eq!(all.iter().map(|h| h.id).collect::<Vec<_>>(), vec![1, 0, 2]);
        assert!(matches!(brute_force_knn(&ds, &[0.0, 0.0], 4), Err(Error::NotEnoughNodes { .. })));
    }

    #[test]
    fn recall_examples() {
        let truth: Vec<Hit> = (0..20).map(hit).collect();
        assert_eq!(recall(&truth, &truth, 20), 1.0);
        let disjoint: Vec<Hit> = (100..120).map(hit).collect();
        assert_eq!(recall(&disjoint, &truth, 20), 0.0);
        let half: Vec<Hit> = (10..30).map(hit).collect();
        assert_eq!(recall(&half, &truth, 20), 0.5);
    }

    #[test]
    fn interpolation() {
        let mk = |p, c| CurvePoint {
            epsilon: 0.0,
            precision: p,
            mean_computations: c,
            mean_query_seconds: 0.0,
        };
        let curve = EvalCurve {
            label: "x".into(),
            points: vec![mk(0.5, 100.0), mk(0.8, 200.0), mk(1.0, 400.0)],
        };
        assert_eq!(curve.computations_at(0.65), Some(150.0));
        assert_eq!(curve.computations_at(0.9), Some(300.0));
        assert_eq!(curve.computations_at(0.4), None);
        assert_eq!(curve.computations_reaching(0.4), Some(100.0));
        assert_eq!(curve.computations_reaching(0.65), Some(150.0));
        assert_eq!(curve.computations_reaching(1.01), None);
    }

    #[test]
    fn csv_header_and_rows() {
        let curve = EvalCurve {
            label: "da".into(),
            points: vec![CurvePoint {
                epsilon: 0.1,
                precision: 0.5,
                mean_computations: 1234.5,
                mean_query_seconds: 0.000002,
            }],
        };
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[curve]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "graph_label,epsilon,precision,mean_computations,mean_query_us");
        assert!(lines[1].starts_with("da,0.1,0.5,1234.5,"));
    }
}
