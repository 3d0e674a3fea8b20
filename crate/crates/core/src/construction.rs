//! Graph construction: incremental ANNG, degree adjustment (plain and
//! constrained), path adjustment and the combined pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::search::{SearchParams, Searcher, DEFAULT_RANDOM_SEEDS};
use crate::NodeId;

/// Builds an approximate neighborhood graph by inserting vectors in order.
///
/// Each new vector searches the graph built so far for its `kc` nearest
/// nodes (random seeds, no edge limit) and is linked to them in both
/// directions. Early nodes keep however many neighbors existed when they were
/// inserted.
pub fn construct_anng(dataset: &Dataset, kc: usize, epsilon_c: f64, rng_seed: u64) -> Result<Graph> {
    construct_anng_observed(dataset, kc, epsilon_c, rng_seed, |_, _, _| {})
}

/// [`construct_anng`] with a callback receiving each inserted node and the
/// neighbors its search returned.
pub fn construct_anng_observed<F>(
    dataset: &Dataset,
    kc: usize,
    epsilon_c: f64,
    rng_seed: u64,
    mut observe: F,
) -> Result<Graph>
where
    F: FnMut(&Graph, NodeId, &[NodeId]),
{
    if kc == 0 {
        return Err(Error::InvalidParameter("kc must be at least 1".into()));
    }
    let n = dataset.len();
    let mut graph = Graph::new(n);
    let mut searcher = Searcher::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let params = SearchParams::new(kc, epsilon_c);
    let mut found: Vec<NodeId> = Vec::with_capacity(kc);

    for o in 1..n as NodeId {
        let inserted = o as usize;
        let count = DEFAULT_RANDOM_SEEDS.min(inserted);
        let seeds: Vec<NodeId> = rand::seq::index::sample(&mut rng, inserted, count)
            .into_iter()
            .map(|i| i as NodeId)
            .collect();
        let q = dataset.vector(o);
        let res = searcher.search_by(&graph, &seeds, &params, |id| dataset.distance_to(q, id))?;
        found.clear();
        for hit in &res.hits {
            let length = hit.distance as f32;
            graph.insert_sorted(o, Edge::new(hit.id, length));
            graph.insert_sorted(hit.id, Edge::new(o, length));
            found.push(hit.id);
        }
        observe(&graph, o, &found);
    }
    Ok(graph)
}

/// Static degree adjustment.
///
/// For every node the first `max(eo, ei)` edges are scanned in ascending
/// length order. The first `eo` are kept as outgoing edges and the first `ei`
/// are added reversed as incoming edges of the node.
pub fn construct_adjusted_graph(g: &Graph, eo: usize, ei: usize) -> Graph {
    let mut out = Graph::new(g.len());
    let scan = eo.max(ei);
    for o in 0..g.len() as NodeId {
        for (i, e) in g.neighbors(o).iter().take(scan).enumerate() {
            let p = i + 1;
            if p <= eo {
                out.insert_sorted(o, *e);
            }
            if p <= ei {
                out.insert_sorted(e.target, Edge::new(o, e.length));
            }
        }
    }
    out
}

/// Result of the first (constraint) phase of constrained adjustment.
#[derive(Debug, Clone)]
pub struct ConstrainedPhase {
    pub graph: Graph,
    /// Per node, how many of its outgoing edges were added only because the
    /// target had no incoming edge yet.
    pub rescued: Vec<usize>,
}

/// First phase of constrained degree adjustment.
///
/// Nodes of the transposed graph are processed by ascending outdegree. An
/// edge `o -> n` is taken if `n` has no incoming edge yet, or if `n` has fewer
/// than `ei` incoming and `o` fewer than `eo` outgoing edges.
pub fn constrained_phase(g: &Graph, eo: usize, ei: usize) -> ConstrainedPhase {
    let n = g.len();
    let transposed = construct_adjusted_graph(g, 0, ei);
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    order.sort_by_key(|&x| (transposed.outdegree(x), x));

    let mut graph = Graph::new(n);
    let mut indegree = vec![0usize; n];
    let mut rescued = vec![0usize; n];
    for o in order {
        for e in transposed.neighbors(o) {
            let t = e.target as usize;
            let empty = indegree[t] == 0;
            let fits = indegree[t] < ei && graph.outdegree(o) < eo;
            if empty || fits {
                if empty && !fits {
                    rescued[o as usize] += 1;
                }
                graph.push_sorted(o, *e);
                indegree[t] += 1;
            }
        }
    }
    ConstrainedPhase { graph, rescued }
}

/// Static degree adjustment with constraints: [`constrained_phase`], then
/// every node is refilled from its original shortest edges up to `eo`.
pub fn construct_adjusted_graph_with_constraint(g: &Graph, eo: usize, ei: usize) -> Result<Graph> {
    if eo == 0 || ei == 0 {
        return Err(Error::InvalidParameter(
            "constrained adjustment needs eo >= 1 and ei >= 1".into(),
        ));
    }
    let mut out = constrained_phase(g, eo, ei).graph;
    for o in 0..g.len() as NodeId {
        for e in g.neighbors(o) {
            if out.outdegree(o) >= eo {
                break;
            }
            out.insert_sorted(o, *e);
        }
    }
    Ok(out)
}

/// Returns a node `w` with `ns -> w` and `w -> nd` in `g` where
/// `d(w, nd) < direct`, the length of `ns -> nd`.
pub fn find_alternative_path(g: &Graph, ns: NodeId, nd: NodeId, direct: f32) -> Option<NodeId> {
    g.neighbors(ns)
        .iter()
        .find(|w| {
            g.neighbors(w.target)
                .iter()
                .take_while(|e| e.length < direct)
                .any(|e| e.target == nd)
        })
        .map(|w| w.target)
}

/// Whether `ns -> nd` (of length `direct`) can be replaced by a two-edge
/// path whose second leg is shorter than `direct`.
pub fn has_path(g: &Graph, ns: NodeId, nd: NodeId, direct: f32) -> bool {
    find_alternative_path(g, ns, nd, direct).is_some()
}

/// An edge dropped by path adjustment together with the intermediate node
/// that justified it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub source: NodeId,
    pub target: NodeId,
    pub length: f32,
    pub witness: NodeId,
}

/// Path adjustment: drops edges that have a two-edge detour.
///
/// Edges are examined in rounds. In each round every node with unprocessed
/// edges, in ascending id order, offers its shortest unprocessed edge, which
/// is kept unless the graph built so far already holds an alternative path.
pub fn adjust_path(g: &Graph) -> Graph {
    adjust_path_traced(g).0
}

pub fn adjust_path_traced(g: &Graph) -> (Graph, Vec<Removal>) {
    let n = g.len();
    let mut out = Graph::new(n);
    let mut removed = Vec::new();
    let mut cursor = vec![0usize; n];
    let mut active: Vec<NodeId> = (0..n as NodeId).filter(|&v| g.outdegree(v) > 0).collect();

    while !active.is_empty() {
        for &v in &active {
            let e = g.neighbors(v)[cursor[v as usize]];
            match find_alternative_path(&out, v, e.target, e.length) {
                None => out.push_sorted(v, e),
                Some(witness) => removed.push(Removal {
                    source: v,
                    target: e.target,
                    length: e.length,
                    witness,
                }),
            }
            cursor[v as usize] += 1;
        }
        active.retain(|&v| cursor[v as usize] < g.outdegree(v));
    }
    (out, removed)
}

/// Parameters of the full construction pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructionParams {
    /// Edges per node kept from the ANNG.
    pub kc: usize,
    pub epsilon_c: f64,
    /// Expected outdegree.
    pub eo: usize,
    /// Expected indegree.
    pub ei: usize,
    pub constrained: bool,
    pub path_adjustment: bool,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        ConstructionParams {
            kc: 50,
            epsilon_c: 0.1,
            eo: 10,
            ei: 40,
            constrained: false,
            path_adjustment: true,
        }
    }
}

impl ConstructionParams {
    pub fn validate(&self) -> Result<()> {
        if self.kc <= self.eo.max(self.ei) {
            return Err(Error::InvalidParameter(format!(
                "kc ({}) must exceed both eo ({}) and ei ({})",
                self.kc, self.eo, self.ei
            )));
        }
        if self.constrained && (self.eo == 0 || self.ei == 0) {
            return Err(Error::InvalidParameter(
                "constrained adjustment needs eo >= 1 and ei >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Intermediate and final graphs of [`construct_graph`].
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub aknng: Graph,
    pub adjusted: Graph,
    pub graph: Graph,
}

/// Truncates the ANNG to `kc` edges, applies degree adjustment and then path
/// adjustment.
pub fn construct_graph(anng: &Graph, params: &ConstructionParams) -> Result<Pipeline> {
    params.validate()?;
    let aknng = construct_adjusted_graph(anng, params.kc, 0);
    let (adjusted, graph) = adjust_from_aknng(&aknng, params)?;
    Ok(Pipeline {
        aknng,
        adjusted,
        graph,
    })
}

/// Degree adjustment plus optional path adjustment on an existing AKNNG.
/// Returns the degree-adjusted graph and the final graph.
pub fn adjust_from_aknng(aknng: &Graph, params: &ConstructionParams) -> Result<(Graph, Graph)> {
    let adjusted = if params.constrained {
        construct_adjusted_graph_with_constraint(aknng, params.eo, params.ei)?
    } else {
        construct_adjusted_graph(aknng, params.eo, params.ei)
    };
    let graph = if params.path_adjustment {
        adjust_path(&adjusted)
    } else {
        adjusted.clone()
    };
    Ok((adjusted, graph))
}
