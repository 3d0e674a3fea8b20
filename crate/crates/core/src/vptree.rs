//! Vantage-point tree used only to pick seed nodes near a query.
//!
//! Internal nodes split their members at the median distance to a randomly
//! chosen pivot. Leaves keep up to [`LEAF_CAPACITY`] members and cache the
//! [`SEEDS_PER_LEAF`] members nearest to the leaf's own pivot.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::NodeId;

pub const LEAF_CAPACITY: usize = 100;
pub const SEEDS_PER_LEAF: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum VpNode {
    Internal {
        pivot: NodeId,
        radius: f64,
        inner: u32,
        outer: u32,
    },
    Leaf {
        pivot: NodeId,
        members: Vec<NodeId>,
        seeds: Vec<NodeId>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VpTree {
    nodes: Vec<VpNode>,
    root: u32,
}

struct Builder<'a> {
    dataset: &'a Dataset,
    leaf_capacity: usize,
    seed_count: usize,
    rng: ChaCha8Rng,
    nodes: Vec<VpNode>,
}

impl Builder<'_> {
    fn build(&mut self, mut members: Vec<NodeId>) -> u32 {
        let pivot = *members.choose(&mut self.rng).expect("non-empty partition");
        let mut by_dist: Vec<(f64, NodeId)> = members
            .iter()
            .map(|&m| (self.dataset.distance(pivot, m), m))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        if members.len() <= self.leaf_capacity {
            members.sort_unstable();
            let seeds = by_dist.iter().take(self.seed_count).map(|&(_, id)| id).collect();
            return self.push(VpNode::Leaf {
                pivot,
                members,
                seeds,
            });
        }

        let split = split_point(&by_dist);
        let radius = by_dist[split - 1].0;
        let inner_ids: Vec<NodeId> = by_dist[..split].iter().map(|&(_, id)| id).collect();
        let outer_ids: Vec<NodeId> = by_dist[split..].iter().map(|&(_, id)| id).collect();
        drop(members);

        let slot = self.push(VpNode::Internal {
            pivot,
            radius,
            inner: 0,
            outer: 0,
        });
        let inner = self.build(inner_ids);
        let outer = self.build(outer_ids);
        if let VpNode::Internal {
            inner: i, outer: o, ..
        } = &mut self.nodes[slot as usize]
        {
            *i = inner;
            *o = outer;
        }
        slot
    }

    fn push(&mut self, node: VpNode) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }
}

/// Median split that keeps every member at exactly the radius on the inner
/// side, so routing a member's own vector leads back to its leaf. Falls back
/// to a plain positional split when all distances coincide.
fn split_point(sorted: &[(f64, NodeId)]) -> usize {
    let n = sorted.len();
    let mid = n.div_ceil(2);
    let radius = sorted[mid - 1].0;
    let upper = sorted.partition_point(|&(d, _)| d <= radius);
    if upper < n {
        return upper;
    }
    let lower = sorted.partition_point(|&(d, _)| d < radius);
    if lower > 0 {
        lower
    } else {
        mid
    }
}

/// Seeds for one query and the pivot distances spent finding them.
#[derive(Debug, Clone, Copy)]
pub struct TreeSeeds<'a> {
    pub ids: &'a [NodeId],
    pub computations: usize,
}

impl VpTree {
    pub fn build(dataset: &Dataset, rng_seed: u64) -> Result<VpTree> {
        Self::build_with(dataset, LEAF_CAPACITY, SEEDS_PER_LEAF, rng_seed)
    }

    pub fn build_with(
        dataset: &Dataset,
        leaf_capacity: usize,
        seed_count: usize,
        rng_seed: u64,
    ) -> Result<VpTree> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if leaf_capacity < 2 || seed_count == 0 {
            return Err(Error::InvalidParameter(
                "leaf capacity must be at least 2 and seed count positive".into(),
            ));
        }
        let mut b = Builder {
            dataset,
            leaf_capacity,
            seed_count,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            nodes: Vec::new(),
        };
        let root = b.build((0..dataset.len() as NodeId).collect());
        Ok(VpTree {
            nodes: b.nodes,
            root,
        })
    }

    /// Reassembles a tree from its node arena, checking references.
    pub fn from_nodes(nodes: Vec<VpNode>, root: u32, n_points: usize) -> Result<VpTree> {
        let bad = |msg: String| Error::Format(format!("vp-tree: {msg}"));
        if nodes.is_empty() || root as usize >= nodes.len() {
            return Err(bad("missing root".into()));
        }
        let mut seen = vec![false; n_points];
        for (i, node) in nodes.iter().enumerate() {
            match node {
                VpNode::Internal {
                    pivot,
                    radius,
                    inner,
                    outer,
                } => {
                    if *pivot as usize >= n_points || radius.is_nan() {
                        return Err(bad(format!("node {i} has invalid pivot or radius")));
                    }
                    for c in [*inner, *outer] {
                        if c as usize >= nodes.len() || c as usize <= i {
                            return Err(bad(format!("node {i} has invalid child {c}")));
                        }
                    }
                }
                VpNode::Leaf {
                    pivot,
                    members,
                    seeds,
                } => {
                    if members.is_empty() || !members.contains(pivot) {
                        return Err(bad(format!("leaf {i} does not contain its pivot")));
                    }
                    for &m in members {
                        let slot = seen
                            .get_mut(m as usize)
                            .ok_or_else(|| bad(format!("leaf {i} member {m} out of range")))?;
                        if *slot {
                            return Err(bad(format!("member {m} appears in two leaves")));
                        }
                        *slot = true;
                    }
                    if seeds.iter().any(|s| !members.contains(s)) {
                        return Err(bad(format!("leaf {i} seeds are not members")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("not every point belongs to a leaf".into()));
        }
        Ok(VpTree { nodes, root })
    }

    pub fn nodes(&self) -> &[VpNode] {
        &self.nodes
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn leaves(&self) -> impl Iterator<Item = (NodeId, &[NodeId], &[NodeId])> {
        self.nodes.iter().filter_map(|n| match n {
            VpNode::Leaf {
                pivot,
                members,
                seeds,
            } => Some((*pivot, members.as_slice(), seeds.as_slice())),
            VpNode::Internal { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[VpNode], i: u32) -> usize {
            match &nodes[i as usize] {
                VpNode::Leaf { .. } => 0,
                VpNode::Internal { inner, outer, .. } => 1 + go(nodes, *inner).max(go(nodes, *outer)),
            }
        }
        go(&self.nodes, self.root)
    }

    /// Routes `q` to a leaf and returns its cached seeds. One distance is
    /// computed per internal node on the path.
    pub fn seeds<'a>(&'a self, dataset: &Dataset, q: &[f32]) -> TreeSeeds<'a> {
        let mut at = self.root;
        let mut computations = 0;
        loop {
            match &self.nodes[at as usize] {
                VpNode::Internal {
                    pivot,
                    radius,
                    inner,
                    outer,
                } => {
                    computations += 1;
                    at = if dataset.distance_to(q, *pivot) <= *radius {
                        *inner
                    } else {
                        *outer
                    };
                }
                VpNode::Leaf { seeds, .. } => {
                    return TreeSeeds {
                        ids: seeds,
                        computations,
                    }
                }
            }
        }
    }
}
