//! Vector storage and distance metrics.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::NodeId;

/// Distance function over dense `f32` vectors. Distances are accumulated in
/// `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Euclidean,
    /// `arccos` of the cosine similarity, clamped to `[-1, 1]`.
    Angular,
}

impl Metric {
    pub fn id(self) -> u8 {
        match self {
            Metric::Euclidean => 0,
            Metric::Angular => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Metric> {
        match id {
            0 => Some(Metric::Euclidean),
            1 => Some(Metric::Angular),
            _ => None,
        }
    }

    /// Checked distance. Fails on dimension mismatch, or on a zero vector
    /// under the angular metric.
    pub fn distance(self, a: &[f32], b: &[f32]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        if self == Metric::Angular && (is_zero(a) || is_zero(b)) {
            return Err(Error::ZeroVector);
        }
        Ok(self.distance_unchecked(a, b))
    }

    /// Distance between two vectors already validated for this metric.
    #[inline]
    pub fn distance_unchecked(self, a: &[f32], b: &[f32]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = x as f64 - y as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Angular => {
                let mut dot = 0.0f64;
                let mut na = 0.0f64;
                let mut nb = 0.0f64;
                for (&x, &y) in a.iter().zip(b) {
                    let (x, y) = (x as f64, y as f64);
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                let cos = dot / (na.sqrt() * nb.sqrt());
                cos.clamp(-1.0, 1.0).acos()
            }
        }
    }

    /// Validates a single vector for use with this metric.
    pub fn validate(self, v: &[f32]) -> Result<()> {
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if self == Metric::Angular && is_zero(v) {
            return Err(Error::ZeroVector);
        }
        Ok(())
    }
}

fn is_zero(v: &[f32]) -> bool {
    v.iter().all(|&x| x == 0.0)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Angular => "angular",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "angular" | "cosine" => Ok(Metric::Angular),
            other => Err(Error::InvalidParameter(format!("unknown metric `{other}`"))),
        }
    }
}

/// Fixed-dimension vectors stored contiguously, addressed by dense `NodeId`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    metric: Metric,
    data: Vec<f32>,
}

impl Dataset {
    pub fn new(dim: usize, metric: Metric) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Dataset {
            dim,
            metric,
            data: Vec::new(),
        })
    }

    /// Builds a dataset from a flat row-major buffer.
    pub fn from_flat(dim: usize, metric: Metric, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if data.len() % dim != 0 {
            return Err(Error::Format(format!(
                "buffer of {} floats is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        for row in data.chunks_exact(dim) {
            metric.validate(row)?;
        }
        Ok(Dataset { dim, metric, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, metric: Metric, rows: &[R]) -> Result<Self> {
        let mut ds = Dataset::new(dim, metric)?;
        for row in rows {
            ds.push(row.as_ref())?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, v: &[f32]) -> Result<NodeId> {
        self.check_query(v)?;
        let id = self.len();
        if id >= NodeId::MAX as usize {
            return Err(Error::InvalidParameter("too many vectors".into()));
        }
        self.data.extend_from_slice(v);
        Ok(id as NodeId)
    }

    /// Checks that `q` can be compared against this dataset.
    pub fn check_query(&self, q: &[f32]) -> Result<()> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.len(),
            });
        }
        self.metric.validate(q)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Panics if `id` is out of range.
    #[inline]
    pub fn vector(&self, id: NodeId) -> &[f32] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    #[inline]
    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.metric.distance_unchecked(self.vector(a), self.vector(b))
    }

    #[inline]
    pub fn distance_to(&self, q: &[f32], id: NodeId) -> f64 {
        self.metric.distance_unchecked(q, self.vector(id))
    }

    /// The first `n` vectors as a new dataset.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            dim: self.dim,
            metric: self.metric,
            data: self.data[..n * self.dim].to_vec(),
        }
    }

    pub fn check_id(&self, id: NodeId) -> Result<()> {
        if (id as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id,
                len: self.len(),
            })
        }
    }
}
