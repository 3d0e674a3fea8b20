//! Binary index file: vectors, adjacency and an optional vp-tree.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header    "ONNG" | version u16 | metric u8 | dim u32 | n u64 | flags u8
//! vectors   n * dim f32
//! adjacency per node: count u32, then count * (target u32, length f32)
//! checksum  CRC32 of the adjacency block, u32
//! vp-tree   present when flags & 1: root u32 | node count u32 | nodes
//!           internal: 0u8 | pivot u32 | radius f64 | inner u32 | outer u32
//!           leaf:     1u8 | pivot u32 | m u32 | m * u32 | s u32 | s * u32
//! ```

use std::fs::File;
use std::io::{BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::vptree::{VpNode, VpTree};
use crate::NodeId;

pub const MAGIC: &[u8; 4] = b"ONNG";
pub const VERSION: u16 = 1;
const FLAG_TREE: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    pub graph: Graph,
    pub dataset: Dataset,
    pub tree: Option<VpTree>,
}

pub fn write_index<W: Write>(mut w: W, graph: &Graph, dataset: &Dataset, tree: Option<&VpTree>) -> Result<()> {
    if graph.len() != dataset.len() {
        return Err(Error::Invariant(format!(
            "graph has {} nodes but dataset has {}",
            graph.len(),
            dataset.len()
        )));
    }
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u8(dataset.metric().id())?;
    w.write_u32::<LittleEndian>(dataset.dim() as u32)?;
    w.write_u64::<LittleEndian>(dataset.len() as u64)?;
    w.write_u8(if tree.is_some() { FLAG_TREE } else { 0 })?;
    for &x in dataset.as_flat() {
        w.write_f32::<LittleEndian>(x)?;
    }

    let mut block = Vec::with_capacity(graph.len() * 4 + graph.edge_count() * 8);
    for list in graph.adjacency() {
        block.write_u32::<LittleEndian>(list.len() as u32)?;
        for e in list {
            block.write_u32::<LittleEndian>(e.target)?;
            block.write_f32::<LittleEndian>(e.length)?;
        }
    }
    w.write_all(&block)?;
    w.write_u32::<LittleEndian>(crc32fast::hash(&block))?;

    if let Some(tree) = tree {
        w.write_u32::<LittleEndian>(tree.root())?;
        w.write_u32::<LittleEndian>(tree.nodes().len() as u32)?;
        for node in tree.nodes() {
            match node {
                VpNode::Internal {
                    pivot,
                    radius,
                    inner,
                    outer,
                } => {
                    w.write_u8(0)?;
                    w.write_u32::<LittleEndian>(*pivot)?;
                    w.write_f64::<LittleEndian>(*radius)?;
                    w.write_u32::<LittleEndian>(*inner)?;
                    w.write_u32::<LittleEndian>(*outer)?;
                }
                VpNode::Leaf {
                    pivot,
                    members,
                    seeds,
                } => {
                    w.write_u8(1)?;
                    w.write_u32::<LittleEndian>(*pivot)?;
                    for list in [members, seeds] {
                        w.write_u32::<LittleEndian>(list.len() as u32)?;
                        for &id in list.iter() {
                            w.write_u32::<LittleEndian>(id)?;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Truncated
    } else {
        Error::Io(e)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Truncated);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        self.take(2)?.read_u16::<LittleEndian>().map_err(truncated)
    }

    fn u32(&mut self) -> Result<u32> {
        self.take(4)?.read_u32::<LittleEndian>().map_err(truncated)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take(8)?.read_u64::<LittleEndian>().map_err(truncated)
    }

    fn f32(&mut self) -> Result<f32> {
        self.take(4)?.read_f32::<LittleEndian>().map_err(truncated)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take(8)?.read_f64::<LittleEndian>().map_err(truncated)
    }

    fn ids(&mut self, max: usize) -> Result<Vec<NodeId>> {
        let m = self.u32()? as usize;
        if m > max || m * 4 > self.remaining() {
            return Err(Error::Truncated);
        }
        (0..m).map(|_| self.u32()).collect()
    }
}

pub fn read_index<R: Read>(mut r: R) -> Result<Index> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };

    if c.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let metric_id = c.u8()?;
    let metric = Metric::from_id(metric_id).ok_or_else(|| Error::Format(format!("unknown metric id {metric_id}")))?;
    let dim = c.u32()? as usize;
    let n = usize::try_from(c.u64()?).map_err(|_| Error::Format("node count overflows".into()))?;
    let flags = c.u8()?;
    if flags & !FLAG_TREE != 0 {
        return Err(Error::Format(format!("unknown flags {flags:#04x}")));
    }

    let floats = n.checked_mul(dim).filter(|&f| f <= c.remaining() / 4).ok_or(Error::Truncated)?;
    let data: Vec<f32> = (0..floats).map(|_| c.f32()).collect::<Result<_>>()?;
    let dataset = Dataset::from_flat(dim, metric, data)?;
    if dataset.len() != n && dim != 0 {
        return Err(Error::Format("vector block does not match header".into()));
    }

    let start = c.pos;
    let mut adjacency = Vec::with_capacity(n.min(c.remaining() / 4));
    for _ in 0..n {
        let count = c.u32()? as usize;
        if count > c.remaining() / 8 {
            return Err(Error::Truncated);
        }
        let list = (0..count)
            .map(|_| Ok(Edge::new(c.u32()?, c.f32()?)))
            .collect::<Result<Vec<_>>>()?;
        adjacency.push(list);
    }
    let computed = crc32fast::hash(&buf[start..c.pos]);
    let stored = c.u32()?;
    if stored != computed {
        return Err(Error::ChecksumMismatch { stored, computed });
    }
    let graph = Graph::from_adjacency(adjacency.clone())?;
    if graph.adjacency() != adjacency.as_slice() {
        return Err(Error::Format("adjacency lists are not in canonical order".into()));
    }

    let tree = if flags & FLAG_TREE != 0 {
        let root = c.u32()?;
        let count = c.u32()? as usize;
        if count > c.remaining() {
            return Err(Error::Truncated);
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            nodes.push(match c.u8()? {
                0 => VpNode::Internal {
                    pivot: c.u32()?,
                    radius: c.f64()?,
                    inner: c.u32()?,
                    outer: c.u32()?,
                },
                1 => VpNode::Leaf {
                    pivot: c.u32()?,
                    members: c.ids(n)?,
                    seeds: c.ids(n)?,
                },
                tag => return Err(Error::Format(format!("unknown vp-tree node tag {tag}"))),
            });
        }
        Some(VpTree::from_nodes(nodes, root, n)?)
    } else {
        None
    };

    if c.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes", c.remaining())));
    }
    Ok(Index { graph, dataset, tree })
}

pub fn save_index(path: impl AsRef<Path>, graph: &Graph, dataset: &Dataset, tree: Option<&VpTree>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_index(&mut w, graph, dataset, tree)?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index> {
    read_index(File::open(path)?)
}
