//! TEXMEX `fvecs` / `bvecs` / `ivecs` files.
//!
//! Every record is a little-endian `i32` dimension `d` followed by `d`
//! components: `f32` for fvecs, `u8` for bvecs, `i32` for ivecs. All records
//! in a file must share one dimension.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::dataset::{Dataset, Metric};
use crate::error::{Error, Result};
use crate::NodeId;

/// Vectors read from a file. `dim` is 0 only when no record was read.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vectors {
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Vectors {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn into_dataset(self, metric: Metric) -> Result<Dataset> {
        if self.dim == 0 {
            return Err(Error::DimensionUnset);
        }
        Dataset::from_flat(self.dim, metric, self.data)
    }
}

fn eof_as_truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Truncated
    } else {
        Error::Io(e)
    }
}

/// Reads the next record header, `None` at a clean end of file.
fn next_dim<R: Read>(r: &mut R, expected: &mut Option<usize>) -> Result<Option<usize>> {
    let mut buf = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    match got {
        0 => return Ok(None),
        4 => {}
        _ => return Err(Error::Truncated),
    }
    let d = i32::from_le_bytes(buf);
    if d <= 0 {
        return Err(Error::Format(format!("record dimension {d} is not positive")));
    }
    let d = d as usize;
    match *expected {
        Some(e) if e != d => Err(Error::Format(format!(
            "inconsistent record dimension: expected {e}, got {d}"
        ))),
        _ => {
            *expected = Some(d);
            Ok(Some(d))
        }
    }
}

pub fn read_fvecs<R: Read>(mut r: R) -> Result<Vectors> {
    let mut dim = None;
    let mut data = Vec::new();
    while let Some(d) = next_dim(&mut r, &mut dim)? {
        let start = data.len();
        data.resize(start + d, 0.0);
        r.read_f32_into::<LittleEndian>(&mut data[start..])
            .map_err(eof_as_truncated)?;
    }
    Ok(Vectors {
        dim: dim.unwrap_or(0),
        data,
    })
}

/// Components are widened from `u8` to `f32`.
pub fn read_bvecs<R: Read>(mut r: R) -> Result<Vectors> {
    let mut dim = None;
    let mut data = Vec::new();
    let mut buf = Vec::new();
    while let Some(d) = next_dim(&mut r, &mut dim)? {
        buf.resize(d, 0);
        r.read_exact(&mut buf).map_err(eof_as_truncated)?;
        data.extend(buf.iter().map(|&b| b as f32));
    }
    Ok(Vectors {
        dim: dim.unwrap_or(0),
        data,
    })
}

/// Id lists; negative ids are rejected.
pub fn read_ivecs<R: Read>(mut r: R) -> Result<Vec<Vec<NodeId>>> {
    let mut dim = None;
    let mut lists = Vec::new();
    while let Some(d) = next_dim(&mut r, &mut dim)? {
        let mut raw = vec![0i32; d];
        r.read_i32_into::<LittleEndian>(&mut raw)
            .map_err(eof_as_truncated)?;
        let list = raw
            .into_iter()
            .map(|v| {
                u32::try_from(v).map_err(|_| Error::Format(format!("negative id {v} in ivecs")))
            })
            .collect::<Result<Vec<_>>>()?;
        lists.push(list);
    }
    Ok(lists)
}

pub fn write_fvecs<W: Write>(mut w: W, dim: usize, data: &[f32]) -> Result<()> {
    check_rows(dim, data.len())?;
    for row in data.chunks_exact(dim) {
        w.write_i32::<LittleEndian>(dim as i32)?;
        for &x in row {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

pub fn write_bvecs<W: Write>(mut w: W, dim: usize, data: &[u8]) -> Result<()> {
    check_rows(dim, data.len())?;
    for row in data.chunks_exact(dim) {
        w.write_i32::<LittleEndian>(dim as i32)?;
        w.write_all(row)?;
    }
    Ok(())
}

pub fn write_ivecs<W: Write>(mut w: W, lists: &[Vec<NodeId>]) -> Result<()> {
    for list in lists {
        if list.is_empty() || list.len() > i32::MAX as usize {
            return Err(Error::InvalidParameter("ivecs records need 1..=i32::MAX ids".into()));
        }
        w.write_i32::<LittleEndian>(list.len() as i32)?;
        for &id in list {
            let v = i32::try_from(id).map_err(|_| Error::InvalidParameter(format!("id {id} exceeds i32")))?;
            w.write_i32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn check_rows(dim: usize, len: usize) -> Result<()> {
    if dim == 0 || dim > i32::MAX as usize {
        return Err(Error::ZeroDimension);
    }
    if len % dim != 0 {
        return Err(Error::Format(format!("{len} components do not fill rows of {dim}")));
    }
    Ok(())
}

/// One vector per line, components separated by commas or whitespace.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vectors> {
    let mut dim = None;
    let mut data = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let start = data.len();
        for field in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()) {
            let x: f32 = field
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad number `{field}`", lineno + 1)))?;
            data.push(x);
        }
        let d = data.len() - start;
        match dim {
            Some(e) if e != d => {
                return Err(Error::Format(format!(
                    "line {}: expected {e} components, got {d}",
                    lineno + 1
                )))
            }
            _ => dim = Some(d),
        }
    }
    Ok(Vectors {
        dim: dim.unwrap_or(0),
        data,
    })
}

/// Reads `.fvecs`, `.bvecs` or `.csv`, chosen by extension.
pub fn read_vectors_file(path: impl AsRef<Path>) -> Result<Vectors> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("bvecs") => read_bvecs(r),
        Some("fvecs") | None => read_fvecs(r),
        Some("csv") | Some("txt") => read_csv(r),
        Some(other) => Err(Error::Format(format!("unknown vector file extension `.{other}`"))),
    }
}

pub fn read_ivecs_file(path: impl AsRef<Path>) -> Result<Vec<Vec<NodeId>>> {
    read_ivecs(BufReader::new(File::open(path)?))
}

pub fn write_fvecs_file(path: impl AsRef<Path>, dim: usize, data: &[f32]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_fvecs(&mut w, dim, data)?;
    w.flush()?;
    Ok(())
}

pub fn write_ivecs_file(path: impl AsRef<Path>, lists: &[Vec<NodeId>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ivecs(&mut w, lists)?;
    w.flush()?;
    Ok(())
}
