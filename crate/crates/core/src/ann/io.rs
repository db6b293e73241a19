//! Versioned binary serialization of a [`KdForestIndex`].
//!
//! Layout (little-endian integers, `f32` reals):
//!
//! ```text
//! magic        4 bytes  "LNBN"
//! version      u16
//! dimension    u32
//! point count  u64
//! num_trees    u32
//! leaf_checks  u64
//! rng_seed     u64
//! per tree:
//!   node count u32
//!   nodes      tag u8 (0 = leaf, 1 = split)
//!              leaf:  start u32, end u32
//!              split: dim u32, value f32, left u32, right u32
//!   order      point count × u32
//! points       point count × dimension × f32
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::forest::{ForestConfig, KdForestIndex, Node, Tree};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LNBN";
pub const FORMAT_VERSION: u16 = 1;

impl KdForestIndex {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.data.len() / self.dim;
        w.write_all(&MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(self.config.num_trees as u32).to_le_bytes())?;
        w.write_all(&(self.config.leaf_checks as u64).to_le_bytes())?;
        w.write_all(&self.config.rng_seed.to_le_bytes())?;
        for tree in &self.trees {
            w.write_all(&(tree.nodes.len() as u32).to_le_bytes())?;
            for node in &tree.nodes {
                match *node {
                    Node::Leaf { start, end } => {
                        w.write_all(&[0])?;
                        w.write_all(&start.to_le_bytes())?;
                        w.write_all(&end.to_le_bytes())?;
                    }
                    Node::Split {
                        dim,
                        value,
                        left,
                        right,
                    } => {
                        w.write_all(&[1])?;
                        w.write_all(&dim.to_le_bytes())?;
                        w.write_all(&value.to_le_bytes())?;
                        w.write_all(&left.to_le_bytes())?;
                        w.write_all(&right.to_le_bytes())?;
                    }
                }
            }
            for &p in &tree.order {
                w.write_all(&p.to_le_bytes())?;
            }
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = Reader {
            inner: BufReader::new(file),
            offset: 0,
            path,
        };
        let index = read_index(&mut reader)?;
        let mut rest = [0u8; 1];
        match reader.inner.read(&mut rest) {
            Ok(0) => Ok(index),
            Ok(_) => Err(reader.error("trailing bytes after index")),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

struct Reader<'a, R> {
    inner: R,
    offset: u64,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn error(&self, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.offset,
            message: message.into(),
        }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => self.error("truncated index file"),
            _ => Error::io(self.path, e),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }
}

fn read_index<R: Read>(r: &mut Reader<'_, R>) -> Result<KdForestIndex> {
    if r.bytes::<4>()? != MAGIC {
        r.offset = 0;
        return Err(r.error("bad magic, not an LNBN index file"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(r.error(format!(
            "unsupported index format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let dim = r.u32()? as usize;
    let n = r.u64()?;
    if dim == 0 || n == 0 || n > u64::from(u32::MAX) {
        return Err(r.error(format!("invalid shape: {n} points of dimension {dim}")));
    }
    let n = n as usize;
    let config = ForestConfig {
        num_trees: r.u32()? as usize,
        leaf_checks: r.u64()? as usize,
        rng_seed: r.u64()?,
    };
    config.validate().map_err(|e| r.error(e.to_string()))?;

    let mut trees = Vec::with_capacity(config.num_trees);
    for _ in 0..config.num_trees {
        let node_count = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(node_count.min(2 * n));
        for _ in 0..node_count {
            let node = match r.u8()? {
                0 => {
                    let start = r.u32()?;
                    let end = r.u32()?;
                    if start > end || end as usize > n {
                        return Err(r.error(format!("leaf range {start}..{end} out of bounds")));
                    }
                    Node::Leaf { start, end }
                }
                1 => {
                    let d = r.u32()?;
                    let value = r.f32()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if d as usize >= dim || left as usize >= node_count || right as usize >= node_count {
                        return Err(r.error("split node refers outside the tree"));
                    }
                    Node::Split {
                        dim: d,
                        value,
                        left,
                        right,
                    }
                }
                tag => return Err(r.error(format!("unknown node tag {tag}"))),
            };
            nodes.push(node);
        }
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for _ in 0..n {
            let p = r.u32()?;
            if p as usize >= n || std::mem::replace(&mut seen[p as usize], true) {
                return Err(r.error(format!("point {p} is out of range or repeated in tree order")));
            }
            order.push(p);
        }
        if nodes.is_empty() {
            return Err(r.error("tree has no nodes"));
        }
        trees.push(Tree { nodes, order });
    }
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n * dim {
        let v = r.f32()?;
        if !v.is_finite() {
            return Err(r.error("non-finite point coordinate"));
        }
        data.push(v);
    }
    Ok(KdForestIndex {
        dim,
        data,
        trees,
        config,
    })
}
