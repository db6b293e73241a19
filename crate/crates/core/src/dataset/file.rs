//! Binary labeled-descriptor files.
//!
//! ```text
//! magic          4 bytes  "LDSC"
//! version        u16
//! dimension      u32
//! record count   u64
//! has_locations  u8 (0 or 1)
//! class_count    u32
//! records        class id u32, image id u32, [x f32, y f32], dimension × f32
//! ```
//!
//! All integers little-endian, all reals IEEE-754 binary32.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::DescriptorFile;
use crate::descriptor::{default_class_names, ClassId, LabeledDescriptorSet};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"LDSC";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 4 + 8 + 1 + 4;

pub fn write_descriptor_file(path: &Path, file: &DescriptorFile) -> Result<()> {
    let out = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(out);
    write_records(&mut w, file).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_records<W: Write>(w: &mut W, file: &DescriptorFile) -> std::io::Result<()> {
    let set = &file.set;
    w.write_all(&MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(set.dim() as u32).to_le_bytes())?;
    w.write_all(&(set.len() as u64).to_le_bytes())?;
    w.write_all(&[u8::from(file.locations.is_some())])?;
    w.write_all(&(set.class_count() as u32).to_le_bytes())?;
    for i in 0..set.len() {
        w.write_all(&set.labels()[i].get().to_le_bytes())?;
        w.write_all(&set.image_ids()[i].to_le_bytes())?;
        if let Some(locations) = &file.locations {
            let (x, y) = locations[i];
            w.write_all(&x.to_le_bytes())?;
            w.write_all(&y.to_le_bytes())?;
        }
        for v in set.descriptor(i) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_descriptor_file(path: &Path) -> Result<DescriptorFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(f),
        offset: 0,
        path,
    };

    let magic: [u8; 4] = r.bytes()?;
    if magic != MAGIC {
        return Err(r.error_at(0, "bad magic, not an LDSC descriptor file"));
    }
    let version = u16::from_le_bytes(r.bytes()?);
    if version != FORMAT_VERSION {
        return Err(r.error_at(
            4,
            format!("unsupported format version {version} (expected {FORMAT_VERSION})"),
        ));
    }
    let dim = u32::from_le_bytes(r.bytes()?) as usize;
    let count = u64::from_le_bytes(r.bytes()?);
    let flag_offset = r.offset;
    let has_locations = match r.bytes::<1>()?[0] {
        0 => false,
        1 => true,
        other => return Err(r.error_at(flag_offset, format!("has_locations flag must be 0 or 1, got {other}"))),
    };
    let class_count = u32::from_le_bytes(r.bytes()?);
    debug_assert_eq!(r.offset, HEADER_LEN);
    if dim == 0 {
        return Err(r.error_at(6, "dimension must be >= 1"));
    }
    if count == 0 {
        return Err(r.error_at(10, "file holds no records"));
    }
    let count = usize::try_from(count).map_err(|_| r.error_at(10, "record count too large"))?;

    let capacity = count.min(1 << 24);
    let mut data = Vec::with_capacity(capacity * dim);
    let mut labels = Vec::with_capacity(capacity);
    let mut image_ids = Vec::with_capacity(capacity);
    let mut locations = has_locations.then(|| Vec::with_capacity(capacity));
    for record in 0..count {
        let label_offset = r.offset;
        let label = u32::from_le_bytes(r.bytes()?);
        if label >= class_count {
            return Err(r.error_at(
                label_offset,
                format!("record {record}: class id {label} >= class count {class_count}"),
            ));
        }
        labels.push(ClassId::new(label));
        image_ids.push(u32::from_le_bytes(r.bytes()?));
        if let Some(locations) = locations.as_mut() {
            let loc_offset = r.offset;
            let x = f32::from_le_bytes(r.bytes()?);
            let y = f32::from_le_bytes(r.bytes()?);
            if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                return Err(r.error_at(
                    loc_offset,
                    format!("record {record}: location ({x}, {y}) outside [0, 1]"),
                ));
            }
            locations.push((x, y));
        }
        for _ in 0..dim {
            let value_offset = r.offset;
            let v = f32::from_le_bytes(r.bytes()?);
            if !v.is_finite() {
                return Err(r.error_at(value_offset, format!("record {record}: non-finite value {v}")));
            }
            data.push(v);
        }
    }
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(r.error_at(r.offset, "trailing bytes after the last record")),
        Err(e) => return Err(Error::io(path, e)),
    }

    let set = LabeledDescriptorSet::new(dim, data, labels, image_ids, default_class_names(class_count as usize))
        .map_err(|e| r.error_at(HEADER_LEN, e.to_string()))?;
    Ok(DescriptorFile { set, locations })
}

struct Reader<'a, R> {
    inner: R,
    offset: u64,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn error_at(&self, offset: u64, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset,
            message: message.into(),
        }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        if let Err(e) = self.inner.read_exact(&mut buf) {
            return Err(match e.kind() {
                ErrorKind::UnexpectedEof => self.error_at(self.offset, "truncated file"),
                _ => Error::io(self.path, e),
            });
        }
        self.offset += N as u64;
        Ok(buf)
    }
}
