//! Residual-block datasets and their binary file format.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "RBLK"  version:u16=1  N:u16  count:u32  value_type:u8=0
//! header_len:u16  header:[u8; header_len]  (UTF-8 provenance)
//! count × { class_id:u16  values:[i16; N*N] }   (row-major)
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Mat;

const MAGIC: &[u8; 4] = b"RBLK";
const VERSION: u16 = 1;
const VALUE_TYPE_I16: u8 = 0;

/// One `N × N` block of integer residuals with its class label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualBlock {
    pub class_id: u16,
    pub values: Vec<i16>,
}

impl ResidualBlock {
    pub fn to_mat(&self, n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| self.values[i * n + j] as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockDataset {
    n: usize,
    blocks: Vec<ResidualBlock>,
    pub provenance: String,
}

impl BlockDataset {
    pub fn new(n: usize, provenance: impl Into<String>) -> Result<Self> {
        if n == 0 || n > u16::MAX as usize {
            return Err(Error::InvalidShape(format!("block side {n}")));
        }
        Ok(BlockDataset { n, blocks: Vec::new(), provenance: provenance.into() })
    }

    pub fn from_blocks(n: usize, blocks: Vec<ResidualBlock>, provenance: impl Into<String>) -> Result<Self> {
        let mut d = BlockDataset::new(n, provenance)?;
        for b in blocks {
            d.push(b)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, block: ResidualBlock) -> Result<()> {
        if block.values.len() != self.n * self.n {
            return Err(Error::InvalidShape(format!(
                "block of {} values in an N = {} dataset",
                block.values.len(),
                self.n
            )));
        }
        if block.values.contains(&i16::MIN) {
            return Err(Error::InvalidInput("residual magnitude must stay below 2^15".into()));
        }
        if self.blocks.len() >= u32::MAX as usize {
            return Err(Error::InvalidInput("dataset is full".into()));
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }

    pub fn extend(&mut self, other: &BlockDataset) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: other.n });
        }
        for b in &other.blocks {
            self.push(b.clone())?;
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let header = self.provenance.as_bytes();
        if header.len() > u16::MAX as usize {
            return Err(Error::InvalidInput("provenance header longer than 65535 bytes".into()));
        }
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u16).to_le_bytes())?;
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        w.write_all(&[VALUE_TYPE_I16])?;
        w.write_all(&(header.len() as u16).to_le_bytes())?;
        w.write_all(header)?;
        for b in &self.blocks {
            w.write_all(&b.class_id.to_le_bytes())?;
            for v in &b.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(r).read_to_end(&mut bytes)?;
        parse(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(Error::TruncatedPayload { offset: self.bytes.len() as u64 });
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }
}

fn parse(bytes: &[u8]) -> Result<BlockDataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < MAGIC.len() {
        return if MAGIC.starts_with(bytes) {
            Err(Error::TruncatedPayload { offset: bytes.len() as u64 })
        } else {
            Err(Error::BadMagic { offset: 0 })
        };
    }
    if c.take(4)? != MAGIC {
        return Err(Error::BadMagic { offset: 0 });
    }
    let at = c.offset();
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion { version, offset: at });
    }
    let at = c.offset();
    let n = c.u16()?;
    if n == 0 {
        return Err(Error::InvalidBlockSize { n, offset: at });
    }
    let count = c.u32()?;
    let at = c.offset();
    let value_type = c.u8()?;
    if value_type != VALUE_TYPE_I16 {
        return Err(Error::UnsupportedValueType { value_type, offset: at });
    }
    let header_len = c.u16()? as usize;
    let at = c.offset();
    let provenance = std::str::from_utf8(c.take(header_len)?)
        .map_err(|_| Error::InvalidHeader { offset: at })?
        .to_owned();

    let n = n as usize;
    let per_block = n * n;
    let mut blocks = Vec::new();
    for _ in 0..count {
        let class_id = c.u16()?;
        let raw = c.take(per_block * 2)?;
        let start = c.offset() - raw.len() as u64;
        let mut values = Vec::with_capacity(per_block);
        for (k, ch) in raw.chunks_exact(2).enumerate() {
            let v = i16::from_le_bytes([ch[0], ch[1]]);
            if v == i16::MIN {
                return Err(Error::InvalidValue { offset: start + 2 * k as u64 });
            }
            values.push(v);
        }
        blocks.push(ResidualBlock { class_id, values });
    }
    if c.pos != bytes.len() {
        return Err(Error::TrailingBytes { offset: c.offset(), count: (bytes.len() - c.pos) as u64 });
    }
    Ok(BlockDataset { n, blocks, provenance })
}

pub fn write_dataset(d: &BlockDataset, path: impl AsRef<Path>) -> Result<()> {
    d.write_to(File::create(path)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<BlockDataset> {
    BlockDataset::read_from(File::open(path)?)
}

/// Partition by class label, preserving block order inside each class.
pub fn split_by_class(d: &BlockDataset) -> BTreeMap<u16, BlockDataset> {
    let mut out: BTreeMap<u16, BlockDataset> = BTreeMap::new();
    for b in &d.blocks {
        out.entry(b.class_id)
            .or_insert_with(|| BlockDataset {
                n: d.n,
                blocks: Vec::new(),
                provenance: d.provenance.clone(),
            })
            .blocks
            .push(b.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockDataset {
        let blocks = (0..3)
            .map(|k| ResidualBlock {
                class_id: (k % 2) as u16,
                values: (0..4).map(|v| (v * 100 - 150 + k) as i16).collect(),
            })
            .collect();
        BlockDataset::from_blocks(2, blocks, "unit test").unwrap()
    }

    fn encode(d: &BlockDataset) -> Vec<u8> {
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn roundtrip_is_exact() {
        let d = sample();
        let buf = encode(&d);
        assert_eq!(&buf[..4], b"RBLK");
        assert_eq!(buf.len(), 4 + 2 + 2 + 4 + 1 + 2 + 9 + 3 * (2 + 8));
        assert_eq!(BlockDataset::read_from(&buf[..]).unwrap(), d);
    }

    #[test]
    fn truncation_reports_offset() {
        let buf = encode(&sample());
        let cut = &buf[..buf.len() - 3];
        match BlockDataset::read_from(cut) {
            Err(Error::TruncatedPayload { offset }) => assert_eq!(offset, cut.len() as u64),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_magic() {
        let mut buf = encode(&sample());
        buf[0] = b'X';
        assert!(matches!(BlockDataset::read_from(&buf[..]), Err(Error::BadMagic { offset: 0 })));
    }

    #[test]
    fn wrong_version_and_type() {
        let mut buf = encode(&sample());
        buf[4] = 9;
        assert!(matches!(
            BlockDataset::read_from(&buf[..]),
            Err(Error::UnsupportedVersion { version: 9, offset: 4 })
        ));
        let mut buf = encode(&sample());
        buf[12] = 3;
        assert!(matches!(
            BlockDataset::read_from(&buf[..]),
            Err(Error::UnsupportedValueType { value_type: 3, offset: 12 })
        ));
    }

    #[test]
    fn zero_block_size_rejected() {
        let mut buf = encode(&sample());
        buf[6] = 0;
        assert!(matches!(BlockDataset::read_from(&buf[..]), Err(Error::InvalidBlockSize { .. })));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut buf = encode(&sample());
        buf.push(0);
        assert!(matches!(BlockDataset::read_from(&buf[..]), Err(Error::TrailingBytes { count: 1, .. })));
    }

    #[test]
    fn split_preserves_counts() {
        let d = sample();
        let parts = split_by_class(&d);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts.values().map(BlockDataset::len).sum::<usize>(), d.len());
        assert_eq!(parts[&0].len(), 2);
        let empty = BlockDataset::new(4, "").unwrap();
        assert!(split_by_class(&empty).is_empty());
    }

    #[test]
    fn block_shape_checked() {
        let mut d = BlockDataset::new(2, "").unwrap();
        assert!(d.push(ResidualBlock { class_id: 0, values: vec![0; 3] }).is_err());
        assert!(d.push(ResidualBlock { class_id: 0, values: vec![i16::MIN, 0, 0, 0] }).is_err());
    }
}
