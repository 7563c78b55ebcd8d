//! `RVNF` weight files.
//!
//! Layout (little-endian): magic `RVNF`, version u16, layer count u32, then
//! per layer a 28-byte header (kind u8, kw u8, kh u8, reserved u8, input
//! w/h/c u32, output w/h/c u32), then per layer its weights and biases as
//! f32.

use std::path::Path;

use super::{build_fcnn, Fcnn, LayerKind, LayerSpec, Shape};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"RVNF";
const VERSION: u16 = 1;

pub fn encode_fcnn(net: &Fcnn) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.specs.len() as u32).to_le_bytes());
    for s in &net.specs {
        let (kind, kw, kh) = match s.kind {
            LayerKind::Conv { kw, kh } => (0u8, kw as u8, kh as u8),
            LayerKind::MaxPool => (1, 0, 0),
            LayerKind::Dense => (2, 0, 0),
        };
        out.extend_from_slice(&[kind, kw, kh, 0]);
        for v in [s.input.w, s.input.h, s.input.c, s.output.w, s.output.h, s.output.c] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for (w, b) in net.weights.iter().zip(&net.biases) {
        for v in w.iter().chain(b) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("truncated RVNF file".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_fcnn(bytes: &[u8]) -> Result<Fcnn> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not an RVNF file".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported RVNF version {version}")));
    }
    let n = r.u32()?;
    if n == 0 || n > 1024 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let mut specs = Vec::with_capacity(n);
    for _ in 0..n {
        let h = r.take(4)?;
        let kind = match h[0] {
            0 => LayerKind::Conv { kw: h[1] as usize, kh: h[2] as usize },
            1 => LayerKind::MaxPool,
            2 => LayerKind::Dense,
            k => return Err(Error::Format(format!("unknown layer kind {k}"))),
        };
        let input = Shape::new(r.u32()?, r.u32()?, r.u32()?);
        let output = Shape::new(r.u32()?, r.u32()?, r.u32()?);
        specs.push(LayerSpec { kind, input, output });
    }
    let mut net = build_fcnn(&specs, 0).map_err(|e| Error::Format(format!("bad layer table: {e}")))?;
    for l in 0..n {
        for v in net.weights[l].iter_mut().chain(net.biases[l].iter_mut()) {
            *v = f32::from_le_bytes(r.take(4)?.try_into().unwrap()) as f64;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after RVNF payload".into()));
    }
    Ok(net)
}

pub fn write_fcnn(path: &Path, net: &Fcnn) -> Result<()> {
    std::fs::write(path, encode_fcnn(net)).map_err(|e| Error::io(path, e))
}

pub fn read_fcnn(path: &Path) -> Result<Fcnn> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_fcnn(&bytes)
}
