//! Binary synapse-array checkpoints.
//!
//! Layout (little-endian): `"RVNW"`, version u16, rows u32, cols u32,
//! g_min f64, g_max f64, scale f64, then `rows × cols` row-major pairs
//! `(g_p, g_n)` as f32 siemens. The level count is not stored; the reader
//! supplies it from the run configuration.

use std::fs;
use std::path::Path;

use super::{Device, DeviceConfig, DifferentialSynapse};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RVNW";
pub const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 3 * 8;

/// Rows × cols grid of synapses sharing one device model.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseArray {
    pub rows: usize,
    pub cols: usize,
    pub device: Device,
    pub cells: Vec<DifferentialSynapse>,
}

impl SynapseArray {
    pub fn filled(rows: usize, cols: usize, device: Device, value: DifferentialSynapse) -> Self {
        Self {
            rows,
            cols,
            device,
            cells: vec![value; rows * cols],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> &DifferentialSynapse {
        &self.cells[row * self.cols + col]
    }
}

pub fn encode_checkpoint(array: &SynapseArray) -> Vec<u8> {
    let d = &array.device;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * array.cells.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(array.rows as u32).to_le_bytes());
    out.extend_from_slice(&(array.cols as u32).to_le_bytes());
    for v in [d.g_min, d.g_max, d.scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in &array.cells {
        let (gp, gn) = s.conductances(d);
        out.extend_from_slice(&(gp as f32).to_le_bytes());
        out.extend_from_slice(&(gn as f32).to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], device_cfg: &DeviceConfig) -> Result<SynapseArray> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("not a synapse checkpoint (bad magic)"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (rows, cols) = (u32_at(6), u32_at(10));
    let (g_min, g_max, scale) = (f64_at(14), f64_at(22), f64_at(30));
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * 8 {
        return Err(Error::format(format!(
            "checkpoint body has {} bytes, header implies {}",
            body.len(),
            rows * cols * 8
        )));
    }
    let mut device = device_cfg.build()?;
    if !(g_max > g_min && scale.is_finite() && scale > 0.0) {
        return Err(Error::format("checkpoint header has invalid conductance bounds"));
    }
    device.g_min = g_min;
    device.g_max = g_max;
    device.scale = scale;
    let cells = body
        .chunks_exact(8)
        .map(|c| {
            let gp = f32::from_le_bytes(c[..4].try_into().unwrap()) as f64;
            let gn = f32::from_le_bytes(c[4..].try_into().unwrap()) as f64;
            DifferentialSynapse::new(device.level_of(gp), device.level_of(gn))
        })
        .collect();
    Ok(SynapseArray {
        rows,
        cols,
        device,
        cells,
    })
}

pub fn write_checkpoint(path: &Path, array: &SynapseArray) -> Result<()> {
    fs::write(path, encode_checkpoint(array)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path, device_cfg: &DeviceConfig) -> Result<SynapseArray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, device_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn round_trip_is_exact_on_levels() {
        let cfg = DeviceConfig::default();
        let device = cfg.build().unwrap();
        let mut rng = crate::rng::seeded(4);
        let mut array = SynapseArray::filled(7, 5, device, DifferentialSynapse::default());
        for c in &mut array.cells {
            *c = DifferentialSynapse::new(rng.gen_range(0..1000), rng.gen_range(0..1000));
        }
        let bytes = encode_checkpoint(&array);
        assert_eq!(&bytes[..4], b"RVNW");
        assert_eq!(bytes.len(), 38 + 35 * 8);
        assert_eq!(decode_checkpoint(&bytes, &cfg).unwrap(), array);
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let cfg = DeviceConfig::default();
        let array = SynapseArray::filled(2, 2, cfg.build().unwrap(), DifferentialSynapse::new(1, 1));
        let mut bytes = encode_checkpoint(&array);
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes, &cfg), Err(Error::Format(_))));
        let mut bytes = encode_checkpoint(&array);
        bytes[4] = 2;
        assert!(matches!(decode_checkpoint(&bytes, &cfg), Err(Error::Format(_))));
        let mut bytes = encode_checkpoint(&array);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_checkpoint(&bytes, &cfg), Err(Error::Format(_))));
    }
}
