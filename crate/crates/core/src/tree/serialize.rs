//! Binary map format (little-endian):
//!
//! ```text
//! "WVMP"            4 bytes
//! version           u16 (= 1)
//! min_cell_width    f64
//! origin            3 x f64
//! tree_height       u8
//! clamp_lo          f32
//! clamp_hi          f32
//! root_scale        f32
//! nodes             depth-first pre-order: child mask u8, 7 x f32 details
//! ```
//!
//! An empty node section means no node is allocated. Otherwise the first
//! record is the root node and each record is followed by the records of its
//! allocated children in octant order.

use nalgebra::Vector3;
use thiserror::Error;

use super::{MapConfig, NodeRecord, WaveletOctree, NO_NODE};
use crate::haar::{NUM_CHILDREN, NUM_DETAILS};

pub const MAP_MAGIC: [u8; 4] = *b"WVMP";
pub const MAP_FORMAT_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 8 + 24 + 1 + 4 + 4 + 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("bad magic at offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported format version {version} at offset {offset}")]
    UnsupportedVersion { offset: usize, version: u16 },
    #[error("truncated input at offset {offset}")]
    Truncated { offset: usize },
    #[error("invalid value at offset {offset}: {reason}")]
    InvalidValue { offset: usize, reason: String },
    #[error("node at offset {offset} has children below the finest level")]
    TooDeep { offset: usize },
    #[error("{count} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(DecodeError::Truncated { offset: self.pos });
        }
        let mut out = [0u8; N];
        out.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32, DecodeError> {
        let offset = self.pos;
        let v = f32::from_le_bytes(self.take()?);
        if !v.is_finite() {
            return Err(DecodeError::InvalidValue {
                offset,
                reason: "non-finite coefficient".into(),
            });
        }
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64, DecodeError> {
        let offset = self.pos;
        let v = f64::from_le_bytes(self.take()?);
        if !v.is_finite() {
            return Err(DecodeError::InvalidValue {
                offset,
                reason: "non-finite value".into(),
            });
        }
        Ok(v)
    }
}

impl WaveletOctree {
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.allocated_nodes() * (1 + 4 * NUM_DETAILS));
        out.extend_from_slice(&MAP_MAGIC);
        out.extend_from_slice(&MAP_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config.min_cell_width.to_le_bytes());
        for k in 0..3 {
            out.extend_from_slice(&self.config.origin[k].to_le_bytes());
        }
        out.push(self.config.tree_height);
        out.extend_from_slice(&self.config.clamp_lo.to_le_bytes());
        out.extend_from_slice(&self.config.clamp_hi.to_le_bytes());
        out.extend_from_slice(&self.root_scale.to_le_bytes());

        let mut stack = Vec::new();
        if self.root != NO_NODE {
            stack.push(self.root);
        }
        while let Some(index) = stack.pop() {
            let node = &self.nodes[index as usize];
            out.push(node.child_mask());
            for d in &node.details {
                out.extend_from_slice(&d.to_le_bytes());
            }
            // Reverse push so children pop in octant order.
            for &child in node.children.iter().rev() {
                if child != NO_NODE {
                    stack.push(child);
                }
            }
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take::<4>()? != MAP_MAGIC {
            return Err(DecodeError::BadMagic { offset: 0 });
        }
        let version = r.u16()?;
        if version != MAP_FORMAT_VERSION {
            return Err(DecodeError::UnsupportedVersion { offset: 4, version });
        }
        let config_offset = r.pos;
        let min_cell_width = r.f64()?;
        let origin = Vector3::new(r.f64()?, r.f64()?, r.f64()?);
        let tree_height = r.u8()?;
        let clamp_lo = r.f32()?;
        let clamp_hi = r.f32()?;
        let config = MapConfig {
            min_cell_width,
            origin,
            tree_height,
            clamp_lo,
            clamp_hi,
            prune_threshold: 0.0,
        };
        let mut map = WaveletOctree::new(config).map_err(|e| DecodeError::InvalidValue {
            offset: config_offset,
            reason: e.to_string(),
        })?;
        map.root_scale = r.f32()?;
        if r.pos < bytes.len() {
            map.root = map.read_node(&mut r, 0)?;
            map.rebuild_ranges();
        }
        if r.pos != bytes.len() {
            return Err(DecodeError::TrailingBytes {
                offset: r.pos,
                count: bytes.len() - r.pos,
            });
        }
        Ok(map)
    }

    fn read_node(&mut self, r: &mut Reader, depth: u8) -> Result<u32, DecodeError> {
        let offset = r.pos;
        if depth >= self.config.tree_height {
            return Err(DecodeError::TooDeep { offset });
        }
        let mask = r.u8()?;
        let mut details = [0f32; NUM_DETAILS];
        for d in details.iter_mut() {
            *d = r.f32()?;
        }
        let index = self.alloc();
        let mut children = [NO_NODE; NUM_CHILDREN];
        for (o, child) in children.iter_mut().enumerate() {
            if mask & (1 << o) != 0 {
                *child = self.read_node(r, depth + 1)?;
            }
        }
        self.nodes[index as usize] = NodeRecord {
            details,
            children,
            min_rel: 0.0,
            max_rel: 0.0,
        };
        Ok(index)
    }

    /// Recomputes the cached min/max ranges of every node.
    fn rebuild_ranges(&mut self) {
        fn walk(map: &mut WaveletOctree, node: u32, value: f64) -> (f64, f64) {
            if node == NO_NODE {
                return (value, value);
            }
            let rec = map.nodes[node as usize];
            let values = crate::haar::lift_backward_3d(value, &rec.details_f64());
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for o in 0..NUM_CHILDREN {
                let (a, b) = walk(map, rec.children[o], values[o]);
                lo = lo.min(a);
                hi = hi.max(b);
            }
            let rec = &mut map.nodes[node as usize];
            rec.min_rel = (lo - value) as f32;
            rec.max_rel = (hi - value) as f32;
            (lo, hi)
        }
        let (root, value) = (self.root, self.root_scale as f64);
        walk(self, root, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{CoefficientUpdate, NodePartition};

    fn sample_map() -> WaveletOctree {
        let cfg = MapConfig {
            min_cell_width: 0.1,
            origin: Vector3::new(-1.6, -1.6, -0.4),
            tree_height: 5,
            ..MapConfig::default()
        };
        let mut map = WaveletOctree::new(cfg.clone()).unwrap();
        for (i, idx) in [[1, 2, 3], [30, 1, 7], [16, 16, 16]].into_iter().enumerate() {
            map.set_leaf(&NodePartition::new(&cfg, 5, idx), 0.7 * i as f64 - 1.1).unwrap();
        }
        map.apply_update_block(&NodePartition::new(&cfg, 2, [1, 1, 1]), &CoefficientUpdate::uniform(-0.4))
            .unwrap();
        map
    }

    #[test]
    fn fresh_map_round_trip() {
        let map = WaveletOctree::new(MapConfig::default()).unwrap();
        let bytes = map.serialize();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(WaveletOctree::deserialize(&bytes).unwrap(), map);
    }

    #[test]
    fn round_trip_preserves_coefficients_and_queries() {
        let map = sample_map();
        let bytes = map.serialize();
        assert_eq!(bytes.len(), HEADER_LEN + map.allocated_nodes() * 29);
        let back = WaveletOctree::deserialize(&bytes).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.serialize(), bytes);
        assert_eq!(back.to_dense(), map.to_dense());
    }

    #[test]
    fn corrupt_inputs_fail_cleanly() {
        let bytes = sample_map().serialize();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(WaveletOctree::deserialize(&bad), Err(DecodeError::BadMagic { offset: 0 }));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            WaveletOctree::deserialize(&bad),
            Err(DecodeError::UnsupportedVersion { offset: 4, version: 9 })
        ));
        let mut bad = bytes.clone();
        bad[38] = 0; // tree height
        assert!(matches!(WaveletOctree::deserialize(&bad), Err(DecodeError::InvalidValue { offset: 6, .. })));
        for cut in [3, 10, HEADER_LEN + 5, bytes.len() - 1] {
            assert!(matches!(
                WaveletOctree::deserialize(&bytes[..cut]),
                Err(DecodeError::Truncated { .. })
            ));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(WaveletOctree::deserialize(&long).is_err());
        // Every single-byte header corruption either decodes or errors; never panics.
        for i in 0..HEADER_LEN {
            let mut b = bytes.clone();
            b[i] ^= 0xA5;
            let _ = WaveletOctree::deserialize(&b);
        }
    }
}
