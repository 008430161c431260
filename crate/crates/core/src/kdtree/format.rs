use std::io::{self, Read, Write};

use super::KdError;
use crate::embedding::MAX_DIM;
use crate::formats::{check_magic, check_version, read_array, read_u16, read_u32, read_u64, FORMAT_VERSION};

/// Bytes in the fixed header.
pub const HEADER_LEN: u64 = 36;
/// Bytes per serialized internal node.
pub const NODE_LEN: u64 = 24;
/// Bytes before the records of a leaf page (u32 count, u32 reserved).
pub(crate) const LEAF_HEADER_LEN: u64 = 8;

const LEAF_FLAG: u64 = 1 << 63;

/// `KDT1` header. All integers little-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub dim: u16,
    pub count: u64,
    pub leaf_capacity: u32,
    pub internal_count: u64,
    pub leaf_offset: u64,
}

impl Header {
    pub fn record_len(&self) -> u64 {
        8 + 4 * self.dim as u64
    }

    pub fn page_len(&self) -> u64 {
        LEAF_HEADER_LEN + self.leaf_capacity as u64 * self.record_len()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(b"KDT1")?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.dim.to_le_bytes())?;
        w.write_all(&self.count.to_le_bytes())?;
        w.write_all(&self.leaf_capacity.to_le_bytes())?;
        w.write_all(&self.internal_count.to_le_bytes())?;
        w.write_all(&self.leaf_offset.to_le_bytes())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, KdError> {
        check_magic(r, "KDT1")?;
        check_version(r, "KDT1")?;
        let header = Header {
            dim: read_u16(r)?,
            count: read_u64(r)?,
            leaf_capacity: read_u32(r)?,
            internal_count: read_u64(r)?,
            leaf_offset: read_u64(r)?,
        };
        if header.dim == 0 || header.dim as usize > MAX_DIM {
            return Err(KdError::Corrupt(format!("dimension {}", header.dim)));
        }
        if header.count == 0 || header.leaf_capacity == 0 {
            return Err(KdError::Corrupt("empty index or zero leaf capacity".into()));
        }
        let expected = header
            .internal_count
            .checked_mul(NODE_LEN)
            .and_then(|b| b.checked_add(HEADER_LEN));
        if expected != Some(header.leaf_offset) {
            return Err(KdError::Corrupt(format!(
                "leaf section offset {} does not follow {} internal nodes",
                header.leaf_offset, header.internal_count
            )));
        }
        Ok(header)
    }
}

/// Reference to a child: an internal node index, or a leaf page at a byte
/// offset within the leaf section (high bit set).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildRef(pub u64);

impl ChildRef {
    pub fn internal(index: u64) -> Self {
        debug_assert!(index & LEAF_FLAG == 0);
        ChildRef(index)
    }

    pub fn leaf(offset: u64) -> Self {
        debug_assert!(offset & LEAF_FLAG == 0);
        ChildRef(offset | LEAF_FLAG)
    }

    pub fn as_leaf(self) -> Option<u64> {
        (self.0 & LEAF_FLAG != 0).then_some(self.0 & !LEAF_FLAG)
    }

    pub fn as_internal(self) -> Option<u64> {
        (self.0 & LEAF_FLAG == 0).then_some(self.0)
    }
}

/// Points with `coord[split_dim] <= split_value` are under `left`, points
/// with `coord[split_dim] >= split_value` under `right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternalNode {
    pub split_dim: u16,
    pub split_value: f32,
    pub left: ChildRef,
    pub right: ChildRef,
}

impl InternalNode {
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.split_dim.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&self.split_value.to_le_bytes())?;
        w.write_all(&self.left.0.to_le_bytes())?;
        w.write_all(&self.right.0.to_le_bytes())
    }

    pub fn read_from<R: Read>(r: &mut R) -> io::Result<Self> {
        let split_dim = read_u16(r)?;
        let _pad: [u8; 2] = read_array(r)?;
        let split_value = f32::from_le_bytes(read_array(r)?);
        Ok(InternalNode {
            split_dim,
            split_value,
            left: ChildRef(read_u64(r)?),
            right: ChildRef(read_u64(r)?),
        })
    }
}

/// Order-preserving map from finite f32 to u32 (with -0.0 == 0.0).
#[inline]
pub(crate) fn coord_key(x: f32) -> u32 {
    let bits = if x == 0.0 { 0 } else { x.to_bits() };
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

#[inline]
pub(crate) fn key_coord(key: u32) -> f32 {
    let bits = if key & 0x8000_0000 != 0 {
        key & 0x7fff_ffff
    } else {
        !key
    };
    f32::from_bits(bits)
}
