//! SILB, a packed container for one silhouette sequence.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SILB"
//! 4       1     format version (1)
//! 5       2     height, little-endian
//! 7       2     width, little-endian
//! 9       4     frame count, little-endian
//! 13      ...   frames in order; each row packed MSB-first (column 0 is bit 7
//!               of the first byte) and zero-padded to a whole byte
//! ```

use crate::error::{Error, Result};
use crate::grid::{BitGrid, SilhouetteSequence};

pub const MAGIC: &[u8; 4] = b"SILB";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 13;

const FORMAT: &str = "SILB";

fn malformed(offset: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        format: FORMAT,
        offset,
        message: message.into(),
    }
}

pub fn write_packed(seq: &SilhouetteSequence) -> Result<Vec<u8>> {
    encode_frames(seq.frames())
}

/// Packs frames that share one shape. An empty frame list is rejected.
pub fn encode_frames(frames: &[BitGrid]) -> Result<Vec<u8>> {
    let first = frames.first().ok_or(Error::EmptySequence)?;
    let (height, width) = (first.height(), first.width());
    let h16 = u16::try_from(height)
        .map_err(|_| Error::InvalidArgument(format!("height {height} does not fit 16 bits")))?;
    let w16 = u16::try_from(width)
        .map_err(|_| Error::InvalidArgument(format!("width {width} does not fit 16 bits")))?;
    let count = u32::try_from(frames.len())
        .map_err(|_| Error::InvalidArgument(format!("{} frames do not fit 32 bits", frames.len())))?;
    let row_bytes = width.div_ceil(8);
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * height * row_bytes);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&h16.to_le_bytes());
    out.extend_from_slice(&w16.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for frame in frames {
        first.check_shape(frame)?;
        for row in 0..height {
            let words = frame.row(row);
            for byte in 0..row_bytes {
                let mut b = 0u8;
                for bit in 0..8 {
                    let col = byte * 8 + bit;
                    if col < width && (words[col / 64] >> (col % 64)) & 1 == 1 {
                        b |= 0x80 >> bit;
                    }
                }
                out.push(b);
            }
        }
    }
    Ok(out)
}

pub fn read_packed(
    bytes: &[u8],
    label: impl Into<String>,
    source: impl Into<String>,
) -> Result<SilhouetteSequence> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            format: FORMAT,
            unit: "header bytes",
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(malformed(0, format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != VERSION {
        return Err(malformed(4, format!("unsupported version {}", bytes[4])));
    }
    let height = u16::from_le_bytes([bytes[5], bytes[6]]) as usize;
    let width = u16::from_le_bytes([bytes[7], bytes[8]]) as usize;
    let count = u32::from_le_bytes([bytes[9], bytes[10], bytes[11], bytes[12]]) as usize;
    if height == 0 || width == 0 {
        return Err(malformed(5, format!("zero dimension {height}x{width}")));
    }
    if count == 0 {
        return Err(malformed(9, "frame count is zero"));
    }
    let row_bytes = width.div_ceil(8);
    let frame_bytes = height * row_bytes;
    let expected = count
        .checked_mul(frame_bytes)
        .ok_or_else(|| malformed(9, "frame count overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            format: FORMAT,
            unit: "payload bytes",
            expected,
            actual: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(malformed(
            HEADER_LEN + expected,
            format!("{} trailing bytes", payload.len() - expected),
        ));
    }
    let pad_mask: u8 = match width % 8 {
        0 => 0,
        r => 0xff >> r,
    };
    let mut frames = Vec::with_capacity(count);
    for (f, chunk) in payload.chunks_exact(frame_bytes).enumerate() {
        let mut grid = BitGrid::new(height, width)?;
        for (row, row_data) in chunk.chunks_exact(row_bytes).enumerate() {
            if row_data[row_bytes - 1] & pad_mask != 0 {
                let offset = HEADER_LEN + f * frame_bytes + (row + 1) * row_bytes - 1;
                return Err(malformed(offset, "non-zero row padding bits"));
            }
            for col in 0..width {
                if row_data[col / 8] & (0x80 >> (col % 8)) != 0 {
                    grid.set_unchecked(row, col, true);
                }
            }
        }
        frames.push(grid);
    }
    SilhouetteSequence::new(frames, label, source)
}
