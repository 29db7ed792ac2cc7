//! Netpbm graymaps (P2 ASCII and P5 binary).
//! <https://netpbm.sourceforge.net/doc/pgm.html>

use crate::error::{Error, Result};
use crate::grid::BitGrid;

const FORMAT: &str = "PGM";

fn malformed(offset: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        format: FORMAT,
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.bytes.get(self.pos) {
                None => malformed(start, format!("unexpected end of data, expected {what}")),
                Some(&b) => malformed(start, format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| malformed(start, format!("{what} out of range")))
    }
}

/// Decodes a P2 or P5 graymap; a pixel is foreground when its value exceeds
/// half of `maxval`.
pub fn read_pgm(bytes: &[u8]) -> Result<BitGrid> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(malformed(0, "unsupported magic, expected P2 or P5")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width_at = cur.pos;
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(width_at, format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(maxval_at, format!("maxval {maxval} outside 1..=65535")));
    }
    let pixels = width
        .checked_mul(height)
        .ok_or_else(|| malformed(width_at, "image too large"))?;
    let mut grid = BitGrid::new(height, width)?;
    let foreground = |v: u32| 2 * v > maxval;

    if binary {
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            Some(_) => return Err(malformed(cur.pos, "expected whitespace after maxval")),
            None => {}
        }
        let sample_bytes = if maxval < 256 { 1 } else { 2 };
        let expected = pixels * sample_bytes;
        let payload = &bytes[cur.pos.min(bytes.len())..];
        if payload.len() < expected {
            return Err(Error::Truncated {
                format: FORMAT,
                unit: "payload bytes",
                expected,
                actual: payload.len(),
            });
        }
        for i in 0..pixels {
            let v = if sample_bytes == 1 {
                payload[i] as u32
            } else {
                u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
            };
            if v > maxval {
                return Err(malformed(
                    cur.pos + i * sample_bytes,
                    format!("sample {v} exceeds maxval {maxval}"),
                ));
            }
            if foreground(v) {
                grid.set_unchecked(i / width, i % width, true);
            }
        }
    } else {
        for i in 0..pixels {
            cur.skip_blank();
            if cur.pos >= bytes.len() {
                return Err(Error::Truncated {
                    format: FORMAT,
                    unit: "samples",
                    expected: pixels,
                    actual: i,
                });
            }
            let at = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(malformed(at, format!("sample {v} exceeds maxval {maxval}")));
            }
            if foreground(v) {
                grid.set_unchecked(i / width, i % width, true);
            }
        }
    }
    Ok(grid)
}

/// Encodes a binary grid as P5 with maxval 255 and samples 0 / 255.
pub fn write_pgm(grid: &BitGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.reserve(grid.len());
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            out.push(if grid.get_unchecked(row, col) { 255 } else { 0 });
        }
    }
    out
}

/// Encodes grey samples as P5; samples are big-endian 16-bit when
/// `maxval > 255`.
pub fn write_pgm_gray(width: usize, height: usize, maxval: u16, samples: &[u16]) -> Result<Vec<u8>> {
    if samples.len() != width * height {
        return Err(Error::InvalidArgument(format!(
            "{} samples for a {width}x{height} image",
            samples.len()
        )));
    }
    if maxval == 0 {
        return Err(Error::InvalidArgument("maxval must be positive".into()));
    }
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &s in samples {
        let s = s.min(maxval);
        if maxval > 255 {
            out.extend_from_slice(&s.to_be_bytes());
        } else {
            out.push(s as u8);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diag() -> BitGrid {
        BitGrid::from_rows(&["01", "10"]).unwrap()
    }

    #[test]
    fn p5_threshold() {
        let bytes = b"P5\n2 2\n255\n\x00\xff\xff\x00";
        assert_eq!(read_pgm(bytes).unwrap(), diag());
        let mid = b"P5 2 1 255 \x7f\x80";
        let g = read_pgm(mid).unwrap();
        assert!(!g.get(0, 0).unwrap());
        assert!(g.get(0, 1).unwrap());
    }

    #[test]
    fn p2_matches_p5() {
        let text = b"P2\n# made by hand\n2 2\n255\n0 255\n255 0\n";
        assert_eq!(read_pgm(text).unwrap(), diag());
    }

    #[test]
    fn sixteen_bit_samples() {
        let bytes = [b"P5\n2 1\n65535\n".as_slice(), &[0x7f, 0xff, 0x80, 0x00]].concat();
        let g = read_pgm(&bytes).unwrap();
        assert_eq!(g.iter_ones().collect::<Vec<_>>(), vec![1]);
        let out = write_pgm_gray(2, 1, 65535, &[0x7fff, 0x8000]).unwrap();
        assert_eq!(out, bytes);
    }

    #[test]
    fn truncated_payload_names_counts() {
        let err = read_pgm(b"P5\n2 2\n255\n\x00\xff\xff").unwrap_err();
        match err {
            Error::Truncated {
                expected, actual, ..
            } => assert_eq!((expected, actual), (4, 3)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_text(b"P5\n2 2\n255\n\x00").contains("expected 4 payload bytes, found 1"));
        assert!(matches!(
            read_pgm(b"P2 2 2 255 0 1 1"),
            Err(Error::Truncated { expected: 4, actual: 3, .. })
        ));
    }

    fn err_text(bytes: &[u8]) -> String {
        read_pgm(bytes).unwrap_err().to_string()
    }

    #[test]
    fn malformed_headers() {
        assert!(err_text(b"P6\n2 2\n255\n").contains("magic"));
        assert!(err_text(b"").contains("magic"));
        assert!(err_text(b"P5\n2 x\n255\n").contains("byte 5"));
        assert!(err_text(b"P5\n2 2\n").contains("maxval"));
        assert!(err_text(b"P5\n0 2\n255\n").contains("zero dimension"));
        assert!(err_text(b"P5\n1 1\n70000\n\x00").contains("maxval"));
        assert!(err_text(b"P2 1 1 10 11").contains("exceeds maxval"));
    }

    #[test]
    fn writes_binary_p5() {
        assert_eq!(write_pgm(&diag()), b"P5\n2 2\n255\n\x00\xff\xff\x00".to_vec());
    }

    proptest! {
        #[test]
        fn pgm_round_trip(h in 1usize..40, w in 1usize..90, seed in any::<u64>()) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let g = BitGrid::from_fn(h, w, |_, _| rng.below(2) == 1).unwrap();
            prop_assert_eq!(read_pgm(&write_pgm(&g)).unwrap(), g);
        }
    }
}
