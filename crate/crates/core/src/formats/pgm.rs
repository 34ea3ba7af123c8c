//! Binary PGM (`P5`, maxval 255) for masks: 255 is foreground, 0 background.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

pub fn encode_pgm(mask: &BinaryMask) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", mask.width(), mask.height());
    let mut out = Vec::with_capacity(header.len() + mask.bits().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .filter(|t| !t.is_empty())
    }

    fn number(&mut self) -> Option<usize> {
        self.token()?.parse().ok()
    }
}

/// Decodes a `P5` image. Any nonzero sample counts as foreground.
pub fn decode_pgm(data: &[u8], path: &Path) -> Result<BinaryMask> {
    let bad = |msg: &str| Error::format(path, msg.to_string());
    let mut cur = Cursor { data, pos: 0 };
    if cur.token() != Some("P5") {
        return Err(bad("not a binary PGM (expected magic P5)"));
    }
    let width = cur.number().ok_or_else(|| bad("missing width"))?;
    let height = cur.number().ok_or_else(|| bad("missing height"))?;
    let maxval = cur.number().ok_or_else(|| bad("missing maxval"))?;
    if maxval != 255 {
        return Err(bad("maxval must be 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = cur.pos + 1;
    let expected = width * height;
    if data.len() < start || data.len() - start != expected {
        return Err(bad(&format!(
            "expected {expected} pixel bytes, found {}",
            data.len().saturating_sub(start)
        )));
    }
    let bits = data[start..].iter().map(|&v| v != 0).collect();
    BinaryMask::new(height, width, bits).map_err(|e| bad(&e.to_string()))
}

pub fn read_pgm(path: &Path) -> Result<BinaryMask> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&data, path)
}

pub fn write_pgm(path: &Path, mask: &BinaryMask) -> Result<()> {
    fs::write(path, encode_pgm(mask)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mask = BinaryMask::new(2, 3, vec![true, false, false, false, false, true]).unwrap();
        let bytes = encode_pgm(&mask);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[255, 0, 0, 0, 0, 255]);
    }

    #[test]
    fn accepts_comments_and_rejects_garbage() {
        let data = b"P5 # mask\n2 1\n# c\n255\n\xff\x00";
        let m = decode_pgm(data, Path::new("m.pgm")).unwrap();
        assert_eq!(m.bits(), &[true, false]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0", Path::new("x")).is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00", Path::new("x")).is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00", Path::new("x")).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let bits: Vec<bool> = (0..h * w).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let mask = BinaryMask::new(h, w, bits).unwrap();
            let back = decode_pgm(&encode_pgm(&mask), Path::new("t.pgm")).unwrap();
            prop_assert_eq!(back, mask);
        }
    }
}
