use thiserror::Error;

use super::GrayImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgmError {
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PGM data: expected {expected} bytes of pixel data, found {actual}")]
    TruncatedData { expected: usize, actual: usize },
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read_number(&mut self, what: &str) -> Result<usize, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary (P5) PGM. Images with `maxval != 255` are rescaled
/// linearly to the 0..=255 range.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::MalformedHeader("expected magic number P5".into()));
    }
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.read_number("width")?;
    let height = reader.read_number("height")?;
    let maxval = reader.read_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader(format!("invalid dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::MalformedHeader(format!("invalid maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(PgmError::MalformedHeader("missing whitespace after maxval".into())),
    }

    let npix = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::MalformedHeader("dimensions overflow".into()))?;
    let sample_bytes = if maxval < 256 { 1 } else { 2 };
    let expected = npix * sample_bytes;
    let data = &bytes[reader.pos..];
    if data.len() < expected {
        return Err(PgmError::TruncatedData { expected, actual: data.len() });
    }

    let pixels: Vec<u8> = if sample_bytes == 1 {
        if maxval == 255 {
            data[..npix].to_vec()
        } else {
            data[..npix].iter().map(|&v| rescale(v as usize, maxval)).collect()
        }
    } else {
        data[..expected]
            .chunks_exact(2)
            .map(|c| rescale(u16::from_be_bytes([c[0], c[1]]) as usize, maxval))
            .collect()
    };
    Ok(GrayImage { width, height, pixels })
}

fn rescale(v: usize, maxval: usize) -> u8 {
    let v = v.min(maxval);
    ((v * 255 + maxval / 2) / maxval) as u8
}

/// Encodes an image as a binary PGM with `maxval` 255.
pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
