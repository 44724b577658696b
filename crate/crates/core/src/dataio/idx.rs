//! IDX container parsing (the MNIST file format).
//!
//! Layout: big-endian `u32` magic, big-endian `u32` dimension sizes, then the
//! unsigned-byte payload in row-major order.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::vector::Vec64;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Header {
    dims: Vec<usize>,
    payload_offset: usize,
}

fn read_header(bytes: &[u8], magic: u32, ndims: usize) -> Result<Header> {
    let header_len = 4 * (1 + ndims);
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let found = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let dims = bytes[4..header_len]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    Ok(Header {
        dims,
        payload_offset: header_len,
    })
}

fn payload<'a>(bytes: &'a [u8], header: &Header) -> Result<&'a [u8]> {
    let expected = header
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parse("IDX dimensions overflow".into()))?;
    let body = &bytes[header.payload_offset..];
    if body.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: body.len(),
        });
    }
    if body.len() > expected {
        return Err(Error::TrailingBytes(body.len() - expected));
    }
    Ok(body)
}

/// Parses an image file into `count` vectors of `rows * cols` pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec64>> {
    let header = read_header(bytes, IMAGES_MAGIC, 3)?;
    let body = payload(bytes, &header)?;
    let pixels = header.dims[1] * header.dims[2];
    if pixels == 0 {
        return Ok(vec![Vec64::zeros(0); header.dims[0]]);
    }
    Ok(body
        .chunks_exact(pixels)
        .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect::<Vec<_>>().into())
        .collect())
}

/// Parses a label file into digits `0..=9`.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let header = read_header(bytes, LABELS_MAGIC, 1)?;
    let body = payload(bytes, &header)?;
    if let Some(index) = body.iter().position(|&d| d > 9) {
        return Err(Error::LabelOutOfRange {
            index,
            value: body[index],
        });
    }
    Ok(body.to_vec())
}

/// Reads a file, inflating it when it carries a gzip header.
pub fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}
