//! Binary (P5) and plain (P2) graymap reading; binary writing.

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray8 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(Error::data(path, "not a P2/P5 graymap"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::data(path, "truncated graymap header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::data(path, "bad number in graymap header"))?;
    }
    // exactly one whitespace byte separates the header from binary data
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::data(path, "missing whitespace after graymap header"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::data(path, format!("bad graymap geometry {width}x{height}, maxval {maxval}")));
    }
    Ok(Header {
        magic: [bytes[0], bytes[1]],
        width,
        height,
        maxval: maxval as u32,
        data_start: pos + 1,
    })
}

/// Decodes a graymap, rescaling samples to `[0, 255]` when `maxval != 255`.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    Ok(decode_with_size(bytes, path)?.2)
}

pub(crate) fn decode_with_size(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let h = parse_header(bytes, path)?;
    let n = h.width * h.height;
    let scale = 255.0 / h.maxval as f64;
    let body = &bytes[h.data_start..];
    let samples: Vec<u32> = if h.magic[1] == b'5' {
        if h.maxval < 256 {
            if body.len() < n {
                return Err(Error::data(path, "truncated graymap data"));
            }
            body[..n].iter().map(|&b| b as u32).collect()
        } else {
            if body.len() < 2 * n {
                return Err(Error::data(path, "truncated graymap data"));
            }
            body[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| Error::data(path, "non-ascii P2 data"))?;
        let v: Vec<u32> = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::data(path, "bad P2 sample"))?;
        if v.len() < n {
            return Err(Error::data(path, "truncated graymap data"));
        }
        v
    };
    if samples.iter().any(|&s| s > h.maxval) {
        return Err(Error::data(path, "sample exceeds maxval"));
    }
    let values = samples.iter().map(|&s| s as f64 * scale).collect();
    Ok((h.width, h.height, values))
}

pub fn encode(img: &Gray8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}
