//! Binary PGM (P5) masks and PPM (P6) images.
//!
//! Headers may contain `#` comments. Samples are one byte when `maxval < 256`
//! and two big-endian bytes otherwise. A mask pixel is set when nonzero.

use crate::metrics::{BinaryMask, ImageRaster};
use crate::{Error, Result};

struct Header {
    width: u32,
    height: u32,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::Parse(format!("expected {} magic", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        // Whitespace and comments before each number.
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
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *field = digits
            .parse()
            .map_err(|_| Error::Parse(format!("bad header number at byte {start}")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse("header must end with one whitespace byte".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Parse("image dimensions must be positive".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("maxval {maxval} out of range")));
    }
    Ok(Header {
        width,
        height,
        maxval,
        data_start: pos,
    })
}

/// Samples as `u16`, after checking the payload length exactly.
fn samples(bytes: &[u8], h: &Header, channels: u64) -> Result<Vec<u16>> {
    let wide = h.maxval > 255;
    let need = (u64::from(h.width) * u64::from(h.height))
        .checked_mul(channels * if wide { 2 } else { 1 })
        .ok_or_else(|| Error::Parse("raster size overflows".into()))?;
    let have = (bytes.len() - h.data_start) as u64;
    if have != need {
        return Err(Error::Parse(format!(
            "{}x{} raster needs {need} data bytes, got {have}",
            h.width, h.height
        )));
    }
    let data = &bytes[h.data_start..];
    Ok(if wide {
        data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()
    } else {
        data.iter().map(|&b| u16::from(b)).collect()
    })
}

pub fn parse_pgm_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let h = parse_header(bytes, b"P5")?;
    let bits = samples(bytes, &h, 1)?.into_iter().map(|s| s != 0).collect();
    Ok(BinaryMask {
        width: h.width,
        height: h.height,
        bits,
    })
}

/// Parses an RGB image, rescaling samples to 8 bits.
pub fn parse_ppm(bytes: &[u8]) -> Result<ImageRaster> {
    let h = parse_header(bytes, b"P6")?;
    let max = u32::from(h.maxval as u16);
    let pixels = samples(bytes, &h, 3)?
        .into_iter()
        .map(|s| ((u32::from(s).min(max) * 255 + max / 2) / max) as u8)
        .collect();
    ImageRaster::rgb8(h.width, h.height, pixels)
}

/// Writes a mask as an 8-bit PGM with set pixels at 255.
pub fn write_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}
