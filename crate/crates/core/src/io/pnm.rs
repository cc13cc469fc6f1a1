//! Binary PPM (P6) images and PGM (P5) masks, maxval 255.

use std::path::Path;

use super::{read_file, to_byte, write_file, FormatError, Mask, RgbImage};

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width, image.height);
    let mut out = Vec::with_capacity(header.len() + image.pixels.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for px in &image.pixels {
        out.extend(px.iter().map(|c| to_byte(*c)));
    }
    out
}

pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", mask.width, mask.height);
    let mut out = Vec::with_capacity(header.len() + mask.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(mask.data.iter().map(|b| if *b { 255u8 } else { 0 }));
    out
}

fn decode_pnm<'a>(bytes: &'a [u8], magic: &str, kind: &'static str) -> Result<(usize, usize, &'a [u8]), FormatError> {
    let mut cursor = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if cursor < bytes.len() && bytes[cursor] == b'#' {
            while cursor < bytes.len() && bytes[cursor] != b'\n' {
                cursor += 1;
            }
            continue;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err(FormatError::malformed(kind, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
    }
    cursor += 1;
    if tokens[0] != magic {
        return Err(FormatError::malformed(kind, format!("bad magic `{}`", tokens[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| FormatError::malformed(kind, format!("bad header value `{s}`")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(FormatError::malformed(kind, format!("unsupported maxval {maxval}")));
    }
    Ok((width, height, bytes.get(cursor..).unwrap_or(&[])))
}

/// Reads a P5 mask; any non-zero byte is `true`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Mask, FormatError> {
    let (width, height, raster) = decode_pnm(bytes, "P5", "PGM")?;
    if raster.len() != width * height {
        return Err(FormatError::malformed("PGM", "raster size mismatch"));
    }
    Ok(Mask {
        width,
        height,
        data: raster.iter().map(|b| *b != 0).collect(),
    })
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, FormatError> {
    let (width, height, raster) = decode_pnm(bytes, "P6", "PPM")?;
    if raster.len() != width * height * 3 {
        return Err(FormatError::malformed("PPM", "raster size mismatch"));
    }
    let pixels = raster
        .chunks_exact(3)
        .map(|c| [c[0] as f64 / 255.0, c[1] as f64 / 255.0, c[2] as f64 / 255.0])
        .collect();
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

pub fn write_ppm(image: &RgbImage, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_ppm(image))
}

pub fn write_pgm(mask: &Mask, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_pgm(mask))
}

pub fn read_pgm(path: &Path) -> Result<Mask, FormatError> {
    decode_pgm(&read_file(path)?)
}

pub fn read_ppm(path: &Path) -> Result<RgbImage, FormatError> {
    decode_ppm(&read_file(path)?)
}
