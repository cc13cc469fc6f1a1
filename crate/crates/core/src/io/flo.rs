//! Middlebury `.flo` optical flow: float magic, width, height, then
//! interleaved `(u, v)` pairs, top row first, all little-endian.

use std::path::Path;

use super::{canonicalize, read_file, write_file, FloatMap, FormatError};

pub const FLO_MAGIC: f32 = 202021.25;
const KIND: &str = ".flo";

pub fn encode_flo(map: &FloatMap) -> Result<Vec<u8>, FormatError> {
    if map.channels != 2 {
        return Err(FormatError::UnsupportedChannels {
            kind: KIND,
            channels: map.channels,
        });
    }
    let dims = |n: usize| {
        i32::try_from(n).map_err(|_| FormatError::Dimensions(format!("{n} exceeds i32")))
    };
    let mut out = Vec::with_capacity(12 + map.data.len() * 4);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&dims(map.width)?.to_le_bytes());
    out.extend_from_slice(&dims(map.height)?.to_le_bytes());
    for value in &map.data {
        out.extend_from_slice(&canonicalize(*value).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flo(bytes: &[u8]) -> Result<FloatMap, FormatError> {
    if bytes.len() < 12 {
        return Err(FormatError::malformed(KIND, "truncated header"));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(FormatError::malformed(KIND, format!("bad magic {magic}")));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width < 0 || height < 0 {
        return Err(FormatError::malformed(KIND, "negative dimensions"));
    }
    let (width, height) = (width as usize, height as usize);
    let count = width * height * 2;
    let raster = &bytes[12..];
    if raster.len() != count * 4 {
        return Err(FormatError::malformed(
            KIND,
            format!("expected {} raster bytes, found {}", count * 4, raster.len()),
        ));
    }
    let data = raster
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    FloatMap::new(width, height, 2, data)
}

pub fn write_flo(map: &FloatMap, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_flo(map)?)
}

pub fn read_flo(path: &Path) -> Result<FloatMap, FormatError> {
    decode_flo(&read_file(path)?)
}
