//! Portable float map. Rows are stored bottom row first; a negative scale
//! marks little-endian data, which is what the writer always emits.

use std::path::Path;

use super::{canonicalize, read_file, write_file, FloatMap, FormatError};

const KIND: &str = "PFM";

pub fn encode_pfm(map: &FloatMap) -> Result<Vec<u8>, FormatError> {
    let magic = match map.channels {
        1 => "Pf",
        3 => "PF",
        channels => {
            return Err(FormatError::UnsupportedChannels {
                kind: KIND,
                channels,
            })
        }
    };
    let header = format!("{magic}\n{} {}\n-1.0\n", map.width, map.height);
    let row_len = map.width * map.channels;
    let mut out = Vec::with_capacity(header.len() + map.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for row in (0..map.height).rev() {
        for value in &map.data[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&canonicalize(*value).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatMap, FormatError> {
    let mut cursor = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while cursor < bytes.len() && bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        let start = cursor;
        while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
            cursor += 1;
        }
        if start == cursor {
            return Err(FormatError::malformed(KIND, "truncated header"));
        }
        let token = std::str::from_utf8(&bytes[start..cursor])
            .map_err(|_| FormatError::malformed(KIND, "non-ASCII header"))?;
        tokens.push(token);
    }
    // exactly one whitespace byte separates the header from the raster
    if cursor >= bytes.len() {
        return Err(FormatError::malformed(KIND, "missing raster"));
    }
    cursor += 1;

    let channels = match tokens[0] {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(FormatError::malformed(KIND, format!("bad magic `{other}`"))),
    };
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| FormatError::malformed(KIND, format!("bad dimension `{s}`")))
    };
    let width = parse_dim(tokens[1])?;
    let height = parse_dim(tokens[2])?;
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| FormatError::malformed(KIND, format!("bad scale `{}`", tokens[3])))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::malformed(KIND, "scale must be non-zero"));
    }
    let little_endian = scale < 0.0;

    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FormatError::malformed(KIND, "dimensions overflow"))?;
    let raster = &bytes[cursor..];
    if raster.len() != count * 4 {
        return Err(FormatError::malformed(
            KIND,
            format!("expected {} raster bytes, found {}", count * 4, raster.len()),
        ));
    }
    let row_len = width * channels;
    let mut data = vec![0f32; count];
    for (file_row, chunk) in raster.chunks_exact(row_len.max(1) * 4).enumerate() {
        let row = height - 1 - file_row;
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let b = [b[0], b[1], b[2], b[3]];
            data[row * row_len + i] = if little_endian {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    FloatMap::new(width, height, channels, data)
}

pub fn write_pfm(map: &FloatMap, path: &Path) -> Result<(), FormatError> {
    write_file(path, &encode_pfm(map)?)
}

pub fn read_pfm(path: &Path) -> Result<FloatMap, FormatError> {
    decode_pfm(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::canonical_nan;

    #[test]
    fn byte_layout_single_channel() {
        let map = FloatMap::new(2, 1, 1, vec![1.5, -2.0]).unwrap();
        let bytes = encode_pfm(&map).unwrap();
        let mut expected = b"Pf\n2 1\n-1.0\n".to_vec();
        expected.extend_from_slice(&[0x00, 0x00, 0xC0, 0x3F]);
        expected.extend_from_slice(&[0x00, 0x00, 0x00, 0xC0]);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rows_are_flipped() {
        let map = FloatMap::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let bytes = encode_pfm(&map).unwrap();
        let raster = &bytes[bytes.len() - 8..];
        assert_eq!(&raster[..4], &2f32.to_le_bytes());
        assert_eq!(&raster[4..], &1f32.to_le_bytes());
        assert!(decode_pfm(&bytes).unwrap().bit_eq(&map));
    }

    #[test]
    fn three_channels_and_nan() {
        let map = FloatMap::new(2, 2, 3, (0..12).map(|i| i as f32 * 0.25).collect()).unwrap();
        let mut with_nan = map.clone();
        with_nan.data[4] = f32::from_bits(0x7FC0_1234);
        let back = decode_pfm(&encode_pfm(&with_nan).unwrap()).unwrap();
        assert_eq!(back.data[4].to_bits(), canonical_nan().to_bits());
        assert_eq!(&back.data[..4], &map.data[..4]);
    }

    #[test]
    fn big_endian_input_is_accepted() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.25f32.to_be_bytes());
        assert_eq!(decode_pfm(&bytes).unwrap().data, vec![3.25]);
    }

    #[test]
    fn rejects_bad_input() {
        let flow = FloatMap::filled(1, 1, 2, 0.0);
        assert!(matches!(
            encode_pfm(&flow),
            Err(FormatError::UnsupportedChannels { channels: 2, .. })
        ));
        let mut bad = b"PX\n1 1\n-1.0\n".to_vec();
        bad.extend_from_slice(&[0; 4]);
        assert!(matches!(decode_pfm(&bad), Err(FormatError::Malformed { .. })));
        assert!(decode_pfm(b"Pf\n1 1\n-1.0\n\0\0").is_err());
        assert!(decode_pfm(b"Pf\n1").is_err());
    }
}
