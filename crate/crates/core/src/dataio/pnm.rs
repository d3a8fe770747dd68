//! Binary PGM (16-bit depth) and PPM (8-bit color) codecs.

use crate::image::{ColorImage, DepthImage, Raster, Rgb};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmHeader {
    pub magic: [u8; 2],
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    /// Byte offset of the first sample.
    pub data_start: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn read_uint(bytes: &[u8], pos: usize) -> Result<(u64, usize), String> {
    let start = skip_space_and_comments(bytes, pos);
    let mut end = start;
    while end < bytes.len() && bytes[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(format!("expected a number at byte {start}"));
    }
    let text = std::str::from_utf8(&bytes[start..end]).map_err(|e| e.to_string())?;
    let v = text.parse::<u64>().map_err(|e| e.to_string())?;
    Ok((v, end))
}

pub fn parse_header(bytes: &[u8]) -> Result<PnmHeader, String> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'6') {
        return Err("bad magic number".into());
    }
    let (width, pos) = read_uint(bytes, 2)?;
    let (height, pos) = read_uint(bytes, pos)?;
    let (maxval, pos) = read_uint(bytes, pos)?;
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("header must end with a single whitespace byte".into());
    }
    if width == 0 || height == 0 {
        return Err(format!("invalid dimensions {width}x{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("invalid maxval {maxval}"));
    }
    Ok(PnmHeader {
        magic: [bytes[0], bytes[1]],
        width: width as usize,
        height: height as usize,
        maxval: maxval as u32,
        data_start: pos + 1,
    })
}

/// 16-bit big-endian PGM with maxval 65535.
pub fn encode_depth_pgm(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 2);
    for &v in img.pixels() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode_depth_pgm(bytes: &[u8]) -> Result<DepthImage, String> {
    let h = parse_header(bytes)?;
    if h.magic != *b"P5" {
        return Err("depth frame must be binary PGM (P5)".into());
    }
    if h.maxval != 65535 {
        return Err(format!("depth frame maxval must be 65535, got {}", h.maxval));
    }
    let n = h.width * h.height;
    let data = &bytes[h.data_start..];
    if data.len() != 2 * n {
        return Err(format!("expected {} data bytes, found {}", 2 * n, data.len()));
    }
    let pixels = data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Raster::new(h.width, h.height, pixels).map_err(|e| e.to_string())
}

/// 8-bit PPM with maxval 255.
pub fn encode_color_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for px in img.pixels() {
        out.extend_from_slice(px);
    }
    out
}

pub fn decode_color_ppm(bytes: &[u8]) -> Result<ColorImage, String> {
    let h = parse_header(bytes)?;
    if h.magic != *b"P6" {
        return Err("color frame must be binary PPM (P6)".into());
    }
    if h.maxval != 255 {
        return Err(format!("color frame maxval must be 255, got {}", h.maxval));
    }
    let n = h.width * h.height;
    let data = &bytes[h.data_start..];
    if data.len() != 3 * n {
        return Err(format!("expected {} data bytes, found {}", 3 * n, data.len()));
    }
    let pixels: Vec<Rgb> = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    Raster::new(h.width, h.height, pixels).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_round_trip_and_byte_order() {
        let img = Raster::new(2, 1, vec![0x0102u16, 65535]).unwrap();
        let bytes = encode_depth_pgm(&img);
        assert!(bytes.starts_with(b"P5\n2 1\n65535\n"));
        assert_eq!(&bytes[bytes.len() - 4..], &[0x01, 0x02, 0xff, 0xff]);
        assert_eq!(decode_depth_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn color_round_trip() {
        let img = Raster::from_fn(3, 2, |x, y| [x as u8, y as u8, 200]);
        assert_eq!(decode_color_ppm(&encode_color_ppm(&img)).unwrap(), img);
    }

    #[test]
    fn comments_in_header() {
        let mut bytes = b"P5\n# made by hand\n1 1\n# another\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xe8]);
        assert_eq!(*decode_depth_pgm(&bytes).unwrap().get(0, 0), 1000);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decode_depth_pgm(b"P2\n1 1\n65535\n00").is_err());
        let mut wrong_max = b"P5\n1 1\n255\n".to_vec();
        wrong_max.push(7);
        assert!(decode_depth_pgm(&wrong_max).unwrap_err().contains("maxval"));
        assert!(decode_depth_pgm(b"P5\n2 2\n65535\n\x00\x01").is_err());
        assert!(decode_color_ppm(b"P6\n0 1\n255\n").is_err());
    }
}
