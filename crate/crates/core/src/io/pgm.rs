//! Binary PGM (P5, maxval 255).

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Parses P5 bytes. Header comments (`#` to end of line) are skipped.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Grid<u8>> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format_err(path, format!("magic '{}' is not P5", fields[0])));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad {what} '{s}'")))
    };
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format_err(path, format!("maxval {maxval} unsupported, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(format_err(
            path,
            format!("raster holds {} bytes, expected {n}", bytes.len().saturating_sub(pos)),
        ));
    }
    Grid::from_vec(height, width, bytes[pos..pos + n].to_vec())
}

pub fn encode_pgm(img: &Grid<u8>, comment: Option<&str>) -> Vec<u8> {
    let mut out = b"P5\n".to_vec();
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", img.cols(), img.rows()).as_bytes());
    out.extend_from_slice(img.as_slice());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Grid<u8>, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(img, comment)).map_err(|e| Error::io(path, e))
}

/// Min-max rescale to 0..=255 for viewing. Constant inputs render mid-gray.
pub fn render_minmax(values: &Grid<f64>) -> Grid<u8> {
    let (lo, hi) = values
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return values.map(|_| 128);
    }
    values.map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comment() {
        let img = Grid::from_fn(3, 5, |r, c| (r * 50 + c) as u8);
        let bytes = encode_pgm(&img, Some("config_hash=abc"));
        assert_eq!(decode_pgm(&bytes, Path::new("x")).unwrap(), img);
    }

    #[test]
    fn rejects_p2() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0", Path::new("x")).is_err());
    }

    #[test]
    fn rejects_short_raster() {
        assert!(decode_pgm(b"P5\n4 4\n255\n\x00\x01", Path::new("x")).is_err());
    }
}
