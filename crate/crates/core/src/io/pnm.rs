//! Binary PNM: `P5` grayscale and `P6` color, maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{ColorImage, ScalarVolume};

#[derive(Debug, Clone, PartialEq)]
pub enum Pnm {
    Gray(ScalarVolume),
    Color(ColorImage),
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("malformed PNM header"))
    }
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Pnm> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<Pnm> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'6') {
        return Err(Error::format("not a binary PNM (expected P5 or P6 magic)"));
    }
    let color = bytes[1] == b'6';
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported maxval {maxval}")));
    }
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format("truncated PNM header"));
    }
    let payload = &bytes[cur.pos + 1..];
    let channels = if color { 3 } else { 1 };
    let expected = width * height * channels;
    if payload.len() < expected {
        return Err(Error::format(format!(
            "truncated PNM payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    let payload = &payload[..expected];
    if color {
        Ok(Pnm::Color(ColorImage::new(width, height, payload.to_vec())?))
    } else {
        Ok(Pnm::Gray(ScalarVolume::image(
            width,
            height,
            payload.iter().map(|&b| b as f64).collect(),
        )?))
    }
}

/// Reads a color image; grayscale files are replicated into three channels.
pub fn read_color(path: impl AsRef<Path>) -> Result<ColorImage> {
    match read_pnm(path)? {
        Pnm::Color(c) => Ok(c),
        Pnm::Gray(g) => {
            let [w, h, _] = g.dims();
            let data = g.data().iter().flat_map(|&v| [v as u8; 3]).collect();
            ColorImage::new(w, h, data)
        }
    }
}

/// Reads a grayscale image; color files are converted to luminance.
pub fn read_gray(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    match read_pnm(path)? {
        Pnm::Gray(g) => Ok(g),
        Pnm::Color(c) => Ok(c.luminance()),
    }
}

pub fn write_color(img: &ColorImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend_from_slice(img.data());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a 2D scalar image as `P5`, rounding and clamping to `[0, 255]`.
pub fn write_gray(img: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [w, h, d] = img.dims();
    if d != 1 {
        return Err(Error::invalid("PNM output requires a 2D image"));
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(img.data().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn single_red_pixel() {
        let Pnm::Color(c) = decode(b"P6\n1 1\n255\n\xff\x00\x00").unwrap() else {
            panic!("expected color");
        };
        assert_eq!(c.pixel(0, 0), [255, 0, 0]);
    }

    #[test]
    fn gray_with_comment() {
        let Pnm::Gray(g) = decode(b"P5\n# made by hand\n2 2\n255\n\x00\x55\xaa\xff").unwrap() else {
            panic!("expected gray");
        };
        assert_eq!(g.data(), &[0.0, 85.0, 170.0, 255.0]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(decode(b"P3\n1 1\n255\n0 0 0").is_err());
        let err = decode(b"P6\n2 2\n255\n\x00\x00").unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }

    #[test]
    fn color_round_trip() {
        let mut rng = SplitMix64::new(3);
        let data = (0..32 * 32 * 3).map(|_| rng.below(256) as u8).collect();
        let img = ColorImage::new(32, 32, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        write_color(&img, &p).unwrap();
        assert_eq!(read_color(&p).unwrap(), img);
    }
}
