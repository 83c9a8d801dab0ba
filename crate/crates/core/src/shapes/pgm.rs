use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grayscale image with row-major intensities in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image", "width and height must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::param(
                "image",
                format!("{} pixels for a {width}x{height} image", pixels.len()),
            ));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param("image", format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Intensity at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Reads a P2 or P5 PGM file.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&bytes, path)
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
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok().filter(|t| !t.is_empty())
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::format(path, None, format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::format(path, None, format!("bad {what} `{tok}`")))
    }
}

pub fn parse_pgm(bytes: &[u8], path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token().map(str::to_owned);
    let binary = match magic.as_deref() {
        Some("P2") => false,
        Some("P5") => true,
        _ => return Err(Error::format(path, None, "not a P2/P5 PGM file")),
    };
    let width = cur.number(path, "width")?;
    let height = cur.number(path, "height")?;
    let maxval = cur.number(path, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(path, None, "zero image size"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, None, format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut raw = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = cur.pos + 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes
            .get(start..start + need)
            .ok_or_else(|| Error::format(path, None, "truncated raster"))?;
        if wide {
            raw.extend(data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize));
        } else {
            raw.extend(data.iter().map(|&b| b as usize));
        }
    } else {
        for _ in 0..count {
            raw.push(cur.number(path, "pixel value")?);
        }
    }
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(Error::format(path, None, format!("pixel value {v} exceeds maxval {maxval}")));
    }
    let pixels = raw.into_iter().map(|v| v as f64 / maxval as f64).collect();
    GrayImage::new(width, height, pixels)
}

/// Writes a P2 image with maxval 255.
pub fn write_pgm_ascii(img: &GrayImage) -> String {
    let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
    for row in img.pixels.chunks(img.width) {
        let line: Vec<String> = row.iter().map(|v| ((v * 255.0).round() as u32).to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
