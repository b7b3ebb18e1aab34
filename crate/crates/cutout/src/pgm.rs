//! 16-bit binary portable graymaps.

use crate::CutoutError;

pub const MAX_VALUE: u16 = u16::MAX;

/// Row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gray16 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl Gray16 {
    pub fn new(width: usize, height: usize, fill: u16) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: u16) {
        self.data[row * self.width + col] = v;
    }

    pub fn invert(&mut self) {
        self.data.iter_mut().for_each(|p| *p = MAX_VALUE - *p);
    }

    /// `P5` with maxval 65535, big-endian samples.
    pub fn to_p5(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, MAX_VALUE).into_bytes();
        out.reserve(self.data.len() * 2);
        for p in &self.data {
            out.extend_from_slice(&p.to_be_bytes());
        }
        out
    }

    pub fn from_p5(bytes: &[u8]) -> Result<Self, CutoutError> {
        let bad = |m: &str| CutoutError::Format(m.to_string());
        let mut fields = Vec::new();
        let mut i = 0;
        while fields.len() < 4 {
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a binary graymap"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
            return Err(bad("bad dimensions or maxval"));
        }
        // exactly one whitespace byte separates header and raster
        let body = &bytes[i + 1..];
        let n = width * height;
        let data: Vec<u16> = if maxval < 256 {
            if body.len() < n {
                return Err(bad("truncated raster"));
            }
            body[..n].iter().map(|&b| b as u16).collect()
        } else {
            if body.len() < 2 * n {
                return Err(bad("truncated raster"));
            }
            body[..2 * n].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        };
        Ok(Self { width, height, data })
    }
}
