//! 8-bit raster images with binary PGM (P5) / PPM (P6) I/O.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    /// All-black image.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::from_pixels(width, height, channels, vec![0; width * height * channels])
    }

    pub fn from_pixels(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(domain(format!("channels must be 1 or 3, got {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(domain(format!(
                "pixel buffer has {} samples, expected {}x{}x{}",
                pixels.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self { width, height, channels, pixels })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::from_pixels(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.pixels[(y * self.width + x) * self.channels + c] = v;
    }

    /// Samples of pixel `(x, y)`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    /// Expands a gray image to three channels; RGB is returned unchanged.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, pixels }
    }

    pub fn write_pnm<W: Write>(&self, mut w: W) -> Result<()> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        write!(w, "{magic}\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_pnm(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_pnm<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let magic = next_token(&mut r)?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(Error::Format(format!("unsupported PNM magic {other:?}"))),
        };
        let width = parse_header_int(&mut r, "width")?;
        let height = parse_header_int(&mut r, "height")?;
        let maxval = parse_header_int(&mut r, "maxval")?;
        if maxval != 255 {
            return Err(Error::Format(format!("only 8-bit PNM supported, maxval={maxval}")));
        }
        let mut pixels = vec![0u8; width * height * channels];
        r.read_exact(&mut pixels)
            .map_err(|e| Error::Format(format!("truncated PNM payload: {e}")))?;
        Self::from_pixels(width, height, channels, pixels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_pnm(std::fs::File::open(path)?)
    }
}

fn parse_header_int<R: BufRead>(r: &mut R, what: &str) -> Result<usize> {
    let tok = next_token(r)?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad PNM {what}: {tok:?}")))
}

/// Reads one whitespace-delimited header token, skipping `#` comments. The
/// single whitespace byte after the token is consumed, which is exactly what
/// the format requires before the binary payload.
fn next_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("unexpected end of PNM header".into()));
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut sink = Vec::new();
                r.read_until(b'\n', &mut sink)?;
            }
            b if b.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            b => tok.push(b),
        }
    }
    String::from_utf8(tok).map_err(|_| Error::Format("non-ascii PNM header".into()))
}
