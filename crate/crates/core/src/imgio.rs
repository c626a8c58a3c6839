//! Grayscale image container, netpbm (PGM/PPM) codec and subpixel sampling.
//!
//! Intensities are kept as `f64` in `[0, 255]` so interpolation and filtering
//! never quantize. Decoding accepts P2/P3/P5/P6 with `maxval <= 255`; encoding
//! always produces binary P5/P6.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("truncated payload at byte {offset}: expected {expected} samples, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("maxval {maxval} at byte {offset} exceeds 255")]
    MaxVal { offset: usize, maxval: u32 },
    #[error("invalid sample at byte {offset}")]
    Sample { offset: usize },
    #[error("image dimensions must be positive, got {width}x{height}")]
    Dimensions { width: usize, height: usize },
    #[error("data length {len} does not match {width}x{height}")]
    DataLength {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("intensity {value} at index {index} outside [0, 255]")]
    Intensity { index: usize, value: f64 },
    #[error("point ({x}, {y}) outside sampling domain [0, {max_x}] x [0, {max_y}]")]
    OutOfBounds {
        x: f64,
        y: f64,
        max_x: f64,
        max_y: f64,
    },
}

/// Subpixel image coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Row-major grayscale image with real-valued intensities in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Dimensions { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::DataLength {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=255.0).contains(*v))
        {
            return Err(ImageError::Intensity { index, value });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Uniform image filled with `value` (clamped into range).
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value.clamp(0.0, 255.0); width * height])
    }

    /// Builds an image by evaluating `f(x, y)`; results are clamped to `[0, 255]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 255.0));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    /// Bilinear interpolation of the four surrounding pixels.
    pub fn sample_bilinear(&self, p: Point2) -> Result<f64, ImageError> {
        if !p.is_finite() || !self.contains(&p) {
            return Err(ImageError::OutOfBounds {
                x: p.x,
                y: p.y,
                max_x: (self.width - 1) as f64,
                max_y: (self.height - 1) as f64,
            });
        }
        Ok(self.sample_unchecked(p.x, p.y))
    }

    /// Bilinear sample for an in-bounds coordinate; callers guarantee the range.
    #[inline]
    pub(crate) fn sample_unchecked(&self, x: f64, y: f64) -> f64 {
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// RGB color for overlays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const GREEN: Rgb = Rgb(0, 255, 0);
    pub const BLUE: Rgb = Rgb(0, 0, 255);
    pub const YELLOW: Rgb = Rgb(255, 255, 0);
}

/// Line segment drawn on top of an encoded image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlay {
    pub from: Point2,
    pub to: Point2,
    pub color: Rgb,
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Encodes as binary PGM (P5).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| to_u8(v)));
    out
}

/// Encodes as binary PPM (P6) with gray replicated to all channels and the
/// overlay segments rasterized on top, in order.
pub fn encode_ppm(img: &GrayImage, overlay: &[Overlay]) -> Vec<u8> {
    let mut rgb: Vec<u8> = Vec::with_capacity(img.data.len() * 3);
    for &v in &img.data {
        let g = to_u8(v);
        rgb.extend_from_slice(&[g, g, g]);
    }
    for seg in overlay {
        rasterize(&mut rgb, img.width, img.height, seg);
    }
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&rgb);
    out
}

fn rasterize(rgb: &mut [u8], width: usize, height: usize, seg: &Overlay) {
    let len = seg.from.dist(&seg.to);
    let steps = len.ceil().max(0.0) as usize;
    for k in 0..=steps {
        let t = if steps == 0 { 0.0 } else { k as f64 / steps as f64 };
        let p = seg.from.lerp(&seg.to, t);
        let (x, y) = (p.x.round(), p.y.round());
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            continue;
        }
        let idx = 3 * (y as usize * width + x as usize);
        rgb[idx] = seg.color.0;
        rgb[idx + 1] = seg.color.1;
        rgb[idx + 2] = seg.color.2;
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn header_int(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Header {
                offset: start,
                reason: format!("expected {what}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Header {
                offset: start,
                reason: format!("{what} out of range"),
            })
    }
}

/// Decodes P2/P3/P5/P6 into a grayscale image. Color is reduced with
/// BT.601 luma (0.299 R + 0.587 G + 0.114 B).
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImageError::Header {
            offset: 0,
            reason: "missing netpbm magic".into(),
        });
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        b'6' => (3, true),
        _ => {
            return Err(ImageError::Header {
                offset: 1,
                reason: "unsupported netpbm type".into(),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_int("width")? as usize;
    let height = cur.header_int("height")? as usize;
    let maxval_offset = {
        cur.skip_ws_and_comments();
        cur.pos
    };
    let maxval = cur.header_int("maxval")?;
    if maxval > 255 {
        return Err(ImageError::MaxVal {
            offset: maxval_offset,
            maxval,
        });
    }
    if maxval == 0 {
        return Err(ImageError::Header {
            offset: maxval_offset,
            reason: "maxval must be positive".into(),
        });
    }
    if width == 0 || height == 0 {
        return Err(ImageError::Dimensions { width, height });
    }
    let expected = width * height * channels;
    let samples: Vec<u32> = if binary {
        // exactly one whitespace byte separates header and raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(ImageError::Header {
                offset: cur.pos,
                reason: "missing whitespace before raster".into(),
            });
        }
        let start = cur.pos + 1;
        let body = &bytes[start.min(bytes.len())..];
        if body.len() < expected {
            return Err(ImageError::Truncated {
                offset: bytes.len(),
                expected,
                found: body.len(),
            });
        }
        body[..expected].iter().map(|&b| b as u32).collect()
    } else {
        let mut out = Vec::with_capacity(expected);
        for _ in 0..expected {
            cur.skip_ws_and_comments();
            if cur.pos >= bytes.len() {
                return Err(ImageError::Truncated {
                    offset: bytes.len(),
                    expected,
                    found: out.len(),
                });
            }
            let offset = cur.pos;
            let v = cur
                .header_int("sample")
                .map_err(|_| ImageError::Sample { offset })?;
            out.push(v);
        }
        out
    };
    let scale = 255.0 / maxval as f64;
    let mut data = Vec::with_capacity(width * height);
    for (i, px) in samples.chunks_exact(channels).enumerate() {
        if px.iter().any(|&v| v > maxval) {
            return Err(ImageError::Sample { offset: i });
        }
        let v = if channels == 1 {
            px[0] as f64
        } else {
            0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64
        };
        data.push((v * scale).clamp(0.0, 255.0));
    }
    GrayImage::new(width, height, data)
}
