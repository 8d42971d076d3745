//! Raster containers, image loading and boundary tracing.
//!
//! Coordinates follow the image convention: `x` grows to the right, `y` grows
//! downwards and pixel `(x, y)` has its centre at the real point `(x, y)`.
//! Contour vertices therefore sit on half-integer positions (pixel corners).

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Integer pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Single-channel image with real-valued intensities, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} samples for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Minimum and maximum intensity.
    pub fn range(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Boolean raster; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Like [`get`](Self::get) but treats everything outside the raster as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Closed outer boundary of a connected region.
///
/// Vertices are pixel corners visited in unit steps. The polygon is oriented so
/// that its shoelace area is positive and equals the pixel count of a region
/// without holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<(f64, f64)>,
}

impl Contour {
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shoelace area (positive for the tracing orientation used here).
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        0.5 * s
    }
}

/// Luminance of an RGB triple.
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Loads a PNG or PGM file as a gray image with values in 0..=255.
///
/// Colour input is reduced with [`luminance`] and rounded to the nearest
/// integer level. Alpha channels are ignored.
pub fn load_gray_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    from_dynamic(&img).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Converts a decoded image into a [`GrayImage`].
pub fn from_dynamic(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as f64).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| p.0[0] as f64).collect(),
        DynamicImage::ImageRgb8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]).round())
            .collect(),
        DynamicImage::ImageRgba8(b) => b
            .pixels()
            .map(|p| luminance(p.0[0], p.0[1], p.0[2]).round())
            .collect(),
        other => {
            return Err(Error::Format(format!(
                "unsupported pixel layout {:?}; expected 8-bit gray or RGB",
                other.color()
            )))
        }
    };
    GrayImage::new(w, h, data)
}

const CRACK_DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Traces the outer boundary of the 8-connected component containing `seed`.
pub fn trace_contour(mask: &BinaryMask, seed: PixelCoord) -> Result<Contour> {
    if seed.x >= mask.width() || seed.y >= mask.height() {
        return Err(Error::invalid(format!(
            "seed ({}, {}) lies outside the {}x{} mask",
            seed.x,
            seed.y,
            mask.width(),
            mask.height()
        )));
    }
    if !mask.get(seed.x, seed.y) {
        return Err(Error::invalid(format!(
            "seed ({}, {}) is not a foreground pixel",
            seed.x, seed.y
        )));
    }
    let start = topmost_leftmost(mask, seed);
    Ok(crack_boundary(mask, start))
}

fn topmost_leftmost(mask: &BinaryMask, seed: PixelCoord) -> PixelCoord {
    let w = mask.width();
    let mut seen = vec![false; w * mask.height()];
    let mut stack = vec![seed];
    seen[seed.y * w + seed.x] = true;
    let mut best = seed;
    while let Some(p) = stack.pop() {
        if (p.y, p.x) < (best.y, best.x) {
            best = p;
        }
        for (nx, ny) in neighbours8(p, mask.width(), mask.height()) {
            let i = ny * w + nx;
            if !seen[i] && mask.bits[i] {
                seen[i] = true;
                stack.push(PixelCoord::new(nx, ny));
            }
        }
    }
    best
}

pub(crate) fn neighbours8(
    p: PixelCoord,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> {
    let (x, y) = (p.x as i64, p.y as i64);
    (-1i64..=1)
        .flat_map(move |dy| (-1i64..=1).map(move |dx| (x + dx, y + dy)))
        .filter(move |&(nx, ny)| {
            (nx, ny) != (x, y) && nx >= 0 && ny >= 0 && nx < width as i64 && ny < height as i64
        })
        .map(|(nx, ny)| (nx as usize, ny as usize))
}

/// Crack-following trace starting on the top edge of `start`, which must be the
/// topmost-leftmost pixel of its component. Foreground stays on the right-hand
/// side of the walk (screen orientation).
pub(crate) fn crack_boundary(mask: &BinaryMask, start: PixelCoord) -> Contour {
    let pixel_in_quadrant = |vx: i64, vy: i64, sx: i64, sy: i64| {
        let px = if sx > 0 { vx } else { vx - 1 };
        let py = if sy > 0 { vy } else { vy - 1 };
        mask.get_signed(px, py)
    };
    let v0 = (start.x as i64, start.y as i64);
    let mut v = v0;
    let mut dir = 0usize;
    let mut pts = Vec::new();
    loop {
        pts.push((v.0 as f64 - 0.5, v.1 as f64 - 0.5));
        let (dx, dy) = CRACK_DIRS[dir];
        v = (v.0 + dx, v.1 + dy);
        let (dx, dy) = CRACK_DIRS[dir];
        let (rx, ry) = (-dy, dx);
        let (lx, ly) = (dy, -dx);
        let ahead_left = pixel_in_quadrant(v.0, v.1, dx + lx, dy + ly);
        let ahead_right = pixel_in_quadrant(v.0, v.1, dx + rx, dy + ry);
        dir = if ahead_left {
            (dir + 3) % 4
        } else if ahead_right {
            dir
        } else {
            (dir + 1) % 4
        };
        if v == v0 && dir == 0 {
            break;
        }
    }
    Contour { points: pts }
}

const MOORE_DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Freeman chain code counts of the pixel-centre boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainCounts {
    /// Horizontal and vertical steps.
    pub axial: usize,
    /// Diagonal steps.
    pub diagonal: usize,
}

/// Moore-neighbour trace over pixel centres from the topmost-leftmost pixel.
pub(crate) fn moore_chain(mask: &BinaryMask, start: PixelCoord) -> ChainCounts {
    let s = (start.x as i64, start.y as i64);
    let mut counts = ChainCounts::default();
    let mut c = s;
    let mut back = 4usize;
    let mut first: Option<usize> = None;
    loop {
        let mut found = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let (dx, dy) = MOORE_DIRS[d];
            if mask.get_signed(c.0 + dx, c.1 + dy) {
                found = Some(d);
                break;
            }
        }
        let Some(d) = found else {
            return counts;
        };
        if c == s {
            match first {
                None => first = Some(d),
                Some(f) if f == d => return counts,
                _ => {}
            }
        }
        if d % 2 == 0 {
            counts.axial += 1;
        } else {
            counts.diagonal += 1;
        }
        let prev = MOORE_DIRS[(d + 7) % 8];
        let step = MOORE_DIRS[d];
        let rel = (prev.0 - step.0, prev.1 - step.1);
        back = MOORE_DIRS.iter().position(|&m| m == rel).unwrap_or(4);
        c = (c.0 + step.0, c.1 + step.1);
    }
}
