//! Connected components, cleanup and the isolated/cluster split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{crack_boundary, moore_chain, neighbours8, BinaryMask, Contour, PixelCoord};

/// Scale factor that turns the corner-counting chain length into an unbiased
/// estimate of the boundary length for randomly oriented smooth curves.
const KULPA: f64 = std::f64::consts::PI / (8.0 * (std::f64::consts::SQRT_2 - 1.0));

/// An 8-connected foreground component.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// 1-based label in raster-scan order of first appearance.
    pub label: usize,
    pub pixels: Vec<PixelCoord>,
    pub contour: Contour,
    pub perimeter: f64,
    pub centroid: (f64, f64),
    pub touches_border: bool,
    /// Inclusive bounding box `(min_x, min_y, max_x, max_y)`.
    pub bbox: (usize, usize, usize, usize),
}

impl Region {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Rasterises the region into a mask of the given size.
    pub fn to_mask(&self, width: usize, height: usize) -> BinaryMask {
        let mut m = BinaryMask::new(width, height);
        for p in &self.pixels {
            m.set(p.x, p.y, true);
        }
        m
    }
}

/// Boundary length estimate from pixel-centre chain counts.
pub fn perimeter_from_chain(axial: usize, diagonal: usize) -> f64 {
    KULPA * (axial as f64 + std::f64::consts::SQRT_2 * diagonal as f64 + std::f64::consts::PI)
}

/// Labels the 8-connected components of `mask`.
pub fn label_components(mask: &BinaryMask) -> Vec<Region> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0usize; w * h];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            let label = regions.len() + 1;
            let start = PixelCoord::new(x, y);
            labels[y * w + x] = label;
            stack.push(start);
            let mut pixels = Vec::new();
            while let Some(p) = stack.pop() {
                pixels.push(p);
                for (nx, ny) in neighbours8(p, w, h) {
                    let i = ny * w + nx;
                    if labels[i] == 0 && mask.get(nx, ny) {
                        labels[i] = label;
                        stack.push(PixelCoord::new(nx, ny));
                    }
                }
            }
            pixels.sort_by_key(|p| (p.y, p.x));
            regions.push(build_region(mask, label, start, pixels));
        }
    }
    regions
}

fn build_region(
    mask: &BinaryMask,
    label: usize,
    start: PixelCoord,
    pixels: Vec<PixelCoord>,
) -> Region {
    let (w, h) = (mask.width(), mask.height());
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.x as f64, b + p.y as f64));
    let mut bbox = (usize::MAX, usize::MAX, 0, 0);
    for p in &pixels {
        bbox.0 = bbox.0.min(p.x);
        bbox.1 = bbox.1.min(p.y);
        bbox.2 = bbox.2.max(p.x);
        bbox.3 = bbox.3.max(p.y);
    }
    let touches_border = bbox.0 == 0 || bbox.1 == 0 || bbox.2 == w - 1 || bbox.3 == h - 1;
    let chain = moore_chain(mask, start);
    Region {
        label,
        contour: crack_boundary(mask, start),
        perimeter: perimeter_from_chain(chain.axial, chain.diagonal),
        centroid: (sx / n, sy / n),
        touches_border,
        bbox,
        pixels,
    }
}

/// Filtering applied after labelling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanupParams {
    /// Regions with fewer pixels are discarded.
    pub min_area: usize,
    /// Discard regions touching the image border.
    pub drop_border: bool,
}

impl Default for CleanupParams {
    fn default() -> Self {
        Self {
            min_area: 80,
            drop_border: true,
        }
    }
}

/// Removes small and (optionally) border-touching regions.
pub fn cleanup(regions: Vec<Region>, params: &CleanupParams) -> Vec<Region> {
    regions
        .into_iter()
        .filter(|r| r.area() >= params.min_area && !(params.drop_border && r.touches_border))
        .collect()
}

/// Threshold factor for the isolated/cluster split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitParams {
    pub k: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self { k: 1.4 }
    }
}

/// Regions divided by area relative to the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub isolated: Vec<Region>,
    pub clusters: Vec<Region>,
    pub mean_area: f64,
}

/// Splits regions into isolated cells and clusters: a region is a cluster when
/// its area is at least `k` times the mean area of all regions.
pub fn split_partition(regions: Vec<Region>, k: f64) -> Result<RegionPartition> {
    if regions.is_empty() {
        return Err(Error::invalid("cannot partition an empty region list"));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid("split factor k must be positive"));
    }
    let mean_area = regions.iter().map(|r| r.area() as f64).sum::<f64>() / regions.len() as f64;
    let threshold = mean_area * k;
    let (clusters, isolated) = regions
        .into_iter()
        .partition(|r| r.area() as f64 >= threshold);
    Ok(RegionPartition {
        isolated,
        clusters,
        mean_area,
    })
}
