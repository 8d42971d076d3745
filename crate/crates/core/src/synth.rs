//! Synthetic smear images with known content, used by tests and demos.

use crate::imaging::{BinaryMask, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk {
        cx: f64,
        cy: f64,
        r: f64,
    },
    /// Semi-axes `a` (along `angle`) and `b`.
    Ellipse {
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        angle: f64,
    },
    /// Full side lengths `w` (along `angle`) and `h`.
    Rect {
        cx: f64,
        cy: f64,
        w: f64,
        h: f64,
        angle: f64,
    },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Ellipse {
                cx,
                cy,
                a,
                b,
                angle,
            } => {
                let (u, v) = rotate_into(x - cx, y - cy, angle);
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }
            Shape::Rect {
                cx,
                cy,
                w,
                h,
                angle,
            } => {
                let (u, v) = rotate_into(x - cx, y - cy, angle);
                u.abs() <= w / 2.0 && v.abs() <= h / 2.0
            }
        }
    }

    pub fn center(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { cx, cy, .. }
            | Shape::Ellipse { cx, cy, .. }
            | Shape::Rect { cx, cy, .. } => (cx, cy),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Shape {
        let mut s = *self;
        match &mut s {
            Shape::Disk { cx, cy, .. }
            | Shape::Ellipse { cx, cy, .. }
            | Shape::Rect { cx, cy, .. } => {
                *cx += dx;
                *cy += dy;
            }
        }
        s
    }
}

fn rotate_into(dx: f64, dy: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (dx * c + dy * s, -dx * s + dy * c)
}

/// Pixels whose centres fall inside any of the shapes.
pub fn render_mask(width: usize, height: usize, shapes: &[Shape]) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        shapes.iter().any(|s| s.contains(x as f64, y as f64))
    })
}

/// Shapes painted with `fg` on a `bg` background.
pub fn render_image(width: usize, height: usize, shapes: &[Shape], fg: f64, bg: f64) -> GrayImage {
    let mask = render_mask(width, height, shapes);
    GrayImage::from_fn(width, height, |x, y| if mask.get(x, y) { fg } else { bg })
        .expect("non-empty canvas")
}

/// A dark disk of radius 30 centred on a 128x128 canvas, intensities 0.2 on 0.8.
pub fn disk_fixture() -> (GrayImage, BinaryMask) {
    let shapes = [Shape::Disk {
        cx: 64.0,
        cy: 64.0,
        r: 30.0,
    }];
    (
        render_image(128, 128, &shapes, 0.2, 0.8),
        render_mask(128, 128, &shapes),
    )
}

/// Ten disks of radius 18 and three 40x8 bars, well separated on 256x256.
///
/// With `overlap`, the last disk is moved so that it overlaps its neighbour.
pub fn smear_fixture(overlap: bool) -> (GrayImage, Vec<Shape>) {
    let mut shapes = Vec::new();
    for row in 0..2 {
        for col in 0..5 {
            shapes.push(Shape::Disk {
                cx: 30.0 + 48.0 * col as f64,
                cy: 32.0 + 52.0 * row as f64,
                r: 18.0,
            });
        }
    }
    if overlap {
        shapes[9] = Shape::Disk {
            cx: 30.0 + 48.0 * 3.0 + 26.0,
            cy: 84.0,
            r: 18.0,
        };
    }
    for k in 0..3 {
        shapes.push(Shape::Rect {
            cx: 50.0 + 78.0 * k as f64,
            cy: 150.0 + 40.0 * k as f64,
            w: 40.0,
            h: 8.0,
            angle: 0.6 * k as f64,
        });
    }
    (render_image(256, 256, &shapes, 0.3, 0.8), shapes)
}

/// A synthetic cluster and the number of cells it is made of.
#[derive(Debug, Clone)]
pub struct SyntheticCluster {
    pub shapes: Vec<Shape>,
    pub width: usize,
    pub height: usize,
}

impl SyntheticCluster {
    pub fn objects(&self) -> usize {
        self.shapes.len()
    }

    pub fn mask(&self) -> BinaryMask {
        render_mask(self.width, self.height, &self.shapes)
    }
}

/// Twenty-five two-cell clusters and one three-cell cluster with varied sizes,
/// orientations, overlaps and cell shapes.
pub fn cluster_suite() -> Vec<SyntheticCluster> {
    let mut out = Vec::new();
    let golden = 2.399_963_229_728_653;
    for i in 0..25 {
        let theta = i as f64 * golden;
        let (s, c) = theta.sin_cos();
        let r1 = 16.0 + (i % 5) as f64;
        let first = Shape::Disk {
            cx: 0.0,
            cy: 0.0,
            r: r1,
        };
        let kind = i % 5;
        let overlap = 0.62 + 0.04 * (i % 4) as f64;
        let second = match kind {
            0 | 3 => {
                let r2 = 15.0 + ((i * 3) % 6) as f64;
                let d = (r1 + r2) * overlap;
                Shape::Disk {
                    cx: d * c,
                    cy: d * s,
                    r: r2,
                }
            }
            1 | 4 => {
                let (a, b) = (24.0 + (i % 3) as f64 * 2.0, 9.0 + (i % 2) as f64);
                let d = (r1 + a) * overlap;
                Shape::Ellipse {
                    cx: d * c,
                    cy: d * s,
                    a,
                    b,
                    angle: theta + 0.3 * (i % 3) as f64,
                }
            }
            _ => {
                let (a, b) = (20.0, 14.0 + (i % 3) as f64);
                let d = (r1 + b) * (overlap + 0.08);
                Shape::Ellipse {
                    cx: d * c,
                    cy: d * s,
                    a,
                    b,
                    angle: theta + std::f64::consts::FRAC_PI_2,
                }
            }
        };
        out.push(place(vec![first, second]));
    }
    let r = 18.0;
    let d = 2.0 * r * 0.75;
    let tri: Vec<Shape> = (0..3)
        .map(|k| {
            let t = 0.4 + k as f64 * std::f64::consts::TAU / 3.0;
            let rr = d / 3f64.sqrt();
            Shape::Disk {
                cx: rr * t.cos(),
                cy: rr * t.sin(),
                r,
            }
        })
        .collect();
    out.push(place(tri));
    out
}

fn place(shapes: Vec<Shape>) -> SyntheticCluster {
    let margin = 70.0;
    let shifted: Vec<Shape> = shapes
        .iter()
        .map(|s| s.translated(margin, margin))
        .collect();
    SyntheticCluster {
        shapes: shifted,
        width: 140,
        height: 140,
    }
}
