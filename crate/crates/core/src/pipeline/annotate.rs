use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_circle_mut, draw_line_segment_mut};

use crate::classify::{CellClass, CellOrigin, ClassifiedCell, Outline};
use crate::imaging::GrayImage;

const GLYPH: f32 = 4.0;

fn colour(class: CellClass) -> Rgb<u8> {
    match class {
        CellClass::Normal => Rgb([255, 0, 0]),
        CellClass::Elongated => Rgb([0, 0, 255]),
        CellClass::OtherDeformation => Rgb([0, 255, 0]),
    }
}

/// Colour copy of `image` with class-coloured outlines and centre glyphs:
/// a circle for normal cells, an asterisk for elongated ones, a plus for other
/// deformations, and an additional X on every cell recovered from a cluster.
pub fn annotate(image: &GrayImage, cells: &[ClassifiedCell]) -> RgbImage {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let mut out = RgbImage::from_fn(w, h, |x, y| {
        let v = image.get(x as usize, y as usize).round().clamp(0.0, 255.0) as u8;
        Rgb([v, v, v])
    });
    for cell in cells {
        let c = colour(cell.class());
        match cell.outline() {
            Outline::Contour(contour) => polyline(&mut out, contour.points(), c),
            Outline::Ellipse(e) => {
                let pts: Vec<(f64, f64)> = (0..180)
                    .map(|k| e.point_at(k as f64 * std::f64::consts::TAU / 180.0))
                    .collect();
                polyline(&mut out, &pts, c);
            }
        }
        let (cx, cy) = cell.centroid();
        let (x, y) = (cx as f32, cy as f32);
        match cell.class() {
            CellClass::Normal => draw_hollow_circle_mut(
                &mut out,
                (cx.round() as i32, cy.round() as i32),
                GLYPH as i32,
                c,
            ),
            CellClass::Elongated => {
                let (dx, dy) = (GLYPH * 0.866, GLYPH * 0.5);
                draw_line_segment_mut(&mut out, (x, y - GLYPH), (x, y + GLYPH), c);
                draw_line_segment_mut(&mut out, (x - dx, y - dy), (x + dx, y + dy), c);
                draw_line_segment_mut(&mut out, (x - dx, y + dy), (x + dx, y - dy), c);
            }
            CellClass::OtherDeformation => {
                draw_line_segment_mut(&mut out, (x - GLYPH, y), (x + GLYPH, y), c);
                draw_line_segment_mut(&mut out, (x, y - GLYPH), (x, y + GLYPH), c);
            }
        }
        if cell.origin() == CellOrigin::FromCluster {
            let d = GLYPH * 0.7;
            draw_line_segment_mut(&mut out, (x - d, y - d), (x + d, y + d), c);
            draw_line_segment_mut(&mut out, (x - d, y + d), (x + d, y - d), c);
        }
    }
    out
}

fn polyline(img: &mut RgbImage, pts: &[(f64, f64)], c: Rgb<u8>) {
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        draw_line_segment_mut(img, (a.0 as f32, a.1 as f32), (b.0 as f32, b.1 as f32), c);
    }
}
