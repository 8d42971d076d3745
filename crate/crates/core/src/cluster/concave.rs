use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Contour;

/// Parameters of the concave-point detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcavePointParams {
    /// Length of the moving-average window applied to the contour.
    pub smoothing_window: usize,
    /// Offset, in contour samples, of the two support points.
    pub k_support: usize,
    /// Minimum inward turn, as a normalised cross product.
    pub min_turn: f64,
}

impl Default for ConcavePointParams {
    fn default() -> Self {
        Self {
            smoothing_window: 5,
            k_support: 7,
            min_turn: 0.15,
        }
    }
}

impl ConcavePointParams {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_window == 0 {
            return Err(Error::invalid("smoothing_window must be at least 1"));
        }
        if self.k_support < 2 {
            return Err(Error::invalid("k_support must be at least 2"));
        }
        if !(self.min_turn > 0.0 && self.min_turn <= 1.0) {
            return Err(Error::invalid("min_turn must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Turn of the smoothed contour at every sample: the cross product of the
/// backward and forward support chords divided by their lengths. Positive values
/// bend the same way as the contour orientation (convex), negative ones are
/// concave.
pub(crate) fn turn_profile(contour: &Contour, params: &ConcavePointParams) -> Result<Vec<f64>> {
    params.validate()?;
    let pts = contour.points();
    let n = pts.len();
    if n < 2 * params.k_support + 1 || n < params.smoothing_window {
        return Err(Error::invalid(format!(
            "contour of {n} points is too short for support {}",
            params.k_support
        )));
    }
    let w = params.smoothing_window;
    let lo = (w - 1) / 2;
    let smooth: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for o in 0..w {
                let (x, y) = pts[(i + n + o - lo) % n];
                sx += x;
                sy += y;
            }
            (sx / w as f64, sy / w as f64)
        })
        .collect();
    let k = params.k_support;
    Ok((0..n)
        .map(|i| {
            let p = smooth[i];
            let a = smooth[(i + n - k) % n];
            let b = smooth[(i + k) % n];
            let u = (p.0 - a.0, p.1 - a.1);
            let v = (b.0 - p.0, b.1 - p.1);
            let norm = (u.0.hypot(u.1) * v.0.hypot(v.1)).max(f64::MIN_POSITIVE);
            (u.0 * v.1 - u.1 * v.0) / norm
        })
        .collect())
}

/// Indices of concave contour points in traversal order.
///
/// Samples turning inward by at least `min_turn` are grouped into cyclic runs
/// and each run contributes its sharpest sample.
pub fn detect_concave_points(contour: &Contour, params: &ConcavePointParams) -> Result<Vec<usize>> {
    let turn = turn_profile(contour, params)?;
    let n = turn.len();
    let concave: Vec<bool> = turn.iter().map(|&t| t <= -params.min_turn).collect();
    if concave.iter().all(|&c| c) {
        return Ok(Vec::new());
    }
    let Some(start) = (0..n).find(|&i| !concave[i]) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut best: Option<usize> = None;
    for step in 1..=n {
        let i = (start + step) % n;
        if concave[i] {
            best = match best {
                Some(b) if turn[b] <= turn[i] => Some(b),
                _ => Some(i),
            };
        } else if let Some(b) = best.take() {
            out.push(b);
        }
    }
    out.sort_unstable();
    Ok(out)
}
