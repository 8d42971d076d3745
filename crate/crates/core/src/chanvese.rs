//! Two-phase piecewise-constant level-set segmentation.
//!
//! The model partitions the image into an inside phase (`phi > 0`) and an
//! outside phase (`phi <= 0`), each approximated by its mean intensity, while
//! penalising the length of the separating curve. The flow is integrated with an
//! explicit scheme using regularised Heaviside and Dirac functions.
//!
//! The evolution works on standardised intensities (zero mean, unit variance)
//! and on a level-set function scaled to `[-1, 1]`, so the default weights
//! behave the same for any intensity range and lattice spacing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};

const GRAD_FLOOR: f64 = 1e-8;

/// Parameters of the level-set evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChanVeseParams {
    /// Curve-length weight.
    pub mu: f64,
    /// Area weight.
    pub nu: f64,
    /// Fidelity weight of the inside phase.
    pub lambda1: f64,
    /// Fidelity weight of the outside phase.
    pub lambda2: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub max_iters: usize,
    /// Stop once the mean absolute update falls below this value.
    pub tol: f64,
    /// Lattice spacing of the initial hole net, in pixels.
    pub hole_cell: usize,
}

impl Default for ChanVeseParams {
    fn default() -> Self {
        Self {
            mu: 0.2,
            nu: 0.0,
            lambda1: 1.0,
            lambda2: 1.0,
            epsilon: 1.0,
            dt: 0.5,
            max_iters: 1000,
            tol: 1e-4,
            hole_cell: 20,
        }
    }
}

impl ChanVeseParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu,
            self.nu,
            self.lambda1,
            self.lambda2,
            self.epsilon,
            self.dt,
            self.tol,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("level-set parameters must be finite"));
        }
        if self.mu < 0.0 || self.nu < 0.0 {
            return Err(Error::invalid("mu and nu must be non-negative"));
        }
        if self.lambda1 <= 0.0 || self.lambda2 <= 0.0 {
            return Err(Error::invalid("lambda1 and lambda2 must be positive"));
        }
        if self.epsilon <= 0.0 || self.dt <= 0.0 {
            return Err(Error::invalid("epsilon and dt must be positive"));
        }
        if self.tol < 0.0 {
            return Err(Error::invalid("tol must be non-negative"));
        }
        if self.hole_cell < 4 {
            return Err(Error::invalid("hole_cell must be at least 4"));
        }
        Ok(())
    }
}

/// Regularised Heaviside `H_eps(t) = (1 + (2/pi) atan(t/eps)) / 2`.
pub fn heaviside(t: f64, eps: f64) -> f64 {
    0.5 * (1.0 + std::f64::consts::FRAC_2_PI * (t / eps).atan())
}

/// Regularised Dirac delta, the derivative of [`heaviside`].
pub fn dirac(t: f64, eps: f64) -> f64 {
    std::f64::consts::FRAC_1_PI * eps / (eps * eps + t * t)
}

/// Level-set function sampled on the image lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    width: usize,
    height: usize,
    phi: Vec<f64>,
}

impl LevelSetField {
    pub fn new(width: usize, height: usize, phi: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || phi.len() != width * height {
            return Err(Error::invalid(
                "level-set field size does not match its dimensions",
            ));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("level-set field contains non-finite values"));
        }
        Ok(Self { width, height, phi })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.phi[y * self.width + x]
    }

    /// Whether both an inside (`> 0`) and an outside (`<= 0`) sample exist.
    pub fn has_both_phases(&self) -> bool {
        let inside = self.phi.iter().any(|&v| v > 0.0);
        let outside = self.phi.iter().any(|&v| v <= 0.0);
        inside && outside
    }

    /// Fraction of samples in the inside phase.
    pub fn inside_fraction(&self) -> f64 {
        self.phi.iter().filter(|&&v| v > 0.0).count() as f64 / self.phi.len() as f64
    }
}

/// Mean intensity of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionAverages {
    pub c1: f64,
    pub c2: f64,
}

/// Smoothly weighted phase means of `f` under `phi`.
pub fn region_averages(f: &GrayImage, phi: &LevelSetField, eps: f64) -> Result<RegionAverages> {
    check_dims(f, phi)?;
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let (s1, w1, s2, w2) = weighted_sums(f.data(), &phi.phi, phi.width, eps);
    if !(w1 > 0.0) || !(w2 > 0.0) {
        return Err(Error::invalid("a phase has zero total weight"));
    }
    Ok(RegionAverages {
        c1: s1 / w1,
        c2: s2 / w2,
    })
}

fn weighted_sums(f: &[f64], phi: &[f64], width: usize, eps: f64) -> (f64, f64, f64, f64) {
    let rows: Vec<(f64, f64, f64, f64)> = f
        .par_chunks(width)
        .zip(phi.par_chunks(width))
        .map(|(fr, pr)| {
            let mut acc = (0.0, 0.0, 0.0, 0.0);
            for (&fv, &pv) in fr.iter().zip(pr) {
                let h = heaviside(pv, eps);
                acc.0 += fv * h;
                acc.1 += h;
                acc.2 += fv * (1.0 - h);
                acc.3 += 1.0 - h;
            }
            acc
        })
        .collect();
    rows.iter().fold((0.0, 0.0, 0.0, 0.0), |a, r| {
        (a.0 + r.0, a.1 + r.1, a.2 + r.2, a.3 + r.3)
    })
}

fn check_dims(f: &GrayImage, phi: &LevelSetField) -> Result<()> {
    if f.width() != phi.width || f.height() != phi.height {
        return Err(Error::invalid(format!(
            "image is {}x{} but level set is {}x{}",
            f.width(),
            f.height(),
            phi.width,
            phi.height
        )));
    }
    Ok(())
}

/// Hole-net initialisation: positive disks of radius `cell / 4` centred on a
/// square lattice of spacing `cell`, with the signed distance to the nearest
/// disk boundary clamped to `cell / 2` and scaled to `[-1, 1]`.
pub fn initial_level_set(width: usize, height: usize, cell: usize) -> Result<LevelSetField> {
    if cell < 4 {
        return Err(Error::invalid("hole-net cell must be at least 4 pixels"));
    }
    if cell >= width.min(height) {
        return Err(Error::invalid(format!(
            "hole-net cell {cell} must be smaller than the image side {}",
            width.min(height)
        )));
    }
    let c = cell as f64;
    let half = c / 2.0;
    let radius = c / 4.0;
    let nx = centres_along(width, cell);
    let ny = centres_along(height, cell);
    let nearest = |p: usize, n: usize| -> f64 {
        let i = ((p as f64 - half) / c).round().clamp(0.0, (n - 1) as f64);
        half + i * c
    };
    let mut phi = Vec::with_capacity(width * height);
    for y in 0..height {
        let cy = nearest(y, ny);
        for x in 0..width {
            let cx = nearest(x, nx);
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            phi.push((radius - d).clamp(-half, half) / half);
        }
    }
    LevelSetField::new(width, height, phi)
}

fn centres_along(len: usize, cell: usize) -> usize {
    let half = cell as f64 / 2.0;
    let mut n = 0;
    while half + (n * cell) as f64 <= (len - 1) as f64 {
        n += 1;
    }
    n.max(1)
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Phase means in the input intensity units.
    pub c1: f64,
    pub c2: f64,
    /// Energy of the state before the update, in standardised units.
    pub energy: f64,
    pub mean_abs_update: f64,
}

/// Result of [`evolve`].
#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: LevelSetField,
    pub iterations: usize,
    pub converged: bool,
    /// Present only when requested through [`evolve_with_log`].
    pub log: Option<Vec<IterationRecord>>,
}

/// Evolves `init` on image `f` until convergence or `max_iters`.
pub fn evolve(f: &GrayImage, params: &ChanVeseParams, init: LevelSetField) -> Result<Evolution> {
    run(f, params, init, false)
}

/// Like [`evolve`] but records one [`IterationRecord`] per iteration.
pub fn evolve_with_log(
    f: &GrayImage,
    params: &ChanVeseParams,
    init: LevelSetField,
) -> Result<Evolution> {
    run(f, params, init, true)
}

fn standardise(f: &GrayImage) -> (Vec<f64>, f64, f64) {
    let n = f.data().len() as f64;
    let mean = f.data().iter().sum::<f64>() / n;
    let var = f.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-12 * mean.abs().max(1.0) {
        std
    } else {
        1.0
    };
    let z = f.data().iter().map(|v| (v - mean) / scale).collect();
    (z, mean, scale)
}

fn run(f: &GrayImage, p: &ChanVeseParams, init: LevelSetField, record: bool) -> Result<Evolution> {
    p.validate()?;
    check_dims(f, &init)?;
    if !init.has_both_phases() {
        return Err(Error::DegenerateSegmentation { iteration: 0 });
    }
    let (w, h) = (init.width, init.height);
    let (z, mean, scale) = standardise(f);
    let mut phi = init.phi;
    let mut nx = vec![0.0; w * h];
    let mut ny = vec![0.0; w * h];
    let mut next = vec![0.0; w * h];
    let mut log = record.then(Vec::new);
    let mut iterations = 0;
    let mut converged = false;

    for it in 0..p.max_iters {
        let (s1, w1, s2, w2) = weighted_sums(&z, &phi, w, p.epsilon);
        let c1 = if w1 > 0.0 { s1 / w1 } else { 0.0 };
        let c2 = if w2 > 0.0 { s2 / w2 } else { 0.0 };
        let energy = log.as_ref().map(|_| energy_of(&z, &phi, w, h, c1, c2, p));

        normals(&phi, w, h, &mut nx, &mut ny);
        let sum_abs = update(&z, &phi, &nx, &ny, w, h, c1, c2, p, &mut next);
        std::mem::swap(&mut phi, &mut next);
        iterations = it + 1;
        let mean_abs = sum_abs / (w * h) as f64;

        if let (Some(log), Some(energy)) = (log.as_mut(), energy) {
            log.push(IterationRecord {
                iteration: it,
                c1: c1 * scale + mean,
                c2: c2 * scale + mean,
                energy,
                mean_abs_update: mean_abs,
            });
        }
        let inside = phi.iter().any(|&v| v > 0.0);
        let outside = phi.iter().any(|&v| v <= 0.0);
        if !(inside && outside) {
            return Err(Error::DegenerateSegmentation {
                iteration: iterations,
            });
        }
        if mean_abs < p.tol {
            converged = true;
            break;
        }
    }
    Ok(Evolution {
        field: LevelSetField {
            width: w,
            height: h,
            phi,
        },
        iterations,
        converged,
        log,
    })
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

#[inline]
fn central(phi: &[f64], w: usize, h: usize, x: usize, y: usize) -> (f64, f64) {
    let xl = clamp_idx(x as isize - 1, w);
    let xr = clamp_idx(x as isize + 1, w);
    let yu = clamp_idx(y as isize - 1, h);
    let yd = clamp_idx(y as isize + 1, h);
    let gx = 0.5 * (phi[y * w + xr] - phi[y * w + xl]);
    let gy = 0.5 * (phi[yd * w + x] - phi[yu * w + x]);
    (gx, gy)
}

fn normals(phi: &[f64], w: usize, h: usize, nx: &mut [f64], ny: &mut [f64]) {
    nx.par_chunks_mut(w)
        .zip(ny.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, (rx, ry))| {
            for x in 0..w {
                let (gx, gy) = central(phi, w, h, x, y);
                let g = (gx * gx + gy * gy).sqrt().max(GRAD_FLOOR);
                rx[x] = gx / g;
                ry[x] = gy / g;
            }
        });
}

#[allow(clippy::too_many_arguments)]
fn update(
    z: &[f64],
    phi: &[f64],
    nx: &[f64],
    ny: &[f64],
    w: usize,
    h: usize,
    c1: f64,
    c2: f64,
    p: &ChanVeseParams,
    out: &mut [f64],
) -> f64 {
    let partial: Vec<f64> = out
        .par_chunks_mut(w)
        .enumerate()
        .map(|(y, row)| {
            let yu = clamp_idx(y as isize - 1, h);
            let yd = clamp_idx(y as isize + 1, h);
            let mut acc = 0.0;
            for x in 0..w {
                let xl = clamp_idx(x as isize - 1, w);
                let xr = clamp_idx(x as isize + 1, w);
                let i = y * w + x;
                let curvature = 0.5 * (nx[y * w + xr] - nx[y * w + xl])
                    + 0.5 * (ny[yd * w + x] - ny[yu * w + x]);
                let force = p.mu * curvature - p.nu - p.lambda1 * (z[i] - c1).powi(2)
                    + p.lambda2 * (z[i] - c2).powi(2);
                let step = p.dt * dirac(phi[i], p.epsilon) * force;
                row[x] = phi[i] + step;
                acc += step.abs();
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

fn energy_of(
    z: &[f64],
    phi: &[f64],
    w: usize,
    h: usize,
    c1: f64,
    c2: f64,
    p: &ChanVeseParams,
) -> f64 {
    let rows: Vec<f64> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut acc = 0.0;
            for x in 0..w {
                let i = y * w + x;
                let (gx, gy) = central(phi, w, h, x, y);
                let hv = heaviside(phi[i], p.epsilon);
                acc += p.mu * dirac(phi[i], p.epsilon) * (gx * gx + gy * gy).sqrt()
                    + p.nu * hv
                    + p.lambda1 * (z[i] - c1).powi(2) * hv
                    + p.lambda2 * (z[i] - c2).powi(2) * (1.0 - hv);
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

/// Energy of `phi` on `f` with the phase means it induces, in standardised units.
pub fn energy(f: &GrayImage, phi: &LevelSetField, params: &ChanVeseParams) -> Result<f64> {
    check_dims(f, phi)?;
    let (z, _, _) = standardise(f);
    let (s1, w1, s2, w2) = weighted_sums(&z, &phi.phi, phi.width, params.epsilon);
    let c1 = if w1 > 0.0 { s1 / w1 } else { 0.0 };
    let c2 = if w2 > 0.0 { s2 / w2 } else { 0.0 };
    Ok(energy_of(
        &z, &phi.phi, phi.width, phi.height, c1, c2, params,
    ))
}

/// Thresholds `phi` at zero and returns the darker phase as foreground.
///
/// If both phases have the same mean, or one phase is empty, the image carries
/// no usable contrast and the result is an empty mask.
pub fn binarize(phi: &LevelSetField, f: &GrayImage) -> Result<BinaryMask> {
    check_dims(f, phi)?;
    let (mut s_in, mut n_in, mut s_out, mut n_out) = (0.0, 0usize, 0.0, 0usize);
    for (&v, &fv) in phi.phi.iter().zip(f.data()) {
        if v > 0.0 {
            s_in += fv;
            n_in += 1;
        } else {
            s_out += fv;
            n_out += 1;
        }
    }
    let mut mask = BinaryMask::new(phi.width, phi.height);
    if n_in == 0 || n_out == 0 {
        return Ok(mask);
    }
    let (m_in, m_out) = (s_in / n_in as f64, s_out / n_out as f64);
    let tie = 1e-12 * m_in.abs().max(m_out.abs()).max(1.0);
    if (m_in - m_out).abs() <= tie {
        return Ok(mask);
    }
    let inside_is_dark = m_in < m_out;
    for y in 0..phi.height {
        for x in 0..phi.width {
            let inside = phi.get(x, y) > 0.0;
            mask.set(x, y, inside == inside_is_dark);
        }
    }
    Ok(mask)
}
