use nalgebra::{Matrix5, Vector5};
use serde::Serialize;

use crate::error::{Error, Result};

/// Conic `a u^2 + b u v + c v^2 + d u + e v - 1 = 0` in coordinates
/// `(u, v) = (x, y) - origin`.
///
/// Fixing the constant term to `-1` requires the conic not to pass through the
/// origin, so fits are expressed relative to the centroid of the fitted points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraicEllipse {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub origin: (f64, f64),
}

impl AlgebraicEllipse {
    /// Left-hand side of the conic equation at an absolute point.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x - self.origin.0, y - self.origin.1);
        self.a * u * u + self.b * u * v + self.c * v * v + self.d * u + self.e * v - 1.0
    }

    /// `4ac - b^2`, positive for ellipses.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.a * self.c - self.b * self.b
    }

    /// Coefficients `[A, B, C, D, E, F]` of the same conic in absolute coordinates.
    pub fn global_coefficients(&self) -> [f64; 6] {
        let (x0, y0) = self.origin;
        let (a, b, c, d, e) = (self.a, self.b, self.c, self.d, self.e);
        [
            a,
            b,
            c,
            d - 2.0 * a * x0 - b * y0,
            e - 2.0 * c * y0 - b * x0,
            a * x0 * x0 + b * x0 * y0 + c * y0 * y0 - d * x0 - e * y0 - 1.0,
        ]
    }

    /// Sum of squared algebraic residuals over `points`.
    pub fn residual(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&(x, y)| self.eval(x, y).powi(2)).sum()
    }
}

/// Ellipse in geometric form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalEllipse {
    pub center: (f64, f64),
    /// Minor semi-axis.
    pub alpha1: f64,
    /// Major semi-axis.
    pub alpha2: f64,
    /// Angle of the major axis measured from `+x` towards `+y`, in `(-pi/2, pi/2]`.
    pub rotation: f64,
}

impl CanonicalEllipse {
    pub fn major_axis(&self) -> (f64, f64) {
        (self.rotation.cos(), self.rotation.sin())
    }

    pub fn minor_axis(&self) -> (f64, f64) {
        (-self.rotation.sin(), self.rotation.cos())
    }

    /// Boundary point at parameter `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (mx, my) = self.major_axis();
        let (nx, ny) = self.minor_axis();
        let (s, c) = t.sin_cos();
        (
            self.center.0 + self.alpha2 * c * mx + self.alpha1 * s * nx,
            self.center.1 + self.alpha2 * c * my + self.alpha1 * s * ny,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (mx, my) = self.major_axis();
        let p = dx * mx + dy * my;
        let q = -dx * my + dy * mx;
        (p / self.alpha2).powi(2) + (q / self.alpha1).powi(2) <= 1.0
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.alpha1 * self.alpha2
    }

    /// Minor-to-major axis ratio.
    pub fn esf(&self) -> f64 {
        self.alpha1 / self.alpha2
    }
}

/// Least-squares conic fit with the constant term fixed to `-1`.
///
/// The normal equations are formed in a centred, RMS-normalised frame. The
/// returned coefficients are expressed relative to the point centroid.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<AlgebraicEllipse> {
    if points.len() < 5 {
        return Err(Error::invalid(format!(
            "an ellipse fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::invalid("fit points must be finite"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let s = (points
        .iter()
        .map(|p| (p.0 - mx).powi(2) + (p.1 - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(s > 0.0) {
        return Err(Error::FitDegenerate("all points coincide".into()));
    }

    let mut m = Matrix5::<f64>::zeros();
    let mut rhs = Vector5::<f64>::zeros();
    for &(x, y) in points {
        let (u, v) = ((x - mx) / s, (y - my) / s);
        let r = Vector5::new(u * u, u * v, v * v, u, v);
        m += r * r.transpose();
        rhs += r;
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::FitDegenerate(format!(
            "normal matrix is rank deficient (condition {:.3e})",
            smax / smin.max(f64::MIN_POSITIVE)
        )));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::FitDegenerate(e.to_string()))?;
    let s2 = s * s;
    let ell = AlgebraicEllipse {
        a: sol[0] / s2,
        b: sol[1] / s2,
        c: sol[2] / s2,
        d: sol[3] / s,
        e: sol[4] / s,
        origin: (mx, my),
    };
    if !(sol[0] * 4.0 * sol[2] - sol[1] * sol[1] > 0.0) {
        return Err(Error::NotAnEllipse(format!(
            "discriminant 4ac - b^2 = {:.3e} is not positive",
            ell.discriminant()
        )));
    }
    Ok(ell)
}

/// Converts an algebraic ellipse into centre, semi-axes and orientation.
///
/// The quadratic form is rotated by `phi = atan(b / (c - a)) / 2` to remove the
/// cross term, after which the axes and centre are read off term by term.
pub fn to_canonical(ell: &AlgebraicEllipse) -> Result<CanonicalEllipse> {
    if ell.discriminant() <= 0.0 {
        return Err(Error::NotAnEllipse("discriminant is not positive".into()));
    }
    let (a, b, c, d, e) = (ell.a, ell.b, ell.c, ell.d, ell.e);
    let scale = a.abs().max(c.abs()).max(b.abs());
    let tiny = 1e-12 * scale;
    let phi = if (c - a).abs() < tiny {
        if b.abs() < tiny {
            0.0
        } else {
            std::f64::consts::FRAC_PI_4 * b.signum()
        }
    } else {
        0.5 * (b / (c - a)).atan()
    };
    let (sn, cs) = phi.sin_cos();
    let a1 = a * cs * cs - b * cs * sn + c * sn * sn;
    let c1 = a * sn * sn + b * cs * sn + c * cs * cs;
    let d1 = d * cs - e * sn;
    let e1 = d * sn + e * cs;
    let f1 = 1.0 + d1 * d1 / (4.0 * a1) + e1 * e1 / (4.0 * c1);
    if !(f1 / a1 > 0.0 && f1 / c1 > 0.0) {
        return Err(Error::NotAnEllipse("conic has no real points".into()));
    }
    let ax_u = (f1 / a1).sqrt();
    let ax_v = (f1 / c1).sqrt();
    let u0 = -d1 / (2.0 * a1);
    let v0 = -e1 / (2.0 * c1);
    let center = (
        ell.origin.0 + u0 * cs + v0 * sn,
        ell.origin.1 - u0 * sn + v0 * cs,
    );
    let (alpha1, alpha2, major) = if ax_u > ax_v {
        (ax_v, ax_u, (-sn).atan2(cs))
    } else {
        (ax_u, ax_v, cs.atan2(sn))
    };
    Ok(CanonicalEllipse {
        center,
        alpha1,
        alpha2,
        rotation: normalise_axis_angle(major),
    })
}

fn normalise_axis_angle(mut t: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    while t > FRAC_PI_2 {
        t -= PI;
    }
    while t <= -FRAC_PI_2 {
        t += PI;
    }
    t
}
