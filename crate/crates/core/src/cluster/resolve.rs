use serde::{Deserialize, Serialize};

use super::concave::{detect_concave_points, ConcavePointParams};
use super::ellipse::{fit_ellipse, to_canonical, CanonicalEllipse};
use crate::error::{Error, Result};
use crate::regions::Region;

/// Acceptance thresholds for candidate ellipses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipseValidityParams {
    /// Minimum fraction of the ellipse lying inside the cluster.
    pub tau_e1: f64,
    /// Minimum fraction of the ellipse not covered by previously accepted ellipses.
    pub tau_e2: f64,
}

impl Default for EllipseValidityParams {
    fn default() -> Self {
        Self {
            tau_e1: 0.75,
            tau_e2: 0.5,
        }
    }
}

impl EllipseValidityParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t <= 1.0;
        if !ok(self.tau_e1) || !ok(self.tau_e2) {
            return Err(Error::invalid("tau_e1 and tau_e2 must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One object recovered from a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedObject {
    pub ellipse: CanonicalEllipse,
    /// Positions, in the concave-point list, of the points bounding the fitted
    /// arc. `None` when the whole outline was fitted.
    pub source_arc: Option<(usize, usize)>,
    pub esf_cluster: f64,
}

/// Record of one arc considered during resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcAttempt {
    pub arc: Option<(usize, usize)>,
    pub points: usize,
    pub augmented_with: Option<(usize, usize)>,
    /// Mean squared algebraic residual of the fit.
    pub residual: Option<f64>,
    pub ellipse: Option<CanonicalEllipse>,
    pub accepted: bool,
    pub note: Option<String>,
}

/// Debug record of a whole cluster resolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTrace {
    pub label: usize,
    pub area: usize,
    pub concave_points: Vec<(f64, f64)>,
    pub attempts: Vec<ArcAttempt>,
    pub resolved: usize,
}

/// Pixels whose centres lie inside the ellipse.
pub fn rasterize_ellipse(e: &CanonicalEllipse) -> Vec<(i64, i64)> {
    let r = e.alpha2;
    let x0 = (e.center.0 - r).floor() as i64;
    let x1 = (e.center.0 + r).ceil() as i64;
    let y0 = (e.center.1 - r).floor() as i64;
    let y1 = (e.center.1 + r).ceil() as i64;
    let mut out = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if e.contains(x as f64, y as f64) {
                out.push((x, y));
            }
        }
    }
    out
}

/// Membership lookup over a region's bounding box.
struct PixelSet {
    x0: i64,
    y0: i64,
    w: i64,
    h: i64,
    bits: Vec<bool>,
}

impl PixelSet {
    fn of(region: &Region) -> Self {
        let (x0, y0, x1, y1) = region.bbox;
        let (w, h) = ((x1 - x0 + 1) as i64, (y1 - y0 + 1) as i64);
        let mut bits = vec![false; (w * h) as usize];
        for p in &region.pixels {
            bits[((p.y - y0) as i64 * w + (p.x - x0) as i64) as usize] = true;
        }
        Self {
            x0: x0 as i64,
            y0: y0 as i64,
            w,
            h,
            bits,
        }
    }

    fn contains(&self, x: i64, y: i64) -> bool {
        let (u, v) = (x - self.x0, y - self.y0);
        u >= 0 && v >= 0 && u < self.w && v < self.h && self.bits[(v * self.w + u) as usize]
    }
}

/// Applies both acceptance criteria to a candidate ellipse.
pub fn validate_ellipse(
    cluster_region: &Region,
    candidate: &CanonicalEllipse,
    others: &[CanonicalEllipse],
    params: &EllipseValidityParams,
) -> bool {
    check(
        &PixelSet::of(cluster_region),
        cluster_region.area(),
        candidate,
        others,
        params,
    )
    .is_ok()
}

fn check(
    set: &PixelSet,
    area: usize,
    candidate: &CanonicalEllipse,
    others: &[CanonicalEllipse],
    params: &EllipseValidityParams,
) -> std::result::Result<(), String> {
    if !(candidate.alpha1 > 0.0) || !candidate.alpha2.is_finite() {
        return Err("degenerate axes".into());
    }
    if candidate.area() > 8.0 * area as f64 + 64.0 {
        return Err("ellipse far larger than the cluster".into());
    }
    let raster = rasterize_ellipse(candidate);
    if raster.is_empty() {
        return Err("ellipse covers no pixel centre".into());
    }
    let total = raster.len() as f64;
    let inside = raster.iter().filter(|&&(x, y)| set.contains(x, y)).count() as f64;
    let r1 = inside / total;
    if !(r1 > params.tau_e1) {
        return Err(format!("cluster coverage {r1:.3} not above tau_e1"));
    }
    let free = raster
        .iter()
        .filter(|&&(x, y)| !others.iter().any(|o| o.contains(x as f64, y as f64)))
        .count() as f64;
    let r2 = free / total;
    if !(r2 > params.tau_e2) {
        return Err(format!("unoccluded fraction {r2:.3} not above tau_e2"));
    }
    Ok(())
}

/// Splits a cluster into elliptical objects.
pub fn resolve_cluster(
    cluster_region: &Region,
    cp: &ConcavePointParams,
    ev: &EllipseValidityParams,
) -> Result<Vec<ResolvedObject>> {
    resolve_cluster_traced(cluster_region, cp, ev).0
}

struct Fit {
    ellipse: CanonicalEllipse,
    residual: f64,
}

fn fit_points(points: &[(f64, f64)]) -> std::result::Result<Fit, String> {
    let alg = fit_ellipse(points).map_err(|e| e.to_string())?;
    let ellipse = to_canonical(&alg).map_err(|e| e.to_string())?;
    Ok(Fit {
        ellipse,
        residual: alg.residual(points) / points.len() as f64,
    })
}

/// Like [`resolve_cluster`] but also returns a record of every attempt.
pub fn resolve_cluster_traced(
    cluster_region: &Region,
    cp: &ConcavePointParams,
    ev: &EllipseValidityParams,
) -> (Result<Vec<ResolvedObject>>, ClusterTrace) {
    let contour = cluster_region.contour.points();
    let mut trace = ClusterTrace {
        label: cluster_region.label,
        area: cluster_region.area(),
        concave_points: Vec::new(),
        attempts: Vec::new(),
        resolved: 0,
    };
    if let Err(e) = cp.validate().and_then(|_| ev.validate()) {
        return (Err(e), trace);
    }
    let set = PixelSet::of(cluster_region);
    let area = cluster_region.area();
    let concave = detect_concave_points(&cluster_region.contour, cp).unwrap_or_default();
    trace.concave_points = concave.iter().map(|&i| contour[i]).collect();

    let mut accepted: Vec<ResolvedObject> = Vec::new();
    if concave.is_empty() {
        let mut attempt = ArcAttempt {
            arc: None,
            points: contour.len(),
            augmented_with: None,
            residual: None,
            ellipse: None,
            accepted: false,
            note: None,
        };
        match fit_points(contour) {
            Ok(fit) => {
                attempt.residual = Some(fit.residual);
                attempt.ellipse = Some(fit.ellipse);
                match check(&set, area, &fit.ellipse, &[], ev) {
                    Ok(()) => {
                        attempt.accepted = true;
                        accepted.push(object(fit.ellipse, None));
                    }
                    Err(n) => attempt.note = Some(n),
                }
            }
            Err(n) => attempt.note = Some(n),
        }
        trace.attempts.push(attempt);
    } else {
        let m = concave.len();
        let n = contour.len();
        let arcs: Vec<Vec<(f64, f64)>> = (0..m)
            .map(|i| {
                let from = concave[i];
                let to = concave[(i + 1) % m];
                let len = if m == 1 {
                    n - 1
                } else {
                    (to + n - from) % n - 1
                };
                (1..=len).map(|o| contour[(from + o) % n]).collect()
            })
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(arcs[i].len()));
        let pair = |i: usize| (i, (i + 1) % m);

        for i in order {
            let others: Vec<CanonicalEllipse> = accepted.iter().map(|o| o.ellipse).collect();
            let mut attempt = ArcAttempt {
                arc: Some(pair(i)),
                points: arcs[i].len(),
                augmented_with: None,
                residual: None,
                ellipse: None,
                accepted: false,
                note: None,
            };
            if arcs[i].len() >= 5 {
                match fit_points(&arcs[i]) {
                    Ok(fit) => {
                        attempt.residual = Some(fit.residual);
                        attempt.ellipse = Some(fit.ellipse);
                        match check(&set, area, &fit.ellipse, &others, ev) {
                            Ok(()) => {
                                attempt.accepted = true;
                                accepted.push(object(fit.ellipse, Some(pair(i))));
                                trace.attempts.push(attempt);
                                continue;
                            }
                            Err(n) => attempt.note = Some(n),
                        }
                    }
                    Err(n) => attempt.note = Some(n),
                }
            } else {
                attempt.note = Some("arc shorter than 5 points".into());
            }
            trace.attempts.push(attempt);

            let adjacent = |j: usize| j == i || j == (i + 1) % m || j == (i + m - 1) % m;
            let best = (0..m)
                .filter(|&j| !adjacent(j))
                .filter_map(|j| {
                    let pts: Vec<(f64, f64)> = arcs[i].iter().chain(&arcs[j]).copied().collect();
                    fit_points(&pts).ok().map(|f| (j, pts.len(), f))
                })
                .min_by(|a, b| a.2.residual.total_cmp(&b.2.residual));
            if let Some((j, count, fit)) = best {
                let mut aug = ArcAttempt {
                    arc: Some(pair(i)),
                    points: count,
                    augmented_with: Some(pair(j)),
                    residual: Some(fit.residual),
                    ellipse: Some(fit.ellipse),
                    accepted: false,
                    note: None,
                };
                match check(&set, area, &fit.ellipse, &others, ev) {
                    Ok(()) => {
                        aug.accepted = true;
                        accepted.push(object(fit.ellipse, Some(pair(i))));
                    }
                    Err(n) => aug.note = Some(n),
                }
                trace.attempts.push(aug);
            }
        }
    }
    trace.resolved = accepted.len();
    if accepted.is_empty() {
        (
            Err(Error::UnresolvedCluster {
                label: cluster_region.label,
            }),
            trace,
        )
    } else {
        (Ok(accepted), trace)
    }
}

fn object(ellipse: CanonicalEllipse, source_arc: Option<(usize, usize)>) -> ResolvedObject {
    ResolvedObject {
        ellipse,
        source_arc,
        esf_cluster: ellipse.esf(),
    }
}
