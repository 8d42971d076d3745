//! Shape descriptors and the three-way cell classification.

use serde::{Deserialize, Serialize};

use crate::cluster::{CanonicalEllipse, ResolvedObject};
use crate::error::{Error, Result};
use crate::imaging::Contour;
use crate::regions::Region;

/// Morphological class of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Normal,
    Elongated,
    OtherDeformation,
}

impl CellClass {
    pub const ALL: [CellClass; 3] = [
        CellClass::Normal,
        CellClass::Elongated,
        CellClass::OtherDeformation,
    ];

    /// Position in confusion matrices.
    pub fn index(self) -> usize {
        match self {
            CellClass::Normal => 0,
            CellClass::Elongated => 1,
            CellClass::OtherDeformation => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Short lowercase name used in files.
    pub fn name(self) -> &'static str {
        match self {
            CellClass::Normal => "normal",
            CellClass::Elongated => "elongated",
            CellClass::OtherDeformation => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(CellClass::Normal),
            "elongated" => Some(CellClass::Elongated),
            "other" | "other_deformation" => Some(CellClass::OtherDeformation),
            _ => None,
        }
    }
}

/// Where a classified cell came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOrigin {
    Isolated,
    FromCluster,
    /// A cluster that could not be split, counted as a single cell.
    UnresolvedCluster,
}

/// Decision thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyThresholds {
    pub esf_elongated: f64,
    pub csf_normal: f64,
    pub esf_cluster_elongated: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            esf_elongated: 0.5,
            csf_normal: 0.8,
            esf_cluster_elongated: 0.6,
        }
    }
}

impl ClassifyThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t < 1.0;
        if !ok(self.esf_elongated) || !ok(self.csf_normal) || !ok(self.esf_cluster_elongated) {
            return Err(Error::invalid(
                "classification thresholds must lie in (0, 1)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeDescriptors {
    pub area: f64,
    pub perimeter: f64,
    pub minor_extent: f64,
    pub major_extent: f64,
    /// Circular shape factor `4 pi A / p^2`.
    pub csf: f64,
    /// Elliptical shape factor: minor over major principal extent.
    pub esf: f64,
}

/// `4 pi area / perimeter^2`.
pub fn csf(area: f64, perimeter: f64) -> Result<f64> {
    if !(area > 0.0) || !(perimeter > 0.0) {
        return Err(Error::invalid("csf needs positive area and perimeter"));
    }
    Ok(4.0 * std::f64::consts::PI * area / (perimeter * perimeter))
}

pub fn compute_csf(region: &Region) -> Result<f64> {
    csf(region.area() as f64, region.perimeter)
}

/// Extents along the two principal axes, `(minor, major)`.
///
/// Each extent is the side of the uniform rectangle with the same second
/// moment as the union of the pixel squares, `sqrt(12 * lambda + 1)` for a
/// covariance eigenvalue `lambda` of the pixel centres. Unlike the span of the
/// extreme pixels this does not depend on how the lattice happens to clip the
/// shape's ends.
pub fn principal_extents(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::invalid("principal extents need at least two pixels"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (sxx, sxy, syy) = (sxx / n, sxy / n, syy / n);
    let half_trace = 0.5 * (sxx + syy);
    let root = (0.25 * (sxx - syy).powi(2) + sxy * sxy).sqrt();
    let extent = |lambda: f64| (12.0 * lambda.max(0.0) + 1.0).sqrt();
    Ok((extent(half_trace - root), extent(half_trace + root)))
}

pub fn compute_esf(region: &Region) -> Result<f64> {
    let pts: Vec<(f64, f64)> = region
        .pixels
        .iter()
        .map(|p| (p.x as f64, p.y as f64))
        .collect();
    let (minor, major) = principal_extents(&pts)?;
    Ok(minor / major)
}

pub fn descriptors(region: &Region) -> Result<ShapeDescriptors> {
    let pts: Vec<(f64, f64)> = region
        .pixels
        .iter()
        .map(|p| (p.x as f64, p.y as f64))
        .collect();
    let (minor, major) = principal_extents(&pts)?;
    Ok(ShapeDescriptors {
        area: region.area() as f64,
        perimeter: region.perimeter,
        minor_extent: minor,
        major_extent: major,
        csf: compute_csf(region)?,
        esf: minor / major,
    })
}

/// Rule for isolated cells: elongation first, then roundness.
pub fn classify_isolated(d: &ShapeDescriptors, t: &ClassifyThresholds) -> CellClass {
    if d.esf <= t.esf_elongated {
        CellClass::Elongated
    } else if d.csf >= t.csf_normal {
        CellClass::Normal
    } else {
        CellClass::OtherDeformation
    }
}

/// Rule for objects recovered from clusters, which are never "other".
pub fn classify_cluster_object(o: &ResolvedObject, t: &ClassifyThresholds) -> CellClass {
    if o.esf_cluster <= t.esf_cluster_elongated {
        CellClass::Elongated
    } else {
        CellClass::Normal
    }
}

/// Geometry kept for drawing.
#[derive(Debug, Clone, PartialEq)]
pub enum Outline {
    Contour(Contour),
    Ellipse(CanonicalEllipse),
}

/// A cell with its class and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedCell {
    region_label: usize,
    origin: CellOrigin,
    class: CellClass,
    centroid: (f64, f64),
    descriptors: Option<ShapeDescriptors>,
    esf: Option<f64>,
    outline: Outline,
}

impl ClassifiedCell {
    /// Builds a cell, rejecting cluster-derived cells labelled "other".
    pub fn new(
        region_label: usize,
        origin: CellOrigin,
        class: CellClass,
        centroid: (f64, f64),
        outline: Outline,
    ) -> Result<Self> {
        if origin == CellOrigin::FromCluster && class == CellClass::OtherDeformation {
            return Err(Error::invalid(
                "cells recovered from clusters cannot be 'other'",
            ));
        }
        Ok(Self {
            region_label,
            origin,
            class,
            centroid,
            descriptors: None,
            esf: None,
            outline,
        })
    }

    /// Classifies an isolated region. Regions too small for descriptors are "other".
    pub fn isolated(region: &Region, t: &ClassifyThresholds) -> Self {
        let d = descriptors(region).ok();
        let class = d
            .as_ref()
            .map_or(CellClass::OtherDeformation, |d| classify_isolated(d, t));
        Self {
            region_label: region.label,
            origin: CellOrigin::Isolated,
            class,
            centroid: region.centroid,
            esf: d.map(|d| d.esf),
            descriptors: d,
            outline: Outline::Contour(region.contour.clone()),
        }
    }

    pub fn from_cluster(region_label: usize, o: &ResolvedObject, t: &ClassifyThresholds) -> Self {
        Self {
            region_label,
            origin: CellOrigin::FromCluster,
            class: classify_cluster_object(o, t),
            centroid: o.ellipse.center,
            descriptors: None,
            esf: Some(o.esf_cluster),
            outline: Outline::Ellipse(o.ellipse),
        }
    }

    pub fn unresolved(region: &Region) -> Self {
        Self {
            region_label: region.label,
            origin: CellOrigin::UnresolvedCluster,
            class: CellClass::OtherDeformation,
            centroid: region.centroid,
            descriptors: None,
            esf: None,
            outline: Outline::Contour(region.contour.clone()),
        }
    }

    pub fn region_label(&self) -> usize {
        self.region_label
    }

    pub fn origin(&self) -> CellOrigin {
        self.origin
    }

    pub fn class(&self) -> CellClass {
        self.class
    }

    pub fn centroid(&self) -> (f64, f64) {
        self.centroid
    }

    pub fn descriptors(&self) -> Option<&ShapeDescriptors> {
        self.descriptors.as_ref()
    }

    pub fn esf(&self) -> Option<f64> {
        self.esf
    }

    pub fn outline(&self) -> &Outline {
        &self.outline
    }
}

impl Serialize for ClassifiedCell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row<'a> {
            region: usize,
            origin: CellOrigin,
            class: &'static str,
            x: f64,
            y: f64,
            esf: Option<f64>,
            csf: Option<f64>,
            area: Option<f64>,
            ellipse: Option<&'a CanonicalEllipse>,
        }
        Row {
            region: self.region_label,
            origin: self.origin,
            class: self.class.name(),
            x: self.centroid.0,
            y: self.centroid.1,
            esf: self.esf,
            csf: self.descriptors.map(|d| d.csf),
            area: self.descriptors.map(|d| d.area),
            ellipse: match &self.outline {
                Outline::Ellipse(e) => Some(e),
                Outline::Contour(_) => None,
            },
        }
        .serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellCounts {
    pub normal: usize,
    pub elongated: usize,
    pub other: usize,
}

impl CellCounts {
    pub fn total(&self) -> usize {
        self.normal + self.elongated + self.other
    }

    pub fn add(&mut self, other: &CellCounts) {
        self.normal += other.normal;
        self.elongated += other.elongated;
        self.other += other.other;
    }
}

pub fn count_cells(cells: &[ClassifiedCell]) -> CellCounts {
    let mut c = CellCounts::default();
    for cell in cells {
        match cell.class {
            CellClass::Normal => c.normal += 1,
            CellClass::Elongated => c.elongated += 1,
            CellClass::OtherDeformation => c.other += 1,
        }
    }
    c
}
