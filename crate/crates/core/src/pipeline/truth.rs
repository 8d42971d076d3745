use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::ImageReport;
use crate::classify::CellClass;
use crate::error::{Error, Result};
use crate::metrics::{performance_index, ConfusionMatrix3, DetectionTally, MetricSuite};

/// One expert-labelled cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthEntry {
    pub x: f64,
    pub y: f64,
    pub class: CellClass,
}

/// Expert labels of one image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruthRecord {
    pub image: String,
    pub entries: Vec<TruthEntry>,
}

/// Parses `x,y,class` rows (with a header line) for one image.
pub fn parse_truth_csv(image: &str, text: &str) -> Result<GroundTruthRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Truth(format!("{image}: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Truth(format!("{image}: missing column '{name}'")))
    };
    let (cx, cy, cc) = (col("x")?, col("y")?, col("class")?);
    let mut entries = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Truth(format!("{image}: {e}")))?;
        entries.push(parse_entry(image, line + 2, &rec, cx, cy, cc)?);
    }
    Ok(GroundTruthRecord {
        image: image.to_string(),
        entries,
    })
}

fn parse_entry(
    image: &str,
    line: usize,
    rec: &csv::StringRecord,
    cx: usize,
    cy: usize,
    cc: usize,
) -> Result<TruthEntry> {
    let field = |i: usize| rec.get(i).unwrap_or_default();
    let num = |i: usize| -> Result<f64> {
        field(i)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                Error::Truth(format!(
                    "{image} line {line}: bad coordinate '{}'",
                    field(i)
                ))
            })
    };
    let class = CellClass::parse(field(cc)).ok_or_else(|| {
        Error::Truth(format!(
            "{image} line {line}: unknown class '{}'",
            field(cc)
        ))
    })?;
    Ok(TruthEntry {
        x: num(cx)?,
        y: num(cy)?,
        class,
    })
}

/// Loads labels from a directory of `<image-stem>.csv` files or from a single
/// CSV file with columns `image,x,y,class`.
pub fn load_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRecord>> {
    let path = path.as_ref();
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| {
                let text = std::fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
                let stem = f.file_stem().unwrap_or_default().to_string_lossy();
                parse_truth_csv(&stem, &text)
            })
            .collect()
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_combined(&text)
    }
}

fn parse_combined(text: &str) -> Result<Vec<GroundTruthRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Truth(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Truth(format!("missing column '{name}'")))
    };
    let (ci, cx, cy, cc) = (col("image")?, col("x")?, col("y")?, col("class")?);
    let mut by_image: BTreeMap<String, Vec<TruthEntry>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Truth(e.to_string()))?;
        let image = rec.get(ci).unwrap_or_default().to_string();
        let entry = parse_entry(&image, line + 2, &rec, cx, cy, cc)?;
        by_image.entry(image).or_default().push(entry);
    }
    Ok(by_image
        .into_iter()
        .map(|(image, entries)| GroundTruthRecord { image, entries })
        .collect())
}

/// Greedy nearest-first pairing within `radius`; returns `(prediction, truth)`
/// index pairs. Ties are broken by prediction index, then truth index.
pub fn match_cells(pred: &[(f64, f64)], truth: &[(f64, f64)], radius: f64) -> Vec<(usize, usize)> {
    let mut cand = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let d = (p.0 - t.0).hypot(p.1 - t.1);
            if d <= radius {
                cand.push((d, i, j));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; pred.len()];
    let mut used_t = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// Detection and classification scores over a set of images.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub tally: DetectionTally,
    /// `None` when there is nothing to count.
    pub performance_index: Option<f64>,
    pub metrics: MetricSuite,
}

impl Evaluation {
    pub fn matrix(&self) -> &ConfusionMatrix3 {
        &self.metrics.matrix
    }
}

/// Matches predictions to labels image by image and scores the result.
pub fn evaluate(
    reports: &[ImageReport],
    truth: &[GroundTruthRecord],
    match_radius: f64,
) -> Result<Evaluation> {
    if !(match_radius > 0.0) {
        return Err(Error::invalid("match radius must be positive"));
    }
    let index: BTreeMap<&str, &GroundTruthRecord> =
        truth.iter().map(|t| (t.image.as_str(), t)).collect();
    let mut tally = DetectionTally::default();
    let mut matrix = ConfusionMatrix3::default();
    for r in reports {
        let t = index
            .get(r.image.as_str())
            .ok_or_else(|| Error::invalid(format!("no ground truth for image '{}'", r.image)))?;
        if let Some(e) = t.entries.iter().find(|e| {
            e.x < -0.5 || e.y < -0.5 || e.x > r.width as f64 - 0.5 || e.y > r.height as f64 - 0.5
        }) {
            return Err(Error::Truth(format!(
                "{}: label at ({}, {}) lies outside the {}x{} image",
                r.image, e.x, e.y, r.width, r.height
            )));
        }
        let pred: Vec<(f64, f64)> = r.cells.iter().map(|c| c.centroid()).collect();
        let labels: Vec<(f64, f64)> = t.entries.iter().map(|e| (e.x, e.y)).collect();
        let pairs = match_cells(&pred, &labels, match_radius);
        for &(i, j) in &pairs {
            matrix.record(t.entries[j].class, r.cells[i].class());
        }
        tally.dc += pairs.len() as u64;
        tally.ndc += (labels.len() - pairs.len()) as u64;
        tally.nc += (pred.len() - pairs.len()) as u64;
    }
    Ok(Evaluation {
        tally,
        performance_index: performance_index(&tally).ok(),
        metrics: MetricSuite::compute(&matrix),
    })
}
