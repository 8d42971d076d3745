//! Detection and classification scores.
//!
//! Scores whose denominator vanishes are `None` rather than a number.
//! Classes are ordered `(normal, elongated, other)` throughout.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::classify::CellClass;
use crate::error::{Error, Result};

/// Detected, missed and spurious cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionTally {
    pub dc: u64,
    pub ndc: u64,
    pub nc: u64,
}

impl DetectionTally {
    pub fn add(&mut self, o: &DetectionTally) {
        self.dc += o.dc;
        self.ndc += o.ndc;
        self.nc += o.nc;
    }
}

/// `dc / (dc + ndc + nc)`.
pub fn performance_index(t: &DetectionTally) -> Result<f64> {
    let total = t.dc + t.ndc + t.nc;
    if total == 0 {
        return Err(Error::invalid("performance index of an empty tally"));
    }
    Ok(t.dc as f64 / total as f64)
}

/// `n[i][j]` counts cells of true class `i` predicted as class `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix3 {
    pub n: [[u64; 3]; 3],
}

impl ConfusionMatrix3 {
    pub fn new(n: [[u64; 3]; 3]) -> Self {
        Self { n }
    }

    pub fn record(&mut self, truth: CellClass, predicted: CellClass) {
        self.n[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.n.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.n[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..3).map(|i| self.n[i][j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.n[i][i]).sum()
    }

    pub fn add(&mut self, other: &ConfusionMatrix3) {
        for i in 0..3 {
            for j in 0..3 {
                self.n[i][j] += other.n[i][j];
            }
        }
    }

    /// Sum of several matrices.
    pub fn pooled<'a>(ms: impl IntoIterator<Item = &'a ConfusionMatrix3>) -> Self {
        let mut out = Self::default();
        for m in ms {
            out.add(m);
        }
        out
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv): a header
    /// line followed by one row per true class, each starting with the class name.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut m = Self::default();
        let mut seen = [false; 3];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Format(format!("confusion csv: {e}")))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let label = rec.get(0).unwrap_or_default();
            let Some(class) = CellClass::parse(label) else {
                if seen.iter().any(|&s| s) {
                    return Err(Error::Format(format!("unknown class label '{label}'")));
                }
                continue;
            };
            if rec.len() != 4 {
                return Err(Error::Format(format!(
                    "row '{label}' has {} fields, expected 4",
                    rec.len()
                )));
            }
            let i = class.index();
            if seen[i] {
                return Err(Error::Format(format!("duplicate row '{label}'")));
            }
            seen[i] = true;
            for j in 0..3 {
                let f = &rec[j + 1];
                m.n[i][j] = f
                    .parse()
                    .map_err(|_| Error::Format(format!("'{f}' is not a non-negative count")))?;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Format(
                "confusion csv needs rows normal, elongated and other".into(),
            ));
        }
        Ok(m)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| Error::Format(format!("confusion csv: {e}"));
        w.write_record(["true\\predicted", "normal", "elongated", "other"])
            .map_err(err)?;
        for class in CellClass::ALL {
            let row = self.n[class.index()];
            w.write_record([
                class.name().to_string(),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Per-class scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub specificity: Option<f64>,
    pub f_measure: Option<f64>,
}

/// Sensitivity, precision, specificity and F-measure of each class.
pub fn class_metrics(m: &ConfusionMatrix3) -> [ClassMetrics; 3] {
    let total = m.total();
    std::array::from_fn(|i| {
        let tp = m.n[i][i];
        let row = m.row_sum(i);
        let col = m.col_sum(i);
        let negatives = total - row;
        let tn = negatives - (col - tp);
        let r = ratio(tp, row);
        let p = ratio(tp, col);
        let f = match (r, p) {
            (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * r * p / (r + p)),
            _ => None,
        };
        ClassMetrics {
            sensitivity: r,
            precision: p,
            specificity: ratio(tn, negatives),
            f_measure: f,
        }
    })
}

/// Class-balanced accuracy.
pub fn cba(m: &ConfusionMatrix3) -> Option<f64> {
    let mut s = 0.0;
    for i in 0..3 {
        s += ratio(m.n[i][i], m.row_sum(i).max(m.col_sum(i)))?;
    }
    Some(s / 3.0)
}

/// Multiclass Matthews correlation coefficient.
pub fn mcc(m: &ConfusionMatrix3) -> Option<f64> {
    let n = m.total() as f64;
    let tr = m.trace() as f64;
    let rows: Vec<f64> = (0..3).map(|k| m.row_sum(k) as f64).collect();
    let cols: Vec<f64> = (0..3).map(|k| m.col_sum(k) as f64).collect();
    let cross: f64 = rows.iter().zip(&cols).map(|(r, c)| r * c).sum();
    let num = tr * n - cross;
    let dp = n * n - cols.iter().map(|c| c * c).sum::<f64>();
    let dt = n * n - rows.iter().map(|r| r * r).sum::<f64>();
    let den = dp.sqrt() * dt.sqrt();
    (den > 0.0).then(|| num / den)
}

/// Diagnosis-support score: accuracy in which elongated/other confusions count
/// as correct.
pub fn sds_score(m: &ConfusionMatrix3) -> Result<f64> {
    let total = m.total();
    if total == 0 {
        return Err(Error::invalid("sds score of an empty matrix"));
    }
    Ok((m.trace() + m.n[1][2] + m.n[2][1]) as f64 / total as f64)
}

/// Normal versus everything else; index 0 is normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix2 {
    pub n: [[u64; 2]; 2],
}

impl ConfusionMatrix2 {
    pub fn total(&self) -> u64 {
        self.n.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.n[0][0] + self.n[1][1], self.total())
    }
}

pub fn two_class_collapse(m: &ConfusionMatrix3) -> ConfusionMatrix2 {
    let g = |i: usize| usize::from(i != 0);
    let mut out = ConfusionMatrix2 { n: [[0; 2]; 2] };
    for i in 0..3 {
        for j in 0..3 {
            out.n[g(i)][g(j)] += m.n[i][j];
        }
    }
    out
}

/// Every score derived from one confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSuite {
    pub matrix: ConfusionMatrix3,
    pub normal: ClassMetrics,
    pub elongated: ClassMetrics,
    pub other: ClassMetrics,
    pub sds: Option<f64>,
    pub cba: Option<f64>,
    pub mcc: Option<f64>,
    pub two_class: ConfusionMatrix2,
    pub two_class_accuracy: Option<f64>,
}

impl MetricSuite {
    pub fn compute(m: &ConfusionMatrix3) -> Self {
        let [normal, elongated, other] = class_metrics(m);
        let two = two_class_collapse(m);
        Self {
            matrix: *m,
            normal,
            elongated,
            other,
            sds: sds_score(m).ok(),
            cba: cba(m),
            mcc: mcc(m),
            two_class: two,
            two_class_accuracy: two.accuracy(),
        }
    }

    pub fn class(&self, c: CellClass) -> &ClassMetrics {
        match c {
            CellClass::Normal => &self.normal,
            CellClass::Elongated => &self.elongated,
            CellClass::OtherDeformation => &self.other,
        }
    }
}
