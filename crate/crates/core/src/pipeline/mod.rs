//! End-to-end processing of images: segmentation, region analysis, cluster
//! resolution, classification, evaluation against expert labels and output.

mod annotate;
mod batch;
mod config;
mod truth;

use std::time::Instant;

use serde::Serialize;

pub use annotate::annotate;
pub use batch::{run_batch, BatchOptions, BatchSummary, ImageFailure};
pub use config::{EvaluateParams, PipelineConfig};
pub use truth::{
    evaluate, load_truth, match_cells, parse_truth_csv, Evaluation, GroundTruthRecord, TruthEntry,
};

use crate::chanvese::{binarize, evolve, evolve_with_log, initial_level_set, IterationRecord};
use crate::classify::{count_cells, CellCounts, ClassifiedCell};
use crate::cluster::{resolve_cluster_traced, ClusterTrace};
use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayImage};
use crate::regions::{cleanup, label_components, split_partition};

/// Version of the report layout.
pub const REPORT_SCHEMA: u32 = 1;

/// Per-image result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageReport {
    pub schema: u32,
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub counts: CellCounts,
    pub clusters_detected: usize,
    pub unresolved_clusters: usize,
    pub iterations_used: usize,
    /// Seconds.
    pub wall_time: f64,
    pub cells: Vec<ClassifiedCell>,
}

/// Report plus intermediate products.
#[derive(Debug, Clone)]
pub struct ImageAnalysis {
    pub report: ImageReport,
    pub mask: BinaryMask,
    /// Filled only when debug output was requested.
    pub energy_log: Option<Vec<IterationRecord>>,
    pub cluster_traces: Vec<ClusterTrace>,
}

/// Runs the full pipeline on one image.
pub fn run_image(image: &GrayImage, config: &PipelineConfig) -> Result<ImageReport> {
    analyze_image(image, "", config, false).map(|a| a.report)
}

/// Like [`run_image`] but keeps the mask and, with `debug`, the energy trace.
pub fn analyze_image(
    image: &GrayImage,
    id: &str,
    config: &PipelineConfig,
    debug: bool,
) -> Result<ImageAnalysis> {
    let wrap = |e: Error| {
        if id.is_empty() {
            e
        } else {
            Error::Image {
                id: id.to_string(),
                source: Box::new(e),
            }
        }
    };
    config.validate().map_err(wrap)?;
    let started = Instant::now();
    let (w, h) = (image.width(), image.height());

    let (lo, hi) = image.range();
    let (mask, iterations, energy_log) = if hi - lo <= 1e-9 * hi.abs().max(1.0) {
        (BinaryMask::new(w, h), 0, None)
    } else {
        let init = initial_level_set(w, h, config.chanvese.hole_cell).map_err(wrap)?;
        let evo = if debug {
            evolve_with_log(image, &config.chanvese, init)
        } else {
            evolve(image, &config.chanvese, init)
        }
        .map_err(wrap)?;
        let mask = binarize(&evo.field, image).map_err(wrap)?;
        (mask, evo.iterations, evo.log)
    };

    let regions = cleanup(label_components(&mask), &config.cleanup);
    let mut cells = Vec::new();
    let mut traces = Vec::new();
    let mut clusters_detected = 0;
    let mut unresolved = 0;
    if !regions.is_empty() {
        let part = split_partition(regions, config.split.k).map_err(wrap)?;
        clusters_detected = part.clusters.len();
        let mut isolated = part.isolated.into_iter().peekable();
        let mut clusters = part.clusters.into_iter().peekable();
        loop {
            let take_isolated = match (isolated.peek(), clusters.peek()) {
                (Some(a), Some(b)) => a.label < b.label,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_isolated {
                let r = isolated.next().expect("peeked");
                cells.push(ClassifiedCell::isolated(&r, &config.classify));
            } else {
                let r = clusters.next().expect("peeked");
                let (res, trace) = resolve_cluster_traced(&r, &config.concave, &config.validity);
                match res {
                    Ok(objects) => cells.extend(
                        objects
                            .iter()
                            .map(|o| ClassifiedCell::from_cluster(r.label, o, &config.classify)),
                    ),
                    Err(Error::UnresolvedCluster { .. }) => {
                        unresolved += 1;
                        cells.push(ClassifiedCell::unresolved(&r));
                    }
                    Err(e) => return Err(wrap(e)),
                }
                if debug {
                    traces.push(trace);
                }
            }
        }
    }

    let report = ImageReport {
        schema: REPORT_SCHEMA,
        image: id.to_string(),
        width: w,
        height: h,
        counts: count_cells(&cells),
        clusters_detected,
        unresolved_clusters: unresolved,
        iterations_used: iterations,
        wall_time: started.elapsed().as_secs_f64(),
        cells,
    };
    Ok(ImageAnalysis {
        report,
        mask,
        energy_log,
        cluster_traces: traces,
    })
}
