use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    analyze_image, annotate, evaluate, load_truth, Evaluation, ImageAnalysis, PipelineConfig,
};
use crate::classify::CellCounts;
use crate::error::{Error, Result};
use crate::imaging::load_gray_image;

/// Number of cross-validation folds in the aggregate report.
pub const FOLDS: usize = 5;

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub input_dir: PathBuf,
    pub config: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    /// Also write energy traces, cluster traces and masks.
    pub debug: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageFailure {
    pub image: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub processed: usize,
    pub failures: Vec<ImageFailure>,
    pub evaluation: Option<Evaluation>,
    pub aggregate_path: PathBuf,
}

impl BatchSummary {
    /// 0 when every image succeeded, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(!self.failures.is_empty())
    }
}

#[derive(Serialize)]
struct ImageRow<'a> {
    image: &'a str,
    counts: CellCounts,
    clusters_detected: usize,
    unresolved_clusters: usize,
    iterations_used: usize,
}

#[derive(Serialize)]
struct FoldRow<'a> {
    fold: usize,
    images: Vec<&'a str>,
    #[serde(flatten)]
    evaluation: Evaluation,
}

#[derive(Serialize)]
struct EvaluationBlock<'a> {
    match_radius: f64,
    images: usize,
    pooled: &'a Evaluation,
    folds: Vec<FoldRow<'a>>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    schema: u32,
    images: Vec<ImageRow<'a>>,
    failed: &'a [ImageFailure],
    totals: CellCounts,
    evaluation: Option<EvaluationBlock<'a>>,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "pgm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("report types serialise");
    s.push(b'\n');
    s
}

fn write_outputs(
    out: &Path,
    stem: &str,
    a: &ImageAnalysis,
    image: &crate::imaging::GrayImage,
    debug: bool,
) -> Result<()> {
    write(&out.join(format!("{stem}.json")), &json(&a.report))?;
    let png = out.join(format!("{stem}.png"));
    annotate(image, &a.report.cells)
        .save(&png)
        .map_err(|e| Error::Format(format!("{}: {e}", png.display())))?;
    if debug {
        if let Some(log) = &a.energy_log {
            let path = out.join(format!("{stem}.energy.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Format(e.to_string()))?;
            for row in log {
                w.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        write(
            &out.join(format!("{stem}.clusters.json")),
            &json(&a.cluster_traces),
        )?;
        let mask =
            image::GrayImage::from_fn(a.mask.width() as u32, a.mask.height() as u32, |x, y| {
                image::Luma([if a.mask.get(x as usize, y as usize) {
                    255
                } else {
                    0
                }])
            });
        let path = out.join(format!("{stem}.mask.png"));
        mask.save(&path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Processes every PNG/PGM image of a directory.
///
/// Configuration, truth and directory errors are returned as `Err`. Failures of
/// individual images are logged, listed in the summary and the aggregate report,
/// and do not stop the batch.
pub fn run_batch(opts: &BatchOptions) -> Result<BatchSummary> {
    let config = match &opts.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let truth = opts.truth.as_ref().map(load_truth).transpose()?;
    let files = list_images(&opts.input_dir)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;

    let results: Vec<(String, Result<ImageAnalysis>)> = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let stem = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                let res = load_gray_image(path).and_then(|img| {
                    let a = analyze_image(&img, &stem, &config, opts.debug)?;
                    write_outputs(&opts.out_dir, &stem, &a, &img, opts.debug)?;
                    Ok(a)
                });
                match &res {
                    Ok(a) => log::info!(
                        "{stem}: {} cells ({} clusters) in {:.2}s",
                        a.report.counts.total(),
                        a.report.clusters_detected,
                        a.report.wall_time
                    ),
                    Err(e) => log::warn!("{stem}: {e}"),
                }
                (stem, res)
            })
            .collect()
    });

    let mut failures = Vec::new();
    let mut reports = Vec::new();
    for (stem, res) in results {
        match res {
            Ok(a) => reports.push(a.report),
            Err(e) => failures.push(ImageFailure {
                image: stem,
                error: e.to_string(),
            }),
        }
    }

    let mut evaluation = None;
    let mut folds = Vec::new();
    let mut evaluated = Vec::new();
    if let Some(truth) = &truth {
        let known: BTreeSet<&str> = truth.iter().map(|t| t.image.as_str()).collect();
        for r in &reports {
            if known.contains(r.image.as_str()) {
                evaluated.push(r.clone());
            } else {
                log::warn!("{}: no ground truth", r.image);
                failures.push(ImageFailure {
                    image: r.image.clone(),
                    error: "no ground truth for this image".into(),
                });
            }
        }
        let radius = config.evaluate.match_radius;
        let pooled = evaluate(&evaluated, truth, radius)?;
        for k in 0..FOLDS {
            let members: Vec<_> = evaluated
                .iter()
                .enumerate()
                .filter(|(i, _)| i % FOLDS == k)
                .map(|(_, r)| r.clone())
                .collect();
            if members.is_empty() {
                continue;
            }
            folds.push((
                k,
                members.iter().map(|r| r.image.clone()).collect::<Vec<_>>(),
                evaluate(&members, truth, radius)?,
            ));
        }
        let mut csv = Vec::new();
        pooled.matrix().write_csv(&mut csv)?;
        write(&opts.out_dir.join("confusion.csv"), &csv)?;
        evaluation = Some(pooled);
    }
    failures.sort_by(|a, b| a.image.cmp(&b.image));

    let mut totals = CellCounts::default();
    for r in &reports {
        totals.add(&r.counts);
    }
    let aggregate = Aggregate {
        schema: super::REPORT_SCHEMA,
        images: reports
            .iter()
            .map(|r| ImageRow {
                image: &r.image,
                counts: r.counts,
                clusters_detected: r.clusters_detected,
                unresolved_clusters: r.unresolved_clusters,
                iterations_used: r.iterations_used,
            })
            .collect(),
        failed: &failures,
        totals,
        evaluation: evaluation.as_ref().map(|pooled| EvaluationBlock {
            match_radius: config.evaluate.match_radius,
            images: evaluated.len(),
            pooled,
            folds: folds
                .iter()
                .map(|(k, names, e)| FoldRow {
                    fold: *k,
                    images: names.iter().map(String::as_str).collect(),
                    evaluation: e.clone(),
                })
                .collect(),
        }),
    };
    let aggregate_path = opts.out_dir.join("aggregate.json");
    write(&aggregate_path, &json(&aggregate))?;

    if truth.is_some() && evaluation.as_ref().is_some_and(|e| e.matrix().total() == 0) {
        log::warn!("no prediction matched a ground-truth label");
    }
    Ok(BatchSummary {
        processed: reports.len(),
        failures,
        evaluation,
        aggregate_path,
    })
}
