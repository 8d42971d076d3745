//! Red-blood-cell morphology analysis for blood-smear images.
//!
//! The pipeline segments cells with a two-phase level-set model, labels the
//! resulting regions, splits clusters of overlapping cells by fitting ellipses
//! to the arcs between concave boundary points, and classifies every cell as
//! normal, elongated (sickle) or otherwise deformed from its circular and
//! elliptical shape factors. Evaluation against expert labels produces the
//! usual detection and multiclass scores.
//!
//! ```no_run
//! use rbc_morph::{imaging::load_gray_image, pipeline::{run_image, PipelineConfig}};
//!
//! let img = load_gray_image("smear.png")?;
//! let report = run_image(&img, &PipelineConfig::default())?;
//! println!("{:?}", report.counts);
//! # Ok::<(), rbc_morph::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanvese;
pub mod classify;
pub mod cluster;
mod error;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod regions;
pub mod synth;

pub use error::{Error, Result};
