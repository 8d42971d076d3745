//! Splitting of cell clusters into individual elliptical objects.
//!
//! A cluster outline is cut at its concave points. Each resulting arc is fitted
//! with an ellipse by algebraic least squares, and a fit is kept only if it
//! covers the cluster well and is not already explained by previously accepted
//! ellipses.

mod concave;
mod ellipse;
mod resolve;

pub use concave::{detect_concave_points, ConcavePointParams};
pub use ellipse::{fit_ellipse, to_canonical, AlgebraicEllipse, CanonicalEllipse};
pub use resolve::{
    rasterize_ellipse, resolve_cluster, resolve_cluster_traced, validate_ellipse, ArcAttempt,
    ClusterTrace, EllipseValidityParams, ResolvedObject,
};
