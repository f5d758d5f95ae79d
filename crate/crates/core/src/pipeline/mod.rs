//! File formats, end-to-end commands, inference and evaluation.

mod commands;
pub mod io;
pub mod render;
pub mod svg;

pub use commands::{
    alignment, cmd_augment, cmd_eval, cmd_extract, cmd_infer, cmd_match, cmd_train,
    view_consistency, ConsistencyReport, Metrics, Project, ProjectManifest, Stage,
};
pub use io::{CameraFile, ContourFile, PipelineConfig};
pub use render::{
    analytic_contours, analytic_projection, deviate, regularize_masks, regularize_topology,
    render_deviated, ExtractConfig, Regularized,
};
pub use svg::SvgDocument;
