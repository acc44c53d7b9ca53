//! Label-smoothing laboratory on synthetic Gaussian blobs: the regularizer
//! ablation grid and the penultimate-layer representation analysis.

mod ablation;
mod blobs;
mod representation;

pub use ablation::{
    default_grid, run_ablation, AblationCell, AblationReport, AblationSettings, CellSummary,
    LossColumn, Regularizers, RunRecord, TableRow, REGULARIZER_ROWS,
};
pub use blobs::{make_blobs, nearest_centroid_accuracy, BlobsSpec};
pub use representation::{
    cluster_geometry, plane_basis, project_representation, template_vectors, wcss_bcss,
    ClusterGeometry, ProjectedPoint, RepresentationReport,
};
