//! Ridge classification and end-to-end pipeline assembly.

mod pipeline;
mod ridge;

pub use pipeline::{
    discovery_sample, fit_pipeline, run_pipeline, GraphSource, PipelineConfig, PipelineFit,
    Variant,
};
pub use ridge::{
    default_alpha_grid, ridge_fit, ridge_predict, ridge_scores, RidgeModel, RidgeModelDto,
};
