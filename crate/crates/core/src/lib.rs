//! Classification of labeled multivariate daily time series with lag-aware
//! causal feature selection.
//!
//! The pipeline: ingest per-lake 365-day series ([`dataset`]), clean raw
//! observations ([`preprocess`]), discover lagged causal parents of a target
//! signal over pooled lakes with context dummies ([`causal`]), expand the
//! parents into lag-shifted channels and transform them with a deterministic
//! convolutional feature extractor ([`features`]), classify with a ridge
//! model selected by closed-form leave-one-out ([`classify`]), and score
//! under pooled, per-region, and leave-one-region-out protocols ([`eval`]).
//! A structural-causal-model generator ([`synth`]) provides labeled datasets
//! with known ground truth for end-to-end validation.
//!
//! All numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the default `f64` instantiation.

pub mod classify;
pub mod causal;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod linalg;
pub mod preprocess;
pub mod scalar;
pub mod synth;
pub mod vars;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use vars::{LakeClass, Region, VariableId, VariableKind};

/// Default scalar type for the shipped pipeline.
pub type F = f64;

pub type Dataset64 = dataset::Dataset<F>;
pub type LakeRecord64 = dataset::LakeRecord<F>;
pub type PooledPanel64 = causal::PooledPanel<F>;
pub type ChannelMatrix64 = features::ChannelMatrix<F>;
pub type FeatureMatrix64 = features::FeatureMatrix<F>;
pub type TransformParams64 = features::TransformParams<F>;
pub type RidgeModel64 = classify::RidgeModel<F>;
