//! Lag-shifted causal channels and their fixed-length feature vectors.

mod transform;

pub use transform::{
    conv_all_kernels, fit_transform_params, kernel_positions, transform, transform_batch,
    TransformConfig, TransformParams, TransformParamsDto, NUM_KERNELS,
};

use crate::causal::CausalGraph;
use crate::dataset::{LakeRecord, DAYS};
use crate::error::{Error, Result};
use crate::scalar::{s, to_f64, Scalar};
use crate::vars::{VariableId, VariableKind};
use ndarray::Array2;
use std::f64::consts::TAU;

/// One channel definition: source variable shifted back by `lag` days.
pub type ChannelSpecEntry = (VariableId, usize);

/// Lag-aligned channels for one lake: row `c` at day `t` holds the source
/// variable of channel `c` at day `t - lag`.
#[derive(Debug, Clone)]
pub struct ChannelMatrix<S: Scalar> {
    /// (C channels x 365 days).
    pub channels: Array2<S>,
    pub spec: Vec<ChannelSpecEntry>,
}

/// Channel definitions from a discovered graph: the union of all retained
/// parent links over all targets, deduplicated and canonically ordered.
///
/// Context parents are excluded unless `include_dummies` is set; the lake
/// identity dummy is always excluded (it cannot generalize across lakes).
pub fn channel_spec_from_graph(graph: &CausalGraph, include_dummies: bool) -> Vec<ChannelSpecEntry> {
    let mut spec: Vec<ChannelSpecEntry> = graph
        .targets
        .values()
        .flatten()
        .filter(|link| match link.var.kind() {
            VariableKind::Observed => true,
            VariableKind::Context => include_dummies && link.var != VariableId::SDummy,
        })
        .map(|link| (link.var, link.lag))
        .collect();
    spec.sort();
    spec.dedup();
    spec
}

/// The correlation-baseline channel set: all nine observed variables at lag 0.
pub fn baseline_channel_spec() -> Vec<ChannelSpecEntry> {
    VariableId::OBSERVED.iter().map(|&v| (v, 0)).collect()
}

/// Builds the lag-shifted channel matrix of one lake for a channel spec.
///
/// The first `lag` days of a channel are backfilled with the first defined
/// value. A region-dummy channel is the constant canonical region index; a
/// seasonal-dummy channel is the sine component of the day-of-year encoding.
pub fn build_channels<S: Scalar>(
    lake: &LakeRecord<S>,
    spec: &[ChannelSpecEntry],
) -> Result<ChannelMatrix<S>> {
    let mut channels = Array2::<S>::zeros((spec.len(), DAYS));
    for (c, &(var, lag)) in spec.iter().enumerate() {
        if lag >= DAYS {
            return Err(Error::Invalid(format!("channel lag {lag} exceeds series length")));
        }
        match var {
            VariableId::SDummy => {
                return Err(Error::Invalid("s_dummy cannot be a channel".into()))
            }
            VariableId::RDummy => {
                let value = s::<S>(lake.region.index() as f64);
                channels.row_mut(c).fill(value);
            }
            VariableId::TDummy => {
                for d in 0..DAYS {
                    let phase = TAU * (d as f64 + 1.0 - lag as f64) / DAYS as f64;
                    channels[[c, d]] = s(phase.sin());
                }
            }
            observed => {
                let src = lake.column(observed);
                for d in 0..DAYS {
                    channels[[c, d]] = if d >= lag { src[d - lag] } else { src[0] };
                }
            }
        }
    }
    Ok(ChannelMatrix { channels, spec: spec.to_vec() })
}

/// Convenience wrapper matching the discovery output directly.
pub fn build_channels_from_graph<S: Scalar>(
    lake: &LakeRecord<S>,
    graph: &CausalGraph,
    include_dummies: bool,
) -> Result<ChannelMatrix<S>> {
    build_channels(lake, &channel_spec_from_graph(graph, include_dummies))
}

/// Per-lake feature vectors; all entries are PPV proportions in [0, 1].
#[derive(Debug, Clone)]
pub struct FeatureMatrix<S: Scalar> {
    /// (n_lakes x n_features).
    pub rows: Array2<S>,
    pub lake_ids: Vec<String>,
}

impl<S: Scalar> FeatureMatrix<S> {
    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// CSV export with header `lake_id,f0,f1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lake_id");
        for j in 0..self.rows.ncols() {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for (i, id) in self.lake_ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.rows.ncols() {
                out.push_str(&format!(",{}", to_f64(self.rows[[i, j]])));
            }
            out.push('\n');
        }
        out
    }
}
