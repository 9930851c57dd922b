//! End-to-end pipeline: discovery on training data only, channel
//! construction, transform fitting, ridge fitting, and test prediction.

use crate::causal::{discover_parents, pool_lakes, CausalGraph, DiscoveryConfig};
use crate::classify::ridge::{default_alpha_grid, ridge_fit, ridge_predict, RidgeModel, RidgeModelDto};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::features::{
    baseline_channel_spec, build_channels, channel_spec_from_graph, fit_transform_params,
    transform_batch, ChannelMatrix, ChannelSpecEntry, TransformConfig, TransformParams,
    TransformParamsDto,
};
use crate::scalar::Scalar;
use crate::vars::LakeClass;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Feature-selection strategy of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Channels from discovered lagged causal parents.
    Causal,
    /// All nine observed variables at lag 0, no discovery.
    Baseline,
}

/// Which lakes feed discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    /// One graph pooled over all training regions.
    Global,
    /// One graph per training region; channel specs are unioned.
    PerRegion,
}

/// Pipeline settings shared by both variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub graph_source: GraphSource,
    pub discovery: DiscoveryConfig,
    pub transform: TransformConfig,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    /// Training lakes sampled per region for a pooled global graph.
    pub discovery_lakes_per_region_global: usize,
    /// Training lakes sampled per region for region-specific graphs.
    pub discovery_lakes_per_region_regional: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variant: Variant::Causal,
            graph_source: GraphSource::Global,
            discovery: DiscoveryConfig::default(),
            transform: TransformConfig::default(),
            alpha_grid: default_alpha_grid(),
            seed: 0,
            discovery_lakes_per_region_global: 10,
            discovery_lakes_per_region_regional: 20,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.discovery.validate()?;
        self.transform.validate()?;
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|&a| a.is_nan() || a <= 0.0) {
            return Err(Error::Config("alpha grid must be nonempty and positive".into()));
        }
        if self.discovery_lakes_per_region_global < 1
            || self.discovery_lakes_per_region_regional < 1
        {
            return Err(Error::Config("discovery sample sizes must be >= 1".into()));
        }
        Ok(())
    }
}

/// Everything fitted on the training set; serializable for audits.
#[derive(Debug, Clone)]
pub struct PipelineFit<S: Scalar> {
    pub config: PipelineConfig,
    pub graph: Option<CausalGraph>,
    pub channel_spec: Vec<ChannelSpecEntry>,
    pub transform: TransformParams<S>,
    pub model: RidgeModel<S>,
}

/// Serialization form of a fitted pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineFitDto {
    pub config: PipelineConfig,
    pub graph: Option<CausalGraph>,
    pub channel_spec: Vec<ChannelSpecEntry>,
    pub transform: TransformParamsDto,
    pub model: RidgeModelDto,
}

impl<S: Scalar> PipelineFit<S> {
    pub fn to_dto(&self) -> PipelineFitDto {
        PipelineFitDto {
            config: self.config.clone(),
            graph: self.graph.clone(),
            channel_spec: self.channel_spec.clone(),
            transform: self.transform.to_dto(),
            model: self.model.to_dto(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dto()).expect("fit serializable")
    }

    /// Predicts labels for a dataset with the fitted artifacts.
    pub fn predict(&self, ds: &Dataset<S>) -> Result<Vec<LakeClass>> {
        let features = featurize(ds, &self.channel_spec, &self.transform)?;
        ridge_predict(&features, &self.model)
    }
}

/// Deterministic seeded subsample for discovery: up to `per_region` lakes
/// per region, drawn round-robin across classes so every outcome type is
/// represented when available.
pub fn discovery_sample<S: Scalar>(train: &Dataset<S>, per_region: usize, seed: u64) -> Dataset<S> {
    let mut picked = Vec::new();
    for region in train.regions() {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); LakeClass::ALL.len()];
        let mut members: Vec<usize> = (0..train.lakes.len())
            .filter(|&i| train.lakes[i].region == region)
            .collect();
        members.sort_by(|&a, &b| {
            let la = &train.lakes[a];
            let lb = &train.lakes[b];
            (la.lake_id.as_str(), la.year).cmp(&(lb.lake_id.as_str(), lb.year))
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9 + region.index() as u64));
        members.shuffle(&mut rng);
        for idx in members {
            by_class[train.lakes[idx].label.index()].push(idx);
        }
        let mut taken = 0usize;
        let mut round = 0usize;
        while taken < per_region {
            let mut any = false;
            for class_list in &by_class {
                if let Some(&idx) = class_list.get(round) {
                    picked.push(idx);
                    taken += 1;
                    any = true;
                    if taken >= per_region {
                        break;
                    }
                }
            }
            if !any {
                break;
            }
            round += 1;
        }
    }
    picked.sort_unstable();
    Dataset {
        lakes: picked.into_iter().map(|i| train.lakes[i].clone()).collect(),
        provenance: format!("{}[discovery-sample]", train.provenance),
    }
}

fn discover_graph<S: Scalar>(train: &Dataset<S>, cfg: &PipelineConfig) -> Result<CausalGraph> {
    match cfg.graph_source {
        GraphSource::Global => {
            let sample =
                discovery_sample(train, cfg.discovery_lakes_per_region_global, cfg.seed);
            let panel = pool_lakes(&sample, &cfg.discovery)?;
            discover_parents(&panel, &cfg.discovery)
        }
        GraphSource::PerRegion => {
            // Discover per region and merge parent sets; single-region
            // training data reduces to that region's graph.
            let mut merged: Option<CausalGraph> = None;
            for region in train.regions() {
                let regional = train.filter_region(region);
                let sample = discovery_sample(
                    &regional,
                    cfg.discovery_lakes_per_region_regional,
                    cfg.seed,
                );
                let panel = pool_lakes(&sample, &cfg.discovery)?;
                let graph = discover_parents(&panel, &cfg.discovery)?;
                merged = Some(match merged {
                    None => graph,
                    Some(mut acc) => {
                        for (target, links) in graph.targets {
                            let slot = acc.targets.entry(target).or_default();
                            for link in links {
                                if let Some(existing) = slot
                                    .iter_mut()
                                    .find(|l| l.var == link.var && l.lag == link.lag)
                                {
                                    // Keep the stronger evidence.
                                    if link.p_value < existing.p_value {
                                        *existing = link;
                                    }
                                } else {
                                    slot.push(link);
                                }
                            }
                            slot.sort_by(|a, b| a.var.cmp(&b.var).then(a.lag.cmp(&b.lag)));
                        }
                        acc
                    }
                });
            }
            merged.ok_or_else(|| Error::Domain("no regions in training data".into()))
        }
    }
}

/// Builds channels and features for every lake of a dataset.
fn featurize<S: Scalar>(
    ds: &Dataset<S>,
    spec: &[ChannelSpecEntry],
    params: &TransformParams<S>,
) -> Result<Array2<S>> {
    let matrices: Vec<ChannelMatrix<S>> = ds
        .lakes
        .par_iter()
        .map(|lake| build_channels(lake, spec))
        .collect::<Result<_>>()?;
    let rows = transform_batch(&matrices, params)?;
    let n_features = params.feature_count(spec.len());
    let mut out = Array2::<S>::zeros((ds.lakes.len(), n_features));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Fits one pipeline variant on training data alone: discovery (causal
/// variant), channel construction, transform parameters, and the ridge
/// model. Nothing here sees anything but `train`.
pub fn fit_pipeline<S: Scalar>(train: &Dataset<S>, cfg: &PipelineConfig) -> Result<PipelineFit<S>> {
    cfg.validate()?;
    train.require_dense()?;
    if train.is_empty() {
        return Err(Error::Domain("training set must be nonempty".into()));
    }

    let (graph, channel_spec) = match cfg.variant {
        Variant::Causal => {
            let graph = discover_graph(train, cfg)?;
            let spec = channel_spec_from_graph(&graph, cfg.transform.include_dummies);
            if spec.is_empty() {
                // An empty discovered parent set is valid; fall back to the
                // target's own contemporaneous channel so the classifier has
                // at least one input.
                let fallback: Vec<ChannelSpecEntry> =
                    cfg.discovery.targets.iter().map(|&t| (t, 0)).collect();
                (Some(graph), fallback)
            } else {
                (Some(graph), spec)
            }
        }
        Variant::Baseline => (None, baseline_channel_spec()),
    };

    let train_matrices: Vec<ChannelMatrix<S>> = train
        .lakes
        .par_iter()
        .map(|lake| build_channels(lake, &channel_spec))
        .collect::<Result<_>>()?;
    let params = fit_transform_params(&train_matrices, &cfg.transform, cfg.seed)?;

    let train_rows = transform_batch(&train_matrices, &params)?;
    let n_features = params.feature_count(channel_spec.len());
    let mut train_features = Array2::<S>::zeros((train.lakes.len(), n_features));
    for (i, row) in train_rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            train_features[[i, j]] = v;
        }
    }
    let labels: Vec<LakeClass> = train.lakes.iter().map(|l| l.label).collect();
    let model = ridge_fit(train_features, &labels, &cfg.alpha_grid)?;

    Ok(PipelineFit { config: cfg.clone(), graph, channel_spec, transform: params, model })
}

/// Fits on `train` and predicts `test`, enforcing unit-level disjointness.
pub fn run_pipeline<S: Scalar>(
    train: &Dataset<S>,
    test: &Dataset<S>,
    cfg: &PipelineConfig,
) -> Result<(Vec<LakeClass>, PipelineFit<S>)> {
    test.require_dense()?;
    if test.is_empty() {
        return Err(Error::Domain("test set must be nonempty".into()));
    }
    let train_units: HashSet<(String, i32)> =
        train.lakes.iter().map(|l| (l.lake_id.clone(), l.year)).collect();
    for lake in &test.lakes {
        if train_units.contains(&(lake.lake_id.clone(), lake.year)) {
            return Err(Error::Leakage { lake_id: lake.lake_id.clone(), year: lake.year });
        }
    }
    let fit = fit_pipeline(train, cfg)?;
    let predictions = fit.predict(test)?;
    Ok((predictions, fit))
}
