//! Evaluation protocols and metrics: pooled, per-region in-distribution, and
//! leave-one-region-out.

use crate::classify::{run_pipeline, GraphSource, PipelineConfig, Variant};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vars::{LakeClass, Region};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Evaluation protocol identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// 80/20 stratified split over the pooled dataset.
    Global,
    /// 80/20 stratified split within one region.
    RegionId,
    /// Train on one region, test on the pooled remaining regions.
    RegionOod,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Global => "global",
            Protocol::RegionId => "region-id",
            Protocol::RegionOod => "region-ood",
        }
    }
}

/// Accuracy and macro-averaged scores for one variant on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Label counts per class in the test set.
    pub support: BTreeMap<LakeClass, usize>,
}

/// Accuracy, macro precision/recall/F1 with zero-division defined as 0.
///
/// Macro averages run over the classes present in the labels.
pub fn metrics(preds: &[LakeClass], labels: &[LakeClass]) -> Result<VariantMetrics> {
    if preds.len() != labels.len() {
        return Err(Error::Domain(format!(
            "prediction/label length mismatch: {} vs {}",
            preds.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Domain("empty evaluation set".into()));
    }
    let mut confusion = [[0usize; 4]; 4];
    for (p, l) in preds.iter().zip(labels) {
        confusion[l.index()][p.index()] += 1;
    }
    let mut support = BTreeMap::new();
    let mut correct = 0usize;
    for class in LakeClass::ALL {
        let c = class.index();
        let row: usize = confusion[c].iter().sum();
        if row > 0 {
            support.insert(class, row);
        }
        correct += confusion[c][c];
    }
    let mut macro_p = 0.0;
    let mut macro_r = 0.0;
    let mut macro_f1 = 0.0;
    let present = support.len() as f64;
    for &class in support.keys() {
        let c = class.index();
        let tp = confusion[c][c] as f64;
        let predicted: usize = (0..4).map(|l| confusion[l][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        macro_p += precision;
        macro_r += recall;
        macro_f1 += f1;
    }
    Ok(VariantMetrics {
        accuracy: correct as f64 / labels.len() as f64,
        macro_precision: macro_p / present,
        macro_recall: macro_r / present,
        macro_f1: macro_f1 / present,
        support,
    })
}

/// Seeded stratified split: per class, `round(ratio * n_c)` lakes go to
/// train (clamped so both sides stay nonempty), the rest to test.
pub fn stratified_split<S: Scalar>(
    ds: &Dataset<S>,
    ratio: f64,
    seed: u64,
) -> Result<(Dataset<S>, Dataset<S>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut by_class: BTreeMap<LakeClass, Vec<usize>> = BTreeMap::new();
    for (i, lake) in ds.lakes.iter().enumerate() {
        by_class.entry(lake.label).or_default().push(i);
    }
    for (class, members) in &by_class {
        if members.len() < 2 {
            return Err(Error::Domain(format!(
                "class {class} has {} lake(s); stratified split needs at least 2",
                members.len()
            )));
        }
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, mut members) in by_class {
        // Canonical within-class order before the seeded shuffle keeps the
        // split independent of dataset ordering.
        members.sort_by(|&a, &b| {
            let la = &ds.lakes[a];
            let lb = &ds.lakes[b];
            (la.lake_id.as_str(), la.year).cmp(&(lb.lake_id.as_str(), lb.year))
        });
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xA511_E9B3 ^ class.index() as u64));
        members.shuffle(&mut rng);
        let n = members.len();
        let take = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&members[..take]);
        test_idx.extend_from_slice(&members[take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize], tag: &str| Dataset {
        lakes: idx.iter().map(|&i| ds.lakes[i].clone()).collect(),
        provenance: format!("{}[{tag}]", ds.provenance),
    };
    Ok((pick(&train_idx, "train"), pick(&test_idx, "test")))
}

/// Both variants evaluated on one train/test pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub causal: VariantMetrics,
    pub baseline: VariantMetrics,
    /// Causal minus baseline accuracy, as a fraction in [-1, 1].
    pub gain: f64,
}

/// One report row: a region (or the pooled set) with per-repeat runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRow {
    /// Region trained on (RegionId/RegionOod) or None for the pooled split.
    pub region: Option<Region>,
    pub repeats: Vec<RunMetrics>,
    pub mean_causal_accuracy: f64,
    pub mean_baseline_accuracy: f64,
    pub mean_gain: f64,
    pub min_gain: f64,
    pub max_gain: f64,
}

impl EvalRow {
    fn from_repeats(region: Option<Region>, repeats: Vec<RunMetrics>) -> EvalRow {
        let n = repeats.len() as f64;
        let mean_causal = repeats.iter().map(|r| r.causal.accuracy).sum::<f64>() / n;
        let mean_baseline = repeats.iter().map(|r| r.baseline.accuracy).sum::<f64>() / n;
        let mean_gain = repeats.iter().map(|r| r.gain).sum::<f64>() / n;
        let min_gain = repeats.iter().map(|r| r.gain).fold(f64::INFINITY, f64::min);
        let max_gain = repeats.iter().map(|r| r.gain).fold(f64::NEG_INFINITY, f64::max);
        EvalRow {
            region,
            repeats,
            mean_causal_accuracy: mean_causal,
            mean_baseline_accuracy: mean_baseline,
            mean_gain,
            min_gain,
            max_gain,
        }
    }
}

/// Full evaluation report for one protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub rows: Vec<EvalRow>,
    pub repeats: usize,
    pub ratio: f64,
    pub config: PipelineConfig,
}

/// Evaluation settings: split ratio, repeat count, and the pipeline config
/// shared by both variants (the variant and graph source fields are set per
/// protocol).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ratio: f64,
    pub repeats: usize,
    pub pipeline: PipelineConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { ratio: 0.8, repeats: 1, pipeline: PipelineConfig::default() }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config("ratio must be in (0, 1)".into()));
        }
        if self.repeats < 1 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        self.pipeline.validate()
    }
}

fn run_both<S: Scalar>(
    train: &Dataset<S>,
    test: &Dataset<S>,
    cfg: &PipelineConfig,
) -> Result<RunMetrics> {
    let labels: Vec<LakeClass> = test.lakes.iter().map(|l| l.label).collect();
    let causal_cfg = PipelineConfig { variant: Variant::Causal, ..cfg.clone() };
    let (causal_preds, _) = run_pipeline(train, test, &causal_cfg)?;
    let baseline_cfg = PipelineConfig { variant: Variant::Baseline, ..cfg.clone() };
    let (baseline_preds, baseline_fit) = run_pipeline(train, test, &baseline_cfg)?;
    debug_assert!(baseline_fit.graph.is_none());
    let causal = metrics(&causal_preds, &labels)?;
    let baseline = metrics(&baseline_preds, &labels)?;
    let gain = causal.accuracy - baseline.accuracy;
    Ok(RunMetrics { causal, baseline, gain })
}

fn repeat_seed(base: u64, repeat: usize) -> u64 {
    base.wrapping_add(repeat as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

/// Pooled 80/20 stratified evaluation over the whole dataset.
pub fn global_eval<S: Scalar>(ds: &Dataset<S>, cfg: &EvalConfig) -> Result<EvalRow> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let seed = repeat_seed(cfg.pipeline.seed, r);
        let (train, test) = stratified_split(ds, cfg.ratio, seed)?;
        let pcfg = PipelineConfig { seed, graph_source: GraphSource::Global, ..cfg.pipeline.clone() };
        runs.push(run_both(&train, &test, &pcfg)?);
    }
    Ok(EvalRow::from_repeats(None, runs))
}

/// Within-region 80/20 stratified evaluation.
pub fn region_id_eval<S: Scalar>(
    ds: &Dataset<S>,
    region: Region,
    cfg: &EvalConfig,
) -> Result<EvalRow> {
    cfg.validate()?;
    let regional = ds.filter_region(region);
    if regional.is_empty() {
        return Err(Error::Domain(format!("region {region} absent from dataset")));
    }
    let mut runs = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let seed = repeat_seed(cfg.pipeline.seed ^ (region.index() as u64) << 32, r);
        let (train, test) = stratified_split(&regional, cfg.ratio, seed)?;
        let pcfg =
            PipelineConfig { seed, graph_source: GraphSource::PerRegion, ..cfg.pipeline.clone() };
        runs.push(run_both(&train, &test, &pcfg)?);
    }
    Ok(EvalRow::from_repeats(Some(region), runs))
}

/// Leave-one-region-out: train on one region, test on the pooled rest.
pub fn region_ood_eval<S: Scalar>(
    ds: &Dataset<S>,
    train_region: Region,
    cfg: &EvalConfig,
) -> Result<EvalRow> {
    cfg.validate()?;
    let train = ds.filter_region(train_region);
    if train.is_empty() {
        return Err(Error::Domain(format!("region {train_region} absent from dataset")));
    }
    let test = Dataset {
        lakes: ds.lakes.iter().filter(|l| l.region != train_region).cloned().collect(),
        provenance: format!("{}[!{train_region}]", ds.provenance),
    };
    if test.is_empty() {
        return Err(Error::Domain("no other regions to test on".into()));
    }
    debug_assert!(test.lakes.iter().all(|l| l.region != train_region));
    let mut runs = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let seed = repeat_seed(cfg.pipeline.seed ^ (train_region.index() as u64) << 40, r);
        let pcfg =
            PipelineConfig { seed, graph_source: GraphSource::PerRegion, ..cfg.pipeline.clone() };
        runs.push(run_both(&train, &test, &pcfg)?);
    }
    Ok(EvalRow::from_repeats(Some(train_region), runs))
}

/// Runs a protocol over every requested region (canonical order) and
/// assembles the report.
pub fn evaluate_protocol<S: Scalar>(
    ds: &Dataset<S>,
    protocol: Protocol,
    region: Option<Region>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let rows = match protocol {
        Protocol::Global => vec![global_eval(ds, cfg)?],
        Protocol::RegionId | Protocol::RegionOod => {
            let regions: Vec<Region> = match region {
                Some(r) => vec![r],
                None => ds.regions(),
            };
            let mut rows = Vec::with_capacity(regions.len());
            for r in regions {
                rows.push(match protocol {
                    Protocol::RegionId => region_id_eval(ds, r, cfg)?,
                    Protocol::RegionOod => region_ood_eval(ds, r, cfg)?,
                    Protocol::Global => unreachable!(),
                });
            }
            rows
        }
    };
    Ok(EvalReport {
        protocol,
        rows,
        repeats: cfg.repeats,
        ratio: cfg.ratio,
        config: cfg.pipeline.clone(),
    })
}

/// Formats an accuracy fraction as a percentage with two decimals.
pub fn format_percent(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

/// Formats a gain fraction in percentage points with an explicit sign.
pub fn format_gain(gain: f64) -> String {
    let points = gain * 100.0;
    let rounded = (points * 100.0).round() / 100.0;
    if rounded == 0.0 {
        "0.00%".to_string()
    } else {
        format!("{rounded:+.2}%")
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializable")
    }

    /// Aligned-column text table, rows in canonical region order.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        match self.protocol {
            Protocol::Global => {
                let row = &self.rows[0];
                writeln!(out, "Global evaluation ({} repeat(s), 80/20 stratified)", self.repeats)
                    .unwrap();
                writeln!(out, "{:<18} {:>10} {:>10}", "Metric", "Causal", "Baseline").unwrap();
                let mean = |f: &dyn Fn(&RunMetrics) -> (f64, f64)| {
                    let n = row.repeats.len() as f64;
                    let (a, b) = row
                        .repeats
                        .iter()
                        .map(f)
                        .fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
                    (a / n, b / n)
                };
                type MetricPair = Box<dyn Fn(&RunMetrics) -> (f64, f64)>;
                let rows: [(&str, MetricPair); 4] = [
                    ("Accuracy", Box::new(|r| (r.causal.accuracy, r.baseline.accuracy))),
                    (
                        "Macro precision",
                        Box::new(|r| (r.causal.macro_precision, r.baseline.macro_precision)),
                    ),
                    ("Macro recall", Box::new(|r| (r.causal.macro_recall, r.baseline.macro_recall))),
                    ("Macro F1", Box::new(|r| (r.causal.macro_f1, r.baseline.macro_f1))),
                ];
                for (name, f) in rows {
                    let (c, b) = mean(&*f);
                    writeln!(
                        out,
                        "{:<18} {:>10} {:>10}",
                        name,
                        format_percent(c),
                        format_percent(b)
                    )
                    .unwrap();
                }
                writeln!(out, "{:<18} {:>10}", "Accuracy gain", format_gain(row.mean_gain))
                    .unwrap();
            }
            Protocol::RegionId | Protocol::RegionOod => {
                let title = match self.protocol {
                    Protocol::RegionId => "Region-wise in-distribution accuracy",
                    _ => "Region-wise out-of-distribution accuracy (train region, pooled rest)",
                };
                writeln!(out, "{title} ({} repeat(s))", self.repeats).unwrap();
                writeln!(
                    out,
                    "{:<8} {:>10} {:>10} {:>9}",
                    "Region", "Causal", "Baseline", "Gain"
                )
                .unwrap();
                for row in &self.rows {
                    let region = row.region.map(|r| r.name()).unwrap_or("ALL");
                    let spread = if self.repeats > 1 {
                        format!(
                            "  [{} .. {}]",
                            format_gain(row.min_gain),
                            format_gain(row.max_gain)
                        )
                    } else {
                        String::new()
                    };
                    writeln!(
                        out,
                        "{:<8} {:>10} {:>10} {:>9}{spread}",
                        region,
                        format_percent(row.mean_causal_accuracy),
                        format_percent(row.mean_baseline_accuracy),
                        format_gain(row.mean_gain)
                    )
                    .unwrap();
                }
                if self.repeats > 1 {
                    writeln!(
                        out,
                        "(accuracies are means over {} repeats; gain spread in brackets)",
                        self.repeats
                    )
                    .unwrap();
                }
            }
        }
        out
    }
}
