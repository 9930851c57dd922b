//! Deterministic convolutional transform over fixed length-9 kernels.
//!
//! The 84 kernels are every placement of three weight-2 taps in a length-9
//! kernel whose remaining taps weigh -1, so every kernel sums to zero.
//! Channels are offset-normalized by subtracting their first value before
//! convolution, which makes the features exactly invariant to constant
//! shifts of the input. Each (kernel, dilation) pair carries quantile biases
//! fitted on training data; one feature is the proportion of convolution
//! outputs above a bias (PPV).

use crate::error::{Error, Result};
use crate::features::ChannelMatrix;
use crate::scalar::{s, to_f64, Scalar};
use crate::vars::VariableId;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of fixed kernels: C(9, 3).
pub const NUM_KERNELS: usize = 84;

const KERNEL_LEN: usize = 9;
const KERNEL_CENTER: isize = 4;

/// The 84 index triples carrying weight +2, in lexicographic order.
pub fn kernel_positions() -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(NUM_KERNELS);
    for a in 0..KERNEL_LEN {
        for b in a + 1..KERNEL_LEN {
            for c in b + 1..KERNEL_LEN {
                out.push([a, b, c]);
            }
        }
    }
    debug_assert_eq!(out.len(), NUM_KERNELS);
    out
}

/// Transform sizing knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Approximate feature count per channel (split over 84 kernels).
    pub features_budget: usize,
    /// Training (matrix, channel) pairs sampled per (kernel, dilation) when
    /// fitting bias quantiles.
    pub bias_sample_count: usize,
    /// Include discovered context-dummy parents as channels.
    pub include_dummies: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig { features_budget: 9996, bias_sample_count: 4, include_dummies: false }
    }
}

impl TransformConfig {
    pub fn validate(&self) -> Result<()> {
        if self.features_budget < NUM_KERNELS {
            return Err(Error::Config(format!(
                "features_budget must be at least {NUM_KERNELS}"
            )));
        }
        if self.bias_sample_count < 1 {
            return Err(Error::Config("bias_sample_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Fitted transform parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams<S: Scalar> {
    /// Channel schema the parameters were fitted on.
    pub channel_spec: Vec<(VariableId, usize)>,
    /// Unique dilations, ascending.
    pub dilations: Vec<usize>,
    /// Bias count per dilation (same for every kernel).
    pub biases_per_dilation: Vec<usize>,
    /// Sorted bias values, flattened as [kernel][dilation][bias].
    pub biases: Vec<S>,
    /// 84 x sum(biases_per_dilation).
    pub features_per_channel: usize,
}

impl<S: Scalar> TransformParams<S> {
    /// Feature count for `n_channels` channels.
    pub fn feature_count(&self, n_channels: usize) -> usize {
        n_channels * self.features_per_channel
    }

    fn biases_per_kernel(&self) -> usize {
        self.biases_per_dilation.iter().sum()
    }

    /// Offset of dilation `d_i` inside one kernel's bias run.
    fn dilation_offset(&self, d_i: usize) -> usize {
        self.biases_per_dilation[..d_i].iter().sum()
    }

    pub fn to_dto(&self) -> TransformParamsDto {
        TransformParamsDto {
            channel_spec: self.channel_spec.clone(),
            dilations: self.dilations.clone(),
            biases_per_dilation: self.biases_per_dilation.clone(),
            biases: self.biases.iter().map(|b| to_f64(*b)).collect(),
            features_per_channel: self.features_per_channel,
        }
    }

    pub fn from_dto(dto: &TransformParamsDto) -> TransformParams<S> {
        TransformParams {
            channel_spec: dto.channel_spec.clone(),
            dilations: dto.dilations.clone(),
            biases_per_dilation: dto.biases_per_dilation.clone(),
            biases: dto.biases.iter().map(|b| s(*b)).collect(),
            features_per_channel: dto.features_per_channel,
        }
    }
}

/// Serialization form of [`TransformParams`]; kernels are implicit by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformParamsDto {
    pub channel_spec: Vec<(VariableId, usize)>,
    pub dilations: Vec<usize>,
    pub biases_per_dilation: Vec<usize>,
    pub biases: Vec<f64>,
    pub features_per_channel: usize,
}

/// Dilations and per-dilation bias counts for an input length and budget.
///
/// Candidate exponents are evenly spaced between 0 and
/// `log2((len - 1) / (kernel_len - 1))`; duplicate floors merge and carry
/// their multiplicity into the bias count.
fn fit_dilations(len: usize, budget: usize) -> (Vec<usize>, Vec<usize>) {
    let per_kernel = (budget as f64 / NUM_KERNELS as f64).round().max(1.0) as usize;
    let raw = per_kernel.clamp(1, 32);
    let max_exp = (((len - 1) as f64) / ((KERNEL_LEN - 1) as f64)).log2().max(0.0);
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for j in 0..raw {
        let e = if raw == 1 { 0.0 } else { j as f64 * max_exp / (raw as f64 - 1.0) };
        let d = (2.0f64.powf(e).floor() as usize).max(1);
        match counts.last_mut() {
            Some((last, c)) if *last == d => *c += 1,
            _ => counts.push((d, 1)),
        }
    }
    // Apportion the per-kernel bias budget over dilations proportionally to
    // their exponent multiplicity, using largest remainders so the total is
    // exact.
    let mult = per_kernel as f64 / raw as f64;
    let dilations: Vec<usize> = counts.iter().map(|(d, _)| *d).collect();
    let mut biases: Vec<usize> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(counts.len());
    let mut assigned = 0usize;
    for (i, (_, c)) in counts.iter().enumerate() {
        let share = *c as f64 * mult;
        let base = share.floor() as usize;
        biases.push(base);
        assigned += base;
        remainders.push((i, share - base as f64));
    }
    remainders.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0))
    });
    for (i, _) in remainders.into_iter().take(per_kernel.saturating_sub(assigned)) {
        biases[i] += 1;
    }
    for b in biases.iter_mut() {
        if *b == 0 {
            *b = 1;
        }
    }
    (dilations, biases)
}

// shifts row j holds values[t + (j - 4) * d], zero outside the input.
fn shift_table<S: Scalar>(values: &[S], dilation: usize) -> Vec<S> {
    let len = values.len();
    let d = dilation as isize;
    let mut shifts = vec![S::zero(); KERNEL_LEN * len];
    for j in 0..KERNEL_LEN {
        let off = (j as isize - KERNEL_CENTER) * d;
        let row = &mut shifts[j * len..(j + 1) * len];
        let t_lo = (-off).max(0) as usize;
        let t_hi = ((len as isize - off).clamp(0, len as isize)) as usize;
        for t in t_lo..t_hi {
            row[t] = values[(t as isize + off) as usize];
        }
    }
    shifts
}

fn base_row<S: Scalar>(shifts: &[S], len: usize) -> Vec<S> {
    let mut base = vec![S::zero(); len];
    for j in 0..KERNEL_LEN {
        let row = &shifts[j * len..(j + 1) * len];
        for (b, v) in base.iter_mut().zip(row) {
            *b += *v;
        }
    }
    base
}

/// Dilated zero-padded convolution of one centered channel against all 84
/// kernels at once. Output row `k` has the same length as the input.
///
/// Kernels share the structure "-1 everywhere, +2 on a triple", so each
/// output is `3 * (shift_a + shift_b + shift_c) - sum_of_all_shifts`.
pub fn conv_all_kernels<S: Scalar>(values: &[S], dilation: usize, out: &mut Array2<S>) {
    let len = values.len();
    debug_assert_eq!(out.dim(), (NUM_KERNELS, len));
    let three = s::<S>(3.0);
    let shifts = shift_table(values, dilation);
    let base = base_row(&shifts, len);
    let flat = out.as_slice_mut().expect("standard layout");
    for (k, triple) in kernel_positions().iter().enumerate() {
        let [a, b, c] = *triple;
        let sa = &shifts[a * len..(a + 1) * len];
        let sb = &shifts[b * len..(b + 1) * len];
        let sc = &shifts[c * len..(c + 1) * len];
        let row = &mut flat[k * len..(k + 1) * len];
        for t in 0..len {
            row[t] = three * (sa[t] + sb[t] + sc[t]) - base[t];
        }
    }
}

/// One kernel's convolution row, numerically identical to the matching row
/// of [`conv_all_kernels`].
fn conv_single_kernel<S: Scalar>(values: &[S], dilation: usize, triple: [usize; 3], out: &mut Vec<S>) {
    let len = values.len();
    let three = s::<S>(3.0);
    let shifts = shift_table(values, dilation);
    let base = base_row(&shifts, len);
    let [a, b, c] = triple;
    let sa = &shifts[a * len..(a + 1) * len];
    let sb = &shifts[b * len..(b + 1) * len];
    let sc = &shifts[c * len..(c + 1) * len];
    out.clear();
    for t in 0..len {
        out.push(three * (sa[t] + sb[t] + sc[t]) - base[t]);
    }
}

fn centered<S: Scalar>(row: ndarray::ArrayView1<'_, S>) -> Vec<S> {
    let first = row[0];
    row.iter().map(|v| *v - first).collect()
}

/// Fits dilations and bias quantiles on training channel matrices.
///
/// For each (kernel, dilation) a seeded sample of training (matrix, channel)
/// pairs is convolved and the biases are the quantiles of the pooled outputs
/// at positions `(i + 1) / (B + 1)`. Identical (training set, config, seed)
/// give bit-identical parameters regardless of worker count.
pub fn fit_transform_params<S: Scalar>(
    training: &[ChannelMatrix<S>],
    cfg: &TransformConfig,
    seed: u64,
) -> Result<TransformParams<S>> {
    cfg.validate()?;
    let first = training.first().ok_or_else(|| Error::Domain("empty training set".into()))?;
    let spec = first.spec.clone();
    let n_channels = spec.len();
    if n_channels == 0 {
        return Err(Error::Domain("channel spec is empty".into()));
    }
    let len = first.channels.ncols();
    for cm in training {
        if cm.spec != spec || cm.channels.ncols() != len {
            return Err(Error::SchemaMismatch("training channel matrices differ".into()));
        }
    }

    let (dilations, biases_per_dilation) = fit_dilations(len, cfg.features_budget);
    let per_kernel: usize = biases_per_dilation.iter().sum();
    let features_per_channel = NUM_KERNELS * per_kernel;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut biases = vec![S::zero(); NUM_KERNELS * per_kernel];
    let mut conv = Vec::with_capacity(len);
    let mut offset_per_dilation = vec![0usize; dilations.len()];
    for d_i in 1..dilations.len() {
        offset_per_dilation[d_i] = offset_per_dilation[d_i - 1] + biases_per_dilation[d_i - 1];
    }

    let triples = kernel_positions();
    for (k, triple) in triples.iter().enumerate() {
        for (d_i, &dilation) in dilations.iter().enumerate() {
            let b = biases_per_dilation[d_i];
            let mut pooled: Vec<S> = Vec::with_capacity(cfg.bias_sample_count * len);
            for _ in 0..cfg.bias_sample_count {
                let m = rng.gen_range(0..training.len());
                let c = rng.gen_range(0..n_channels);
                let values = centered(training[m].channels.row(c));
                conv_single_kernel(&values, dilation, *triple, &mut conv);
                pooled.extend_from_slice(&conv);
            }
            pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite convolution outputs"));
            let base = k * per_kernel + offset_per_dilation[d_i];
            for i in 0..b {
                let q = (i + 1) as f64 / (b + 1) as f64;
                biases[base + i] = quantile_sorted(&pooled, q);
            }
        }
    }

    Ok(TransformParams { channel_spec: spec, dilations, biases_per_dilation, biases, features_per_channel })
}

/// Linear-interpolation quantile of a sorted slice at position `q` in [0, 1].
fn quantile_sorted<S: Scalar>(sorted: &[S], q: f64) -> S {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = s::<S>(pos - lo as f64);
        sorted[lo] * (S::one() - frac) + sorted[hi] * frac
    }
}

/// Transforms one channel matrix into its PPV feature vector.
///
/// Features are ordered (channel, kernel, dilation, bias); every entry is a
/// proportion of positions whose convolution output exceeds the bias.
pub fn transform<S: Scalar>(cm: &ChannelMatrix<S>, params: &TransformParams<S>) -> Result<Vec<S>> {
    if cm.spec != params.channel_spec {
        return Err(Error::SchemaMismatch(format!(
            "channel spec {:?} does not match fitted spec {:?}",
            cm.spec, params.channel_spec
        )));
    }
    let len = cm.channels.ncols();
    let n_channels = cm.spec.len();
    let per_kernel = params.biases_per_kernel();
    let mut features = vec![S::zero(); params.feature_count(n_channels)];
    let inv_len = s::<S>(1.0 / len as f64);
    let mut conv = Array2::<S>::zeros((NUM_KERNELS, len));

    for ch in 0..n_channels {
        let values = centered(cm.channels.row(ch));
        let ch_base = ch * params.features_per_channel;
        for (d_i, &dilation) in params.dilations.iter().enumerate() {
            conv_all_kernels(&values, dilation, &mut conv);
            let flat = conv.as_slice().expect("standard layout");
            let b = params.biases_per_dilation[d_i];
            let d_off = params.dilation_offset(d_i);
            for k in 0..NUM_KERNELS {
                let row = &flat[k * len..(k + 1) * len];
                let bias_base = k * per_kernel + d_off;
                let feat_base = ch_base + bias_base;
                for i in 0..b {
                    let bias = params.biases[bias_base + i];
                    let count = row.iter().filter(|&&v| v > bias).count();
                    features[feat_base + i] = s::<S>(count as f64) * inv_len;
                }
            }
        }
    }
    Ok(features)
}

/// Transforms many channel matrices in parallel (order-preserving, so the
/// result is identical for any worker count).
pub fn transform_batch<S: Scalar>(
    matrices: &[ChannelMatrix<S>],
    params: &TransformParams<S>,
) -> Result<Vec<Vec<S>>> {
    matrices.par_iter().map(|cm| transform(cm, params)).collect()
}
