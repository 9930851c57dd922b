//! Pooled multi-lake panel with context dummy columns.

use crate::causal::{DiscoveryConfig, VarLag};
use crate::dataset::{Dataset, DAYS, NUM_OBSERVED};
use crate::error::{Error, Result};
use crate::scalar::{s, Scalar};
use crate::vars::{Region, VariableId, VariableKind};
use ndarray::{Array2, ArrayView2};
use std::f64::consts::TAU;

/// Stacked per-lake daily rows plus context columns.
///
/// Lakes are stacked in canonical `(lake_id, year)` order so the panel is
/// invariant to the ordering of the input dataset. Lagged samples are always
/// drawn within a single lake's row range.
#[derive(Debug, Clone)]
pub struct PooledPanel<S: Scalar> {
    /// (n_lakes * 365) x (9 + context columns).
    data: Array2<S>,
    /// Half-open row range per lake.
    lake_ranges: Vec<(usize, usize)>,
    /// Column offset and width per context dummy, in canonical order.
    context_blocks: Vec<(VariableId, usize, usize)>,
    tau_max: usize,
}

impl<S: Scalar> PooledPanel<S> {
    pub fn n_lakes(&self) -> usize {
        self.lake_ranges.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn lake_ranges(&self) -> &[(usize, usize)] {
        &self.lake_ranges
    }

    pub fn data(&self) -> ArrayView2<'_, S> {
        self.data.view()
    }

    /// Width of the column block backing a variable.
    pub fn block_width(&self, var: VariableId) -> Result<usize> {
        match var.kind() {
            VariableKind::Observed => Ok(1),
            VariableKind::Context => self
                .context_blocks
                .iter()
                .find(|(v, _, _)| *v == var)
                .map(|(_, _, w)| *w)
                .ok_or_else(|| Error::Invalid(format!("context {var} not in panel"))),
        }
    }

    fn block_range(&self, var: VariableId) -> Result<(usize, usize)> {
        match var.kind() {
            VariableKind::Observed => {
                let idx = var.observed_index().unwrap();
                Ok((idx, 1))
            }
            VariableKind::Context => self
                .context_blocks
                .iter()
                .find(|(v, _, _)| *v == var)
                .map(|(_, off, w)| (*off, *w))
                .ok_or_else(|| Error::Invalid(format!("context {var} not in panel"))),
        }
    }

    /// Number of lagged samples per lake for a given margin.
    pub fn samples_per_lake(&self, margin: usize) -> usize {
        DAYS.saturating_sub(margin)
    }

    /// Sample row indices for a margin: for each lake, rows whose `margin`
    /// predecessors stay inside the same lake.
    fn sample_rows(&self, margin: usize) -> Vec<usize> {
        let mut rows = Vec::with_capacity(self.n_lakes() * self.samples_per_lake(margin));
        for &(start, end) in &self.lake_ranges {
            rows.extend(start + margin..end);
        }
        rows
    }

    /// Assembles the lagged column blocks for `items` over samples with the
    /// given margin. Returns the design matrix and per-item column widths.
    ///
    /// Context dummies ignore the lag for the lake/region one-hots (constant
    /// within a lake); the seasonal block is evaluated at the lagged day.
    pub fn gather(&self, items: &[VarLag], margin: usize) -> Result<(Array2<S>, Vec<usize>)> {
        for item in items {
            if item.lag > margin {
                return Err(Error::Invalid(format!(
                    "lag {} exceeds sample margin {margin}",
                    item.lag
                )));
            }
        }
        let rows = self.sample_rows(margin);
        let widths: Vec<usize> =
            items.iter().map(|it| self.block_width(it.var)).collect::<Result<_>>()?;
        let total: usize = widths.iter().sum();
        let mut out = Array2::<S>::zeros((rows.len(), total));
        let mut col = 0usize;
        for (item, width) in items.iter().zip(&widths) {
            let (off, w) = self.block_range(item.var)?;
            debug_assert_eq!(w, *width);
            for (ri, &row) in rows.iter().enumerate() {
                let src = row - item.lag;
                for j in 0..w {
                    out[[ri, col + j]] = self.data[[src, off + j]];
                }
            }
            col += w;
        }
        Ok((out, widths))
    }
}

/// Stacks all lakes of a dense dataset into one panel with context columns.
pub fn pool_lakes<S: Scalar>(ds: &Dataset<S>, cfg: &DiscoveryConfig) -> Result<PooledPanel<S>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Domain("cannot pool an empty dataset".into()));
    }
    ds.validate()?;
    ds.require_dense()?;

    // Canonical lake order: independent of dataset ordering.
    let mut order: Vec<usize> = (0..ds.lakes.len()).collect();
    order.sort_by(|&a, &b| {
        let la = &ds.lakes[a];
        let lb = &ds.lakes[b];
        (la.lake_id.as_str(), la.year).cmp(&(lb.lake_id.as_str(), lb.year))
    });

    let n_lakes = order.len();
    let regions: Vec<Region> = ds.regions();

    let mut context_blocks = Vec::new();
    let mut col = NUM_OBSERVED;
    if cfg.use_s_dummy {
        context_blocks.push((VariableId::SDummy, col, n_lakes));
        col += n_lakes;
    }
    if cfg.use_r_dummy {
        context_blocks.push((VariableId::RDummy, col, regions.len()));
        col += regions.len();
    }
    if cfg.use_t_dummy {
        context_blocks.push((VariableId::TDummy, col, 2));
        col += 2;
    }

    let mut data = Array2::<S>::zeros((n_lakes * DAYS, col));
    let mut lake_ranges = Vec::with_capacity(n_lakes);
    for (li, &idx) in order.iter().enumerate() {
        let lake = &ds.lakes[idx];
        let start = li * DAYS;
        lake_ranges.push((start, start + DAYS));
        for d in 0..DAYS {
            let row = start + d;
            for j in 0..NUM_OBSERVED {
                data[[row, j]] = lake.series[[d, j]];
            }
            for &(var, off, _) in &context_blocks {
                match var {
                    VariableId::SDummy => data[[row, off + li]] = S::one(),
                    VariableId::RDummy => {
                        let ri = regions.iter().position(|r| *r == lake.region).unwrap();
                        data[[row, off + ri]] = S::one();
                    }
                    VariableId::TDummy => {
                        let phase = TAU * (d + 1) as f64 / DAYS as f64;
                        data[[row, off]] = s(phase.sin());
                        data[[row, off + 1]] = s(phase.cos());
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    Ok(PooledPanel { data, lake_ranges, context_blocks, tau_max: cfg.tau_max })
}
