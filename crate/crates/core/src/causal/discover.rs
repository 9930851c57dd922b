//! Two-phase parent discovery: iterative condition selection followed by
//! momentary conditional independence retests.

use crate::causal::{
    ci_test, CausalGraph, CiOutcome, DiscoveryConfig, GraphConfig, ParentLink, PooledPanel, VarLag,
};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::vars::{VariableId, VariableKind};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Candidate with its most recent absolute test statistic.
#[derive(Debug, Clone, Copy)]
struct Scored {
    link: VarLag,
    stat: f64,
}

fn sort_scored(parents: &mut [Scored]) {
    parents.sort_by(|a, b| {
        b.stat
            .partial_cmp(&a.stat)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.link.var.cmp(&b.link.var))
            .then(a.link.lag.cmp(&b.link.lag))
    });
}

/// All candidate parents of `target`: every observed variable at lags
/// 0..=tau_max (lag >= 1 for the target itself) and each enabled context
/// dummy at lag 0.
fn candidates(cfg: &DiscoveryConfig, target: VariableId) -> Vec<VarLag> {
    let mut out = Vec::new();
    for var in VariableId::OBSERVED {
        for lag in 0..=cfg.tau_max {
            if var == target && lag == 0 {
                continue;
            }
            out.push(VarLag::new(var, lag));
        }
    }
    for var in cfg.enabled_context() {
        out.push(VarLag::new(var, 0));
    }
    out
}

/// Condition-selection sweep for one target.
///
/// Tests are independent within an iteration and run in parallel; removals
/// apply only at the iteration barrier, so the result matches serial
/// execution exactly.
fn condition_selection<S: Scalar>(
    panel: &PooledPanel<S>,
    cfg: &DiscoveryConfig,
    target: VariableId,
) -> Result<Vec<Scored>> {
    let y = VarLag::new(target, 0);
    let cands = candidates(cfg, target);

    // Unconditional screen of every candidate, dummies included.
    let outcomes: Vec<Result<CiOutcome>> =
        cands.par_iter().map(|c| ci_test(panel, *c, y, &[])).collect();
    let mut parents: Vec<Scored> = Vec::new();
    for (c, out) in cands.into_iter().zip(outcomes) {
        let out = out?;
        if out.p_value <= cfg.pc_alpha {
            parents.push(Scored { link: c, stat: out.statistic.abs() });
        }
    }

    let mut q = 1usize;
    loop {
        sort_scored(&mut parents);
        if parents.len() <= q {
            break;
        }
        let snapshot = parents.clone();
        let outcomes: Vec<Result<CiOutcome>> = snapshot
            .par_iter()
            .map(|cand| {
                let z: Vec<VarLag> = snapshot
                    .iter()
                    .filter(|other| other.link != cand.link)
                    .take(q)
                    .map(|other| other.link)
                    .collect();
                ci_test(panel, cand.link, y, &z)
            })
            .collect();

        let mut next = Vec::with_capacity(snapshot.len());
        let mut removed = false;
        // Context dummies that passed the unconditional screen are exempt
        // from removal here: a persistent autoregressive parent can mask a
        // lake-level constant at small conditioning sets. The MCI retest is
        // the decider for exogenous context.
        for (cand, out) in snapshot.into_iter().zip(outcomes) {
            let out = out?;
            if out.p_value <= cfg.pc_iter_alpha || cand.link.var.is_context() {
                next.push(Scored { link: cand.link, stat: out.statistic.abs() });
            } else {
                removed = true;
            }
        }
        parents = next;
        if !removed {
            break;
        }
        if q < cfg.max_condition_parents {
            q += 1;
        }
    }
    sort_scored(&mut parents);
    Ok(parents)
}

/// Conditioning set for the MCI retest of candidate `c` against `target`:
/// the selected parents of the target (minus the candidate) plus the selected
/// parents of the candidate's source variable shifted by the candidate lag.
/// Both sides are capped at the `max_conds` strongest parents (parent lists
/// arrive sorted by strength), bounding the conditioning dimension the same
/// way condition selection is bounded.
fn mci_conditions(
    target: VariableId,
    c: VarLag,
    selected: &BTreeMap<VariableId, Vec<VarLag>>,
    max_conds: usize,
) -> Vec<VarLag> {
    let mut z: Vec<VarLag> = selected
        .get(&target)
        .map(|links| links.iter().filter(|l| **l != c).take(max_conds).copied().collect())
        .unwrap_or_default();
    if c.var.kind() == VariableKind::Observed {
        if let Some(sources) = selected.get(&c.var) {
            for w in sources.iter().take(max_conds) {
                let mut shifted = VarLag::new(w.var, w.lag + c.lag);
                // Lake/region one-hots are constant in time.
                if matches!(shifted.var, VariableId::SDummy | VariableId::RDummy) {
                    shifted.lag = 0;
                }
                if shifted == c || (shifted.var == target && shifted.lag == 0) {
                    continue;
                }
                z.push(shifted);
            }
        }
    }
    z.sort();
    z.dedup();
    z
}

/// Debug view of the condition-selection survivors for one target.
#[doc(hidden)]
pub fn debug_condition_selection<S: Scalar>(
    panel: &PooledPanel<S>,
    cfg: &DiscoveryConfig,
    target: crate::vars::VariableId,
) -> Result<Vec<(VarLag, f64)>> {
    Ok(condition_selection(panel, cfg, target)?
        .into_iter()
        .map(|s| (s.link, s.stat))
        .collect())
}

/// Discovers lagged parents of every configured target.
///
/// Deterministic for a given panel and config; the panel itself is invariant
/// to lake ordering. Context dummies never appear as effects; lag-0 links
/// between observed variables are kept with feature-selection semantics.
pub fn discover_parents<S: Scalar>(
    panel: &PooledPanel<S>,
    cfg: &DiscoveryConfig,
) -> Result<CausalGraph> {
    cfg.validate()?;

    // Condition selection for every observed variable: the MCI phase needs
    // parent sets for each candidate source.
    let mut selected: BTreeMap<VariableId, Vec<VarLag>> = BTreeMap::new();
    for var in VariableId::OBSERVED {
        let scored = condition_selection(panel, cfg, var)?;
        selected.insert(var, scored.into_iter().map(|s| s.link).collect());
    }

    let mut targets = BTreeMap::new();
    for &target in &cfg.targets {
        let survivors = selected.get(&target).cloned().unwrap_or_default();
        let outcomes: Vec<Result<CiOutcome>> = survivors
            .par_iter()
            .map(|c| {
                let z = mci_conditions(target, *c, &selected, cfg.max_condition_parents);
                ci_test(panel, *c, VarLag::new(target, 0), &z)
            })
            .collect();
        let mut links = Vec::new();
        for (c, out) in survivors.into_iter().zip(outcomes) {
            let out = out?;
            if out.p_value <= cfg.alpha {
                links.push(ParentLink {
                    var: c.var,
                    lag: c.lag,
                    p_value: out.p_value,
                    strength: out.strength,
                });
            }
        }
        links.sort_by(|a, b| a.var.cmp(&b.var).then(a.lag.cmp(&b.lag)));
        targets.insert(target, links);
    }

    let graph =
        CausalGraph { config: GraphConfig { tau_max: cfg.tau_max, alpha: cfg.alpha }, targets };
    graph.validate()?;
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::pool_lakes;
    use crate::dataset::{Dataset, LakeRecord, DAYS, NUM_OBSERVED};
    use crate::vars::{LakeClass, Region};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Dataset whose hv_anom column follows X(t) = 0.7 X(t-1) + noise and all
    /// other columns are independent noise.
    fn ar1_dataset(n_lakes: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lakes = (0..n_lakes)
            .map(|i| {
                let mut series = Array2::<f64>::zeros((DAYS, NUM_OBSERVED));
                for j in 1..NUM_OBSERVED {
                    for d in 0..DAYS {
                        series[[d, j]] = rng.sample::<f64, _>(StandardNormal);
                    }
                }
                let mut x = 0.0f64;
                for d in 0..DAYS {
                    x = 0.7 * x + rng.sample::<f64, _>(StandardNormal);
                    series[[d, 0]] = x;
                }
                LakeRecord {
                    lake_id: format!("L{i:03}"),
                    region: Region::CW,
                    year: 2018,
                    label: LakeClass::ALL[i % 4],
                    area_m2: 1.0,
                    elevation_m: 0.0,
                    series,
                }
            })
            .collect();
        Dataset::new(lakes, "ar1").unwrap()
    }

    #[test]
    fn recovers_pure_ar1() {
        let mut hits = 0;
        let runs = 10;
        for seed in 0..runs {
            let ds = ar1_dataset(4, 100 + seed);
            let cfg = DiscoveryConfig {
                use_r_dummy: false,
                ..DiscoveryConfig::default()
            };
            let panel = pool_lakes(&ds, &cfg).unwrap();
            let graph = discover_parents(&panel, &cfg).unwrap();
            let parents = graph.parents(VariableId::HvAnom);
            let exact = parents.len() == 1
                && parents[0].var == VariableId::HvAnom
                && parents[0].lag == 1;
            if exact {
                hits += 1;
            }
        }
        assert!(hits >= 9, "exact AR(1) recovery in {hits}/{runs} runs");
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let ds = ar1_dataset(4, 7);
        let mut reversed = ds.clone();
        reversed.lakes.reverse();
        let cfg = DiscoveryConfig::default();
        let g1 = discover_parents(&pool_lakes(&ds, &cfg).unwrap(), &cfg).unwrap();
        let g2 = discover_parents(&pool_lakes(&ds, &cfg).unwrap(), &cfg).unwrap();
        let g3 = discover_parents(&pool_lakes(&reversed, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(g1.to_json(), g2.to_json());
        assert_eq!(g1.to_json(), g3.to_json());
    }

    #[test]
    fn boundary_rows_do_not_leak_across_lakes() {
        // Poison the first tau_max days of each lake after pooling would be
        // ideal; instead poison the last days of lake A and confirm the
        // statistics involving lake B's early lagged windows are unchanged,
        // by comparing against a dataset where the poison differs.
        let base = ar1_dataset(3, 42);
        let cfg = DiscoveryConfig::default();

        let mut poisoned1 = base.clone();
        let mut poisoned2 = base.clone();
        // Rows that only a cross-boundary lag could read: the tail of the
        // previous lake feeding the head samples of the next. Samples start
        // at margin = tau_max, so day indices 0..tau_max of each lake are
        // only read as lagged values. Poison days 358.. of lake 0 (tail):
        // no sample of lake 0 reads beyond its own range, and lake 1 samples
        // must not read lake 0 at all.
        for d in (DAYS - 7)..DAYS {
            for j in 0..NUM_OBSERVED {
                poisoned1.lakes[0].series[[d, j]] = 1e6;
                poisoned2.lakes[0].series[[d, j]] = -1e6;
            }
        }
        let p1 = pool_lakes(&poisoned1, &cfg).unwrap();
        let p2 = pool_lakes(&poisoned2, &cfg).unwrap();
        // Restrict attention to a test whose samples lie in lake 1: use the
        // panel gather directly on hv lag pairs and compare the rows
        // belonging to lake 1.
        let (x1, _) = p1.gather(&[VarLag::new(VariableId::HvAnom, 7)], 7).unwrap();
        let (x2, _) = p2.gather(&[VarLag::new(VariableId::HvAnom, 7)], 7).unwrap();
        let per_lake = DAYS - 7;
        // Lake order is canonical (L000, L001, L002), so rows [per_lake..2*per_lake)
        // belong to lake L001 and must be identical across poison variants.
        let a = x1.slice(ndarray::s![per_lake..2 * per_lake, ..]);
        let b = x2.slice(ndarray::s![per_lake..2 * per_lake, ..]);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_parent_set_is_valid() {
        // Pure noise panel: target may end with no parents at alpha = 0.001.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lakes = (0..2)
            .map(|i| LakeRecord {
                lake_id: format!("N{i}"),
                region: Region::NE,
                year: 2019,
                label: LakeClass::Refreeze,
                area_m2: 1.0,
                elevation_m: 0.0,
                series: Array2::from_shape_fn((DAYS, NUM_OBSERVED), |_| {
                    rng.sample::<f64, _>(StandardNormal)
                }),
            })
            .collect();
        let ds = Dataset::new(lakes, "noise").unwrap();
        let cfg = DiscoveryConfig { alpha: 0.001, ..DiscoveryConfig::default() };
        let panel = pool_lakes(&ds, &cfg).unwrap();
        let graph = discover_parents(&panel, &cfg).unwrap();
        // No assertion on emptiness (false positives happen); the call must
        // simply succeed and validate.
        graph.validate().unwrap();
    }
}
