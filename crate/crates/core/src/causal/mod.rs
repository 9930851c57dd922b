//! Lag-aware constraint-based causal discovery over pooled multi-lake panels.
//!
//! Discovery runs in two phases: an iterative condition-selection sweep that
//! prunes the candidate parent set of each variable (removals applied only at
//! iteration barriers, so tests within an iteration are order-independent),
//! and a momentary-conditional-independence retest of every survivor against
//! the selected parents of both endpoints. Context dummies (lake identity,
//! region, seasonal phase) are exogenous: they can appear as parents and in
//! conditioning sets but never as effects.

mod citest;
mod discover;
mod panel;

pub use citest::{block_independence, ci_test, partial_correlation, CiOutcome};
pub use discover::{debug_condition_selection, discover_parents};
pub use panel::{pool_lakes, PooledPanel};

use crate::error::{Error, Result};
use crate::vars::VariableId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

/// A variable at a (nonnegative, backward) day lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarLag {
    pub var: VariableId,
    pub lag: usize,
}

impl VarLag {
    pub fn new(var: VariableId, lag: usize) -> Self {
        VarLag { var, lag }
    }
}

/// Discovery settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    /// Maximum lag in days.
    pub tau_max: usize,
    /// Significance level for retaining links (applied at the MCI retest).
    pub alpha: f64,
    /// Screening level for the unconditional (first) condition-selection
    /// pass. Kept tighter than `alpha`: it is the binding filter over the
    /// whole lagged candidate family, and the pooled panel supplies enough
    /// samples that true links clear it by orders of magnitude.
    pub pc_alpha: f64,
    /// Removal level for the later conditional iterations. Looser than the
    /// screen: mid-iteration tests are underpowered while the conditioning
    /// set is still forming, and survivors face the MCI retest anyway.
    pub pc_iter_alpha: f64,
    /// Variables whose parent sets are reported.
    pub targets: Vec<VariableId>,
    pub use_s_dummy: bool,
    pub use_r_dummy: bool,
    pub use_t_dummy: bool,
    /// Cap on the conditioning-set size during condition selection.
    pub max_condition_parents: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            tau_max: 7,
            alpha: 0.01,
            pc_alpha: 2e-4,
            pc_iter_alpha: 0.05,
            targets: vec![VariableId::HvAnom],
            use_s_dummy: true,
            use_r_dummy: true,
            use_t_dummy: true,
            max_condition_parents: 10,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_max < 1 {
            return Err(Error::Config("tau_max must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        for (name, v) in [("pc_alpha", self.pc_alpha), ("pc_iter_alpha", self.pc_iter_alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one discovery target required".into()));
        }
        for t in &self.targets {
            if t.is_context() {
                return Err(Error::Config(format!("context variable {t} cannot be a target")));
            }
        }
        if self.max_condition_parents < 1 {
            return Err(Error::Config("max_condition_parents must be >= 1".into()));
        }
        Ok(())
    }

    /// Context dummies enabled by this config, in canonical order.
    pub fn enabled_context(&self) -> Vec<VariableId> {
        let mut out = Vec::new();
        if self.use_s_dummy {
            out.push(VariableId::SDummy);
        }
        if self.use_r_dummy {
            out.push(VariableId::RDummy);
        }
        if self.use_t_dummy {
            out.push(VariableId::TDummy);
        }
        out
    }
}

/// One retained parent of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentLink {
    pub var: VariableId,
    pub lag: usize,
    #[serde(rename = "p")]
    pub p_value: f64,
    /// Partial correlation of the link (multiple correlation for dummy
    /// blocks, hence nonnegative there).
    pub strength: f64,
}

/// Per-target sets of (variable, lag) parents with test statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub config: GraphConfig,
    pub targets: BTreeMap<VariableId, Vec<ParentLink>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub tau_max: usize,
    pub alpha: f64,
}

impl CausalGraph {
    /// Validates lags, significance, sort order, and target kinds.
    pub fn validate(&self) -> Result<()> {
        for (target, links) in &self.targets {
            if target.is_context() {
                return Err(Error::Invalid(format!("context variable {target} cannot be a target")));
            }
            for link in links {
                if link.lag > self.config.tau_max {
                    return Err(Error::Invalid(format!(
                        "link {}@-{} exceeds tau_max {}",
                        link.var, link.lag, self.config.tau_max
                    )));
                }
                if !(link.p_value >= 0.0 && link.p_value <= self.config.alpha) {
                    return Err(Error::Invalid(format!(
                        "link {}@-{} has p={} above alpha={}",
                        link.var, link.lag, link.p_value, self.config.alpha
                    )));
                }
                if !(-1.0..=1.0).contains(&link.strength) {
                    return Err(Error::Invalid(format!(
                        "link {}@-{} strength {} outside [-1, 1]",
                        link.var, link.lag, link.strength
                    )));
                }
                if link.var == *target && link.lag == 0 {
                    return Err(Error::Invalid(format!("self link {target}@0")));
                }
            }
            for pair in links.windows(2) {
                if (pair[1].var, pair[1].lag) <= (pair[0].var, pair[0].lag) {
                    return Err(Error::Invalid(format!(
                        "links of {target} not sorted by (var, lag)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parents of a target, empty when absent.
    pub fn parents(&self, target: VariableId) -> &[ParentLink] {
        self.targets.get(&target).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializable")
    }

    pub fn from_json(text: &str) -> Result<CausalGraph> {
        let graph: CausalGraph = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), "graph", e.to_string()))?;
        graph.validate()?;
        Ok(graph)
    }
}

/// Writes a graph as canonical JSON.
pub fn save_graph(graph: &CausalGraph, path: &Path) -> Result<()> {
    graph.validate()?;
    fs::write(path, graph.to_json()).map_err(|e| Error::io(path, e))
}

/// Reads and validates a graph JSON file.
pub fn load_graph(path: &Path) -> Result<CausalGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CausalGraph::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_graph() -> CausalGraph {
        let mut targets = BTreeMap::new();
        targets.insert(
            VariableId::HvAnom,
            vec![
                ParentLink { var: VariableId::HvAnom, lag: 1, p_value: 1e-8, strength: 0.8 },
                ParentLink { var: VariableId::S2Water, lag: 0, p_value: 4e-4, strength: 0.41 },
            ],
        );
        CausalGraph { config: GraphConfig { tau_max: 7, alpha: 0.01 }, targets }
    }

    #[test]
    fn graph_round_trip_byte_identical() {
        let graph = sample_graph();
        let text = graph.to_json();
        let back = CausalGraph::from_json(&text).unwrap();
        assert_eq!(graph, back);
        assert_eq!(text, back.to_json());
    }

    #[test]
    fn graph_schema_shape() {
        let text = sample_graph().to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["config"]["tau_max"], 7);
        assert_eq!(value["targets"]["hv_anom"][1]["var"], "s2_water");
        assert_eq!(value["targets"]["hv_anom"][1]["lag"], 0);
        assert!(value["targets"]["hv_anom"][1]["p"].is_number());
    }

    #[test]
    fn lag_above_tau_max_rejected() {
        let mut graph = sample_graph();
        graph.targets.get_mut(&VariableId::HvAnom).unwrap()[0].lag = 9;
        assert!(CausalGraph::from_json(&graph.to_json()).is_err());
    }

    #[test]
    fn p_above_alpha_rejected() {
        let mut graph = sample_graph();
        graph.targets.get_mut(&VariableId::HvAnom).unwrap()[0].p_value = 0.5;
        assert!(graph.validate().is_err());
    }

    #[test]
    fn context_target_rejected() {
        let mut graph = sample_graph();
        graph.targets.insert(VariableId::RDummy, vec![]);
        assert!(graph.validate().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = DiscoveryConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        cfg.alpha = 0.01;
        cfg.tau_max = 0;
        assert!(cfg.validate().is_err());
    }
}
