//! Dev probe: discovery precision/recall on two seed bases.

use sgl_core::causal::{discover_parents, pool_lakes, DiscoveryConfig};
use sgl_core::synth::{generate, SynthConfig};
use sgl_core::vars::{Region, VariableId};

fn main() {
    for base in [1000u64, 9000] {
        let mut precisions = Vec::new();
        let mut recalls = Vec::new();
        for seed in 0..10 {
            let cfg = SynthConfig {
                lakes_per_class_per_region: 3,
                regions: vec![Region::CW],
                seed: base + seed,
                ..SynthConfig::default()
            };
            let (ds, truth) = generate(&cfg).unwrap();
            let dcfg = DiscoveryConfig::default();
            let panel = pool_lakes(&ds, &dcfg).unwrap();
            let graph = discover_parents(&panel, &dcfg).unwrap();
            let truth_set: Vec<(VariableId, usize)> =
                truth.parents(VariableId::HvAnom).iter().map(|l| (l.var, l.lag)).collect();
            let found: Vec<(VariableId, usize)> =
                graph.parents(VariableId::HvAnom).iter().map(|l| (l.var, l.lag)).collect();
            let tp = found.iter().filter(|f| truth_set.contains(f)).count();
            let prec = if found.is_empty() { 1.0 } else { tp as f64 / found.len() as f64 };
            let rec = tp as f64 / truth_set.len() as f64;
            if prec < 0.85 {
                let extra: Vec<_> = found.iter().filter(|f| !truth_set.contains(f)).collect();
                println!("  seed {}: prec {prec:.2} extras {extra:?}", base + seed);
            }
            precisions.push(prec);
            recalls.push(rec);
        }
        let mp = precisions.iter().sum::<f64>() / 10.0;
        let mr = recalls.iter().sum::<f64>() / 10.0;
        println!("base {base}: precision {mp:.3} recall {mr:.3}");
    }
}
