//! Structural-causal-model generator for labeled four-class datasets with a
//! known ground-truth graph and planted region-specific spurious signals.
//!
//! Every magnitude below is a synthetic stand-in chosen so the four class
//! templates are qualitatively distinct and assertable; none is a claim
//! about real lakes.
//!
//! Template constants:
//!
//! | constant                  | value                 | role |
//! |---------------------------|-----------------------|------|
//! | `HV_AR`                   | 0.39/0.20/0.14/0.16   | hv_anom self-lags 1..4 |
//! | `HV_WATER_COUPLING`       | -3.0 dB per unit      | contemporaneous s2_water driver |
//! | `HV_WATER_RECOVERY`       | +1.9 dB per unit      | lag-1 s2_water recovery term (sharp water drops overshoot hv upward) |
//! | `HV_NOISE_SD`             | 0.3 dB                | hv innovation noise |
//! | `BURIED_DRIFT`            | -0.60 dB constant     | buried radar-dark baseline (lake-level input) |
//! | `T2M_MEAN/T2M_AMP`        | 268 K / 12 K          | seasonal temperature |
//! | `MELT_THRESHOLD`          | 273.15 K              | rectified melt forcing |
//! | `FILL_RATE`               | 2.5 %/K-day           | lake filling speed |
//! | refreeze decay            | 0.030 +- 0.005 /day   | late-season smooth decay |
//! | slow-drainage decay       | 0.080 +- 0.015 /day   | multi-week drainage |
//! | buried decay              | 0.150 +- 0.020 /day   | optical drying |
//! | rapid drop profile        | 72/20/8 % over <=3 d  | first-day cliff >= 50 points |
//! | nuisance amplitudes       | 0.3/1.0/2.0/3.5       | per-class spurious amplitude |
//! | nuisance frequencies      | 5/11/23/47 cycles/yr  | per-class spurious frequency |

use crate::causal::{CausalGraph, GraphConfig, ParentLink};
use crate::dataset::{Dataset, LakeRecord, DAYS, NUM_OBSERVED};
use crate::error::{Error, Result};
use crate::vars::{LakeClass, Region, VariableId};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

const HV_AR: [f64; 4] = [0.39, 0.20, 0.14, 0.16];
const HV_WATER_COUPLING: f64 = -3.0;
const HV_WATER_RECOVERY: f64 = 1.9;
const HV_NOISE_SD: f64 = 0.3;
const BURIED_DRIFT: f64 = -0.60;
const T2M_MEAN: f64 = 268.0;
const T2M_AMP: f64 = 12.0;
const T2M_PHASE_DAY: f64 = 110.0;
const MELT_THRESHOLD: f64 = 273.15;
const FILL_RATE: f64 = 2.5;
/// Water observation noise is truncated at 2.5 sigma so the per-class daily
/// drop contracts hold deterministically.
const S2_OBS_SD: f64 = 1.2;
const LS_OBS_SD: f64 = 3.5;
const OBS_CLAMP_SIGMA: f64 = 2.5;
const NUISANCE_AMPLITUDE: [f64; 4] = [0.3, 1.0, 2.0, 3.5];
const NUISANCE_FREQ: [f64; 4] = [5.0, 11.0, 23.0, 47.0];

/// Generator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub lakes_per_class_per_region: usize,
    pub regions: Vec<Region>,
    pub seed: u64,
    /// Scales the label-coded amplitude of each region's designated nuisance
    /// variable; 0 disables the planted spurious correlation.
    pub spurious_strength: f64,
    /// Scales every innovation noise term.
    pub noise_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            lakes_per_class_per_region: 25,
            regions: Region::ALL.to_vec(),
            seed: 0,
            spurious_strength: 1.0,
            noise_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lakes_per_class_per_region < 1 {
            return Err(Error::Config("lakes_per_class_per_region must be >= 1".into()));
        }
        if self.regions.is_empty() {
            return Err(Error::Config("at least one region required".into()));
        }
        let mut seen = self.regions.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.regions.len() {
            return Err(Error::Config("duplicate regions".into()));
        }
        if self.spurious_strength < 0.0 || self.noise_scale < 0.0 {
            return Err(Error::Config("strength/noise scales must be nonnegative".into()));
        }
        Ok(())
    }
}

/// The designated nuisance variable of a region: its series is tied to the
/// label inside that region only.
pub fn nuisance_variable(region: Region) -> VariableId {
    [VariableId::R2, VariableId::Sp, VariableId::Sst][region.index() % 3]
}

/// Base scale of the label-coded oscillation per nuisance variable, chosen
/// to sit at the same order as the variable's background noise.
fn nuisance_unit(var: VariableId) -> f64 {
    match var {
        VariableId::R2 => 3.0,
        VariableId::Sp => 400.0,
        VariableId::Sst => 0.4,
        _ => unreachable!("only met variables carry the spurious coding"),
    }
}

fn mix_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [a, b, c] {
        h ^= v.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h ^= h >> 27;
    }
    h
}

struct LakePlan {
    region: Region,
    class: LakeClass,
    index: usize,
}

fn truncated_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let raw: f64 = rng.sample::<f64, _>(StandardNormal);
    raw.clamp(-OBS_CLAMP_SIGMA, OBS_CLAMP_SIGMA) * sd
}

fn generate_lake(cfg: &SynthConfig, plan: &LakePlan) -> LakeRecord<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
        cfg.seed,
        plan.region.index() as u64,
        plan.class.index() as u64,
        plan.index as u64,
    ));
    let noise = cfg.noise_scale;

    // Seasonal temperature with AR(1) weather noise.
    let mut t2m = [0.0f64; DAYS];
    let mut w_ar = 0.0f64;
    for (d, t) in t2m.iter_mut().enumerate() {
        w_ar = 0.8 * w_ar + rng.sample::<f64, _>(StandardNormal) * 1.5 * noise;
        let season = T2M_MEAN + T2M_AMP * (TAU * (d as f64 + 1.0 - T2M_PHASE_DAY) / DAYS as f64).sin();
        *t = season + w_ar;
    }

    // Class-template water trajectory driven by rectified melt.
    let (event_day, decay_rate, rapid_window) = match plan.class {
        LakeClass::Refreeze => (rng.gen_range(225..=250), 0.030 + rng.gen_range(-0.005..0.005), 0),
        LakeClass::Buried => (rng.gen_range(200..=235), 0.150 + rng.gen_range(-0.02..0.02), 0),
        LakeClass::SlowDrainage => {
            (rng.gen_range(195..=225), 0.080 + rng.gen_range(-0.015..0.015), 0)
        }
        LakeClass::RapidDrainage => (rng.gen_range(195..=235), 0.0, rng.gen_range(1..=3)),
    };
    let w_max = rng.gen_range(85.0..95.0);
    let mut water = [0.0f64; DAYS];
    let mut level = 0.0f64;
    let mut pre_event_level = 0.0f64;
    const RAPID_PROFILE: [f64; 3] = [0.72, 0.20, 0.08];
    for d in 0..DAYS {
        let day = d + 1;
        if day < event_day {
            let melt = (t2m[d] - MELT_THRESHOLD).max(0.0);
            level = (level + FILL_RATE * melt - 0.15).clamp(0.0, w_max);
            pre_event_level = level;
        } else if plan.class == LakeClass::RapidDrainage {
            let offset = day - event_day;
            if offset < rapid_window {
                // Front-loaded cliff, fractions renormalized to the window
                // length: the first day alone sheds >= 50 points.
                let denom: f64 = RAPID_PROFILE[..rapid_window].iter().sum();
                let shed: f64 = RAPID_PROFILE[..=offset].iter().sum::<f64>() / denom;
                level = pre_event_level * (1.0 - shed).max(0.0);
            } else {
                level *= 0.6;
            }
        } else {
            level *= 1.0 - decay_rate;
        }
        water[d] = level;
    }

    // Observed water fractions: template plus truncated observation noise.
    let mut s2_water = [0.0f64; DAYS];
    let mut ls_water = [0.0f64; DAYS];
    for d in 0..DAYS {
        s2_water[d] = (water[d] + truncated_normal(&mut rng, S2_OBS_SD * noise)).clamp(0.0, 100.0);
        ls_water[d] = (water[d] + truncated_normal(&mut rng, LS_OBS_SD * noise)).clamp(0.0, 100.0);
    }

    // hv_anom: autoregressive response to the observed optical water signal
    // plus class-specific drift inputs. Drifts are deterministic functions
    // of the day only; multiplying an observed noisy signal would give
    // classes different slopes on it, which a pooled linear test reads as
    // spurious lagged dependence.
    let mut hv = [0.0f64; DAYS];
    for d in 0..DAYS {
        let mut value = HV_WATER_COUPLING * s2_water[d] / 100.0;
        if d > 0 {
            value += HV_WATER_RECOVERY * s2_water[d - 1] / 100.0;
        }
        for (k, a) in HV_AR.iter().enumerate() {
            if d > k {
                value += a * hv[d - 1 - k];
            }
        }
        if plan.class == LakeClass::Buried {
            // Constant radar-dark input: subsurface water keeps the
            // whole-season baseline negative. A per-lake constant is
            // absorbed exactly by the lake-identity dummy, so it is a
            // generating coupling of s_dummy rather than a time-local
            // confounder. The rapid-drainage hv spike is emergent: a sharp
            // water drop flips the sign of the lag-0/lag-1 water pair for
            // one day, overshooting hv upward.
            value += BURIED_DRIFT;
        }
        value += truncated_normal(&mut rng, HV_NOISE_SD * noise);
        hv[d] = value;
    }

    // Solar zenith angles: seasonal curves with small noise, no causal role.
    let mut s2_zenith = [0.0f64; DAYS];
    let mut ls_zenith = [0.0f64; DAYS];
    for d in 0..DAYS {
        let season = (TAU * (d as f64 + 1.0 - T2M_PHASE_DAY) / DAYS as f64).sin();
        s2_zenith[d] = 58.0 - 28.0 * season + truncated_normal(&mut rng, 1.5 * noise);
        ls_zenith[d] = 60.0 - 28.0 * season + truncated_normal(&mut rng, 1.5 * noise);
    }

    // Meteorological background AR(1) processes.
    let mut r2 = [0.0f64; DAYS];
    let mut sp = [0.0f64; DAYS];
    let mut sst = [0.0f64; DAYS];
    let mut ar_r2 = 0.0f64;
    let mut ar_sp = 0.0f64;
    let mut ar_sst = 0.0f64;
    for d in 0..DAYS {
        ar_r2 = 0.85 * ar_r2 + rng.sample::<f64, _>(StandardNormal) * 3.0 * noise;
        ar_sp = 0.90 * ar_sp + rng.sample::<f64, _>(StandardNormal) * 300.0 * noise;
        ar_sst = 0.95 * ar_sst + rng.sample::<f64, _>(StandardNormal) * 0.3 * noise;
        let season = (TAU * (d as f64 + 1.0 - T2M_PHASE_DAY) / DAYS as f64).sin();
        r2[d] = 80.0 + ar_r2;
        sp[d] = 90_000.0 + ar_sp;
        sst[d] = 271.0 + 2.0 * season + ar_sst;
    }

    // Region-designated nuisance variable: label-coded oscillation, active
    // only inside this lake's region.
    if cfg.spurious_strength > 0.0 {
        let var = nuisance_variable(plan.region);
        let amp = cfg.spurious_strength
            * NUISANCE_AMPLITUDE[plan.class.index()]
            * nuisance_unit(var);
        let freq = NUISANCE_FREQ[plan.class.index()];
        let phase: f64 = rng.gen_range(0.0..TAU);
        let series = match var {
            VariableId::R2 => &mut r2,
            VariableId::Sp => &mut sp,
            VariableId::Sst => &mut sst,
            _ => unreachable!(),
        };
        for (d, v) in series.iter_mut().enumerate() {
            *v += amp * (TAU * freq * (d as f64 + 1.0) / DAYS as f64 + phase).sin();
        }
    }

    let mut series = Array2::<f64>::zeros((DAYS, NUM_OBSERVED));
    for d in 0..DAYS {
        series[[d, 0]] = hv[d];
        series[[d, 1]] = s2_water[d];
        series[[d, 2]] = ls_water[d];
        series[[d, 3]] = s2_zenith[d];
        series[[d, 4]] = ls_zenith[d];
        series[[d, 5]] = t2m[d];
        series[[d, 6]] = r2[d];
        series[[d, 7]] = sp[d];
        series[[d, 8]] = sst[d];
    }

    let class_code = match plan.class {
        LakeClass::Refreeze => "RF",
        LakeClass::Buried => "BU",
        LakeClass::SlowDrainage => "SD",
        LakeClass::RapidDrainage => "RD",
    };
    LakeRecord {
        lake_id: format!("SYN-{}-{}-{:04}", plan.region.name(), class_code, plan.index),
        region: plan.region,
        year: 2018 + (plan.index % 2) as i32,
        label: plan.class,
        area_m2: 10_000.0 + rng.gen_range(0.0..500_000.0),
        elevation_m: 300.0 + 200.0 * plan.region.index() as f64 + rng.gen_range(0.0..150.0),
        series,
    }
}

/// The exact generating parent structure of `hv_anom`.
pub fn true_graph() -> CausalGraph {
    let mut links: Vec<ParentLink> = HV_AR
        .iter()
        .enumerate()
        .map(|(k, a)| ParentLink {
            var: VariableId::HvAnom,
            lag: k + 1,
            p_value: 0.0,
            strength: *a,
        })
        .collect();
    links.push(ParentLink {
        var: VariableId::S2Water,
        lag: 0,
        p_value: 0.0,
        strength: HV_WATER_COUPLING.clamp(-1.0, 1.0),
    });
    links.push(ParentLink {
        var: VariableId::S2Water,
        lag: 1,
        p_value: 0.0,
        strength: HV_WATER_RECOVERY.clamp(-1.0, 1.0),
    });
    links.push(ParentLink {
        var: VariableId::SDummy,
        lag: 0,
        p_value: 0.0,
        strength: BURIED_DRIFT.clamp(-1.0, 1.0),
    });
    links.sort_by(|a, b| a.var.cmp(&b.var).then(a.lag.cmp(&b.lag)));
    let mut targets = BTreeMap::new();
    targets.insert(VariableId::HvAnom, links);
    CausalGraph { config: GraphConfig { tau_max: 7, alpha: 0.01 }, targets }
}

/// Generates the labeled dataset and its ground-truth graph.
///
/// Per-lake seeds derive from (seed, region, class, index), so regeneration
/// is reproducible and independent of iteration order.
pub fn generate(cfg: &SynthConfig) -> Result<(Dataset<f64>, CausalGraph)> {
    cfg.validate()?;
    let mut lakes = Vec::new();
    let mut regions = cfg.regions.clone();
    regions.sort();
    for &region in &regions {
        for class in LakeClass::ALL {
            for index in 0..cfg.lakes_per_class_per_region {
                lakes.push(generate_lake(cfg, &LakePlan { region, class, index }));
            }
        }
    }
    let ds = Dataset::new(lakes, format!("synthetic(seed={})", cfg.seed))?;
    Ok((ds, true_graph()))
}
