//! Variable, region, and class identifiers shared across the pipeline.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Whether a variable is a measured signal or a structural context dummy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKind {
    Observed,
    Context,
}

/// The nine observed daily signals plus the three context dummies used
/// during pooled discovery.
///
/// Declaration order is the canonical column order everywhere: series
/// matrices, CSV columns, graph serialization, and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariableId {
    #[serde(rename = "hv_anom")]
    HvAnom,
    #[serde(rename = "s2_water")]
    S2Water,
    #[serde(rename = "ls_water")]
    LsWater,
    #[serde(rename = "s2_zenith")]
    S2Zenith,
    #[serde(rename = "ls_zenith")]
    LsZenith,
    #[serde(rename = "t2m")]
    T2m,
    #[serde(rename = "r2")]
    R2,
    #[serde(rename = "sp")]
    Sp,
    #[serde(rename = "sst")]
    Sst,
    #[serde(rename = "s_dummy")]
    SDummy,
    #[serde(rename = "r_dummy")]
    RDummy,
    #[serde(rename = "t_dummy")]
    TDummy,
}

impl VariableId {
    /// The nine observed variables in canonical column order.
    pub const OBSERVED: [VariableId; 9] = [
        VariableId::HvAnom,
        VariableId::S2Water,
        VariableId::LsWater,
        VariableId::S2Zenith,
        VariableId::LsZenith,
        VariableId::T2m,
        VariableId::R2,
        VariableId::Sp,
        VariableId::Sst,
    ];

    /// The three context dummies.
    pub const CONTEXT: [VariableId; 3] =
        [VariableId::SDummy, VariableId::RDummy, VariableId::TDummy];

    pub fn kind(self) -> VariableKind {
        match self {
            VariableId::SDummy | VariableId::RDummy | VariableId::TDummy => VariableKind::Context,
            _ => VariableKind::Observed,
        }
    }

    pub fn is_context(self) -> bool {
        self.kind() == VariableKind::Context
    }

    pub fn name(self) -> &'static str {
        match self {
            VariableId::HvAnom => "hv_anom",
            VariableId::S2Water => "s2_water",
            VariableId::LsWater => "ls_water",
            VariableId::S2Zenith => "s2_zenith",
            VariableId::LsZenith => "ls_zenith",
            VariableId::T2m => "t2m",
            VariableId::R2 => "r2",
            VariableId::Sp => "sp",
            VariableId::Sst => "sst",
            VariableId::SDummy => "s_dummy",
            VariableId::RDummy => "r_dummy",
            VariableId::TDummy => "t_dummy",
        }
    }

    /// Column index of an observed variable in the canonical 365x9 series.
    pub fn observed_index(self) -> Option<usize> {
        VariableId::OBSERVED.iter().position(|&v| v == self)
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariableId {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        VariableId::OBSERVED
            .iter()
            .chain(VariableId::CONTEXT.iter())
            .copied()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Invalid(format!("unknown variable `{name}`")))
    }
}

/// The six drainage basins, in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    CW,
    NE,
    NO,
    NW,
    SE,
    SW,
}

impl Region {
    pub const ALL: [Region; 6] =
        [Region::CW, Region::NE, Region::NO, Region::NW, Region::SE, Region::SW];

    pub fn name(self) -> &'static str {
        match self {
            Region::CW => "CW",
            Region::NE => "NE",
            Region::NO => "NO",
            Region::NW => "NW",
            Region::SE => "SE",
            Region::SW => "SW",
        }
    }

    pub fn index(self) -> usize {
        Region::ALL.iter().position(|&r| r == self).unwrap()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        Region::ALL
            .iter()
            .copied()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::Invalid(format!("unknown region `{name}`")))
    }
}

/// The four lake evolution outcomes, in canonical (tie-break) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LakeClass {
    #[serde(rename = "refreeze")]
    Refreeze,
    #[serde(rename = "buried")]
    Buried,
    #[serde(rename = "slow_drainage")]
    SlowDrainage,
    #[serde(rename = "rapid_drainage")]
    RapidDrainage,
}

impl LakeClass {
    pub const ALL: [LakeClass; 4] = [
        LakeClass::Refreeze,
        LakeClass::Buried,
        LakeClass::SlowDrainage,
        LakeClass::RapidDrainage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LakeClass::Refreeze => "refreeze",
            LakeClass::Buried => "buried",
            LakeClass::SlowDrainage => "slow_drainage",
            LakeClass::RapidDrainage => "rapid_drainage",
        }
    }

    pub fn index(self) -> usize {
        LakeClass::ALL.iter().position(|&c| c == self).unwrap()
    }
}

impl fmt::Display for LakeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LakeClass {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        LakeClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Invalid(format!("unknown label `{name}`")))
    }
}
