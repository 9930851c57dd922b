//! Lake records, the dataset container, and CSV/JSON ingestion.
//!
//! A lake unit is keyed by `(lake_id, year)`: the same physical lake observed
//! in two melt seasons counts as two units. Every unit carries a dense
//! 365 x 9 series in the canonical variable order; cells may be NaN after
//! ingestion (missing observations) until preprocessing fills them.

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Scalar};
use crate::vars::{LakeClass, Region, VariableId};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

/// Number of days in every series. Day-of-year 366 is dropped at ingestion.
pub const DAYS: usize = 365;

/// Number of observed variables (series columns).
pub const NUM_OBSERVED: usize = 9;

/// Serialization format for datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from a file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Invalid(format!("unknown format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// One observational unit: metadata plus a dense 365-day multivariate series.
#[derive(Debug, Clone)]
pub struct LakeRecord<S: Scalar> {
    pub lake_id: String,
    pub region: Region,
    pub year: i32,
    pub label: LakeClass,
    pub area_m2: f64,
    pub elevation_m: f64,
    /// Dense series, shape (365 days x 9 observed variables), canonical
    /// column order. NaN marks a missing cell.
    pub series: Array2<S>,
}

impl<S: Scalar> LakeRecord<S> {
    /// Column view for an observed variable.
    pub fn column(&self, var: VariableId) -> ndarray::ArrayView1<'_, S> {
        let idx = var.observed_index().expect("observed variable");
        self.series.column(idx)
    }

    /// Unit key.
    pub fn unit(&self) -> (&str, i32) {
        (&self.lake_id, self.year)
    }

    /// True when no cell is NaN.
    pub fn is_dense(&self) -> bool {
        self.series.iter().all(|v| v.is_finite())
    }
}

/// Ordered collection of lake units sharing the canonical variable schema.
#[derive(Debug, Clone, Default)]
pub struct Dataset<S: Scalar> {
    pub lakes: Vec<LakeRecord<S>>,
    /// Free-text source tag; not persisted.
    pub provenance: String,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(lakes: Vec<LakeRecord<S>>, provenance: impl Into<String>) -> Result<Self> {
        let ds = Dataset { lakes, provenance: provenance.into() };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.lakes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lakes.is_empty()
    }

    /// Checks unit-key uniqueness and the 365 x 9 shape of every series.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for lake in &self.lakes {
            if !seen.insert((lake.lake_id.clone(), lake.year)) {
                return Err(Error::Invalid(format!(
                    "duplicate unit ({}, {})",
                    lake.lake_id, lake.year
                )));
            }
            if lake.series.dim() != (DAYS, NUM_OBSERVED) {
                return Err(Error::SchemaMismatch(format!(
                    "lake {} series shape {:?}, expected ({DAYS}, {NUM_OBSERVED})",
                    lake.lake_id,
                    lake.series.dim()
                )));
            }
        }
        Ok(())
    }

    /// Errors unless every cell of every lake is finite.
    pub fn require_dense(&self) -> Result<()> {
        for lake in &self.lakes {
            if !lake.is_dense() {
                return Err(Error::Domain(format!(
                    "lake ({}, {}) has missing values; preprocess first",
                    lake.lake_id, lake.year
                )));
            }
        }
        Ok(())
    }

    /// Lakes restricted to one region, preserving order.
    pub fn filter_region(&self, region: Region) -> Dataset<S> {
        Dataset {
            lakes: self.lakes.iter().filter(|l| l.region == region).cloned().collect(),
            provenance: format!("{}[{region}]", self.provenance),
        }
    }

    /// Regions present, in canonical order.
    pub fn regions(&self) -> Vec<Region> {
        Region::ALL.into_iter().filter(|r| self.lakes.iter().any(|l| l.region == *r)).collect()
    }

    /// Value equality over lakes: metadata fields exact, series cells
    /// bit-identical (NaN equal to NaN). Provenance is ignored.
    pub fn value_eq(&self, other: &Dataset<S>) -> bool {
        self.lakes.len() == other.lakes.len()
            && self.lakes.iter().zip(&other.lakes).all(|(a, b)| {
                a.lake_id == b.lake_id
                    && a.region == b.region
                    && a.year == b.year
                    && a.label == b.label
                    && a.area_m2.to_bits() == b.area_m2.to_bits()
                    && a.elevation_m.to_bits() == b.elevation_m.to_bits()
                    && a.series
                        .iter()
                        .zip(b.series.iter())
                        .all(|(x, y)| to_f64(*x).to_bits() == to_f64(*y).to_bits())
            })
    }
}

const CSV_HEADER: [&str; 16] = [
    "lake_id",
    "region",
    "year",
    "label",
    "area_m2",
    "elevation_m",
    "day",
    "hv_anom",
    "s2_water",
    "ls_water",
    "s2_zenith",
    "ls_zenith",
    "t2m",
    "r2",
    "sp",
    "sst",
];

/// Loads a dataset from `path` in the given format.
pub fn load_dataset<S: Scalar>(path: &Path, format: Format) -> Result<Dataset<S>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = match format {
        Format::Csv => parse_csv(&text)?,
        Format::Json => parse_json(&text)?,
    };
    ds.provenance = path.display().to_string();
    Ok(ds)
}

/// Saves a dataset to `path`; the written file reloads to a value-equal dataset.
pub fn save_dataset<S: Scalar>(ds: &Dataset<S>, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => render_csv(ds),
        Format::Json => render_json(ds),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct LakeBuilder<S: Scalar> {
    region: Region,
    year: i32,
    label: LakeClass,
    area_m2: f64,
    elevation_m: f64,
    rows: HashMap<usize, [S; NUM_OBSERVED]>,
    first_line: usize,
}

fn parse_csv<S: Scalar>(text: &str) -> Result<Dataset<S>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    {
        let header = reader
            .headers()
            .map_err(|e| Error::parse(1, "header", e.to_string()))?;
        let fields: Vec<&str> = header.iter().collect();
        if fields != CSV_HEADER {
            let unknown = fields
                .iter()
                .find(|f| !CSV_HEADER.contains(f))
                .map(|f| format!("unknown variable column `{f}`"))
                .unwrap_or_else(|| "header does not match canonical schema".to_string());
            return Err(Error::parse(1, "header", unknown));
        }
    }

    // Keyed by (lake_id, year); insertion order preserved separately.
    let mut order: Vec<(String, i32)> = Vec::new();
    let mut builders: HashMap<(String, i32), LakeBuilder<S>> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, "row", e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> &str { record.get(i).unwrap_or("") };

        let lake_id = field(0).to_string();
        if lake_id.is_empty() {
            return Err(Error::parse(line, "lake_id", "empty lake_id"));
        }
        let region: Region =
            field(1).parse().map_err(|e: Error| Error::parse(line, "region", e.to_string()))?;
        let year: i32 = field(2)
            .parse()
            .map_err(|_| Error::parse(line, "year", format!("invalid integer `{}`", field(2))))?;
        let label: LakeClass =
            field(3).parse().map_err(|e: Error| Error::parse(line, "label", e.to_string()))?;
        let area_m2: f64 = parse_req_f64(field(4), line, "area_m2")?;
        if area_m2 < 0.0 {
            return Err(Error::parse(line, "area_m2", "negative area"));
        }
        let elevation_m: f64 = parse_req_f64(field(5), line, "elevation_m")?;
        let day: usize = field(6)
            .parse()
            .map_err(|_| Error::parse(line, "day", format!("invalid day `{}`", field(6))))?;
        if day == 366 {
            continue; // leap day dropped at ingestion
        }
        if !(1..=DAYS).contains(&day) {
            return Err(Error::parse(line, "day", format!("day {day} outside 1..365")));
        }

        let mut values = [S::nan(); NUM_OBSERVED];
        for (j, value) in values.iter_mut().enumerate() {
            let raw = field(7 + j);
            if !raw.is_empty() {
                let parsed: f64 = raw.parse().map_err(|_| {
                    Error::parse(line, CSV_HEADER[7 + j], format!("invalid number `{raw}`"))
                })?;
                *value = crate::scalar::s(parsed);
            }
        }

        let key = (lake_id, year);
        let builder = builders.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            LakeBuilder {
                region,
                year,
                label,
                area_m2,
                elevation_m,
                rows: HashMap::new(),
                first_line: line,
            }
        });
        if builder.region != region
            || builder.label != label
            || builder.area_m2 != area_m2
            || builder.elevation_m != elevation_m
        {
            return Err(Error::parse(
                line,
                "lake_id",
                format!("metadata for lake ({}, {year}) differs from line {}", key.0, builder.first_line),
            ));
        }
        if builder.rows.insert(day, values).is_some() {
            return Err(Error::parse(line, "day", format!("duplicate (lake_id, day) = ({}, {day})", key.0)));
        }
    }

    let mut lakes = Vec::with_capacity(order.len());
    for key in order {
        let b = builders.remove(&key).unwrap();
        let mut series = Array2::from_elem((DAYS, NUM_OBSERVED), S::nan());
        for day in 1..=DAYS {
            match b.rows.get(&day) {
                Some(values) => {
                    for (j, v) in values.iter().enumerate() {
                        series[[day - 1, j]] = *v;
                    }
                }
                None => {
                    return Err(Error::parse(
                        b.first_line,
                        "day",
                        format!("missing day {day} for lake ({}, {})", key.0, key.1),
                    ));
                }
            }
        }
        lakes.push(LakeRecord {
            lake_id: key.0,
            region: b.region,
            year: b.year,
            label: b.label,
            area_m2: b.area_m2,
            elevation_m: b.elevation_m,
            series,
        });
    }

    Dataset::new(lakes, "csv")
}

fn parse_req_f64(raw: &str, line: usize, field: &str) -> Result<f64> {
    raw.parse().map_err(|_| Error::parse(line, field, format!("invalid number `{raw}`")))
}

fn render_csv<S: Scalar>(ds: &Dataset<S>) -> String {
    let mut out = String::new();
    out.push_str(&CSV_HEADER.join(","));
    out.push('\n');
    for lake in &ds.lakes {
        for day in 1..=DAYS {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                lake.lake_id, lake.region, lake.year, lake.label, lake.area_m2, lake.elevation_m, day
            ));
            for j in 0..NUM_OBSERVED {
                out.push(',');
                let v = to_f64(lake.series[[day - 1, j]]);
                if v.is_finite() {
                    out.push_str(&format!("{v}"));
                }
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct LakeJson {
    meta: MetaJson,
    series: BTreeMap<String, Vec<Option<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct MetaJson {
    lake_id: String,
    region: String,
    year: i32,
    label: String,
    area_m2: f64,
    elevation_m: f64,
}

fn parse_json<S: Scalar>(text: &str) -> Result<Dataset<S>> {
    let raw: Vec<LakeJson> = serde_json::from_str(text)
        .map_err(|e| Error::parse(e.line(), "json", e.to_string()))?;
    let mut lakes = Vec::with_capacity(raw.len());
    for (i, lj) in raw.into_iter().enumerate() {
        let region: Region = lj.meta.region.parse()?;
        let label: LakeClass = lj.meta.label.parse()?;
        if lj.meta.area_m2 < 0.0 {
            return Err(Error::parse(i + 1, "area_m2", "negative area"));
        }
        let mut series = Array2::from_elem((DAYS, NUM_OBSERVED), S::nan());
        for (j, var) in VariableId::OBSERVED.iter().enumerate() {
            let values = lj.series.get(var.name()).ok_or_else(|| {
                Error::parse(i + 1, var.name(), "series missing variable".to_string())
            })?;
            if values.len() != DAYS {
                return Err(Error::parse(
                    i + 1,
                    var.name(),
                    format!("series length {} != {DAYS}", values.len()),
                ));
            }
            for (d, v) in values.iter().enumerate() {
                if let Some(x) = v {
                    series[[d, j]] = crate::scalar::s(*x);
                }
            }
        }
        for key in lj.series.keys() {
            if VariableId::OBSERVED.iter().all(|v| v.name() != key) {
                return Err(Error::parse(i + 1, key.as_str(), "unknown variable".to_string()));
            }
        }
        lakes.push(LakeRecord {
            lake_id: lj.meta.lake_id,
            region,
            year: lj.meta.year,
            label,
            area_m2: lj.meta.area_m2,
            elevation_m: lj.meta.elevation_m,
            series,
        });
    }
    Dataset::new(lakes, "json")
}

fn render_json<S: Scalar>(ds: &Dataset<S>) -> String {
    let raw: Vec<LakeJson> = ds
        .lakes
        .iter()
        .map(|lake| {
            let mut series = BTreeMap::new();
            for (j, var) in VariableId::OBSERVED.iter().enumerate() {
                let values: Vec<Option<f64>> = (0..DAYS)
                    .map(|d| {
                        let v = to_f64(lake.series[[d, j]]);
                        v.is_finite().then_some(v)
                    })
                    .collect();
                series.insert(var.name().to_string(), values);
            }
            LakeJson {
                meta: MetaJson {
                    lake_id: lake.lake_id.clone(),
                    region: lake.region.to_string(),
                    year: lake.year,
                    label: lake.label.to_string(),
                    area_m2: lake.area_m2,
                    elevation_m: lake.elevation_m,
                },
                series,
            }
        })
        .collect();
    serde_json::to_string_pretty(&raw).expect("dataset serializable")
}
