//! Field-plot and wood-density CSV ingestion.
//!
//! Rows that violate a record invariant are skipped and reported as
//! [`Diagnostic`]s; only a malformed header aborts a parse. Units are fixed:
//! volume in m³ ha⁻¹, biomass in t ha⁻¹, wood density in t m⁻³.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLOT_COLUMNS: [&str; 6] = [
    "species",
    "plot_id",
    "age_years",
    "volume_m3_ha",
    "stem_t_ha",
    "total_t_ha",
];

pub const DENSITY_COLUMNS: [&str; 2] = ["species", "density_t_m3"];

/// Hard sanity cap for wood density; values at or above it are rejected.
pub const DENSITY_HARD_MAX: f64 = 1.5;
/// Typical wood-density range; values outside it are accepted with a warning.
pub const DENSITY_TYPICAL_RANGE: (f64, f64) = (0.2, 1.3);

/// Species or forest-type identifier. Stored trimmed; compared exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpeciesKey(String);

impl SpeciesKey {
    pub fn new(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::InvalidInput("empty species name".into()));
        }
        Ok(SpeciesKey(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SpeciesKey {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        SpeciesKey::new(&s)
    }
}

impl From<SpeciesKey> for String {
    fn from(k: SpeciesKey) -> String {
        k.0
    }
}

impl fmt::Display for SpeciesKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One field plot, stand-level means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRecord {
    pub species: SpeciesKey,
    pub plot_id: String,
    pub age_years: Option<f64>,
    /// Mean stem volume, m³ ha⁻¹.
    pub volume: Option<f64>,
    /// Stem biomass, t ha⁻¹.
    pub stem_biomass: Option<f64>,
    /// Total biomass, t ha⁻¹.
    pub total_biomass: Option<f64>,
}

impl PlotRecord {
    /// Builds a record, enforcing the ingestion invariants. Stem biomass
    /// exceeding total biomass is accepted here; the zone screen flags it.
    pub fn new(
        species: SpeciesKey,
        plot_id: impl Into<String>,
        age_years: Option<f64>,
        volume: Option<f64>,
        stem_biomass: Option<f64>,
        total_biomass: Option<f64>,
    ) -> Result<Self> {
        let plot_id = plot_id.into();
        if plot_id.trim().is_empty() {
            return Err(Error::InvalidInput("empty plot_id".into()));
        }
        if let Some(age) = age_years {
            if !age.is_finite() {
                return Err(Error::InvalidInput("non-finite age".into()));
            }
            if age < 0.0 {
                return Err(Error::InvalidInput("negative age".into()));
            }
        }
        for (name, value) in [
            ("volume", volume),
            ("stem biomass", stem_biomass),
            ("total biomass", total_biomass),
        ] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("non-finite {name}")));
                }
                if v <= 0.0 {
                    return Err(Error::InvalidInput(format!("non-positive {name}")));
                }
            }
        }
        let present = [volume, stem_biomass, total_biomass]
            .iter()
            .filter(|v| v.is_some())
            .count();
        if present < 2 {
            return Err(Error::InvalidInput("fewer than two of V/Bs/Bt".into()));
        }
        Ok(PlotRecord {
            species,
            plot_id,
            age_years,
            volume,
            stem_biomass,
            total_biomass,
        })
    }

    /// (V, B_s) when both are present.
    pub fn volume_stem(&self) -> Option<(f64, f64)> {
        Some((self.volume?, self.stem_biomass?))
    }

    /// (B_s, B_t) when both are present.
    pub fn stem_total(&self) -> Option<(f64, f64)> {
        Some((self.stem_biomass?, self.total_biomass?))
    }

    /// (V, B_t) when both are present.
    pub fn volume_total(&self) -> Option<(f64, f64)> {
        Some((self.volume?, self.total_biomass?))
    }
}

/// An ordered collection of plot records with unique plot ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Dataset {
    records: Vec<PlotRecord>,
    source_label: String,
}

impl Dataset {
    pub fn new(source_label: impl Into<String>, records: Vec<PlotRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.plot_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate plot_id `{}`",
                    r.plot_id
                )));
            }
        }
        Ok(Dataset {
            records,
            source_label: source_label.into(),
        })
    }

    pub fn records(&self) -> &[PlotRecord] {
        &self.records
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Maximum observed volume, if any record carries one.
    pub fn max_volume(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.volume)
            .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Rejected,
    Warning,
}

/// A per-row note produced while parsing. `line` is the 1-based line number
/// in the source (the header is line 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: u64,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Rejected => "rejected",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {}: {}", self.line, tag, self.message)
    }
}

/// A parse result with the diagnostics that accompanied it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T> Parsed<T> {
    pub fn rejected(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Rejected)
            .count()
    }
}

/// Positions of the requested columns within a header, or the missing names.
pub(crate) fn locate_columns(headers: &csv::ByteRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let s = String::from_utf8_lossy(h);
            let s = if i == 0 { s.trim_start_matches('\u{feff}') } else { &s };
            s.trim().to_string()
        })
        .collect();
    let mut idx = Vec::with_capacity(wanted.len());
    let mut missing = Vec::new();
    for w in wanted {
        match names.iter().position(|n| n == w) {
            Some(i) => idx.push(i),
            None => missing.push((*w).to_string()),
        }
    }
    if missing.is_empty() {
        Ok(idx)
    } else {
        Err(Error::MissingColumns { missing })
    }
}

pub(crate) fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

pub(crate) fn read_headers(rdr: &mut csv::Reader<&[u8]>, wanted: &[&str]) -> Result<Vec<usize>> {
    let headers = rdr
        .byte_headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    locate_columns(&headers, wanted)
}

/// Pulls the text of each wanted column out of a raw row.
pub(crate) fn row_fields<'a>(
    record: &'a csv::ByteRecord,
    idx: &[usize],
    names: &[&str],
) -> std::result::Result<Vec<&'a str>, String> {
    let mut out = Vec::with_capacity(idx.len());
    for (&i, name) in idx.iter().zip(names) {
        let raw = record
            .get(i)
            .ok_or_else(|| format!("missing field `{name}` (row has {} fields)", record.len()))?;
        let s = std::str::from_utf8(raw).map_err(|_| format!("invalid UTF-8 in `{name}`"))?;
        out.push(s.trim());
    }
    Ok(out)
}

pub(crate) fn optional_number(s: &str, what: &str) -> std::result::Result<Option<f64>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| format!("unparsable {what} `{s}`"))
}

/// Parses `species,plot_id,age_years,volume_m3_ha,stem_t_ha,total_t_ha`.
pub fn parse_plot_csv(bytes: &[u8], source_label: &str) -> Result<Parsed<Dataset>> {
    let mut rdr = csv_reader(bytes);
    let idx = read_headers(&mut rdr, &PLOT_COLUMNS)?;

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut raw = csv::ByteRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                // Record-level decoding problem: note it and keep going.
                let line = e.position().map_or(line, |p| p.line());
                diagnostics.push(Diagnostic {
                    line,
                    severity: Severity::Rejected,
                    message: e.to_string(),
                });
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    break;
                }
                continue;
            }
        }
        let line = raw.position().map_or(line, |p| p.line());
        if raw.iter().all(|f| f.is_empty()) {
            continue;
        }
        match plot_from_row(&raw, &idx) {
            Ok(rec) => {
                if seen.contains(&rec.plot_id) {
                    diagnostics.push(Diagnostic {
                        line,
                        severity: Severity::Rejected,
                        message: format!("duplicate plot_id `{}`", rec.plot_id),
                    });
                } else {
                    seen.insert(rec.plot_id.clone());
                    records.push(rec);
                }
            }
            Err(message) => diagnostics.push(Diagnostic {
                line,
                severity: Severity::Rejected,
                message,
            }),
        }
    }

    Ok(Parsed {
        value: Dataset {
            records,
            source_label: source_label.to_string(),
        },
        diagnostics,
    })
}

fn plot_from_row(raw: &csv::ByteRecord, idx: &[usize]) -> std::result::Result<PlotRecord, String> {
    let f = row_fields(raw, idx, &PLOT_COLUMNS)?;
    let species = SpeciesKey::new(f[0]).map_err(|_| "empty species".to_string())?;
    let age = optional_number(f[2], "age")?;
    let volume = optional_number(f[3], "volume")?;
    let stem = optional_number(f[4], "stem biomass")?;
    let total = optional_number(f[5], "total biomass")?;
    PlotRecord::new(species, f[1], age, volume, stem, total).map_err(|e| match e {
        Error::InvalidInput(m) => m,
        other => other.to_string(),
    })
}

fn opt_to_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes a dataset in the plot CSV schema. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn write_plot_csv(ds: &Dataset) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(PLOT_COLUMNS).expect("write to Vec");
    for r in &ds.records {
        w.write_record([
            r.species.as_str().to_string(),
            r.plot_id.clone(),
            opt_to_field(r.age_years),
            opt_to_field(r.volume),
            opt_to_field(r.stem_biomass),
            opt_to_field(r.total_biomass),
        ])
        .expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

/// Splits a dataset by species, preserving record order within each group.
pub fn group_by_species(ds: &Dataset) -> BTreeMap<SpeciesKey, Dataset> {
    let mut groups: BTreeMap<SpeciesKey, Dataset> = BTreeMap::new();
    for r in &ds.records {
        groups
            .entry(r.species.clone())
            .or_insert_with(|| Dataset {
                records: Vec::new(),
                source_label: ds.source_label.clone(),
            })
            .records
            .push(r.clone());
    }
    groups
}

/// One wood-density measurement, t m⁻³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMeasurement {
    pub species: SpeciesKey,
    pub density: f64,
}

/// Parses `species,density_t_m3`.
pub fn parse_density_csv(bytes: &[u8]) -> Result<Parsed<Vec<DensityMeasurement>>> {
    let mut rdr = csv_reader(bytes);
    let idx = read_headers(&mut rdr, &DENSITY_COLUMNS)?;

    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    let mut raw = csv::ByteRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_byte_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line: e.position().map_or(line, |p| p.line()),
                    severity: Severity::Rejected,
                    message: e.to_string(),
                });
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    break;
                }
                continue;
            }
        }
        let line = raw.position().map_or(line, |p| p.line());
        if raw.iter().all(|f| f.is_empty()) {
            continue;
        }
        let reject = |message: String| Diagnostic {
            line,
            severity: Severity::Rejected,
            message,
        };
        let fields = match row_fields(&raw, &idx, &DENSITY_COLUMNS) {
            Ok(f) => f,
            Err(m) => {
                diagnostics.push(reject(m));
                continue;
            }
        };
        let species = match SpeciesKey::new(fields[0]) {
            Ok(s) => s,
            Err(_) => {
                diagnostics.push(reject("empty species".into()));
                continue;
            }
        };
        let density = match optional_number(fields[1], "density") {
            Ok(Some(d)) => d,
            Ok(None) => {
                diagnostics.push(reject("missing density".into()));
                continue;
            }
            Err(m) => {
                diagnostics.push(reject(m));
                continue;
            }
        };
        if !(density > 0.0 && density < DENSITY_HARD_MAX) {
            diagnostics.push(reject(format!("density out of range ({density})")));
            continue;
        }
        let (lo, hi) = DENSITY_TYPICAL_RANGE;
        if density < lo || density > hi {
            diagnostics.push(Diagnostic {
                line,
                severity: Severity::Warning,
                message: format!("density {density} outside typical range [{lo}, {hi}]"),
            });
        }
        out.push(DensityMeasurement { species, density });
    }
    Ok(Parsed {
        value: out,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "species,plot_id,age_years,volume_m3_ha,stem_t_ha,total_t_ha\n";

    fn parse(body: &str) -> Parsed<Dataset> {
        parse_plot_csv(format!("{HEADER}{body}").as_bytes(), "test").unwrap()
    }

    #[test]
    fn well_formed_row() {
        let p = parse("Larix,p1,40,120.0,54.0,103.0\n");
        assert!(p.diagnostics.is_empty());
        let r = &p.value.records()[0];
        assert_eq!(r.species.as_str(), "Larix");
        assert_eq!(r.plot_id, "p1");
        assert_eq!(r.age_years, Some(40.0));
        assert_eq!(r.volume, Some(120.0));
        assert_eq!(r.stem_biomass, Some(54.0));
        assert_eq!(r.total_biomass, Some(103.0));
    }

    #[test]
    fn single_quantity_row_rejected() {
        let p = parse("Larix,p2,,,54.0,\n");
        assert!(p.value.is_empty());
        assert_eq!(p.diagnostics.len(), 1);
        assert_eq!(p.diagnostics[0].line, 2);
        assert!(p.diagnostics[0].message.contains("fewer than two of V/Bs/Bt"));
    }

    #[test]
    fn negative_volume_rejected() {
        let p = parse("Larix,p3,30,-5.0,10.0,20.0\n");
        assert!(p.value.is_empty());
        assert!(p.diagnostics[0].message.contains("non-positive volume"));
    }

    #[test]
    fn stem_above_total_is_still_ingested() {
        let p = parse("Larix,p4,30,100,90,80\n");
        assert_eq!(p.value.len(), 1);
    }

    #[test]
    fn bad_rows_do_not_abort() {
        let p = parse("A,p1,1,10,5,9\nA,p2,x,10,5,9\nA,p3,1,10,5\nA,p1,1,10,5,9\nA,p4,1,nan,5,9\nB,p5,,10,5,\n");
        let ids: Vec<_> = p.value.records().iter().map(|r| r.plot_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p5"]);
        assert_eq!(p.rejected(), 4);
        let lines: Vec<u64> = p.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, [3, 4, 5, 6]);
    }

    #[test]
    fn missing_columns_named() {
        let err = parse_plot_csv(b"species,plot_id,volume_m3_ha\n", "x").unwrap_err();
        match err {
            Error::MissingColumns { missing } => {
                assert_eq!(missing, ["age_years", "stem_t_ha", "total_t_ha"])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn columns_may_be_reordered_and_crlf() {
        let csv = "total_t_ha,stem_t_ha,volume_m3_ha,age_years,plot_id,species,extra\r\n103,54,120,,p1,Larix,zz\r\n";
        let p = parse_plot_csv(csv.as_bytes(), "x").unwrap();
        assert_eq!(p.value.records()[0].total_biomass, Some(103.0));
        assert_eq!(p.value.records()[0].age_years, None);
    }

    #[test]
    fn grouping() {
        let p = parse("A,1,,1,1,\nA,2,,1,1,\nB,3,,1,1,\n");
        let g = group_by_species(&p.value);
        assert_eq!(g.len(), 2);
        assert_eq!(g[&SpeciesKey::new("A").unwrap()].len(), 2);
        assert_eq!(g[&SpeciesKey::new("B").unwrap()].len(), 1);

        assert!(group_by_species(&Dataset::default()).is_empty());

        let single = parse("A,1,,1,1,\nA,2,,2,1,\n");
        let g = group_by_species(&single.value);
        assert_eq!(g.len(), 1);
        assert_eq!(g.values().next().unwrap(), &single.value);
    }

    #[test]
    fn species_comparison_is_case_sensitive() {
        let p = parse("larix,1,,1,1,\nLarix,2,,1,1,\n");
        assert_eq!(group_by_species(&p.value).len(), 2);
    }

    #[test]
    fn density_rows() {
        let p = parse_density_csv(b"species,density_t_m3\nLarix,0.47\nOak,1.6\nBalsa,0.15\nX,0\n").unwrap();
        let vals: Vec<f64> = p.value.iter().map(|m| m.density).collect();
        assert_eq!(vals, [0.47, 0.15]);
        assert_eq!(p.rejected(), 2);
        assert!(p.diagnostics[0].message.contains("density out of range"));
        assert_eq!(p.diagnostics[1].severity, Severity::Warning);
        assert_eq!(p.diagnostics[1].line, 4);
    }

    #[test]
    fn density_bad_header() {
        assert!(matches!(
            parse_density_csv(b"name,rho\n"),
            Err(Error::MissingColumns { .. })
        ));
    }

    #[test]
    fn empty_input_is_header_error() {
        assert!(matches!(
            parse_plot_csv(b"", "x"),
            Err(Error::MissingColumns { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected_by_constructor() {
        let k = SpeciesKey::new("A").unwrap();
        let r = PlotRecord::new(k, "p", None, Some(1.0), Some(1.0), None).unwrap();
        assert!(Dataset::new("x", vec![r.clone(), r]).is_err());
    }
}
