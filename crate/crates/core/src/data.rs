//! Inspection records, dataset schema, and CSV ingestion/emission.
//!
//! A dataset is a flat list of inspection records, one per asset per
//! inspection year, validated against a schema of condition attributes.
//! Numerical attributes hold real values; rating attributes hold integer
//! levels `1..=N`. Missing cells are kept as absent values.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column names that precede the condition attributes in every CSV file.
pub const ID_COLUMN: &str = "asset_id";
pub const YEAR_COLUMN: &str = "inspection_year";
pub const AGE_COLUMN: &str = "age_years";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),
    #[error("file contains no data rows")]
    Empty,
    #[error("{} invalid row(s): {}", .0.len(), summarize_rows(.0))]
    InvalidRows(Vec<RowError>),
    #[error("inspection interval violations: {}", .0.join("; "))]
    IntervalViolation(Vec<String>),
    #[error("attribute `{0}` has no finite values")]
    NoFiniteValues(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn summarize_rows(rows: &[RowError]) -> String {
    let mut parts: Vec<String> = rows.iter().take(5).map(|r| r.to_string()).collect();
    if rows.len() > 5 {
        parts.push(format!("... and {} more", rows.len() - 5));
    }
    parts.join("; ")
}

/// A rejected CSV row. `line` is the 1-based line number in the file
/// (the header is line 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub reason: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Numerical,
    Rating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    #[serde(alias = "increasing-with-age")]
    Increasing,
    #[serde(alias = "decreasing-with-age")]
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionAttribute {
    pub name: String,
    pub kind: AttributeKind,
    /// Number of rating levels `N`; present iff `kind` is rating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_levels: Option<u32>,
    #[serde(default)]
    pub direction: Direction,
    /// Numerical attributes are physically non-negative unless this is set;
    /// generated draws are truncated at zero otherwise.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_negative: bool,
}

impl ConditionAttribute {
    pub fn numerical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numerical,
            rating_levels: None,
            direction: Direction::Increasing,
            allow_negative: false,
        }
    }

    pub fn rating(name: impl Into<String>, levels: u32) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Rating,
            rating_levels: Some(levels),
            direction: Direction::Increasing,
            allow_negative: false,
        }
    }

    pub fn decreasing(mut self) -> Self {
        self.direction = Direction::Decreasing;
        self
    }

    pub fn is_rating(&self) -> bool {
        self.kind == AttributeKind::Rating
    }

    /// Level count for rating attributes.
    pub fn levels(&self) -> Option<u32> {
        self.rating_levels
    }
}

/// Ordered list of condition attributes. Construct through [`Schema::new`]
/// so the invariants hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schema {
    attributes: Vec<ConditionAttribute>,
}

#[derive(Deserialize)]
struct SchemaFile {
    attributes: Vec<ConditionAttribute>,
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = SchemaFile::deserialize(d)?;
        Schema::new(raw.attributes).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(attributes: Vec<ConditionAttribute>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for attr in &attributes {
            if attr.name.is_empty() {
                return Err(DataError::Schema("attribute with empty name".into()));
            }
            if [ID_COLUMN, YEAR_COLUMN, AGE_COLUMN].contains(&attr.name.as_str()) {
                return Err(DataError::Schema(format!(
                    "attribute name `{}` collides with a reserved column",
                    attr.name
                )));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate attribute `{}`", attr.name)));
            }
            match (attr.kind, attr.rating_levels) {
                (AttributeKind::Rating, Some(n)) if n >= 2 => {}
                (AttributeKind::Rating, Some(n)) => {
                    return Err(DataError::Schema(format!(
                        "rating attribute `{}` needs at least 2 levels, got {n}",
                        attr.name
                    )))
                }
                (AttributeKind::Rating, None) => {
                    return Err(DataError::Schema(format!(
                        "rating attribute `{}` is missing rating_levels",
                        attr.name
                    )))
                }
                (AttributeKind::Numerical, Some(_)) => {
                    return Err(DataError::Schema(format!(
                        "numerical attribute `{}` must not declare rating_levels",
                        attr.name
                    )))
                }
                (AttributeKind::Numerical, None) => {}
            }
        }
        Ok(Self { attributes })
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn attributes(&self) -> &[ConditionAttribute] {
        &self.attributes
    }

    pub fn get(&self, name: &str) -> Option<&ConditionAttribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditionValue {
    Numeric(f64),
    Rating(u32),
}

impl ConditionValue {
    pub fn as_numeric(&self) -> Option<f64> {
        match *self {
            ConditionValue::Numeric(v) => Some(v),
            ConditionValue::Rating(_) => None,
        }
    }

    pub fn as_rating(&self) -> Option<u32> {
        match *self {
            ConditionValue::Rating(i) => Some(i),
            ConditionValue::Numeric(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectionRecord {
    pub asset_id: String,
    pub inspection_year: i32,
    /// Service age in years; authoritative for all models.
    pub age_years: f64,
    pub values: BTreeMap<String, ConditionValue>,
}

impl InspectionRecord {
    pub fn new(asset_id: impl Into<String>, inspection_year: i32, age_years: f64) -> Self {
        Self {
            asset_id: asset_id.into(),
            inspection_year,
            age_years,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, attr: impl Into<String>, value: ConditionValue) -> Self {
        self.values.insert(attr.into(), value);
        self
    }

    pub fn get(&self, attr: &str) -> Option<ConditionValue> {
        self.values.get(attr).copied()
    }

    /// Value of `attr` on the real line: numerical values as-is, ratings via
    /// the mid-bin conversion `(i - 1/2) / N`.
    pub fn numeric(&self, schema: &Schema, attr: &str) -> Option<f64> {
        match self.values.get(attr)? {
            ConditionValue::Numeric(v) => Some(*v),
            ConditionValue::Rating(i) => {
                let n = schema.get(attr)?.rating_levels?;
                crate::stochastic::rating_to_numeric(*i, n).ok()
            }
        }
    }

    /// All present values converted to reals (see [`InspectionRecord::numeric`]).
    pub fn numeric_view(&self, schema: &Schema) -> BTreeMap<String, f64> {
        self.values
            .keys()
            .filter_map(|k| self.numeric(schema, k).map(|v| (k.clone(), v)))
            .collect()
    }
}

/// Validated, immutable collection of inspection records.
#[derive(Debug, Clone, PartialEq)]
pub struct InspectionDataset {
    schema: Schema,
    records: Vec<InspectionRecord>,
    interval: u32,
}

impl InspectionDataset {
    /// Validates every record against the schema and the inspection
    /// interval. Years of one asset must be distinct and differ by a
    /// multiple of `interval` (a skipped cycle is allowed).
    pub fn new(
        schema: Schema,
        records: Vec<InspectionRecord>,
        interval: u32,
    ) -> Result<Self, DataError> {
        if interval == 0 {
            return Err(DataError::Schema("inspection interval must be positive".into()));
        }
        let mut row_errors = Vec::new();
        for (idx, rec) in records.iter().enumerate() {
            if let Err(reason) = check_record(&schema, rec) {
                // records are addressed like CSV lines: header is line 1
                row_errors.push(RowError { line: idx + 2, reason });
            }
        }
        if !row_errors.is_empty() {
            return Err(DataError::InvalidRows(row_errors));
        }
        let violations = interval_violations(&records, interval);
        if !violations.is_empty() {
            return Err(DataError::IntervalViolation(violations));
        }
        Ok(Self {
            schema,
            records,
            interval,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[InspectionRecord] {
        &self.records
    }

    pub fn interval(&self) -> u32 {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// New dataset sharing this schema and interval.
    pub fn with_records(&self, records: Vec<InspectionRecord>) -> Result<Self, DataError> {
        Self::new(self.schema.clone(), records, self.interval)
    }

    /// Distinct inspection years in ascending order.
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.records.iter().map(|r| r.inspection_year).collect();
        set.into_iter().collect()
    }

    /// The most recent record of every asset, ordered by asset id.
    pub fn latest_by_asset(&self) -> Vec<&InspectionRecord> {
        let mut latest: BTreeMap<&str, &InspectionRecord> = BTreeMap::new();
        for rec in &self.records {
            latest
                .entry(rec.asset_id.as_str())
                .and_modify(|cur| {
                    if rec.inspection_year > cur.inspection_year {
                        *cur = rec;
                    }
                })
                .or_insert(rec);
        }
        latest.into_values().collect()
    }

    /// `(previous, current)` record pairs from consecutive inspection cycles
    /// of the same asset, ordered by asset id then year.
    pub fn consecutive_pairs(&self) -> Vec<(&InspectionRecord, &InspectionRecord)> {
        let mut by_asset: BTreeMap<&str, Vec<&InspectionRecord>> = BTreeMap::new();
        for rec in &self.records {
            by_asset.entry(rec.asset_id.as_str()).or_default().push(rec);
        }
        let mut pairs = Vec::new();
        for recs in by_asset.values_mut() {
            recs.sort_by_key(|r| r.inspection_year);
            for w in recs.windows(2) {
                if (w[1].inspection_year - w[0].inspection_year) as i64 == self.interval as i64 {
                    pairs.push((w[0], w[1]));
                }
            }
        }
        pairs
    }

    /// All finite values of a numerical attribute (ratings converted).
    pub fn numeric_values(&self, attr: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.numeric(&self.schema, attr))
            .collect()
    }
}

fn check_record(schema: &Schema, rec: &InspectionRecord) -> Result<(), String> {
    if rec.asset_id.is_empty() {
        return Err("empty asset_id".into());
    }
    if !rec.age_years.is_finite() || rec.age_years < 0.0 {
        return Err(format!("age_years must be a finite non-negative number, got {}", rec.age_years));
    }
    for (name, value) in &rec.values {
        let attr = schema
            .get(name)
            .ok_or_else(|| format!("attribute `{name}` is not in the schema"))?;
        match (attr.kind, value) {
            (AttributeKind::Numerical, ConditionValue::Numeric(v)) => {
                if !v.is_finite() {
                    return Err(format!("`{name}` value {v} is not finite"));
                }
            }
            (AttributeKind::Rating, ConditionValue::Rating(i)) => {
                let n = attr.rating_levels.unwrap_or(0);
                if *i < 1 || *i > n {
                    return Err(format!("`{name}` rating {i} outside [1, {n}]"));
                }
            }
            (AttributeKind::Numerical, ConditionValue::Rating(_)) => {
                return Err(format!("`{name}` is numerical but holds a rating"));
            }
            (AttributeKind::Rating, ConditionValue::Numeric(_)) => {
                return Err(format!("`{name}` is a rating but holds a real value"));
            }
        }
    }
    Ok(())
}

fn interval_violations(records: &[InspectionRecord], interval: u32) -> Vec<String> {
    let mut by_asset: BTreeMap<&str, Vec<i32>> = BTreeMap::new();
    for rec in records {
        by_asset.entry(rec.asset_id.as_str()).or_default().push(rec.inspection_year);
    }
    let mut out = Vec::new();
    for (asset, years) in by_asset.iter_mut() {
        years.sort_unstable();
        for w in years.windows(2) {
            let gap = w[1] - w[0];
            if gap == 0 {
                out.push(format!("asset {asset} inspected twice in {}", w[0]));
            } else if gap % interval as i32 != 0 {
                out.push(format!(
                    "asset {asset}: gap {} -> {} is not a multiple of {interval} years",
                    w[0], w[1]
                ));
            }
        }
    }
    out
}

/// Reads a dataset from CSV. Every row is checked; all failures are returned
/// together with their line numbers.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    interval: u32,
) -> Result<InspectionDataset, DataError> {
    let file = File::open(path)?;
    read_csv(file, schema, interval)
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: &Schema,
    interval: u32,
) -> Result<InspectionDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(DataError::Empty);
    }
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = position(ID_COLUMN).ok_or_else(|| DataError::MissingColumn(ID_COLUMN.into()))?;
    let year_col =
        position(YEAR_COLUMN).ok_or_else(|| DataError::MissingColumn(YEAR_COLUMN.into()))?;
    let age_col = position(AGE_COLUMN).ok_or_else(|| DataError::MissingColumn(AGE_COLUMN.into()))?;
    let mut attr_cols = Vec::with_capacity(schema.len());
    for attr in schema.attributes() {
        let col = position(&attr.name).ok_or_else(|| DataError::MissingColumn(attr.name.clone()))?;
        attr_cols.push((attr, col));
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match parse_row(&row, id_col, year_col, age_col, &attr_cols) {
            Ok(rec) => records.push(rec),
            Err(reason) => errors.push(RowError { line, reason }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::InvalidRows(errors));
    }
    if records.is_empty() {
        return Err(DataError::Empty);
    }
    InspectionDataset::new(schema.clone(), records, interval)
}

fn parse_row(
    row: &csv::StringRecord,
    id_col: usize,
    year_col: usize,
    age_col: usize,
    attr_cols: &[(&ConditionAttribute, usize)],
) -> Result<InspectionRecord, String> {
    let cell = |i: usize| row.get(i).map(str::trim).unwrap_or("");
    let asset_id = cell(id_col);
    if asset_id.is_empty() {
        return Err("empty asset_id".into());
    }
    let year: i32 = cell(year_col)
        .parse()
        .map_err(|_| format!("inspection_year `{}` is not an integer", cell(year_col)))?;
    let age: f64 = cell(age_col)
        .parse()
        .map_err(|_| format!("age_years `{}` is not a number", cell(age_col)))?;
    if !age.is_finite() || age < 0.0 {
        return Err(format!("age_years {age} must be finite and non-negative"));
    }
    let mut rec = InspectionRecord::new(asset_id, year, age);
    for (attr, col) in attr_cols {
        let text = cell(*col);
        if text.is_empty() {
            continue;
        }
        let value = match attr.kind {
            AttributeKind::Numerical => {
                let v: f64 = text
                    .parse()
                    .map_err(|_| format!("`{}` value `{text}` is not a number", attr.name))?;
                if !v.is_finite() {
                    return Err(format!("`{}` value `{text}` is not finite", attr.name));
                }
                ConditionValue::Numeric(v)
            }
            AttributeKind::Rating => {
                let n = attr.rating_levels.unwrap_or(0);
                let i: u32 = text
                    .parse()
                    .map_err(|_| format!("`{}` rating `{text}` is not an integer", attr.name))?;
                if i < 1 || i > n {
                    return Err(format!("`{}` rating {i} outside [1, {n}]", attr.name));
                }
                ConditionValue::Rating(i)
            }
        };
        rec.values.insert(attr.name.clone(), value);
    }
    Ok(rec)
}

pub fn write_csv<W: Write>(dataset: &InspectionDataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![ID_COLUMN.to_string(), YEAR_COLUMN.into(), AGE_COLUMN.into()];
    header.extend(dataset.schema.names().map(String::from));
    wtr.write_record(&header)?;
    for rec in &dataset.records {
        let mut row = vec![
            rec.asset_id.clone(),
            rec.inspection_year.to_string(),
            rec.age_years.to_string(),
        ];
        for attr in dataset.schema.attributes() {
            row.push(match rec.values.get(&attr.name) {
                Some(ConditionValue::Numeric(v)) => v.to_string(),
                Some(ConditionValue::Rating(i)) => i.to_string(),
                None => String::new(),
            });
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn to_csv_bytes(dataset: &InspectionDataset) -> Result<Vec<u8>, DataError> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    Ok(buf)
}

/// Reads a label column (e.g. health index) keyed by `(asset_id, year)`.
/// Rows with an empty label cell are skipped.
pub fn read_labels<R: Read>(
    reader: R,
    column: &str,
) -> Result<BTreeMap<(String, i32), f64>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = position(ID_COLUMN).ok_or_else(|| DataError::MissingColumn(ID_COLUMN.into()))?;
    let year_col =
        position(YEAR_COLUMN).ok_or_else(|| DataError::MissingColumn(YEAR_COLUMN.into()))?;
    let label_col = position(column).ok_or_else(|| DataError::MissingColumn(column.into()))?;
    let mut out = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2;
        let row = row?;
        let text = row.get(label_col).unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let year = row.get(year_col).unwrap_or("").trim().parse::<i32>();
        let label = text.parse::<f64>();
        match (year, label) {
            (Ok(y), Ok(v)) if v.is_finite() => {
                out.insert((row.get(id_col).unwrap_or("").trim().to_string(), y), v);
            }
            _ => errors.push(RowError {
                line,
                reason: format!("unparseable year or label `{text}`"),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(DataError::InvalidRows(errors));
    }
    if out.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(out)
}

/// Record of the direction normalization applied to a dataset.
///
/// Decreasing numerical attributes map `v -> M - v` with `M` the dataset
/// maximum; decreasing ratings map `i -> N + 1 - i`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DirectionTransform {
    pub maxima: BTreeMap<String, f64>,
    pub flipped_ratings: BTreeMap<String, u32>,
}

impl DirectionTransform {
    pub fn is_identity(&self) -> bool {
        self.maxima.is_empty() && self.flipped_ratings.is_empty()
    }

    /// Maps a single original-scale value into the normalized scale.
    pub fn apply_value(&self, attr: &str, value: ConditionValue) -> ConditionValue {
        match value {
            ConditionValue::Numeric(v) => match self.maxima.get(attr) {
                Some(m) => ConditionValue::Numeric(m - v),
                None => value,
            },
            ConditionValue::Rating(i) => match self.flipped_ratings.get(attr) {
                Some(n) => ConditionValue::Rating(n + 1 - i),
                None => value,
            },
        }
    }

    /// Maps a normalized value back to the original scale. The map is its own
    /// inverse, so this shares the arithmetic of [`Self::apply_value`].
    pub fn invert_value(&self, attr: &str, value: ConditionValue) -> ConditionValue {
        self.apply_value(attr, value)
    }

    /// Restores original values and direction flags.
    pub fn invert(&self, dataset: &InspectionDataset) -> Result<InspectionDataset, DataError> {
        let mut attrs = dataset.schema.attributes.clone();
        for attr in &mut attrs {
            if self.maxima.contains_key(&attr.name) || self.flipped_ratings.contains_key(&attr.name)
            {
                attr.direction = Direction::Decreasing;
            }
        }
        let records = self.map_records(&dataset.records);
        InspectionDataset::new(Schema::new(attrs)?, records, dataset.interval)
    }

    fn map_records(&self, records: &[InspectionRecord]) -> Vec<InspectionRecord> {
        records
            .iter()
            .map(|rec| {
                let mut out = rec.clone();
                for (name, value) in out.values.iter_mut() {
                    *value = self.apply_value(name, *value);
                }
                out
            })
            .collect()
    }
}

/// Converts every decreasing-with-age attribute to an increasing one.
/// The returned schema marks all attributes increasing.
pub fn normalize_direction(
    dataset: &InspectionDataset,
) -> Result<(InspectionDataset, DirectionTransform), DataError> {
    let mut transform = DirectionTransform::default();
    let mut attrs = dataset.schema.attributes.clone();
    for attr in &mut attrs {
        if attr.direction != Direction::Decreasing {
            continue;
        }
        match attr.kind {
            AttributeKind::Numerical => {
                let max = dataset
                    .records
                    .iter()
                    .filter_map(|r| r.values.get(&attr.name).and_then(|v| v.as_numeric()))
                    .filter(|v| v.is_finite())
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m| m.max(v))))
                    .ok_or_else(|| DataError::NoFiniteValues(attr.name.clone()))?;
                transform.maxima.insert(attr.name.clone(), max);
            }
            AttributeKind::Rating => {
                let n = attr.rating_levels.unwrap_or(0);
                transform.flipped_ratings.insert(attr.name.clone(), n);
            }
        }
        attr.direction = Direction::Increasing;
    }
    let records = transform.map_records(&dataset.records);
    let out = InspectionDataset::new(Schema::new(attrs)?, records, dataset.interval)?;
    Ok((out, transform))
}
