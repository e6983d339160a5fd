//! PROMISE-style CK-metric datasets: loading, binarization, deduplication
//! and per-project summaries.
//!
//! A CSV file has a header row, zero to three leading identifier columns
//! (`project`, `version`, `class name`, in that order), the metric columns
//! of a [`FeatureSchema`], and a final integer bug-count column. The PROMISE
//! ckjm exports (`name,version,name,wmc,...,avg_cc,bug`) load unchanged.
//! When the project or version is absent it is taken from the file stem,
//! e.g. `ant-1.7.csv` becomes project `ant`, version `1.7`.

pub mod surrogate;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

/// Metric names of the ckjm tool, in PROMISE column order.
pub const DEFAULT_FEATURES: [&str; 20] = [
    "wmc", "dit", "noc", "cbo", "rfc", "lcom", "ca", "ce", "npm", "lcom3", "loc", "dam", "moa",
    "mfa", "cam", "ic", "cbm", "amc", "max_cc", "avg_cc",
];

/// Accepted names for the trailing defect column.
const DEFECT_COLUMNS: [&str; 5] = ["bug", "bugs", "defects", "defect", "bug_count"];

/// Reference counts for the 19 project versions: (tag, instances, defective).
pub const REFERENCE_COUNTS: [(&str, usize, usize); 19] = [
    ("ant-1.7", 746, 166),
    ("camel-1.0", 340, 13),
    ("camel-1.2", 608, 216),
    ("camel-1.4", 872, 145),
    ("camel-1.6", 966, 188),
    ("jedit-3.2", 276, 90),
    ("jedit-4.0", 306, 75),
    ("jedit-4.2", 368, 48),
    ("jedit-4.3", 492, 11),
    ("log4j-1.0", 135, 34),
    ("log4j-1.1", 110, 37),
    ("log4j-1.2", 205, 189),
    ("lucene-2.0", 196, 91),
    ("lucene-2.2", 247, 144),
    ("synapse-1.0", 158, 21),
    ("synapse-1.2", 257, 145),
    ("xalan-2.0", 724, 156),
    ("xalan-2.4", 723, 110),
    ("xalan-2.6", 885, 411),
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },
    #[error("parse error in {path} at row {row}, column '{column}': cannot read '{value}'")]
    Parse {
        path: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("cannot pool datasets with different schemas")]
    SchemaMismatch,
    #[error("metric row has {got} values, schema expects {expected}")]
    RowWidth { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for n in &names {
            if n.trim().is_empty() {
                return Err(CorpusError::InvalidSchema("empty feature name".into()));
            }
            if !seen.insert(n.to_ascii_lowercase()) {
                return Err(CorpusError::InvalidSchema(format!(
                    "duplicate feature name '{n}'"
                )));
            }
        }
        if names.is_empty() {
            return Err(CorpusError::InvalidSchema("schema has no features".into()));
        }
        Ok(Self { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self {
            names: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub project: String,
    pub version: String,
}

impl Provenance {
    pub fn new(project: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            project: project.into(),
            version: version.into(),
        }
    }

    /// `project-version`, or just the project when the version is empty.
    pub fn tag(&self) -> String {
        if self.version.is_empty() {
            self.project.clone()
        } else {
            format!("{}-{}", self.project, self.version)
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// One module/class as it appears in a PROMISE file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub project_id: String,
    pub version: String,
    pub class_name: String,
    /// `NaN` marks a missing cell.
    pub metrics: Vec<f64>,
    pub bug_count: u32,
}

/// Feature matrix with binary fault labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    x: Matrix,
    y: Vec<u8>,
    bug_counts: Vec<u32>,
    class_names: Vec<String>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn from_rows(schema: FeatureSchema, rows: Vec<MetricRow>) -> Result<Self, CorpusError> {
        let mut x = Matrix::with_cols(schema.len());
        let mut y = Vec::with_capacity(rows.len());
        let mut bug_counts = Vec::with_capacity(rows.len());
        let mut class_names = Vec::with_capacity(rows.len());
        let mut provenance = Vec::with_capacity(rows.len());
        for row in rows {
            if row.metrics.len() != schema.len() {
                return Err(CorpusError::RowWidth {
                    expected: schema.len(),
                    got: row.metrics.len(),
                });
            }
            x.push_row(&row.metrics);
            y.push(u8::from(row.bug_count > 0));
            bug_counts.push(row.bug_count);
            class_names.push(row.class_name);
            provenance.push(Provenance::new(row.project_id, row.version));
        }
        Ok(Self {
            schema,
            x,
            y,
            bug_counts,
            class_names,
            provenance,
        })
    }

    /// Builds a dataset directly from a matrix and labels (bug count = label).
    pub fn from_parts(
        schema: FeatureSchema,
        x: Matrix,
        y: Vec<u8>,
        provenance: Provenance,
    ) -> Result<Self, CorpusError> {
        if x.cols() != schema.len() {
            return Err(CorpusError::RowWidth {
                expected: schema.len(),
                got: x.cols(),
            });
        }
        assert_eq!(x.rows(), y.len(), "row count must equal label count");
        assert!(y.iter().all(|&v| v <= 1), "labels must be 0 or 1");
        let n = y.len();
        Ok(Self {
            schema,
            bug_counts: y.iter().map(|&v| u32::from(v)).collect(),
            class_names: (0..n).map(|i| format!("row{i}")).collect(),
            provenance: vec![provenance; n],
            x,
            y,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn bug_counts(&self) -> &[u32] {
        &self.bug_counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn defective(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            bug_counts: idx.iter().map(|&i| self.bug_counts[i]).collect(),
            class_names: idx.iter().map(|&i| self.class_names[i].clone()).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i].clone()).collect(),
        }
    }

    /// Concatenates datasets that share a schema, preserving order.
    pub fn pool(parts: &[Dataset]) -> Result<Dataset, CorpusError> {
        let first = parts.first().ok_or(CorpusError::SchemaMismatch)?;
        let mut out = first.clone();
        for d in &parts[1..] {
            if d.schema != out.schema {
                return Err(CorpusError::SchemaMismatch);
            }
            out.x = out.x.vstack(&d.x);
            out.y.extend_from_slice(&d.y);
            out.bug_counts.extend_from_slice(&d.bug_counts);
            out.class_names.extend(d.class_names.iter().cloned());
            out.provenance.extend(d.provenance.iter().cloned());
        }
        Ok(out)
    }

    /// Writes the dataset in the loader's format, with three identifier
    /// columns. Missing cells are written as `?`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![
            "name".to_string(),
            "version".to_string(),
            "name".to_string(),
        ];
        header.extend(self.schema.names.iter().cloned());
        header.push("bug".to_string());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.provenance[i].project.clone(),
                self.provenance[i].version.clone(),
                self.class_names[i].clone(),
            ];
            rec.extend(self.x.row(i).iter().map(|&v| {
                if Matrix::is_missing(v) {
                    "?".to_string()
                } else {
                    format!("{v}")
                }
            }));
            rec.push(self.bug_counts[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_cell(raw: &str) -> Option<f64> {
    let t = raw.trim();
    if t.is_empty() || t == "?" {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_bug(raw: &str) -> Option<u32> {
    let t = raw.trim();
    if let Ok(v) = t.parse::<u32>() {
        return Some(v);
    }
    // Some exports write counts as floats ("2.0").
    let f = t.parse::<f64>().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f <= u32::MAX as f64).then_some(f as u32)
}

fn stem_provenance(path: &Path) -> Provenance {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.rsplit_once('-') {
        Some((p, v)) if v.starts_with(|c: char| c.is_ascii_digit()) => Provenance::new(p, v),
        _ => Provenance::new(stem, ""),
    }
}

/// Loads one PROMISE-style CSV file. Labels are `bug_count > 0`.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset, CorpusError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let csv_err = |source| CorpusError::Csv {
        path: shown.clone(),
        source,
    };
    let schema_err = |message: String| CorpusError::Schema {
        path: shown.clone(),
        message,
    };

    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(schema_err("file has no header row".into())),
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let p = schema.len();
    if header.len() < p + 1 || header.len() > p + 4 {
        return Err(schema_err(format!(
            "expected {} metric columns plus a defect column (and up to 3 leading id columns), found {} columns",
            p,
            header.len()
        )));
    }
    let lead = header.len() - p - 1;
    for (j, name) in schema.names().iter().enumerate() {
        if !header[lead + j].eq_ignore_ascii_case(name) {
            return Err(schema_err(format!(
                "column {} is '{}', expected '{}'",
                lead + j + 1,
                header[lead + j],
                name
            )));
        }
    }
    let defect_col = &header[header.len() - 1];
    if !DEFECT_COLUMNS
        .iter()
        .any(|d| defect_col.eq_ignore_ascii_case(d))
    {
        return Err(schema_err(format!(
            "last column '{defect_col}' is not a defect column"
        )));
    }

    let fallback = stem_provenance(path);
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        if rec.len() == 1 && rec.get(0).is_some_and(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(schema_err(format!(
                "row {line} has {} columns, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let (project_id, version, class_name) = match lead {
            3 => (rec[0].to_string(), rec[1].to_string(), rec[2].to_string()),
            2 => (
                fallback.project.clone(),
                rec[0].to_string(),
                rec[1].to_string(),
            ),
            1 => (
                fallback.project.clone(),
                fallback.version.clone(),
                rec[0].to_string(),
            ),
            _ => (
                fallback.project.clone(),
                fallback.version.clone(),
                format!("row{}", i + 1),
            ),
        };
        let mut metrics = Vec::with_capacity(p);
        for j in 0..p {
            let raw = &rec[lead + j];
            let v = parse_cell(raw).ok_or_else(|| CorpusError::Parse {
                path: shown.clone(),
                row: line,
                column: schema.names()[j].clone(),
                value: raw.to_string(),
            })?;
            metrics.push(v);
        }
        let raw_bug = &rec[header.len() - 1];
        let bug_count = parse_bug(raw_bug).ok_or_else(|| CorpusError::Parse {
            path: shown.clone(),
            row: line,
            column: defect_col.clone(),
            value: raw_bug.to_string(),
        })?;
        rows.push(MetricRow {
            project_id: project_id.trim().to_string(),
            version: version.trim().to_string(),
            class_name,
            metrics,
            bug_count,
        });
    }
    Dataset::from_rows(schema.clone(), rows)
}

/// Collapses rows equal on every metric column and on the label to their
/// first occurrence. Relative order is preserved.
pub fn deduplicate(d: &Dataset) -> Dataset {
    let mut seen: HashSet<(Vec<u64>, u8)> = HashSet::with_capacity(d.len());
    let keep: Vec<usize> = (0..d.len())
        .filter(|&i| {
            let key: Vec<u64> =
                d.x.row(i)
                    .iter()
                    .map(|v| {
                        if v.is_nan() {
                            u64::MAX
                        } else {
                            (v + 0.0).to_bits()
                        }
                    })
                    .collect();
            seen.insert((key, d.y[i]))
        })
        .collect();
    d.subset(&keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub project: String,
    pub instances: usize,
    pub defective: usize,
    /// `defective / instances`, rounded to three decimals.
    pub rate: f64,
}

impl fmt::Display for SummaryRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {:.3}",
            self.project, self.instances, self.defective, self.rate
        )
    }
}

pub fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Per-provenance instance and defect counts, in order of first appearance.
pub fn summarize(d: &Dataset) -> Vec<SummaryRow> {
    let mut order: Vec<String> = Vec::new();
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for (p, &label) in d.provenance.iter().zip(&d.y) {
        let tag = p.tag();
        let e = counts.entry(tag.clone()).or_insert_with(|| {
            order.push(tag);
            (0, 0)
        });
        e.0 += 1;
        e.1 += label as usize;
    }
    order
        .into_iter()
        .map(|tag| {
            let (n, k) = counts[&tag];
            SummaryRow {
                project: tag,
                instances: n,
                defective: k,
                rate: round3(k as f64 / n as f64),
            }
        })
        .collect()
}

/// Looks up the reference counts for a project-version tag.
pub fn reference_entry(tag: &str) -> Option<(usize, usize)> {
    REFERENCE_COUNTS
        .iter()
        .find(|(t, _, _)| t.eq_ignore_ascii_case(tag))
        .map(|&(_, n, k)| (n, k))
}

/// `(tag, observed, expected)` with counts as `(instances, defective)`.
pub type CountMismatch = (String, (usize, usize), (usize, usize));

/// Rows whose counts disagree with the reference table. Unknown tags are
/// ignored.
pub fn check_against_reference(rows: &[SummaryRow]) -> Vec<CountMismatch> {
    rows.iter()
        .filter_map(|r| {
            let expected = reference_entry(&r.project)?;
            let observed = (r.instances, r.defective);
            (observed != expected).then(|| (r.project.clone(), observed, expected))
        })
        .collect()
}
