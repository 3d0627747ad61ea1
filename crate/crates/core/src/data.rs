//! Study-level records, dataset validation and CSV I/O.
//!
//! The CSV schema is `study_id,class_id,y1,se1,y2,se2,rho_w` with a header
//! row. Column order in the file is free; every column is required.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 7] = ["study_id", "class_id", "y1", "se1", "y2", "se2", "rho_w"];

/// One trial's pair of observed treatment effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub class_id: String,
    /// Observed effect on the surrogate endpoint.
    pub y1: f64,
    pub se1: f64,
    /// Observed effect on the final outcome.
    pub y2: f64,
    pub se2: f64,
    /// Within-study correlation between the two estimates.
    pub rho_w: f64,
}

/// A single invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// 1-based data row, when the violation belongs to one record.
    pub row: Option<usize>,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.row, &self.column) {
            (Some(r), Some(c)) => write!(f, "row {r}, column {c}: {}", self.message),
            (Some(r), None) => write!(f, "row {r}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl StudyRecord {
    fn violations(&self, row: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |column: &str, message: String| {
            out.push(Violation {
                row: Some(row),
                column: Some(column.to_string()),
                message,
            })
        };
        for (name, v) in [
            ("y1", self.y1),
            ("se1", self.se1),
            ("y2", self.y2),
            ("se2", self.se2),
            ("rho_w", self.rho_w),
        ] {
            if !v.is_finite() {
                push(name, format!("non-finite value {v}"));
            }
        }
        if self.se1.is_finite() && self.se1 <= 0.0 {
            push("se1", format!("standard error must be > 0, got {}", self.se1));
        }
        if self.se2.is_finite() && self.se2 <= 0.0 {
            push("se2", format!("standard error must be > 0, got {}", self.se2));
        }
        if self.rho_w.is_finite() && self.rho_w.abs() >= 1.0 {
            push(
                "rho_w",
                format!("correlation must lie in (-1, 1), got {}", self.rho_w),
            );
        }
        out
    }
}

/// Ordered collection of studies plus the distinct class labels in order of
/// first appearance. Class index `j` everywhere in the crate refers to
/// `classes[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    studies: Vec<StudyRecord>,
    classes: Vec<String>,
}

impl Dataset {
    /// Builds and validates a dataset.
    pub fn new(studies: Vec<StudyRecord>) -> Result<Self> {
        let ds = Self::new_unchecked(studies);
        let violations = validate(&ds);
        if let Some(first) = violations.first() {
            return Err(match (&first.row, &first.column) {
                (Some(row), Some(col)) => Error::Parse {
                    row: *row,
                    column: col.clone(),
                    message: first.message.clone(),
                },
                _ => Error::InvalidData(first.to_string()),
            });
        }
        Ok(ds)
    }

    /// Builds a dataset without checking invariants. Use [`validate`] to
    /// inspect it.
    pub fn new_unchecked(studies: Vec<StudyRecord>) -> Self {
        let mut classes: Vec<String> = Vec::new();
        for s in &studies {
            if !classes.iter().any(|c| c == &s.class_id) {
                classes.push(s.class_id.clone());
            }
        }
        Self { studies, classes }
    }

    pub fn studies(&self) -> &[StudyRecord] {
        &self.studies
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, class_id: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class_id)
    }

    pub fn study_index(&self, study_id: &str) -> Option<usize> {
        self.studies.iter().position(|s| s.study_id == study_id)
    }

    /// Class index of every study, aligned with [`Dataset::studies`].
    pub fn class_of_studies(&self) -> Vec<usize> {
        self.studies
            .iter()
            .map(|s| self.class_index(&s.class_id).expect("class list is complete"))
            .collect()
    }

    /// Number of studies per class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.classes.len()];
        for j in self.class_of_studies() {
            sizes[j] += 1;
        }
        sizes
    }

    /// Sub-dataset holding only the studies of one class.
    pub fn restrict_to_class(&self, class: usize) -> Result<Dataset> {
        let id = self
            .classes
            .get(class)
            .ok_or_else(|| Error::Unknown(format!("class index {class}")))?;
        let studies = self
            .studies
            .iter()
            .filter(|s| &s.class_id == id)
            .cloned()
            .collect();
        Ok(Dataset::new_unchecked(studies))
    }

    /// SHA-256 over the canonical CSV serialization.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_dataset_to(self, &mut buf).expect("in-memory write");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Checks every record and dataset invariant; empty result means valid.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if dataset.studies.is_empty() {
        out.push(Violation {
            row: None,
            column: None,
            message: "dataset contains no studies".into(),
        });
    }
    let mut seen = HashSet::new();
    for (i, s) in dataset.studies.iter().enumerate() {
        out.extend(s.violations(i + 1));
        if !seen.insert(s.study_id.as_str()) {
            out.push(Violation {
                row: Some(i + 1),
                column: Some("study_id".into()),
                message: format!("duplicate study_id {:?}", s.study_id),
            });
        }
    }
    for c in &dataset.classes {
        if !dataset.studies.iter().any(|s| &s.class_id == c) {
            out.push(Violation {
                row: None,
                column: Some("class_id".into()),
                message: format!("class {c:?} has no studies"),
            });
        }
    }
    out
}

/// Reads and validates a dataset from a CSV file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 7];
    for (k, name) in CSV_COLUMNS.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Parse {
                row: 0,
                column: (*name).to_string(),
                message: "missing column in header".into(),
            })?;
    }
    let mut studies = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec?;
        let text = |k: usize| -> Result<&str> {
            rec.get(idx[k]).ok_or_else(|| Error::Parse {
                row,
                column: CSV_COLUMNS[k].to_string(),
                message: "missing field".into(),
            })
        };
        let num = |k: usize| -> Result<f64> {
            let raw = text(k)?;
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: CSV_COLUMNS[k].to_string(),
                message: format!("cannot parse {raw:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: CSV_COLUMNS[k].to_string(),
                    message: format!("non-finite value {raw:?}"),
                });
            }
            Ok(v)
        };
        studies.push(StudyRecord {
            study_id: text(0)?.to_string(),
            class_id: text(1)?.to_string(),
            y1: num(2)?,
            se1: num(3)?,
            y2: num(4)?,
            se2: num(5)?,
            rho_w: num(6)?,
        });
    }
    Dataset::new(studies)
}

/// Writes the dataset in the canonical column order. Floats use the shortest
/// representation that round-trips exactly.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_dataset_to(dataset, file)
}

pub fn write_dataset_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    write_dataset_tagged(dataset, writer, None)
}

/// As [`write_dataset_to`], with an optional constant trailing column
/// (`name`, `value`) that readers ignore.
pub fn write_dataset_tagged<W: Write>(dataset: &Dataset, writer: W, tag: Option<(&str, &str)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    header.extend(tag.map(|t| t.0));
    w.write_record(&header)?;
    for s in &dataset.studies {
        let mut row = vec![
            s.study_id.clone(),
            s.class_id.clone(),
            s.y1.to_string(),
            s.se1.to_string(),
            s.y2.to_string(),
            s.se2.to_string(),
            s.rho_w.to_string(),
        ];
        row.extend(tag.map(|t| t.1.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Prior scale constants. All three are standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// SD of the vague normal priors on effects, intercepts, slopes and their means.
    pub a: f64,
    /// Scale of the half-normal priors on standard deviations, and SD of the
    /// non-exchangeable slope component.
    pub b: f64,
    /// Half-normal scale for the conditional SD when Bayes factors are requested.
    pub psi_bf_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            a: 100.0,
            b: 10.0,
            psi_bf_scale: 2.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("psi_bf_scale", self.psi_bf_scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("prior scale {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Chain length and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Post-burn-in iterations (before thinning).
    pub n_iter: usize,
    pub n_burnin: usize,
    pub seed: u64,
    pub thin: usize,
}

impl McmcConfig {
    /// Desk-scale settings: 8,000 retained iterations after 4,000 burn-in.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_iter: 8_000,
            n_burnin: 4_000,
            seed,
            thin: 1,
        }
    }

    /// 50,000 retained iterations after 20,000 burn-in.
    pub fn full_scale(seed: u64) -> Self {
        Self {
            n_iter: 50_000,
            n_burnin: 20_000,
            seed,
            thin: 1,
        }
    }

    pub fn n_kept(&self) -> usize {
        self.n_iter / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Config("n_iter must be >= 1".into()));
        }
        if self.n_burnin == 0 {
            return Err(Error::Config("n_burnin must be >= 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.n_kept() == 0 {
            return Err(Error::Config("thin exceeds n_iter".into()));
        }
        Ok(())
    }
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self::desk(20_240_601)
    }
}
