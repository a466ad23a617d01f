//! Contingency tables over labeled pairs and the two-mode link restriction
//! check that decides whether a pair list is a strict bipartite dataset.

use std::collections::{BTreeSet, HashMap};
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced while building or loading a contingency table.
#[derive(Debug, Error)]
pub enum CrosstabError {
    #[error("input pair list is empty")]
    EmptyInput,
    #[error("pair {index} has an empty {side} label")]
    EmptyLabel { index: usize, side: &'static str },
    #[error("counts matrix is {rows}x{cols} but {expected_rows} row and {expected_cols} column labels were given")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("{side} category {label:?} has zero marginal; profiles would divide by zero")]
    ZeroMarginal { side: &'static str, label: String },
    #[error("duplicate {side} label {label:?}")]
    DuplicateLabel { side: &'static str, label: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed pair CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("pair CSV row {row} has {fields} fields, expected 2")]
    BadCsvRow { row: usize, fields: usize },
    #[error("malformed crosstab JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// An m×n contingency table of non-negative counts with cached marginals.
///
/// Row labels index one side of the bipartite dataset (purchase categories),
/// column labels the other (regions). Label order is first-appearance order,
/// so a table built twice from the same pair list is identical byte for byte.
/// Every row and column marginal is strictly positive by construction; tables
/// loaded from files are rejected otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTab {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    /// Row-major m×n counts.
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    grand_total: u64,
}

/// Row- and column-normalized views of a [`CrossTab`].
///
/// `row_profiles[i][j]` is the share of row `i`'s mass that falls in column
/// `j`; each row sums to one. `col_profiles[i][j]` is the share of column
/// `j`'s mass in row `i`; each column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub row_profiles: Vec<Vec<f64>>,
    pub col_profiles: Vec<Vec<f64>>,
}

/// Result of [`check_link_restriction`]: whether any label appears on both
/// sides of the pair list, and which ones do.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionReport {
    pub violation: bool,
    /// Labels seen in both columns, sorted.
    pub offenders: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct CrossTabJson {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl CrossTab {
    /// Builds the table by accumulating `(row_label, col_label)` occurrences.
    ///
    /// Labels are deduplicated per side in first-appearance order; repeated
    /// identical pairs accumulate in the same cell.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self, CrosstabError> {
        if pairs.is_empty() {
            return Err(CrosstabError::EmptyInput);
        }
        let mut row_index: HashMap<String, usize> = HashMap::new();
        let mut col_index: HashMap<String, usize> = HashMap::new();
        let mut row_labels = Vec::new();
        let mut col_labels = Vec::new();
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(pairs.len());
        for (k, (r, c)) in pairs.iter().enumerate() {
            let (r, c) = (r.as_ref(), c.as_ref());
            if r.is_empty() {
                return Err(CrosstabError::EmptyLabel { index: k, side: "row" });
            }
            if c.is_empty() {
                return Err(CrosstabError::EmptyLabel { index: k, side: "column" });
            }
            let ri = *row_index.entry(r.to_owned()).or_insert_with(|| {
                row_labels.push(r.to_owned());
                row_labels.len() - 1
            });
            let ci = *col_index.entry(c.to_owned()).or_insert_with(|| {
                col_labels.push(c.to_owned());
                col_labels.len() - 1
            });
            cells.push((ri, ci));
        }
        let (m, n) = (row_labels.len(), col_labels.len());
        let mut counts = vec![0u64; m * n];
        for (ri, ci) in cells {
            counts[ri * n + ci] += 1;
        }
        Ok(Self::from_parts(row_labels, col_labels, counts))
    }

    /// Builds the table from an explicit counts matrix, validating labels,
    /// shape, and marginals. Zero-marginal rows or columns are rejected.
    pub fn from_counts(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self, CrosstabError> {
        if row_labels.is_empty() || col_labels.is_empty() || counts.is_empty() {
            return Err(CrosstabError::EmptyInput);
        }
        for (side, labels) in [("row", &row_labels), ("column", &col_labels)] {
            let mut seen = BTreeSet::new();
            for label in labels.iter() {
                if label.is_empty() {
                    return Err(CrosstabError::EmptyLabel { index: 0, side });
                }
                if !seen.insert(label) {
                    return Err(CrosstabError::DuplicateLabel {
                        side,
                        label: label.clone(),
                    });
                }
            }
        }
        let (m, n) = (row_labels.len(), col_labels.len());
        if counts.len() != m || counts.iter().any(|r| r.len() != n) {
            return Err(CrosstabError::ShapeMismatch {
                rows: counts.len(),
                cols: counts.first().map_or(0, |r| r.len()),
                expected_rows: m,
                expected_cols: n,
            });
        }
        let flat: Vec<u64> = counts.into_iter().flatten().collect();
        let table = Self::from_parts(row_labels, col_labels, flat);
        if let Some(i) = table.row_sums.iter().position(|&s| s == 0) {
            return Err(CrosstabError::ZeroMarginal {
                side: "row",
                label: table.row_labels[i].clone(),
            });
        }
        if let Some(j) = table.col_sums.iter().position(|&s| s == 0) {
            return Err(CrosstabError::ZeroMarginal {
                side: "column",
                label: table.col_labels[j].clone(),
            });
        }
        Ok(table)
    }

    fn from_parts(row_labels: Vec<String>, col_labels: Vec<String>, counts: Vec<u64>) -> Self {
        let (m, n) = (row_labels.len(), col_labels.len());
        debug_assert_eq!(counts.len(), m * n);
        let mut row_sums = vec![0u64; m];
        let mut col_sums = vec![0u64; n];
        for i in 0..m {
            for j in 0..n {
                row_sums[i] += counts[i * n + j];
                col_sums[j] += counts[i * n + j];
            }
        }
        let grand_total = row_sums.iter().sum();
        CrossTab {
            row_labels,
            col_labels,
            counts,
            row_sums,
            col_sums,
            grand_total,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_cols() + j]
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.row_sums[i]
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.col_sums[j]
    }

    pub fn grand_total(&self) -> u64 {
        self.grand_total
    }

    /// Cell probability `p_ij`, the count divided by the grand total.
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) as f64 / self.grand_total as f64
    }

    /// Row marginal probability `p_i+`.
    pub fn row_mass(&self, i: usize) -> f64 {
        self.row_sums[i] as f64 / self.grand_total as f64
    }

    /// Column marginal probability `p_+j`.
    pub fn col_mass(&self, j: usize) -> f64 {
        self.col_sums[j] as f64 / self.grand_total as f64
    }

    /// Row and column profiles. Marginals are strictly positive by
    /// construction, so the divisions are always defined.
    pub fn profiles(&self) -> ProfileSet {
        let (m, n) = (self.n_rows(), self.n_cols());
        let mut row_profiles = vec![vec![0.0; n]; m];
        let mut col_profiles = vec![vec![0.0; n]; m];
        for i in 0..m {
            for j in 0..n {
                let f = self.counts[i * n + j] as f64;
                row_profiles[i][j] = f / self.row_sums[i] as f64;
                col_profiles[i][j] = f / self.col_sums[j] as f64;
            }
        }
        ProfileSet {
            row_profiles,
            col_profiles,
        }
    }

    /// Serializes as `{row_labels, col_labels, counts}` JSON.
    pub fn to_json(&self) -> String {
        let n = self.n_cols();
        let doc = CrossTabJson {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            counts: self
                .counts
                .chunks(n)
                .map(|row| row.to_vec())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("crosstab serialization cannot fail")
    }

    /// Parses the `{row_labels, col_labels, counts}` JSON form, applying the
    /// same validation as [`CrossTab::from_counts`].
    pub fn from_json(text: &str) -> Result<Self, CrosstabError> {
        let doc: CrossTabJson = serde_json::from_str(text)?;
        Self::from_counts(doc.row_labels, doc.col_labels, doc.counts)
    }
}

/// Header written by the pair-CSV emitter and recognized by the reader.
pub const PAIR_CSV_HEADER: [&str; 2] = ["category", "city"];

/// Reads a two-column pair list from CSV. A first row exactly matching
/// `category,city` is treated as a header and skipped; anything else counts
/// as data, so headerless files work too.
pub fn read_pairs_csv(path: &Path) -> Result<Vec<(String, String)>, CrosstabError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut pairs = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(CrosstabError::BadCsvRow {
                row: row + 1,
                fields: record.len(),
            });
        }
        if row == 0 && record[0] == *PAIR_CSV_HEADER[0] && record[1] == *PAIR_CSV_HEADER[1] {
            continue;
        }
        pairs.push((record[0].to_owned(), record[1].to_owned()));
    }
    Ok(pairs)
}

/// Writes a pair list as CSV with the canonical `category,city` header.
pub fn write_pairs_csv<W: io::Write>(
    out: W,
    pairs: &[(String, String)],
) -> Result<(), CrosstabError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(PAIR_CSV_HEADER)?;
    for (r, c) in pairs {
        writer.write_record([r, c])?;
    }
    writer.flush()?;
    Ok(())
}

/// Checks whether a pair list is a strict two-mode dataset: no label may
/// appear both as a row label and as a column label. Returns the offending
/// labels sorted, so reports are stable across runs.
pub fn check_link_restriction<S: AsRef<str>>(pairs: &[(S, S)]) -> RestrictionReport {
    let rows: BTreeSet<&str> = pairs.iter().map(|(r, _)| r.as_ref()).collect();
    let cols: BTreeSet<&str> = pairs.iter().map(|(_, c)| c.as_ref()).collect();
    let offenders: Vec<String> = rows
        .intersection(&cols)
        .map(|s| (*s).to_owned())
        .collect();
    RestrictionReport {
        violation: !offenders.is_empty(),
        offenders,
    }
}
