//! Reader and writer for the svmlight text format.
//!
//! Each data line is `label idx:value idx:value ...` with integer labels
//! and 1-based, strictly ascending feature indices. `#` starts a comment
//! that runs to the end of the line; blank lines are skipped. Parsed
//! entries are converted to 0-based indices, and entries with value
//! exactly zero are dropped (they still contribute to dimension
//! inference). Every parse error carries the 1-based line number.
//!
//! The writer emits the canonical inverse form: one vector per line,
//! 1-based ascending indices, values printed with enough digits to round
//! trip exactly through the parser.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::eval::{EvalError, LabeledDataset};
use crate::sparse::{NormalizationMode, SparseError, SparseVector};

#[derive(Debug, Error)]
pub enum SvmlightError {
    // Display omits the source; callers that report errors walk the chain.
    #[error("io error")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    MalformedLine { line: u64, reason: String },
    #[error("line {line}: index {index} is not ascending")]
    NonAscendingIndex { line: u64, index: u64 },
    #[error("line {line}: duplicate index {index}")]
    DuplicateIndex { line: u64, index: u64 },
    #[error("line {line}: index {index} exceeds dimension {dim}")]
    IndexExceedsDim { line: u64, index: u64, dim: u32 },
    #[error("line {line}: cannot normalize: {source}")]
    Normalization { line: u64, source: SparseError },
    #[error("label count {labels} does not match vector count {vectors}")]
    CountMismatch { labels: usize, vectors: usize },
    #[error(transparent)]
    Dataset(#[from] EvalError),
}

fn malformed(line: u64, reason: impl Into<String>) -> SvmlightError {
    SvmlightError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

/// One parsed data line: 0-based ascending indices, nonzero values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    /// 1-based source line number.
    pub line: u64,
    pub label: i32,
    pub entries: Vec<(u32, f64)>,
}

/// Parsed file content before dimension resolution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawDataset {
    pub rows: Vec<RawRow>,
    /// Largest 0-based index mentioned, including zero-valued entries.
    pub max_index: Option<u32>,
}

impl RawDataset {
    /// Smallest dimension containing every mentioned index.
    pub fn inferred_dim(&self) -> u32 {
        self.max_index.map_or(0, |m| m + 1)
    }

    /// Resolves rows into vectors of dimension `dim`, reporting any entry
    /// at or beyond `dim` with its source line and 1-based index.
    pub fn into_vectors(self, dim: u32) -> Result<(Vec<i32>, Vec<SparseVector>), SvmlightError> {
        let mut labels = Vec::with_capacity(self.rows.len());
        let mut vectors = Vec::with_capacity(self.rows.len());
        for row in self.rows {
            for &(idx, _) in &row.entries {
                if idx >= dim {
                    return Err(SvmlightError::IndexExceedsDim {
                        line: row.line,
                        index: idx as u64 + 1,
                        dim,
                    });
                }
            }
            let indices = row.entries.iter().map(|e| e.0).collect();
            let values = row.entries.iter().map(|e| e.1).collect();
            let v = SparseVector::new(dim, indices, values)
                .expect("parser guarantees sorted, finite, nonzero entries");
            labels.push(row.label);
            vectors.push(v);
        }
        Ok((labels, vectors))
    }
}

/// Parses svmlight text from a reader.
pub fn parse_reader(reader: impl BufRead) -> Result<RawDataset, SvmlightError> {
    let mut rows = Vec::new();
    let mut max_index: Option<u32> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = data.split_whitespace();
        let Some(label_token) = tokens.next() else {
            continue;
        };
        let label: i32 = label_token
            .parse()
            .map_err(|_| malformed(line_no, format!("invalid label '{label_token}'")))?;

        let mut entries = Vec::new();
        let mut prev: Option<u64> = None;
        for token in tokens {
            let (idx_str, val_str) = token
                .split_once(':')
                .ok_or_else(|| malformed(line_no, format!("expected idx:value, got '{token}'")))?;
            let idx: u64 = idx_str
                .parse()
                .map_err(|_| malformed(line_no, format!("invalid index '{idx_str}'")))?;
            if idx == 0 {
                return Err(malformed(line_no, "indices are 1-based"));
            }
            if idx > u32::MAX as u64 {
                return Err(malformed(line_no, format!("index {idx} out of range")));
            }
            match prev {
                Some(p) if idx == p => {
                    return Err(SvmlightError::DuplicateIndex {
                        line: line_no,
                        index: idx,
                    });
                }
                Some(p) if idx < p => {
                    return Err(SvmlightError::NonAscendingIndex {
                        line: line_no,
                        index: idx,
                    });
                }
                _ => {}
            }
            prev = Some(idx);
            let value: f64 = val_str
                .parse()
                .map_err(|_| malformed(line_no, format!("invalid value '{val_str}'")))?;
            if !value.is_finite() {
                return Err(malformed(line_no, format!("non-finite value '{val_str}'")));
            }
            let zero_based = (idx - 1) as u32;
            max_index = Some(max_index.map_or(zero_based, |m| m.max(zero_based)));
            if value != 0.0 {
                entries.push((zero_based, value));
            }
        }
        rows.push(RawRow {
            line: line_no,
            label,
            entries,
        });
    }
    Ok(RawDataset { rows, max_index })
}

/// Parses an svmlight file.
pub fn parse_file(path: &Path) -> Result<RawDataset, SvmlightError> {
    parse_reader(BufReader::new(File::open(path)?))
}

/// Writes vectors in canonical svmlight form.
pub fn write_to(
    w: &mut impl Write,
    labels: &[i32],
    vectors: &[SparseVector],
) -> Result<(), SvmlightError> {
    if labels.len() != vectors.len() {
        return Err(SvmlightError::CountMismatch {
            labels: labels.len(),
            vectors: vectors.len(),
        });
    }
    for (label, v) in labels.iter().zip(vectors) {
        write!(w, "{label}")?;
        for (idx, val) in v.iter() {
            // {:?} prints the shortest digits that parse back bit-exactly.
            write!(w, " {}:{:?}", idx + 1, val)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Writes an svmlight file.
pub fn write_file(
    path: &Path,
    labels: &[i32],
    vectors: &[SparseVector],
) -> Result<(), SvmlightError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(&mut w, labels, vectors)?;
    w.flush()?;
    Ok(())
}

/// Loads a dataset from svmlight files.
///
/// The dimension is the given override or the smallest dimension covering
/// both files. `normalize` is applied per vector; a vector that cannot be
/// normalized (for example an empty one) is reported with its source line.
pub fn load_dataset(
    name: impl Into<String>,
    vectors_path: &Path,
    queries_path: Option<&Path>,
    dim_override: Option<u32>,
    normalize: Option<NormalizationMode>,
) -> Result<LabeledDataset, SvmlightError> {
    let raw_vectors = parse_file(vectors_path)?;
    let raw_queries = match queries_path {
        Some(p) => Some(parse_file(p)?),
        None => None,
    };
    let inferred = raw_vectors
        .inferred_dim()
        .max(raw_queries.as_ref().map_or(0, RawDataset::inferred_dim));
    let dim = dim_override.unwrap_or(inferred);

    let normalize_all = |rows: &RawDataset,
                         vectors: Vec<SparseVector>|
     -> Result<Vec<SparseVector>, SvmlightError> {
        let Some(mode) = normalize else {
            return Ok(vectors);
        };
        rows.rows
            .iter()
            .zip(vectors)
            .map(|(row, v)| {
                v.normalized(mode).map_err(|source| SvmlightError::Normalization {
                    line: row.line,
                    source,
                })
            })
            .collect()
    };

    let (labels, vectors) = raw_vectors.clone().into_vectors(dim)?;
    let vectors = normalize_all(&raw_vectors, vectors)?;
    let (query_labels, queries) = match &raw_queries {
        Some(raw) => {
            let (l, q) = raw.clone().into_vectors(dim)?;
            (Some(l), normalize_all(raw, q)?)
        }
        None => (None, Vec::new()),
    };

    Ok(LabeledDataset::new(
        name,
        dim,
        vectors,
        Some(labels),
        queries,
        query_labels,
    )?)
}
