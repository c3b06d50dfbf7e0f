//! Small CSV reading helpers shared by the loaders.
//!
//! Readers resolve logical column names through the schema's remapping and
//! attach file/line context to every parse failure, so bad rows surface as
//! precise data-validation errors instead of panics or silent drops.

use std::path::Path;

use crate::error::{Error, Result};

/// An open CSV file with resolved headers, yielding string records with
/// 1-based line numbers (header included in the count).
pub(crate) struct CsvTable {
    file: String,
    headers: Vec<String>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    /// Opens and fully reads a CSV file. Malformed CSV structure is a hard
    /// error naming the file and line.
    pub(crate) fn open(path: &Path) -> Result<Self> {
        let file = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::io(
                    &file,
                    std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
                ),
                _ => Error::BadRow {
                    file: file.clone(),
                    line: 1,
                    message: e.to_string(),
                },
            })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::BadRow {
                file: file.clone(),
                line: 1,
                message: format!("unreadable header: {e}"),
            })?
            .iter()
            .map(|s| s.to_string())
            .collect();

        let mut records = Vec::new();
        for result in reader.records() {
            let record = result.map_err(|e| {
                let line = e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(0);
                Error::BadRow {
                    file: file.clone(),
                    line,
                    message: e.to_string(),
                }
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, record));
        }
        Ok(CsvTable {
            file,
            headers,
            records,
        })
    }

    /// The file path this table was read from.
    pub(crate) fn file(&self) -> &str {
        &self.file
    }

    /// Index of a column. `logical` is the engine-side name, `mapped` the
    ///(header) name it was remapped to by the schema.
    pub(crate) fn col(&self, logical: &str, mapped: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == mapped)
            .ok_or_else(|| {
                Error::Invariant(format!(
                    "{}: missing column {mapped:?} (for {logical}); found columns: {}",
                    self.file,
                    self.headers.join(", ")
                ))
            })
    }

    /// Iterates `(line, record)` pairs in file order.
    pub(crate) fn rows(&self) -> impl Iterator<Item = (u64, &csv::StringRecord)> {
        self.records.iter().map(|(l, r)| (*l, r))
    }

    /// Parses one field with file/line context in the error.
    pub(crate) fn parse<T: std::str::FromStr>(
        &self,
        line: u64,
        record: &csv::StringRecord,
        idx: usize,
        what: &str,
    ) -> Result<T> {
        let raw = record.get(idx).unwrap_or("");
        raw.parse::<T>().map_err(|_| Error::BadRow {
            file: self.file.clone(),
            line,
            message: format!("cannot parse {what} from {raw:?}"),
        })
    }

    /// Reads one field as a non-empty string with file/line context.
    pub(crate) fn field(
        &self,
        line: u64,
        record: &csv::StringRecord,
        idx: usize,
        what: &str,
    ) -> Result<String> {
        let raw = record.get(idx).unwrap_or("");
        if raw.is_empty() {
            return Err(Error::BadRow {
                file: self.file.clone(),
                line,
                message: format!("empty {what}"),
            });
        }
        Ok(raw.to_string())
    }
}
