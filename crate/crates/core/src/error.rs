//! Crate-wide error type.
//!
//! Every failure is classified into one of three [`ErrorClass`]es so that
//! callers (notably the CLI) can map errors onto a stable exit-code contract:
//! configuration problems, data validation problems, and estimation problems.

use thiserror::Error;

/// Coarse classification of an [`Error`], used for exit codes and triage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The run configuration itself is unusable (bad file, unknown keys,
    /// contradictory options). Nothing was read from the data yet.
    Config,
    /// Input data failed validation (malformed rows, duplicate keys,
    /// violated accounting identities).
    Data,
    /// The estimation problem is ill-posed on otherwise valid data
    /// (rank deficiency, weak instrument, empty regression sample).
    Estimation,
}

/// Unified error type for the whole engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Configuration file or option set is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// An I/O failure while reading or writing data files.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A row of an input file could not be parsed or failed a field check.
    /// `line` is 1-based and counts the header.
    #[error("{file}:{line}: {message}")]
    BadRow {
        file: String,
        line: u64,
        message: String,
    },

    /// The same logical key appeared twice in one input file.
    #[error("{file}: duplicate key {key}")]
    DuplicateKey { file: String, key: String },

    /// A dataset-level validation failed (identities, coverage, ranges).
    #[error("data validation: {0}")]
    Invariant(String),

    /// A region-period has no employment, so shares are undefined.
    #[error("degenerate shares: region {region} has zero total employment in period {period}")]
    DegenerateShares { region: String, period: i32 },

    /// An industry carries positive weight but no shifter value, and is not
    /// flagged as non-exporting.
    #[error(
        "missing shifter for industry {industry} in period {period}: \
         positive employment share but no world-export entry (and not flagged non-exporting)"
    )]
    MissingShifter { industry: String, period: i32 },

    /// The design matrix is rank deficient; the named columns span the
    /// near-null space.
    #[error("rank-deficient design matrix; offending column(s): {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    /// The first-stage slope is numerically indistinguishable from zero.
    #[error("weak instrument: first-stage |t| = {t_stat:.3e} is indistinguishable from zero")]
    WeakInstrument { t_stat: f64 },

    /// Cluster-robust inference needs at least two clusters.
    #[error("cluster-robust variance requires at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },

    /// A requested horizon has no complete-case observations.
    #[error("no complete-case observations at horizon {horizon}")]
    EmptyHorizon { horizon: i32 },

    /// Catch-all for other ill-posed estimation requests.
    #[error("estimation error: {0}")]
    Estimation(String),
}

impl Error {
    /// Helper for I/O errors tagged with the offending path.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Which coarse class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::BadRow { .. }
            | Error::DuplicateKey { .. }
            | Error::Invariant(_)
            | Error::DegenerateShares { .. }
            | Error::MissingShifter { .. } => ErrorClass::Data,
            Error::RankDeficient { .. }
            | Error::WeakInstrument { .. }
            | Error::TooFewClusters { .. }
            | Error::EmptyHorizon { .. }
            | Error::Estimation(_) => ErrorClass::Estimation,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_route_to_expected_exit_groups() {
        assert_eq!(Error::Config("x".into()).class(), ErrorClass::Config);
        assert_eq!(
            Error::DuplicateKey {
                file: "panel.csv".into(),
                key: "(r1, k1, 2000)".into()
            }
            .class(),
            ErrorClass::Data
        );
        assert_eq!(
            Error::RankDeficient {
                columns: vec!["nonexport_share".into()]
            }
            .class(),
            ErrorClass::Estimation
        );
    }

    #[test]
    fn messages_name_the_offender() {
        let err = Error::MissingShifter {
            industry: "k07".into(),
            period: 2004,
        };
        assert!(err.to_string().contains("k07"));

        let err = Error::RankDeficient {
            columns: vec!["const".into(), "nonexport_share".into()],
        };
        assert!(err.to_string().contains("nonexport_share"));
    }
}
