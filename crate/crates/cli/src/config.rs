//! Run configuration for the estimation commands.
//!
//! A run config is a TOML file validated before any data is touched:
//! unknown keys are rejected, and every resolved value is checked against
//! its legal tokens. Command-line flags override file values; the fully
//! resolved config is what lands in the run manifest.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use shiftshare_core::instrument::InstrumentKind;
use shiftshare_core::panel::{ClusterKey, GrowthPolicy, Year};
use shiftshare_core::{Error, Result};

use crate::args::{BinscatterArgs, EstimateArgs};

fn default_outcome() -> String {
    "employment".to_string()
}

fn default_kind() -> String {
    "baseline".to_string()
}

fn default_horizons() -> String {
    "-5:10".to_string()
}

fn default_cluster() -> String {
    "region".to_string()
}

fn default_policy() -> String {
    "log_drop".to_string()
}

fn default_bins() -> usize {
    20
}

fn default_figures() -> bool {
    true
}

/// Parameters for `instrument`, `estimate`, `balance`, `binscatter`, and
/// `taxonomy-shares`. All fields except `data_dir` have defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding the fixed-name input files.
    pub data_dir: PathBuf,
    /// Schema file; defaults to `schema.toml` inside `data_dir`.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Outcome series name.
    #[serde(default = "default_outcome")]
    pub outcome: String,
    /// Instrument kind token: `baseline` or `destination`.
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Horizon window as `min:max`.
    #[serde(default = "default_horizons")]
    pub horizons: String,
    /// Base-period window `[first, last]`; derived from the panel if absent.
    #[serde(default)]
    pub base_periods: Option<[Year; 2]>,
    /// Cluster key: `region` or a CSV file path.
    #[serde(default = "default_cluster")]
    pub cluster: String,
    /// Growth transform: `log_drop` or `asinh`.
    #[serde(default = "default_policy")]
    pub growth_policy: String,
    /// Long-difference window `[t0, t1]`; derived from the panel if absent.
    #[serde(default)]
    pub long_window: Option<[Year; 2]>,
    /// Outcomes for the long-difference table; defaults to `[outcome]`.
    #[serde(default)]
    pub long_outcomes: Vec<String>,
    /// Equal-count bins for `binscatter`.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Whether to emit SVG figures next to the CSV tables.
    #[serde(default = "default_figures")]
    pub figures: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("run config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Applies command-line overrides, then re-validates.
    pub fn with_estimate_args(mut self, args: &EstimateArgs) -> Result<Self> {
        if let Some(kind) = &args.kind {
            self.kind = kind.clone();
        }
        if let Some(horizons) = &args.horizons {
            self.horizons = horizons.clone();
        }
        if let Some(cluster) = &args.cluster {
            self.cluster = cluster.clone();
        }
        if let Some(outcome) = &args.outcome {
            self.outcome = outcome.clone();
        }
        self.validate()?;
        Ok(self)
    }

    /// Applies binscatter overrides, then re-validates.
    pub fn with_binscatter_args(mut self, args: &BinscatterArgs) -> Result<Self> {
        if let Some(bins) = args.bins {
            self.bins = bins;
        }
        if let Some(outcome) = &args.outcome {
            self.outcome = outcome.clone();
        }
        self.validate()?;
        Ok(self)
    }

    /// Checks every field against its legal values without touching data.
    pub fn validate(&self) -> Result<()> {
        if self.data_dir.as_os_str().is_empty() {
            return Err(Error::Config("run config: data_dir is empty".to_string()));
        }
        self.instrument_kind()?;
        self.horizon_range()?;
        self.policy()?;
        if self.bins < 2 {
            return Err(Error::Config(format!(
                "run config: bins = {} (need at least 2)",
                self.bins
            )));
        }
        if let Some([lo, hi]) = self.base_periods {
            if hi < lo {
                return Err(Error::Config(format!(
                    "run config: base_periods [{lo}, {hi}] is reversed"
                )));
            }
        }
        if let Some([t0, t1]) = self.long_window {
            if t1 <= t0 {
                return Err(Error::Config(format!(
                    "run config: long_window [{t0}, {t1}] must move forward"
                )));
            }
        }
        Ok(())
    }

    /// The schema file: explicit path, or `schema.toml` inside `data_dir`.
    pub fn schema_path(&self) -> PathBuf {
        self.schema
            .clone()
            .unwrap_or_else(|| self.data_dir.join("schema.toml"))
    }

    pub fn instrument_kind(&self) -> Result<InstrumentKind> {
        match self.kind.as_str() {
            "baseline" => Ok(InstrumentKind::Baseline),
            "destination" | "destination_gdp" => Ok(InstrumentKind::DestinationGdp),
            other => Err(Error::Config(format!(
                "unknown instrument kind `{other}` (expected baseline or destination)"
            ))),
        }
    }

    pub fn horizon_range(&self) -> Result<RangeInclusive<i32>> {
        parse_horizons(&self.horizons)
    }

    pub fn base_period_range(&self) -> Option<RangeInclusive<Year>> {
        self.base_periods.map(|[lo, hi]| lo..=hi)
    }

    pub fn policy(&self) -> Result<GrowthPolicy> {
        match self.growth_policy.as_str() {
            "log_drop" => Ok(GrowthPolicy::LogDropNonpositive),
            "asinh" => Ok(GrowthPolicy::Asinh),
            other => Err(Error::Config(format!(
                "unknown growth policy `{other}` (expected log_drop or asinh)"
            ))),
        }
    }

    /// Resolves the cluster key, reading the mapping file if one is named.
    pub fn cluster_key(&self) -> Result<ClusterKey> {
        if self.cluster == "region" {
            return Ok(ClusterKey::Region);
        }
        let path = Path::new(&self.cluster);
        if path.extension().map_or(false, |e| e == "csv") {
            return load_cluster_map(path);
        }
        Err(Error::Config(format!(
            "unknown cluster key `{}` (expected `region` or a CSV mapping file)",
            self.cluster
        )))
    }

    /// Outcomes for the long-difference table.
    pub fn long_outcome_names(&self) -> Vec<String> {
        if self.long_outcomes.is_empty() {
            vec![self.outcome.clone()]
        } else {
            self.long_outcomes.clone()
        }
    }
}

/// Parses a horizon window written `min:max`.
pub fn parse_horizons(text: &str) -> Result<RangeInclusive<i32>> {
    let err = || {
        Error::Config(format!(
            "bad horizon window `{text}` (expected `min:max`, e.g. `-5:10`)"
        ))
    };
    let (lo, hi) = text.split_once(':').ok_or_else(err)?;
    let lo: i32 = lo.trim().parse().map_err(|_| err())?;
    let hi: i32 = hi.trim().parse().map_err(|_| err())?;
    if hi < lo {
        return Err(Error::Config(format!(
            "bad horizon window `{text}`: {hi} < {lo}"
        )));
    }
    Ok(lo..=hi)
}

/// Reads a `region_id,cluster` CSV into a custom cluster key.
fn load_cluster_map(path: &Path) -> Result<ClusterKey> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(&file, e))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Invariant(format!("{file}: empty cluster map")))?
        .1;
    if header.trim() != "region_id,cluster" {
        return Err(Error::Invariant(format!(
            "{file}: unexpected cluster-map header `{header}`"
        )));
    }
    let mut map = BTreeMap::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx as u64 + 1;
        let (region, cluster) = line.split_once(',').ok_or_else(|| Error::BadRow {
            file: file.clone(),
            line: lineno,
            message: "expected 2 fields".to_string(),
        })?;
        if map
            .insert(region.to_string(), cluster.to_string())
            .is_some()
        {
            return Err(Error::BadRow {
                file: file.clone(),
                line: lineno,
                message: format!("duplicate region `{region}`"),
            });
        }
    }
    Ok(ClusterKey::Map(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let config = RunConfig::from_toml_str("data_dir = \"data\"\n").unwrap();
        assert_eq!(config.outcome, "employment");
        assert_eq!(config.kind, "baseline");
        assert_eq!(config.horizon_range().unwrap(), -5..=10);
        assert_eq!(config.cluster, "region");
        assert!(matches!(config.cluster_key().unwrap(), ClusterKey::Region));
        assert_eq!(config.bins, 20);
        assert!(config.figures);
        assert_eq!(config.schema_path(), PathBuf::from("data/schema.toml"));
        assert_eq!(config.long_outcome_names(), vec!["employment".to_string()]);
    }

    #[test]
    fn unknown_keys_are_rejected_before_any_work() {
        let err = RunConfig::from_toml_str("data_dir = \"d\"\nhorizonz = \"0:1\"\n").unwrap_err();
        assert!(err.to_string().contains("horizonz"), "{err}");
    }

    #[test]
    fn bad_tokens_are_config_errors() {
        let base = "data_dir = \"d\"\n";
        for (extra, needle) in [
            ("kind = \"ratio\"\n", "instrument kind"),
            ("horizons = \"5\"\n", "horizon window"),
            ("horizons = \"10:-5\"\n", "horizon window"),
            ("growth_policy = \"log\"\n", "growth policy"),
            ("bins = 1\n", "bins"),
            ("long_window = [2005, 2005]\n", "long_window"),
            ("base_periods = [2009, 2001]\n", "base_periods"),
        ] {
            let err = RunConfig::from_toml_str(&format!("{base}{extra}")).unwrap_err();
            assert!(err.to_string().contains(needle), "{extra}: {err}");
            assert_eq!(crate::exit_code(err.class()), 2, "{extra}");
        }
    }

    #[test]
    fn flag_overrides_win_and_revalidate() {
        let config = RunConfig::from_toml_str("data_dir = \"d\"\n").unwrap();
        let args = EstimateArgs {
            kind: Some("destination".to_string()),
            horizons: Some("-2:4".to_string()),
            cluster: None,
            outcome: Some("wages".to_string()),
        };
        let resolved = config.clone().with_estimate_args(&args).unwrap();
        assert_eq!(
            resolved.instrument_kind().unwrap(),
            InstrumentKind::DestinationGdp
        );
        assert_eq!(resolved.horizon_range().unwrap(), -2..=4);
        assert_eq!(resolved.outcome, "wages");

        let bad = EstimateArgs {
            kind: Some("ratio".to_string()),
            ..EstimateArgs::default()
        };
        assert!(config.with_estimate_args(&bad).is_err());
    }

    #[test]
    fn cluster_map_files_load_and_reject_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clusters.csv");
        std::fs::write(&path, "region_id,cluster\nr1,north\nr2,south\n").unwrap();
        let mut config = RunConfig::from_toml_str("data_dir = \"d\"\n").unwrap();
        config.cluster = path.display().to_string();
        match config.cluster_key().unwrap() {
            ClusterKey::Map(map) => {
                assert_eq!(map.len(), 2);
                assert_eq!(map["r1"], "north");
            }
            other => panic!("expected map, got {other:?}"),
        }

        std::fs::write(&path, "region_id,cluster\nr1,north\nr1,south\n").unwrap();
        let err = config.cluster_key().unwrap_err();
        assert!(err.to_string().contains("duplicate region"), "{err}");
    }
}
