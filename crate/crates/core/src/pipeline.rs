//! End-to-end wiring: from files (or an in-memory simulation) to
//! instruments, samples, and estimates.
//!
//! The command-line front end and the integration checks both drive the
//! engine through this module so that "load, instrument, sample, estimate"
//! is one code path with one set of conventions:
//!
//! * base periods default to the widest window the panel supports given
//!   the horizon range and the control lags;
//! * long-difference controls are measured at the window's first interior
//!   year, which makes an adjacent-year window agree with the horizon-0
//!   local projection exactly;
//! * outcome series are addressed by name (`employment`, `wages`,
//!   `informal`, and the taxonomy slices).

use std::ops::RangeInclusive;
use std::path::Path;

use crate::dgp::SimulatedData;
use crate::error::{Error, Result};
use crate::instrument::{build_instrument_series, InstrumentKind, InstrumentSeries, ShifterData};
use crate::panel::{
    build_controls, build_long_sample, build_sample, load_destination, load_exports, load_panel,
    load_world_exports, ClusterKey, DestinationData, EstimationSample, ExportsSeries,
    GrowthPolicy, LoadReport, LongSample, OutcomeSeries, RegionPanel, SchemaConfig,
    WorldExportsSeries, Year, PRE_TREND_LONG_LAG,
};
use crate::regress::{local_projection_irf, long_difference, FixedEffects, IrfResult, LongRunRow};
use crate::taxonomy::{classify_panel, ActivityClassification, AnnotatedPanel};

/// Default horizon window for impulse responses.
pub const DEFAULT_HORIZONS: RangeInclusive<i32> = -5..=10;

/// Outcome names accepted by [`LoadedData::outcome`].
pub const OUTCOME_NAMES: [&str; 7] = [
    "employment",
    "wages",
    "informal",
    "risky",
    "nonrisky",
    "sustainable",
    "nonsustainable",
];

/// Everything the estimators read, either loaded from a directory of CSV
/// files or taken from an in-memory simulation.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub panel: RegionPanel,
    pub exports: ExportsSeries,
    pub world_exports: WorldExportsSeries,
    pub destination: Option<DestinationData>,
    /// Informal employment in log levels, when an informal panel exists.
    pub informal: Option<OutcomeSeries>,
    pub classification: Option<ActivityClassification>,
    pub schema: SchemaConfig,
}

/// Fixed input file names inside a data directory.
pub const PANEL_FILE: &str = "panel.csv";
pub const EXPORTS_FILE: &str = "exports.csv";
pub const WORLD_EXPORTS_FILE: &str = "world_exports.csv";
pub const DEST_GDP_FILE: &str = "dest_gdp.csv";
pub const DEST_SHARES_FILE: &str = "dest_shares.csv";
pub const INFORMAL_FILE: &str = "informal_panel.csv";
pub const CLASSIFICATION_FILE: &str = "classification.csv";

fn parse_informal_csv(source: &str, text: &str) -> Result<OutcomeSeries> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Invariant(format!("{source}: empty informal panel")))?
        .1;
    if header.trim() != "region_id,year,employment" {
        return Err(Error::Invariant(format!(
            "{source}: unexpected informal header `{header}`"
        )));
    }
    let mut series = OutcomeSeries::new("informal");
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx as u64 + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::BadRow {
                file: source.to_string(),
                line: lineno,
                message: format!("expected 3 fields, found {}", parts.len()),
            });
        }
        let year: Year = parts[1].parse().map_err(|_| Error::BadRow {
            file: source.to_string(),
            line: lineno,
            message: format!("bad year `{}`", parts[1]),
        })?;
        let emp: u64 = parts[2].parse().map_err(|_| Error::BadRow {
            file: source.to_string(),
            line: lineno,
            message: format!("bad employment `{}`", parts[2]),
        })?;
        if emp > 0 {
            series.insert(parts[0].to_string(), year, (emp as f64).ln());
        } else {
            series.exclude(parts[0].to_string(), year, "zero informal employment");
        }
    }
    Ok(series)
}

impl LoadedData {
    /// Loads the fixed-name files from a directory. The destination pair,
    /// the informal panel, and the classification are optional; the
    /// destination files must come as a pair.
    pub fn from_dir(dir: &Path, schema: &SchemaConfig) -> Result<(Self, Vec<LoadReport>)> {
        let mut reports = Vec::new();
        let (panel, report) = load_panel(&dir.join(PANEL_FILE), schema)?;
        reports.push(report);
        let (exports, report) = load_exports(&dir.join(EXPORTS_FILE), schema)?;
        reports.push(report);
        let (world_exports, report) = load_world_exports(&dir.join(WORLD_EXPORTS_FILE), schema)?;
        reports.push(report);

        let gdp_path = dir.join(DEST_GDP_FILE);
        let shares_path = dir.join(DEST_SHARES_FILE);
        let destination = match (gdp_path.exists(), shares_path.exists()) {
            (true, true) => {
                let (destination, dest_reports) =
                    load_destination(&gdp_path, &shares_path, schema)?;
                reports.extend(dest_reports);
                Some(destination)
            }
            (false, false) => None,
            (true, false) => {
                return Err(Error::Config(format!(
                    "{} present without {}",
                    DEST_GDP_FILE, DEST_SHARES_FILE
                )))
            }
            (false, true) => {
                return Err(Error::Config(format!(
                    "{} present without {}",
                    DEST_SHARES_FILE, DEST_GDP_FILE
                )))
            }
        };

        let informal_path = dir.join(INFORMAL_FILE);
        let informal = if informal_path.exists() {
            let text = std::fs::read_to_string(&informal_path)
                .map_err(|e| Error::io(informal_path.display().to_string(), e))?;
            Some(parse_informal_csv(
                &informal_path.display().to_string(),
                &text,
            )?)
        } else {
            None
        };

        let classification_path = dir.join(CLASSIFICATION_FILE);
        let classification = if classification_path.exists() {
            Some(ActivityClassification::from_path(&classification_path)?)
        } else {
            None
        };

        Ok((
            LoadedData {
                panel,
                exports,
                world_exports,
                destination,
                informal,
                classification,
                schema: schema.clone(),
            },
            reports,
        ))
    }

    /// Wraps an in-memory simulation without touching the filesystem.
    pub fn from_simulation(sim: &SimulatedData) -> Result<Self> {
        let informal = sim.informal.as_ref().map(|rows| {
            let mut series = OutcomeSeries::new("informal");
            for (region, year, emp) in rows {
                if *emp > 0 {
                    series.insert(region.clone(), *year, (*emp as f64).ln());
                } else {
                    series.exclude(region.clone(), *year, "zero informal employment");
                }
            }
            series
        });
        let classification = match &sim.classification {
            Some(rows) => Some(ActivityClassification::from_records(rows.iter().map(
                |(code, risky, sustainable)| {
                    let level = if *sustainable {
                        crate::taxonomy::ContributionLevel::High
                    } else {
                        crate::taxonomy::ContributionLevel::None
                    };
                    (code.clone(), *risky, level)
                },
            ))?),
            None => None,
        };
        Ok(LoadedData {
            panel: sim.panel.clone(),
            exports: sim.exports.clone(),
            world_exports: sim.world_exports.clone(),
            destination: Some(sim.destination.clone()),
            informal,
            classification,
            schema: sim.schema.clone(),
        })
    }

    /// The year used for initial-condition controls.
    pub fn base_year(&self) -> Year {
        self.schema
            .base_year
            .unwrap_or_else(|| *self.panel.years().start())
    }

    /// Attaches the classification to the panel.
    pub fn annotated(&self) -> Result<AnnotatedPanel<'_>> {
        let classification = self.classification.as_ref().ok_or_else(|| {
            Error::Config(
                "no classification configured; taxonomy outcomes are unavailable".to_string(),
            )
        })?;
        classify_panel(&self.panel, classification)
    }

    /// An outcome series by name; see [`OUTCOME_NAMES`].
    pub fn outcome(&self, name: &str) -> Result<OutcomeSeries> {
        match name {
            "employment" => Ok(self.panel.log_employment_series("employment", None)),
            "wages" => Ok(self.panel.log_wage_series("wages", None)),
            "informal" => self.informal.clone().ok_or_else(|| {
                Error::Config("no informal panel loaded; outcome `informal` unavailable".into())
            }),
            "risky" | "nonrisky" | "sustainable" | "nonsustainable" => {
                let annotated = self.annotated()?;
                let mut series = annotated.subgroup_outcomes().employment;
                Ok(series.remove(name).expect("slice labels are fixed"))
            }
            other => Err(Error::Config(format!(
                "unknown outcome `{other}` (expected one of {})",
                OUTCOME_NAMES.join(", ")
            ))),
        }
    }
}

/// Settings for one impulse-response estimation.
#[derive(Debug, Clone)]
pub struct IrfSettings {
    /// Instrument kind; `LongDifference` is rejected here (it belongs to
    /// [`run_long_difference`]).
    pub kind: InstrumentKind,
    pub horizons: RangeInclusive<i32>,
    /// Base periods; `None` derives the widest feasible window.
    pub base_periods: Option<RangeInclusive<Year>>,
    pub cluster: ClusterKey,
    pub policy: GrowthPolicy,
}

impl Default for IrfSettings {
    fn default() -> Self {
        IrfSettings {
            kind: InstrumentKind::Baseline,
            horizons: DEFAULT_HORIZONS,
            base_periods: None,
            cluster: ClusterKey::Region,
            policy: GrowthPolicy::default(),
        }
    }
}

/// Widest base-period window compatible with the panel years, the horizon
/// range, and the control lags.
pub fn default_base_periods(
    panel_years: RangeInclusive<Year>,
    horizons: &RangeInclusive<i32>,
) -> Result<RangeInclusive<Year>> {
    let first = *panel_years.start();
    let last = *panel_years.end();
    let lead = (*horizons.end()).max(0);
    let lag = (-*horizons.start()).max(PRE_TREND_LONG_LAG);
    let start = first + lag;
    let end = last - lead;
    if end < start {
        return Err(Error::Config(format!(
            "panel years {first}..={last} cannot host horizons \
             {}..={} plus control lags (needs {} periods)",
            horizons.start(),
            horizons.end(),
            lag + lead + 1
        )));
    }
    Ok(start..=end)
}

/// Builds the per-period instrument series of the requested kind.
pub fn build_kind_instrument(
    data: &LoadedData,
    kind: InstrumentKind,
    base_periods: RangeInclusive<Year>,
) -> Result<InstrumentSeries> {
    let flagged = data.schema.non_exporting_set();
    match kind {
        InstrumentKind::Baseline => build_instrument_series(
            &data.panel,
            ShifterData::World(&data.world_exports),
            kind,
            &flagged,
            base_periods,
        ),
        InstrumentKind::DestinationGdp => {
            let destination = data.destination.as_ref().ok_or_else(|| {
                Error::Config(
                    "destination-GDP instrument requested but no destination data loaded"
                        .to_string(),
                )
            })?;
            build_instrument_series(
                &data.panel,
                ShifterData::Destination(destination),
                kind,
                &flagged,
                base_periods,
            )
        }
        InstrumentKind::LongDifference => Err(Error::Config(
            "long-difference instruments are built per window; use the long-difference runner"
                .to_string(),
        )),
    }
}

/// Builds the estimation sample for an outcome under the given settings.
pub fn build_irf_sample(
    data: &LoadedData,
    outcome: &OutcomeSeries,
    settings: &IrfSettings,
) -> Result<EstimationSample> {
    let base_periods = match &settings.base_periods {
        Some(range) => range.clone(),
        None => default_base_periods(data.panel.years(), &settings.horizons)?,
    };
    let instrument = build_kind_instrument(data, settings.kind, base_periods.clone())?;
    let controls = build_controls(
        &data.panel,
        outcome,
        data.base_year(),
        &data.schema.non_exporting_set(),
        base_periods.clone(),
    )?;
    build_sample(
        &data.exports,
        &instrument,
        outcome,
        &controls,
        base_periods,
        settings.horizons.clone(),
        &settings.cluster,
        settings.policy,
    )
}

/// Estimates the full impulse-response function for one outcome.
pub fn run_irf(
    data: &LoadedData,
    outcome: &OutcomeSeries,
    settings: &IrfSettings,
) -> Result<IrfResult> {
    let sample = build_irf_sample(data, outcome, settings)?;
    local_projection_irf(&sample)
}

/// Builds the long-difference sample for a window `(t0, t1)`.
///
/// Shares are taken at `t0`, the instrument cumulates world growth from
/// `t0` to `t1`, and controls are measured at `t0 + 1` so that an
/// adjacent-year window coincides with the horizon-0 local projection.
pub fn build_long_window_sample(
    data: &LoadedData,
    outcome: &OutcomeSeries,
    window: (Year, Year),
    cluster: &ClusterKey,
    policy: GrowthPolicy,
) -> Result<LongSample> {
    let (t0, t1) = window;
    let flagged = data.schema.non_exporting_set();
    let instrument = build_instrument_series(
        &data.panel,
        ShifterData::WorldLong {
            series: &data.world_exports,
            from: t0,
            to: t1,
        },
        InstrumentKind::LongDifference,
        &flagged,
        t0..=t0,
    )?;
    let control_base = t0 + 1;
    let controls = build_controls(
        &data.panel,
        outcome,
        data.base_year(),
        &flagged,
        [control_base],
    )?;
    build_long_sample(
        &data.exports,
        &instrument,
        outcome,
        &controls,
        window,
        control_base,
        cluster,
        policy,
    )
}

/// Estimates one long-difference row for an outcome over a window.
#[allow(clippy::too_many_arguments)]
pub fn run_long_difference(
    data: &LoadedData,
    outcome: &OutcomeSeries,
    window: (Year, Year),
    fixed_effects: Option<&FixedEffects>,
    slice: &str,
    cluster: &ClusterKey,
    policy: GrowthPolicy,
) -> Result<LongRunRow> {
    let sample = build_long_window_sample(data, outcome, window, cluster, policy)?;
    long_difference(&sample, fixed_effects, slice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_panel, ScenarioConfig};

    fn small_scenario() -> ScenarioConfig {
        let mut config = ScenarioConfig::default();
        config.seed = 13;
        config.world.regions = 30;
        config.world.industries = 6;
        config.world.destinations = 4;
        config.world.periods = 18;
        config.structure.non_exporting = 1;
        config
    }

    #[test]
    fn default_window_respects_lags_and_leads() {
        let range = default_base_periods(1990..=2014, &(-5..=10)).unwrap();
        assert_eq!(range, 1995..=2004);
        let range = default_base_periods(1990..=2014, &(0..=0)).unwrap();
        assert_eq!(range, 1995..=2014);
        let err = default_base_periods(1990..=1999, &(-5..=10)).unwrap_err();
        assert!(err.to_string().contains("cannot host"), "{err}");
    }

    #[test]
    fn simulated_data_runs_through_the_full_irf_path() {
        let data = LoadedData::from_simulation(&simulate_panel(&small_scenario()).unwrap()).unwrap();
        let outcome = data.outcome("employment").unwrap();
        let settings = IrfSettings {
            horizons: -2..=3,
            ..IrfSettings::default()
        };
        let irf = run_irf(&data, &outcome, &settings).unwrap();
        assert_eq!(irf.estimates.len(), 6);
        assert_eq!(irf.get(-1).unwrap().beta, 0.0);
        let at_zero = irf.get(0).unwrap();
        assert!(at_zero.n_obs > 100);
        assert!(at_zero.first_stage_f > 10.0, "F = {}", at_zero.first_stage_f);
        assert!(at_zero.beta > 0.0);
    }

    #[test]
    fn destination_kind_swaps_the_instrument_and_runs() {
        let data = LoadedData::from_simulation(&simulate_panel(&small_scenario()).unwrap()).unwrap();
        let outcome = data.outcome("employment").unwrap();
        let settings = IrfSettings {
            kind: InstrumentKind::DestinationGdp,
            horizons: 0..=1,
            ..IrfSettings::default()
        };
        let irf = run_irf(&data, &outcome, &settings).unwrap();
        assert_eq!(irf.instrument_kind, InstrumentKind::DestinationGdp);
        assert!(irf.get(0).unwrap().n_obs > 100);

        let mut no_dest = data.clone();
        no_dest.destination = None;
        let err = run_irf(&no_dest, &outcome, &settings).unwrap_err();
        assert!(err.to_string().contains("destination"), "{err}");
    }

    #[test]
    fn long_difference_runs_on_simulated_data() {
        let mut scenario = small_scenario();
        scenario.world.regions = 80;
        let data = LoadedData::from_simulation(&simulate_panel(&scenario).unwrap()).unwrap();
        let outcome = data.outcome("employment").unwrap();
        let years = data.panel.years();
        let window = (*years.start() + 6, *years.end() - 1);
        let row = run_long_difference(
            &data,
            &outcome,
            window,
            None,
            "all",
            &ClusterKey::Region,
            GrowthPolicy::default(),
        )
        .unwrap();
        assert_eq!(row.outcome, "employment");
        assert_eq!(row.n_obs, 80);
        assert!(row.first_stage_f > 5.0, "F = {}", row.first_stage_f);
    }

    #[test]
    fn unknown_outcome_name_is_a_config_error() {
        let data = LoadedData::from_simulation(&simulate_panel(&small_scenario()).unwrap()).unwrap();
        let err = data.outcome("exports").unwrap_err();
        assert!(err.to_string().contains("unknown outcome"), "{err}");
        let err = data.outcome("informal").unwrap_err();
        assert!(err.to_string().contains("informal"), "{err}");
        let err = data.outcome("risky").unwrap_err();
        assert!(err.to_string().contains("classification"), "{err}");
    }

    #[test]
    fn taxonomy_outcomes_come_from_the_classification() {
        let mut scenario = small_scenario();
        scenario.taxonomy.risky = vec!["k1".to_string(), "k2".to_string()];
        scenario.taxonomy.sustainable = vec!["k4".to_string()];
        let data = LoadedData::from_simulation(&simulate_panel(&scenario).unwrap()).unwrap();
        let risky = data.outcome("risky").unwrap();
        let nonrisky = data.outcome("nonrisky").unwrap();
        assert_eq!(risky.name, "employment_risky");
        assert!(risky.len() > 0);
        // Partition: exp(risky) + exp(nonrisky) = total employment.
        let total = data.outcome("employment").unwrap();
        for ((region, year), value) in total.iter().take(20) {
            let total_emp = value.exp().round() as u64;
            let risky_emp = risky.get(region, *year).map_or(0, |v| v.exp().round() as u64);
            let nonrisky_emp = nonrisky
                .get(region, *year)
                .map_or(0, |v| v.exp().round() as u64);
            assert_eq!(risky_emp + nonrisky_emp, total_emp);
        }
    }

    #[test]
    fn directory_round_trip_matches_in_memory_loading() {
        let mut scenario = small_scenario();
        scenario.response.informal_substitution = -0.4;
        scenario.taxonomy.risky = vec!["k1".to_string()];
        let sim = simulate_panel(&scenario).unwrap();
        let from_memory = LoadedData::from_simulation(&sim).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
        write(PANEL_FILE, &sim.panel_csv());
        write(EXPORTS_FILE, &sim.exports_csv());
        write(WORLD_EXPORTS_FILE, &sim.world_exports_csv());
        write(DEST_GDP_FILE, &sim.dest_gdp_csv());
        write(DEST_SHARES_FILE, &sim.dest_shares_csv());
        write(INFORMAL_FILE, &sim.informal_csv().unwrap());
        write(CLASSIFICATION_FILE, &sim.classification_csv().unwrap());

        let (from_disk, reports) = LoadedData::from_dir(dir.path(), &sim.schema).unwrap();
        assert!(reports.iter().all(|r| r.dropped.is_empty()));
        assert_eq!(from_disk.panel, from_memory.panel);
        assert_eq!(from_disk.exports, from_memory.exports);
        assert_eq!(from_disk.world_exports, from_memory.world_exports);
        assert_eq!(from_disk.destination, from_memory.destination);
        assert_eq!(from_disk.informal, from_memory.informal);
        assert_eq!(from_disk.classification, from_memory.classification);

        // A dangling destination file is rejected.
        std::fs::remove_file(dir.path().join(DEST_SHARES_FILE)).unwrap();
        let err = LoadedData::from_dir(dir.path(), &sim.schema).unwrap_err();
        assert!(err.to_string().contains(DEST_SHARES_FILE), "{err}");
    }
}
