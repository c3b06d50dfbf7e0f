//! Assembly of estimation-ready samples.
//!
//! [`build_sample`] joins the endogenous export growth, the instrument, the
//! controls, and outcome differences at every horizon into one frame of
//! `(region, base period)` observations; [`build_long_sample`] does the
//! same for a single long window. Both are complete-case: an observation
//! missing any required piece is excluded with a recorded reason, and each
//! horizon's regression later uses only observations whose outcome exists
//! at that horizon.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::instrument::{InstrumentKind, InstrumentSeries};
use crate::panel::controls::{ControlsSet, CONTROL_NAMES};
use crate::panel::types::{ExportsSeries, GrowthPolicy, OutcomeSeries, Year};

/// How observations are grouped for cluster-robust inference.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterKey {
    /// Each region is its own cluster (the default).
    Region,
    /// Explicit region -> cluster-label map; every sampled region must be
    /// covered.
    Map(BTreeMap<String, String>),
}

impl ClusterKey {
    /// Short descriptor recorded in estimation metadata.
    pub fn describe(&self) -> &'static str {
        match self {
            ClusterKey::Region => "region",
            ClusterKey::Map(_) => "custom-map",
        }
    }

    fn label<'a>(&'a self, region: &'a str) -> Result<&'a str> {
        match self {
            ClusterKey::Region => Ok(region),
            ClusterKey::Map(map) => map.get(region).map(|s| s.as_str()).ok_or_else(|| {
                Error::Invariant(format!("region {region} missing from the cluster map"))
            }),
        }
    }
}

/// One estimation observation at a base period.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub region: String,
    pub base_period: Year,
    /// Endogenous export growth at the base period.
    pub endogenous: f64,
    /// Instrument value at the base period.
    pub instrument: f64,
    /// Control components in [`CONTROL_NAMES`] order.
    pub controls: Vec<f64>,
    /// Index into the sample's cluster-label table.
    pub cluster: usize,
    /// Outcome difference `o(t+h) - o(t-1)` per horizon (aligned with the
    /// sample's horizon range); `None` where the outcome is unobserved.
    outcomes: Vec<Option<f64>>,
}

impl Observation {
    /// Outcome difference at a horizon, if observed.
    pub fn outcome_at(&self, offset: usize) -> Option<f64> {
        self.outcomes[offset]
    }
}

/// Why an observation was dropped during assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleExclusion {
    pub region: String,
    pub base_period: Year,
    pub reason: String,
}

/// A complete-case local-projection sample over a horizon window.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSample {
    /// Name of the outcome series the differences were built from.
    pub outcome_name: String,
    horizons: RangeInclusive<i32>,
    control_names: Vec<String>,
    observations: Vec<Observation>,
    clusters: Vec<String>,
    exclusions: Vec<SampleExclusion>,
    instrument_kind: InstrumentKind,
    cluster_key: &'static str,
}

impl EstimationSample {
    /// The contiguous horizon window.
    pub fn horizons(&self) -> RangeInclusive<i32> {
        self.horizons.clone()
    }

    /// Which instrument variant the sample was joined against.
    pub fn instrument_kind(&self) -> InstrumentKind {
        self.instrument_kind
    }

    /// Descriptor of the clustering scheme ("region" or "custom-map").
    pub fn cluster_key(&self) -> &'static str {
        self.cluster_key
    }

    /// Control component names in design order.
    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    /// All retained observations, sorted by `(region, base_period)`.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Sorted cluster labels; `Observation::cluster` indexes this table.
    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    /// Dropped observations with reasons.
    pub fn exclusions(&self) -> &[SampleExclusion] {
        &self.exclusions
    }

    /// Offset of a horizon within the window.
    pub fn horizon_offset(&self, horizon: i32) -> Option<usize> {
        if self.horizons.contains(&horizon) {
            Some((horizon - self.horizons.start()) as usize)
        } else {
            None
        }
    }

    /// Observations with an observed outcome at `horizon`.
    pub fn complete_cases(&self, horizon: i32) -> Vec<&Observation> {
        let Some(offset) = self.horizon_offset(horizon) else {
            return Vec::new();
        };
        self.observations
            .iter()
            .filter(|o| o.outcome_at(offset).is_some())
            .collect()
    }

    /// Per-horizon complete-case counts, aligned with the horizon window.
    pub fn per_horizon_counts(&self) -> Vec<(i32, usize)> {
        self.horizons
            .clone()
            .map(|h| (h, self.complete_cases(h).len()))
            .collect()
    }
}

/// Builds the local-projection sample.
///
/// For each instrument entry `(region, t)` with `t` in `base_periods`:
/// endogenous growth must be computable under `policy`, the outcome must
/// exist at `t - 1` (the difference base), and controls must be eligible;
/// otherwise the observation is excluded with a reason. Errors if any
/// horizon in the window ends up with no observations at all.
#[allow(clippy::too_many_arguments)]
pub fn build_sample(
    exports: &ExportsSeries,
    instrument: &InstrumentSeries,
    outcome: &OutcomeSeries,
    controls: &ControlsSet,
    base_periods: RangeInclusive<Year>,
    horizons: RangeInclusive<i32>,
    cluster: &ClusterKey,
    policy: GrowthPolicy,
) -> Result<EstimationSample> {
    if horizons.is_empty() {
        return Err(Error::Config("empty horizon window".to_string()));
    }
    let n_horizons = (*horizons.end() - *horizons.start() + 1) as usize;

    let mut cluster_labels: Vec<String> = Vec::new();
    let mut observations = Vec::new();
    let mut exclusions = Vec::new();

    for ((region, t), &instrument_value) in instrument.iter() {
        if !base_periods.contains(t) {
            continue;
        }
        let t = *t;
        let exclude = |reason: String, list: &mut Vec<SampleExclusion>| {
            list.push(SampleExclusion {
                region: region.clone(),
                base_period: t,
                reason,
            });
        };

        let endogenous = match exports.log_growth(region, t, policy) {
            Ok(g) => g,
            Err(e) => {
                exclude(format!("endogenous growth: {}", e.reason), &mut exclusions);
                continue;
            }
        };
        let Some(base_outcome) = outcome.get(region, t - 1) else {
            exclude(format!("no outcome at difference base {}", t - 1), &mut exclusions);
            continue;
        };
        let Some(ctrl) = controls.get(region, t) else {
            exclude("controls ineligible".to_string(), &mut exclusions);
            continue;
        };

        let outcomes: Vec<Option<f64>> = horizons
            .clone()
            .map(|h| outcome.get(region, t + h).map(|v| v - base_outcome))
            .collect();
        if outcomes.iter().all(|o| o.is_none()) {
            exclude("no outcome at any horizon".to_string(), &mut exclusions);
            continue;
        }
        debug_assert_eq!(outcomes.len(), n_horizons);

        let label = cluster.label(region)?.to_string();
        let cluster_idx = match cluster_labels.binary_search(&label) {
            Ok(i) => i,
            Err(i) => {
                cluster_labels.insert(i, label);
                // Reindex existing observations that pointed past the
                // insertion point.
                for obs in &mut observations {
                    let o: &mut Observation = obs;
                    if o.cluster >= i {
                        o.cluster += 1;
                    }
                }
                i
            }
        };

        observations.push(Observation {
            region: region.clone(),
            base_period: t,
            endogenous,
            instrument: instrument_value,
            controls: ctrl.as_vec(),
            cluster: cluster_idx,
            outcomes,
        });
    }

    let sample = EstimationSample {
        outcome_name: outcome.name.clone(),
        horizons: horizons.clone(),
        control_names: CONTROL_NAMES.iter().map(|s| s.to_string()).collect(),
        observations,
        clusters: cluster_labels,
        exclusions,
        instrument_kind: instrument.kind,
        cluster_key: cluster.describe(),
    };

    for h in horizons {
        if sample.complete_cases(h).is_empty() {
            return Err(Error::EmptyHorizon { horizon: h });
        }
    }
    Ok(sample)
}

/// One observation of a long-difference cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct LongObservation {
    pub region: String,
    /// Outcome change over the window, `o(t1) - o(t0)`.
    pub outcome: f64,
    /// Export growth over the window under the growth policy.
    pub endogenous: f64,
    pub instrument: f64,
    pub controls: Vec<f64>,
    pub cluster: usize,
}

/// A long-difference sample over one `(t0, t1)` window.
#[derive(Debug, Clone, PartialEq)]
pub struct LongSample {
    pub outcome_name: String,
    pub window: (Year, Year),
    control_names: Vec<String>,
    observations: Vec<LongObservation>,
    clusters: Vec<String>,
    exclusions: Vec<SampleExclusion>,
}

impl LongSample {
    /// Retained observations sorted by region.
    pub fn observations(&self) -> &[LongObservation] {
        &self.observations
    }

    /// Sorted cluster labels.
    pub fn clusters(&self) -> &[String] {
        &self.clusters
    }

    /// Control component names in design order.
    pub fn control_names(&self) -> &[String] {
        &self.control_names
    }

    /// Dropped regions with reasons.
    pub fn exclusions(&self) -> &[SampleExclusion] {
        &self.exclusions
    }
}

/// Builds a long-difference cross-section over `window = (t0, t1)`.
///
/// The instrument series must be keyed at `t0` (the long-difference kind).
/// Controls are taken at `control_base`, conventionally `t0 + 1` so that
/// every control is predetermined with respect to the shocked periods.
pub fn build_long_sample(
    exports: &ExportsSeries,
    instrument: &InstrumentSeries,
    outcome: &OutcomeSeries,
    controls: &ControlsSet,
    window: (Year, Year),
    control_base: Year,
    cluster: &ClusterKey,
    policy: GrowthPolicy,
) -> Result<LongSample> {
    let (t0, t1) = window;
    if t1 <= t0 {
        return Err(Error::Config(format!(
            "long window must run forward, got ({t0}, {t1})"
        )));
    }

    let mut cluster_labels: Vec<String> = Vec::new();
    let mut observations: Vec<LongObservation> = Vec::new();
    let mut exclusions = Vec::new();

    for ((region, base), &instrument_value) in instrument.iter() {
        if *base != t0 {
            continue;
        }
        let exclude = |reason: String, list: &mut Vec<SampleExclusion>| {
            list.push(SampleExclusion {
                region: region.clone(),
                base_period: t0,
                reason,
            });
        };

        let (o0, o1) = match (outcome.get(region, t0), outcome.get(region, t1)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                exclude("outcome missing at a window endpoint".to_string(), &mut exclusions);
                continue;
            }
        };
        let (x0, x1) = match (exports.get(region, t0), exports.get(region, t1)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                exclude("exports missing at a window endpoint".to_string(), &mut exclusions);
                continue;
            }
        };
        let endogenous = match policy {
            GrowthPolicy::LogDropNonpositive => {
                if x0 <= 0.0 || x1 <= 0.0 {
                    exclude("non-positive exports under log policy".to_string(), &mut exclusions);
                    continue;
                }
                x1.ln() - x0.ln()
            }
            GrowthPolicy::Asinh => x1.asinh() - x0.asinh(),
        };
        let Some(ctrl) = controls.get(region, control_base) else {
            exclude("controls ineligible".to_string(), &mut exclusions);
            continue;
        };

        let label = cluster.label(region)?.to_string();
        let cluster_idx = match cluster_labels.binary_search(&label) {
            Ok(i) => i,
            Err(i) => {
                cluster_labels.insert(i, label);
                for obs in &mut observations {
                    if obs.cluster >= i {
                        obs.cluster += 1;
                    }
                }
                i
            }
        };

        observations.push(LongObservation {
            region: region.clone(),
            outcome: o1 - o0,
            endogenous,
            instrument: instrument_value,
            controls: ctrl.as_vec(),
            cluster: cluster_idx,
        });
    }

    if observations.is_empty() {
        return Err(Error::Estimation(format!(
            "long-difference window ({t0}, {t1}) has no usable observations"
        )));
    }

    Ok(LongSample {
        outcome_name: outcome.name.clone(),
        window,
        control_names: CONTROL_NAMES.iter().map(|s| s.to_string()).collect(),
        observations,
        clusters: cluster_labels,
        exclusions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{build_instrument_series, InstrumentKind, ShifterData};
    use crate::panel::controls::build_controls;
    use crate::panel::types::{RegionPanel, WorldExportsSeries};
    use std::collections::BTreeSet;

    /// Two regions, one industry, years 1995..=2008, everything observable.
    fn fixture() -> (RegionPanel, ExportsSeries, WorldExportsSeries) {
        let mut panel_rows = Vec::new();
        let mut export_rows = Vec::new();
        let mut world_rows = Vec::new();
        for (i, region) in ["r1", "r2"].iter().enumerate() {
            for year in 1995..=2008 {
                let emp = 100 + (year - 1995) as u64 * (i as u64 + 1);
                panel_rows.push((region.to_string(), "k1".to_string(), year, emp, emp as f64 * 12.0));
                export_rows.push((region.to_string(), year, 50.0 + (year - 1995) as f64 * (1.0 + i as f64)));
            }
        }
        for year in 1995..=2008 {
            world_rows.push(("k1".to_string(), year, 1000.0 * 1.02f64.powi(year - 1995)));
        }
        (
            RegionPanel::from_rows("memory", panel_rows).unwrap(),
            ExportsSeries::from_rows("memory", export_rows).unwrap(),
            WorldExportsSeries::from_rows("memory", world_rows).unwrap(),
        )
    }

    fn sample_for(horizons: RangeInclusive<i32>) -> Result<EstimationSample> {
        let (panel, exports, world) = fixture();
        let outcome = panel.log_employment_series("employment", None);
        let instrument = build_instrument_series(
            &panel,
            ShifterData::World(&world),
            InstrumentKind::Baseline,
            &BTreeSet::new(),
            2000..=2006,
        )?;
        let controls = build_controls(&panel, &outcome, 2000, &BTreeSet::new(), 2000..=2006)?;
        build_sample(
            &exports,
            &instrument,
            &outcome,
            &controls,
            2000..=2006,
            horizons,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
    }

    #[test]
    fn counts_match_hand_enumeration() {
        // Panel ends 2008. Base periods 2000..=2006; horizon 0 needs the
        // outcome at t, available everywhere: 2 regions x 7 periods = 14.
        // Horizon 2 needs t+2 <= 2008, i.e. t <= 2006: still 14.
        // Horizon 3 would need 2009 for t=2006 - only 6 periods remain.
        let sample = sample_for(0..=3).unwrap();
        let counts: BTreeMap<i32, usize> = sample.per_horizon_counts().into_iter().collect();
        assert_eq!(counts[&0], 14);
        assert_eq!(counts[&2], 14);
        assert_eq!(counts[&3], 12);
    }

    #[test]
    fn attrition_is_monotone_over_positive_horizons() {
        let sample = sample_for(0..=8).unwrap();
        let counts = sample.per_horizon_counts();
        for pair in counts.windows(2) {
            assert!(pair[1].1 <= pair[0].1, "{counts:?}");
        }
    }

    #[test]
    fn horizon_minus_one_differences_are_exactly_zero() {
        let sample = sample_for(-2..=1).unwrap();
        let offset = sample.horizon_offset(-1).unwrap();
        for obs in sample.observations() {
            assert_eq!(obs.outcome_at(offset), Some(0.0));
        }
    }

    #[test]
    fn horizon_beyond_panel_end_is_an_empty_horizon_error() {
        let err = sample_for(0..=12).unwrap_err();
        assert!(matches!(err, Error::EmptyHorizon { horizon: 9 }), "{err:?}");
    }

    #[test]
    fn default_clustering_is_by_region() {
        let sample = sample_for(0..=1).unwrap();
        assert_eq!(sample.clusters(), ["r1", "r2"]);
    }

    #[test]
    fn cluster_map_missing_a_region_errors() {
        let (panel, exports, world) = fixture();
        let outcome = panel.log_employment_series("employment", None);
        let instrument = build_instrument_series(
            &panel,
            ShifterData::World(&world),
            InstrumentKind::Baseline,
            &BTreeSet::new(),
            2000..=2006,
        )
        .unwrap();
        let controls =
            build_controls(&panel, &outcome, 2000, &BTreeSet::new(), 2000..=2006).unwrap();
        let mut map = BTreeMap::new();
        map.insert("r1".to_string(), "state_a".to_string());
        let err = build_sample(
            &exports,
            &instrument,
            &outcome,
            &controls,
            2000..=2006,
            0..=1,
            &ClusterKey::Map(map),
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap_err();
        assert!(err.to_string().contains("r2"));
    }

    #[test]
    fn long_sample_runs_forward_only() {
        let (panel, exports, world) = fixture();
        let outcome = panel.log_employment_series("employment", None);
        let instrument = build_instrument_series(
            &panel,
            ShifterData::WorldLong {
                series: &world,
                from: 2000,
                to: 2006,
            },
            InstrumentKind::LongDifference,
            &BTreeSet::new(),
            2000..=2000,
        )
        .unwrap();
        let controls =
            build_controls(&panel, &outcome, 2000, &BTreeSet::new(), 2001..=2001).unwrap();
        let err = build_long_sample(
            &exports,
            &instrument,
            &outcome,
            &controls,
            (2006, 2000),
            2001,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));

        let sample = build_long_sample(
            &exports,
            &instrument,
            &outcome,
            &controls,
            (2000, 2006),
            2001,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        assert_eq!(sample.observations().len(), 2);
    }
}
