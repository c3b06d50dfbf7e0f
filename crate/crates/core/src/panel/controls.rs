//! Pre-determined control variables for the 2SLS regressions.
//!
//! Each `(region, base period)` gets a three-component vector: the
//! pre-period outcome trend, the log base-year wage, and the base-year
//! employment share of non-exporting industries. Regions that cannot supply
//! all components for a base period are ineligible and recorded.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::panel::types::{OutcomeSeries, RegionPanel, Year};

/// Lags (in periods before the base period) defining the pre-trend window:
/// `pre_trend = o(t - SHORT) - o(t - LONG)`.
pub const PRE_TREND_SHORT_LAG: i32 = 2;
/// See [`PRE_TREND_SHORT_LAG`].
pub const PRE_TREND_LONG_LAG: i32 = 5;

/// Canonical control component names, in design-matrix order.
pub const CONTROL_NAMES: [&str; 3] = ["pre_trend", "initial_wage", "nonexport_share"];

/// One region-base-period control vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    /// Outcome change over the pre-period window, `o(t-2) - o(t-5)`.
    pub pre_trend: f64,
    /// Log average wage in the base year (fixed per region).
    pub initial_wage: f64,
    /// Employment share of non-exporting industries in the base year.
    pub nonexport_share: f64,
}

impl Controls {
    /// Components in [`CONTROL_NAMES`] order.
    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.pre_trend, self.initial_wage, self.nonexport_share]
    }
}

/// A region-base-period that could not be given controls, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct IneligibleRecord {
    pub region: String,
    pub base_period: Year,
    pub reason: String,
}

/// Control vectors over a set of base periods, plus the ineligibility log.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlsSet {
    values: BTreeMap<(String, Year), Controls>,
    ineligible: Vec<IneligibleRecord>,
}

impl ControlsSet {
    /// Controls for `(region, base_period)`, if eligible.
    pub fn get(&self, region: &str, base_period: Year) -> Option<Controls> {
        self.values.get(&(region.to_string(), base_period)).copied()
    }

    /// All eligible entries in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, Year), &Controls)> {
        self.values.iter()
    }

    /// Region-base-periods that were ruled out, with reasons.
    pub fn ineligible(&self) -> &[IneligibleRecord] {
        &self.ineligible
    }

    /// Number of eligible entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when nothing is eligible.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds control vectors for every region over the requested base periods.
///
/// `outcome` supplies the pre-trend levels; `base_year` anchors the fixed
/// per-region components (log wage, non-export employment share);
/// `non_exporting` flags the industries counted in the non-export share.
pub fn build_controls(
    panel: &RegionPanel,
    outcome: &OutcomeSeries,
    base_year: Year,
    non_exporting: &BTreeSet<String>,
    base_periods: impl IntoIterator<Item = Year>,
) -> Result<ControlsSet> {
    let base_periods: Vec<Year> = base_periods.into_iter().collect();
    let wage_series = panel.log_wage_series("base wage", None);

    // Fixed per-region components, computed once.
    let mut fixed: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut fixed_failures: BTreeMap<String, String> = BTreeMap::new();
    for (r, region) in panel.regions().iter().enumerate() {
        let total = panel.region_total_employment(r, base_year);
        if total == 0 {
            fixed_failures.insert(
                region.clone(),
                format!("no employment in base year {base_year}"),
            );
            continue;
        }
        let Some(initial_wage) = wage_series.get(region, base_year) else {
            fixed_failures.insert(
                region.clone(),
                format!("no wage bill in base year {base_year}"),
            );
            continue;
        };
        let nonexport: u64 = panel
            .industries()
            .iter()
            .enumerate()
            .filter(|(_, id)| non_exporting.contains(*id))
            .filter_map(|(k, _)| panel.cell_at(r, k, base_year))
            .map(|c| c.employment)
            .sum();
        fixed.insert(
            region.clone(),
            (initial_wage, nonexport as f64 / total as f64),
        );
    }

    let mut values = BTreeMap::new();
    let mut ineligible = Vec::new();
    for region in panel.regions() {
        for &t in &base_periods {
            if let Some(reason) = fixed_failures.get(region) {
                ineligible.push(IneligibleRecord {
                    region: region.clone(),
                    base_period: t,
                    reason: reason.clone(),
                });
                continue;
            }
            let (initial_wage, nonexport_share) = fixed[region];
            let short = outcome.get(region, t - PRE_TREND_SHORT_LAG);
            let long = outcome.get(region, t - PRE_TREND_LONG_LAG);
            match (short, long) {
                (Some(s), Some(l)) => {
                    values.insert(
                        (region.clone(), t),
                        Controls {
                            pre_trend: s - l,
                            initial_wage,
                            nonexport_share,
                        },
                    );
                }
                _ => {
                    let missing = if short.is_none() {
                        t - PRE_TREND_SHORT_LAG
                    } else {
                        t - PRE_TREND_LONG_LAG
                    };
                    ineligible.push(IneligibleRecord {
                        region: region.clone(),
                        base_period: t,
                        reason: format!("outcome missing in pre-trend year {missing}"),
                    });
                }
            }
        }
    }

    Ok(ControlsSet { values, ineligible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// One region, employment 100 at 1995 growing to 120 by 1998, plus a
    /// non-exporting industry carrying a fifth of base-year employment.
    fn fixture() -> (RegionPanel, OutcomeSeries) {
        let mut rows = Vec::new();
        for (year, emp) in [(1995, 100u64), (1996, 105), (1997, 110), (1998, 120), (1999, 122), (2000, 125)] {
            rows.push(("r1".to_string(), "k1".to_string(), year, emp, emp as f64 * 10.0));
        }
        rows.push(("r1".to_string(), "n1".to_string(), 2000, 25, 200.0));
        let panel = RegionPanel::from_rows("memory", rows).unwrap();
        let outcome = panel.log_employment_series("employment", None);
        (panel, outcome)
    }

    #[test]
    fn pre_trend_matches_hand_value() {
        let (panel, outcome) = fixture();
        let set = build_controls(&panel, &outcome, 2000, &BTreeSet::new(), vec![2000]).unwrap();
        let c = set.get("r1", 2000).unwrap();
        // o(1998) - o(1995) = ln 120 - ln 100
        assert_relative_eq!(c.pre_trend, 0.18232, epsilon = 1e-5);
    }

    #[test]
    fn all_exporting_region_has_zero_nonexport_share() {
        let (panel, outcome) = fixture();
        let set = build_controls(&panel, &outcome, 2000, &BTreeSet::new(), vec![2000]).unwrap();
        assert_relative_eq!(set.get("r1", 2000).unwrap().nonexport_share, 0.0);
    }

    #[test]
    fn flagged_industry_enters_nonexport_share() {
        let (panel, outcome) = fixture();
        let flags: BTreeSet<String> = ["n1".to_string()].into();
        let set = build_controls(&panel, &outcome, 2000, &flags, vec![2000]).unwrap();
        // 25 of 150 base-year jobs are in the flagged industry.
        assert_relative_eq!(set.get("r1", 2000).unwrap().nonexport_share, 25.0 / 150.0);
    }

    #[test]
    fn missing_pre_trend_year_makes_region_ineligible_with_reason() {
        let (panel, outcome) = fixture();
        // Base period 2001 needs outcome in 1996..=1999 only, fine; 2003
        // needs 1998 and 2001 - the latter is past the panel end.
        let set = build_controls(&panel, &outcome, 2000, &BTreeSet::new(), vec![2003]).unwrap();
        assert!(set.get("r1", 2003).is_none());
        assert_eq!(set.ineligible().len(), 1);
        assert!(set.ineligible()[0].reason.contains("2001"));
    }
}
