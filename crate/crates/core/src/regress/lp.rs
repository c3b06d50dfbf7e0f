//! Local-projection impulse responses and long-difference elasticities.
//!
//! Each horizon `h` is its own just-identified 2SLS regression of the
//! cumulative outcome difference on instrumented export growth plus the
//! standard controls. Horizons are independent, so they are estimated in
//! parallel and reassembled in horizon order, which keeps output identical
//! run to run regardless of thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::instrument::InstrumentKind;
use crate::panel::{EstimationSample, LongSample, Observation, Year};

use super::{tsls, TslsResult};

/// One horizon of an impulse-response function.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonEstimate {
    pub horizon: i32,
    /// Elasticity of the cumulative outcome difference at this horizon.
    pub beta: f64,
    /// Cluster-robust standard error.
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Cluster-robust first-stage F (squared instrument t).
    pub first_stage_f: f64,
    /// Classical first-stage F.
    pub first_stage_f_classical: f64,
}

/// A full impulse-response function with estimation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfResult {
    /// Outcome series the differences came from.
    pub outcome: String,
    /// Which instrument variant identified the regressions.
    pub instrument_kind: InstrumentKind,
    /// Cluster-key descriptor ("region" or "custom-map").
    pub cluster_key: String,
    /// Control names included in every horizon's design.
    pub controls: Vec<String>,
    /// Estimates in ascending horizon order.
    pub estimates: Vec<HorizonEstimate>,
}

impl IrfResult {
    /// The estimate at `horizon`, if it is inside the window.
    pub fn get(&self, horizon: i32) -> Option<&HorizonEstimate> {
        self.estimates.iter().find(|e| e.horizon == horizon)
    }

    /// Renders `irf.csv` content:
    /// `horizon,beta,se,ci_lo,ci_hi,n_obs,first_stage_F`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("horizon,beta,se,ci_lo,ci_hi,n_obs,first_stage_F\n");
        for e in &self.estimates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.horizon, e.beta, e.se, e.ci_lo, e.ci_hi, e.n_obs, e.first_stage_f
            ));
        }
        out
    }
}

fn horizon_context(horizon: i32, err: Error) -> Error {
    match err {
        e @ Error::EmptyHorizon { .. } => e,
        e => Error::Estimation(format!("horizon {horizon}: {e}")),
    }
}

fn assemble(
    cases: &[&Observation],
    p: usize,
    outcome_offset: usize,
) -> (DVector<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>, Vec<usize>) {
    let n = cases.len();
    let y = DVector::from_fn(n, |i, _| {
        cases[i]
            .outcome_at(outcome_offset)
            .expect("complete cases carry this horizon")
    });
    let endog = DVector::from_fn(n, |i, _| cases[i].endogenous);
    let instr = DVector::from_fn(n, |i, _| cases[i].instrument);
    let controls = DMatrix::from_fn(n, p, |i, j| cases[i].controls[j]);
    let clusters = cases.iter().map(|o| o.cluster).collect();
    (y, endog, instr, controls, clusters)
}

fn estimate_horizon(sample: &EstimationSample, horizon: i32) -> Result<HorizonEstimate> {
    let offset = sample
        .horizon_offset(horizon)
        .ok_or(Error::EmptyHorizon { horizon })?;
    let cases = sample.complete_cases(horizon);
    if cases.is_empty() {
        return Err(Error::EmptyHorizon { horizon });
    }
    let p = sample.control_names().len();
    let (y, endog, instr, controls, clusters) = assemble(&cases, p, offset);
    let fit: TslsResult = tsls(
        &y,
        &endog,
        &instr,
        &controls,
        sample.control_names(),
        &clusters,
        true,
        0,
    )
    .map_err(|e| horizon_context(horizon, e))?;
    let (beta, se) = fit.endogenous();
    let (ci_lo, ci_hi) = fit.second_stage.ci95(fit.endog_index);
    Ok(HorizonEstimate {
        horizon,
        beta,
        se,
        ci_lo,
        ci_hi,
        n_obs: cases.len(),
        n_clusters: fit.second_stage.n_clusters,
        first_stage_f: fit.first_stage_f,
        first_stage_f_classical: fit.first_stage_f_classical,
    })
}

/// Estimates the impulse-response function over the sample's horizon
/// window, one complete-case 2SLS regression per horizon.
///
/// Horizons run in parallel on the global rayon pool; results are ordered
/// by horizon, so output does not depend on scheduling.
pub fn local_projection_irf(sample: &EstimationSample) -> Result<IrfResult> {
    let horizons: Vec<i32> = sample.horizons().collect();
    let estimates = horizons
        .into_par_iter()
        .map(|h| estimate_horizon(sample, h))
        .collect::<Result<Vec<_>>>()?;
    Ok(IrfResult {
        outcome: sample.outcome_name.clone(),
        instrument_kind: sample.instrument_kind(),
        cluster_key: sample.cluster_key().to_string(),
        controls: sample.control_names().to_vec(),
        estimates,
    })
}

/// Region -> group map for absorbed fixed effects.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEffects {
    groups: BTreeMap<String, String>,
}

impl FixedEffects {
    pub fn new(groups: BTreeMap<String, String>) -> Self {
        FixedEffects { groups }
    }

    /// Group label for a region, if mapped.
    pub fn group_of(&self, region: &str) -> Option<&str> {
        self.groups.get(region).map(|s| s.as_str())
    }
}

/// One row of the long-run elasticity table.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRunRow {
    pub outcome: String,
    /// Sample-slice label ("all", or a classification subgroup).
    pub slice: String,
    pub window: (Year, Year),
    pub fe_absorbed: bool,
    pub beta: f64,
    /// Cluster-robust standard error.
    pub se: f64,
    /// Cluster-robust first-stage F.
    pub first_stage_f: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// Fixed-effect groups dropped for having a single observation.
    pub singleton_groups_dropped: usize,
}

/// Long-run elasticity rows rendered as `longrun.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LongRunTable {
    pub rows: Vec<LongRunRow>,
}

impl LongRunTable {
    /// Renders `longrun.csv` content:
    /// `outcome,slice,fe_flag,beta,se,f_stat,n`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("outcome,slice,fe_flag,beta,se,f_stat,n\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.outcome, r.slice, r.fe_absorbed, r.beta, r.se, r.first_stage_f, r.n_obs
            ));
        }
        out
    }
}

/// Estimates one long-difference elasticity.
///
/// Without fixed effects this is a single cross-sectional 2SLS with
/// intercept. With `fe`, all variables are demeaned within groups first
/// (equivalent to including group dummies), the absorbed group count is
/// charged to the degrees of freedom, and groups containing a single
/// observation are dropped and counted in the result.
pub fn long_difference(
    sample: &LongSample,
    fe: Option<&FixedEffects>,
    slice: &str,
) -> Result<LongRunRow> {
    let obs = sample.observations();
    let p = sample.control_names().len();

    let (y, endog, instr, controls, clusters, dof_absorbed, intercept, kept, dropped_groups) =
        match fe {
            None => {
                let n = obs.len();
                let y = DVector::from_fn(n, |i, _| obs[i].outcome);
                let endog = DVector::from_fn(n, |i, _| obs[i].endogenous);
                let instr = DVector::from_fn(n, |i, _| obs[i].instrument);
                let controls = DMatrix::from_fn(n, p, |i, j| obs[i].controls[j]);
                let clusters: Vec<usize> = obs.iter().map(|o| o.cluster).collect();
                (y, endog, instr, controls, clusters, 0, true, n, 0)
            }
            Some(fe) => {
                // Partition observations by group.
                let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (i, o) in obs.iter().enumerate() {
                    let group = fe.group_of(&o.region).ok_or_else(|| {
                        Error::Invariant(format!(
                            "region {} missing from the fixed-effects map",
                            o.region
                        ))
                    })?;
                    members.entry(group).or_default().push(i);
                }
                let dropped_groups = members.values().filter(|v| v.len() == 1).count();
                members.retain(|_, v| v.len() > 1);
                if members.is_empty() {
                    return Err(Error::Estimation(
                        "every fixed-effect group is a singleton; nothing to estimate"
                            .to_string(),
                    ));
                }
                let n_groups = members.len();
                let idx: Vec<usize> = members.values().flatten().copied().collect();
                let n = idx.len();

                // Raw columns, then demean within each group.
                let mut y = DVector::from_fn(n, |i, _| obs[idx[i]].outcome);
                let mut endog = DVector::from_fn(n, |i, _| obs[idx[i]].endogenous);
                let mut instr = DVector::from_fn(n, |i, _| obs[idx[i]].instrument);
                let mut controls = DMatrix::from_fn(n, p, |i, j| obs[idx[i]].controls[j]);
                let mut pos = 0usize;
                for group in members.values() {
                    let m = group.len();
                    let range = pos..pos + m;
                    for col in [&mut y, &mut endog, &mut instr] {
                        let mean: f64 =
                            range.clone().map(|i| col[i]).sum::<f64>() / m as f64;
                        for i in range.clone() {
                            col[i] -= mean;
                        }
                    }
                    for j in 0..p {
                        let mean: f64 =
                            range.clone().map(|i| controls[(i, j)]).sum::<f64>() / m as f64;
                        for i in range.clone() {
                            controls[(i, j)] -= mean;
                        }
                    }
                    pos += m;
                }
                let clusters: Vec<usize> = idx.iter().map(|&i| obs[i].cluster).collect();
                (y, endog, instr, controls, clusters, n_groups, false, n, dropped_groups)
            }
        };

    let fit = tsls(
        &y,
        &endog,
        &instr,
        &controls,
        sample.control_names(),
        &clusters,
        intercept,
        dof_absorbed,
    )?;
    let (beta, se) = fit.endogenous();
    Ok(LongRunRow {
        outcome: sample.outcome_name.clone(),
        slice: slice.to_string(),
        window: sample.window,
        fe_absorbed: fe.is_some(),
        beta,
        se,
        first_stage_f: fit.first_stage_f,
        n_obs: kept,
        n_clusters: fit.second_stage.n_clusters,
        singleton_groups_dropped: dropped_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{InstrumentMeta, InstrumentSeries, ShareVintage};
    use crate::panel::{
        build_controls, build_long_sample, build_sample, ClusterKey, ControlsSet, ExportsSeries,
        GrowthPolicy, OutcomeSeries, RegionPanel,
    };
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    const REGIONS: usize = 11;

    fn region_name(r: usize) -> String {
        format!("r{:02}", r + 1)
    }

    fn export_level(r: usize, t: i32) -> f64 {
        40.0 + (t - 1995) as f64 * (1.0 + 0.5 * r as f64) + ((3 * t + 5 * r as i32) % 7) as f64
    }

    fn outcome_level(r: usize, t: i32) -> f64 {
        0.05 * r as f64
            + 0.004 * ((t - 1995) as f64).powi(2)
            + 0.03 * ((t * 7 + r as i32 * 13) % 5) as f64
    }

    /// Panel with one exporting and one flagged non-traded industry, built
    /// so the three controls are never collinear.
    fn fixture() -> (RegionPanel, ExportsSeries, OutcomeSeries) {
        let mut panel_rows = Vec::new();
        let mut export_rows = Vec::new();
        for r in 0..REGIONS {
            for t in 1995..=2008 {
                let emp_k = 100 + 3 * (t - 1995) as u64 * (r as u64 + 1) + ((t + 2 * r as i32) % 4) as u64;
                let emp_n = 50 + 2 * (t - 1995) as u64 + 10 * r as u64;
                let rate = 10.0 + r as f64 + 0.1 * (t - 1995) as f64;
                panel_rows.push((region_name(r), "k1".to_string(), t, emp_k, emp_k as f64 * rate));
                panel_rows.push((region_name(r), "n1".to_string(), t, emp_n, emp_n as f64 * rate));
                export_rows.push((region_name(r), t, export_level(r, t)));
            }
        }
        let panel = RegionPanel::from_rows("memory", panel_rows).unwrap();
        let exports = ExportsSeries::from_rows("memory", export_rows).unwrap();
        let mut outcome = OutcomeSeries::new("employment");
        for r in 0..REGIONS {
            for t in 1995..=2008 {
                outcome.insert(region_name(r), t, outcome_level(r, t));
            }
        }
        (panel, exports, outcome)
    }

    fn controls_for(panel: &RegionPanel, outcome: &OutcomeSeries) -> ControlsSet {
        let flagged: BTreeSet<String> = ["n1".to_string()].into_iter().collect();
        build_controls(panel, outcome, 2000, &flagged, 2000..=2006).unwrap()
    }

    fn series_from(entries: Vec<(String, i32, f64)>) -> InstrumentSeries {
        InstrumentSeries::from_entries(
            InstrumentKind::Baseline,
            InstrumentMeta {
                share_vintage: ShareVintage::Lagged,
                shifter_source: "test fixture".to_string(),
            },
            entries,
        )
        .unwrap()
    }

    fn lp_instrument() -> InstrumentSeries {
        let mut entries = Vec::new();
        for r in 0..REGIONS {
            for t in 2001..=2005 {
                let growth = export_level(r, t).ln() - export_level(r, t - 1).ln();
                let wiggle = 0.05 * (((t + r as i32) % 3) as f64 - 1.0);
                entries.push((region_name(r), t, 0.5 * growth + wiggle));
            }
        }
        series_from(entries)
    }

    #[test]
    fn irf_covers_window_and_zeroes_the_pre_difference_horizon() {
        let (panel, exports, outcome) = fixture();
        let controls = controls_for(&panel, &outcome);
        let sample = build_sample(
            &exports,
            &lp_instrument(),
            &outcome,
            &controls,
            2001..=2005,
            -1..=2,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        let irf = local_projection_irf(&sample).unwrap();

        let horizons: Vec<i32> = irf.estimates.iter().map(|e| e.horizon).collect();
        assert_eq!(horizons, vec![-1, 0, 1, 2]);
        assert_eq!(irf.outcome, "employment");
        assert_eq!(irf.cluster_key, "region");

        // Horizon -1 differences the outcome against itself: identically
        // zero, with a zero interval and an untouched first stage.
        let pre = irf.get(-1).unwrap();
        assert_eq!(pre.beta, 0.0);
        assert_eq!(pre.se, 0.0);
        assert_eq!((pre.ci_lo, pre.ci_hi), (0.0, 0.0));
        assert_eq!(pre.n_obs, REGIONS * 5);
        assert_eq!(pre.n_clusters, REGIONS);
        assert!(pre.first_stage_f.is_finite() && pre.first_stage_f > 0.0);

        for e in &irf.estimates {
            assert!(e.ci_lo <= e.beta && e.beta <= e.ci_hi);
            assert!(e.first_stage_f >= 0.0);
        }
    }

    #[test]
    fn irf_csv_matches_contracted_header() {
        let (panel, exports, outcome) = fixture();
        let controls = controls_for(&panel, &outcome);
        let sample = build_sample(
            &exports,
            &lp_instrument(),
            &outcome,
            &controls,
            2001..=2005,
            -1..=2,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        let csv = local_projection_irf(&sample).unwrap().to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "horizon,beta,se,ci_lo,ci_hi,n_obs,first_stage_F"
        );
        assert_eq!(csv.lines().count(), 5);
        let pre = csv.lines().nth(1).unwrap();
        assert!(pre.starts_with("-1,0,0,0,0,55,"), "{pre}");
    }

    #[test]
    fn constant_instrument_fails_with_horizon_context() {
        let (panel, exports, outcome) = fixture();
        let controls = controls_for(&panel, &outcome);
        let constant = series_from(
            (0..REGIONS)
                .flat_map(|r| (2001..=2005).map(move |t| (region_name(r), t, 1.0)))
                .collect(),
        );
        let sample = build_sample(
            &exports,
            &constant,
            &outcome,
            &controls,
            2001..=2005,
            0..=1,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        let err = local_projection_irf(&sample).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("horizon"), "{msg}");
    }

    /// A one-step long difference is the same regression as the horizon-0
    /// local projection when windows, controls, and clusters line up.
    #[test]
    fn adjacent_long_difference_equals_horizon_zero_projection() {
        let (panel, exports, outcome) = fixture();
        let controls = controls_for(&panel, &outcome);

        let lp_entries: Vec<(String, i32, f64)> = (0..REGIONS)
            .map(|r| (region_name(r), 2001, 0.7 * r as f64 / 10.0 + 0.02 * ((r % 3) as f64)))
            .collect();
        let long_entries: Vec<(String, i32, f64)> = lp_entries
            .iter()
            .map(|(region, _, v)| (region.clone(), 2000, *v))
            .collect();

        let lp_sample = build_sample(
            &exports,
            &series_from(lp_entries),
            &outcome,
            &controls,
            2001..=2001,
            0..=0,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        let irf = local_projection_irf(&lp_sample).unwrap();
        let h0 = irf.get(0).unwrap();

        let long_sample = build_long_sample(
            &exports,
            &series_from(long_entries),
            &outcome,
            &controls,
            (2000, 2001),
            2001,
            &ClusterKey::Region,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        let row = long_difference(&long_sample, None, "all").unwrap();

        assert_relative_eq!(row.beta, h0.beta, epsilon = 1e-10);
        assert_relative_eq!(row.se, h0.se, epsilon = 1e-10);
        assert_relative_eq!(row.first_stage_f, h0.first_stage_f, epsilon = 1e-8);
        assert_eq!(row.n_obs, h0.n_obs);
    }

    fn long_fixture_sample(
        regions: std::ops::Range<usize>,
        cluster: &ClusterKey,
    ) -> (LongSample, Vec<f64>) {
        let (panel, exports, outcome) = fixture();
        let controls = controls_for(&panel, &outcome);
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for r in regions {
            let growth = export_level(r, 2003).ln() - export_level(r, 2000).ln();
            let v = 0.4 * growth + 0.06 * ((r % 4) as f64 - 1.5);
            entries.push((region_name(r), 2000, v));
            values.push(v);
        }
        let sample = build_long_sample(
            &exports,
            &series_from(entries),
            &outcome,
            &controls,
            (2000, 2003),
            2001,
            cluster,
            GrowthPolicy::LogDropNonpositive,
        )
        .unwrap();
        (sample, values)
    }

    fn group_map(upto: usize) -> BTreeMap<String, String> {
        (0..upto)
            .map(|r| {
                let g = if r < 5 { "g1" } else if r < 10 { "g2" } else { "g3" };
                (region_name(r), g.to_string())
            })
            .collect()
    }

    /// Within-group demeaning must reproduce dummy-variable 2SLS exactly:
    /// same slope, same clustered standard error, same first-stage F.
    #[test]
    fn fixed_effects_match_dummy_variable_oracle() {
        let cluster = ClusterKey::Map(group_map(10));
        let (sample, _) = long_fixture_sample(0..10, &cluster);
        let fe = FixedEffects::new(group_map(10));
        let row = long_difference(&sample, Some(&fe), "all").unwrap();

        // Dummy-variable oracle: no intercept, one dummy per group, run
        // through the same 2SLS routine.
        let obs = sample.observations();
        let n = obs.len();
        let p = sample.control_names().len();
        let y = DVector::from_fn(n, |i, _| obs[i].outcome);
        let endog = DVector::from_fn(n, |i, _| obs[i].endogenous);
        let instr = DVector::from_fn(n, |i, _| obs[i].instrument);
        let fe_map = group_map(10);
        let mut controls = DMatrix::zeros(n, 2 + p);
        for i in 0..n {
            let g = fe_map[&obs[i].region].as_str();
            controls[(i, if g == "g1" { 0 } else { 1 })] = 1.0;
            for j in 0..p {
                controls[(i, 2 + j)] = obs[i].controls[j];
            }
        }
        let mut names = vec!["g1".to_string(), "g2".to_string()];
        names.extend(sample.control_names().iter().cloned());
        let clusters: Vec<usize> = obs.iter().map(|o| o.cluster).collect();
        let oracle = tsls(&y, &endog, &instr, &controls, &names, &clusters, false, 0).unwrap();
        let (ob, ose) = oracle.endogenous();

        assert_relative_eq!(row.beta, ob, epsilon = 1e-8);
        assert_relative_eq!(row.se, ose, epsilon = 1e-8);
        assert_relative_eq!(row.first_stage_f, oracle.first_stage_f, max_relative = 1e-8);
        assert!(row.fe_absorbed);
        assert_eq!(row.singleton_groups_dropped, 0);
        assert_eq!(row.n_obs, 10);
        assert_eq!(row.n_clusters, 2);
    }

    /// A group with one member carries no within-group variation; it is
    /// dropped, counted, and the rest of the fit is unchanged.
    #[test]
    fn singleton_group_is_dropped_and_counted() {
        let cluster = ClusterKey::Map(group_map(11));
        let (with_singleton, _) = long_fixture_sample(0..11, &cluster);
        let fe = FixedEffects::new(group_map(11));
        let row = long_difference(&with_singleton, Some(&fe), "all").unwrap();
        assert_eq!(row.singleton_groups_dropped, 1);
        assert_eq!(row.n_obs, 10);

        let cluster10 = ClusterKey::Map(group_map(10));
        let (without, _) = long_fixture_sample(0..10, &cluster10);
        let fe10 = FixedEffects::new(group_map(10));
        let baseline = long_difference(&without, Some(&fe10), "all").unwrap();
        assert_relative_eq!(row.beta, baseline.beta, epsilon = 1e-12);
        assert_relative_eq!(row.se, baseline.se, epsilon = 1e-12);
    }

    #[test]
    fn unmapped_region_is_an_invariant_error() {
        let (sample, _) = long_fixture_sample(0..10, &ClusterKey::Region);
        let fe = FixedEffects::new(group_map(3));
        let err = long_difference(&sample, Some(&fe), "all").unwrap_err();
        assert!(err.to_string().contains("fixed-effects map"), "{err}");
    }

    #[test]
    fn longrun_csv_matches_table_schema() {
        let (sample, _) = long_fixture_sample(0..10, &ClusterKey::Region);
        let row = long_difference(&sample, None, "all").unwrap();
        let table = LongRunTable { rows: vec![row] };
        let csv = table.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "outcome,slice,fe_flag,beta,se,f_stat,n");
        let row_line = lines.next().unwrap();
        assert!(row_line.starts_with("employment,all,false,"), "{row_line}");
        assert!(row_line.ends_with(",10"), "{row_line}");
    }
}
