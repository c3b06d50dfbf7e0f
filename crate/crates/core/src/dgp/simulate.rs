//! Synthetic panel generator with known ground truth.
//!
//! The generator is semi-structural: trade flows come from the gravity
//! block (demand shocks move destination expenditure, supply shocks move
//! regional productivity), while employment applies an imposed true
//! elasticity path to realized export growth. That keeps every emitted
//! dataset consistent with a known answer:
//!
//! * formal employment growth of region `r`, industry `k` at period `t` is
//!   `sum_j delta_j(path(k)) * dlnX(r, t-j) + strength * u(r, t) + noise`,
//!   where `delta_j` are the increments of the cumulative elasticity path
//!   and `u` is a region-level confounder that also loads on productivity;
//! * wages follow their own (smaller) path; informal employment responds
//!   with `psi` times the base-path response;
//! * the world-export series is the outside block's sales, so home supply
//!   conditions barely touch it and the shift-share instrument is valid by
//!   construction;
//! * the same seed always reproduces the same files, byte for byte.
//!
//! All random draws happen in one fixed order (structure first, then per
//! period: demand, supply, confounder, optional costs, employment noise,
//! wage noise, informal noise), so output is reproducible by construction.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dgp::gravity::{power_matrices, solve_with_power, GravityWorld};
use crate::dgp::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::instrument::{build_instrument_series, InstrumentKind, ShifterData};
use crate::panel::{
    ColumnMaps, DestinationData, ExportsSeries, GrowthPolicy, RegionPanel, SchemaConfig,
    WorldExportsSeries, Year,
};

/// Realized relevance of the baseline instrument on the emitted panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRelevance {
    /// Correlation between the instrument and endogenous export growth.
    pub correlation: f64,
    /// Simple first-stage slope (covariance over instrument variance).
    pub first_stage_slope: f64,
    pub n_obs: usize,
}

/// Ground truth carried alongside every simulated panel. Estimators never
/// read this; only diagnostics and end-to-end checks do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub seed: u64,
    pub regions: usize,
    pub industries: usize,
    pub destinations: usize,
    pub periods: usize,
    pub start_year: Year,
    pub base_year: Year,
    /// Cumulative formal-employment elasticity path (horizons 0, 1, ...).
    pub employment_path: Vec<f64>,
    pub wage_path: Vec<f64>,
    /// Resolved path of risky-flagged industries.
    pub risky_path: Vec<f64>,
    /// Resolved path of sustainable-flagged industries.
    pub sustainable_path: Vec<f64>,
    pub informal_substitution: f64,
    /// `informal_substitution * employment_path`.
    pub informal_path: Vec<f64>,
    /// Last entry of the employment path.
    pub long_run_elasticity: f64,
    pub confounder_supply_scale: f64,
    pub confounder_strength: f64,
    /// Largest single-year ratio of home exports to the world-export series.
    pub home_share_of_world_exports: f64,
    pub instrument_relevance: InstrumentRelevance,
}

/// Cumulative path value at a horizon: zero before impact, flat beyond the
/// last configured entry.
pub fn path_value(path: &[f64], horizon: i32) -> f64 {
    if horizon < 0 || path.is_empty() {
        return 0.0;
    }
    path[(horizon as usize).min(path.len() - 1)]
}

/// Everything one simulation run produces: loaded-object views for
/// in-process estimation plus raw rows for CSV emission.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub scenario: ScenarioConfig,
    pub panel: RegionPanel,
    pub exports: ExportsSeries,
    pub world_exports: WorldExportsSeries,
    pub destination: DestinationData,
    /// Informal employment per (region, year); present when the scenario
    /// sets a non-zero informal substitution.
    pub informal: Option<Vec<(String, Year, u64)>>,
    /// `(industry, risky, sustainable)` flags; present when the scenario
    /// configures a taxonomy or asks for emission explicitly.
    pub classification: Option<Vec<(String, bool, bool)>>,
    pub schema: SchemaConfig,
    pub truth: SyntheticTruth,
    panel_rows: Vec<(String, String, Year, u64, f64)>,
    export_rows: Vec<(String, Year, f64)>,
    world_rows: Vec<(String, Year, f64)>,
    gdp_rows: Vec<(String, Year, f64)>,
    share_rows: Vec<(String, String, String, Year, f64)>,
}

impl SimulatedData {
    /// `panel.csv` content.
    pub fn panel_csv(&self) -> String {
        let mut out = String::from("region_id,industry_id,year,employment,wage_bill\n");
        for (r, k, y, emp, bill) in &self.panel_rows {
            out.push_str(&format!("{r},{k},{y},{emp},{bill}\n"));
        }
        out
    }

    /// `exports.csv` content.
    pub fn exports_csv(&self) -> String {
        let mut out = String::from("region_id,year,fob_value\n");
        for (r, y, v) in &self.export_rows {
            out.push_str(&format!("{r},{y},{v}\n"));
        }
        out
    }

    /// `world_exports.csv` content.
    pub fn world_exports_csv(&self) -> String {
        let mut out = String::from("industry_id,year,value\n");
        for (k, y, v) in &self.world_rows {
            out.push_str(&format!("{k},{y},{v}\n"));
        }
        out
    }

    /// `dest_gdp.csv` content.
    pub fn dest_gdp_csv(&self) -> String {
        let mut out = String::from("destination_id,year,gdp_usd\n");
        for (d, y, v) in &self.gdp_rows {
            out.push_str(&format!("{d},{y},{v}\n"));
        }
        out
    }

    /// `dest_shares.csv` content (single base-year vintage).
    pub fn dest_shares_csv(&self) -> String {
        let mut out = String::from("region_id,industry_id,destination_id,base_year,share\n");
        for (r, k, d, y, v) in &self.share_rows {
            out.push_str(&format!("{r},{k},{d},{y},{v}\n"));
        }
        out
    }

    /// `informal_panel.csv` content, when informal employment is simulated.
    pub fn informal_csv(&self) -> Option<String> {
        self.informal.as_ref().map(|rows| {
            let mut out = String::from("region_id,year,employment\n");
            for (r, y, emp) in rows {
                out.push_str(&format!("{r},{y},{emp}\n"));
            }
            out
        })
    }

    /// `classification.csv` content, when a taxonomy is configured.
    pub fn classification_csv(&self) -> Option<String> {
        self.classification.as_ref().map(|rows| {
            let mut out = String::from("activity_code,risky,contribution_level\n");
            for (code, risky, sustainable) in rows {
                let level = if *sustainable { "high" } else { "none" };
                out.push_str(&format!("{code},{risky},{level}\n"));
            }
            out
        })
    }

    /// `schema.toml` content describing the emitted files.
    pub fn schema_toml(&self) -> String {
        self.schema.to_toml_string()
    }

    /// `truth.json` content.
    pub fn truth_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.truth).expect("truth serialization cannot fail");
        text.push('\n');
        text
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Path increments: `delta_0 = path_0`, `delta_j = path_j - path_{j-1}`.
fn path_deltas(path: &[f64]) -> Vec<f64> {
    let mut deltas = Vec::with_capacity(path.len());
    let mut prev = 0.0;
    for &v in path {
        deltas.push(v - prev);
        prev = v;
    }
    deltas
}

/// Lag-weighted response `sum_j delta_j * growth[r][t - j]`; growth is
/// defined from period 1 on, so deeper lags contribute nothing.
fn lagged_response(deltas: &[f64], growth: &DMatrix<f64>, r: usize, t: usize) -> f64 {
    let mut total = 0.0;
    for (j, &d) in deltas.iter().enumerate() {
        if j + 1 > t {
            break;
        }
        total += d * growth[(r, t - j)];
    }
    total
}

/// Generates one synthetic economy from a validated scenario.
pub fn simulate_panel(config: &ScenarioConfig) -> Result<SimulatedData> {
    config.validate()?;
    let rng = &mut ChaCha8Rng::seed_from_u64(config.seed);

    let regions = config.region_codes();
    let industries = config.industry_codes();
    let destinations = config.destination_codes();
    let r_count = regions.len();
    let k_traded = config.traded_industries();
    let k_all = industries.len();
    let d_count = destinations.len();
    let periods = config.world.periods;
    let start = config.world.start_year;
    let base_year = config.base_year();
    let w = &config.world;
    let shocks = &config.shocks;
    let structure = &config.structure;

    // --- structural draws (fixed order) -------------------------------
    let theta: Vec<f64> = (0..k_traded)
        .map(|_| uniform(rng, w.theta_min, w.theta_max))
        .collect();
    let mut ln_productivity: Vec<DVector<f64>> = (0..k_traded)
        .map(|_| {
            DVector::from_fn(r_count, |_, _| {
                (1.0 + uniform(rng, 0.0, w.productivity_spread)).ln()
            })
        })
        .collect();
    let unit_cost: Vec<DVector<f64>> = (0..k_traded)
        .map(|_| {
            let mut c = DVector::from_element(r_count + 1, 1.0);
            for ri in 0..r_count {
                c[ri] = 1.0 + uniform(rng, 0.0, w.unit_cost_spread);
            }
            c
        })
        .collect();
    let mut ln_unit_cost: Vec<DVector<f64>> =
        unit_cost.iter().map(|c| c.map(f64::ln)).collect();
    let trade_cost: Vec<DMatrix<f64>> = (0..k_traded)
        .map(|_| {
            let mut tau = DMatrix::from_element(r_count + 1, d_count, 1.0);
            for ri in 0..r_count {
                for di in 0..d_count {
                    tau[(ri, di)] = 1.0 + uniform(rng, 0.0, w.trade_cost_spread);
                }
            }
            tau
        })
        .collect();
    let mut ln_expenditure: Vec<DVector<f64>> = (0..k_traded)
        .map(|_| {
            DVector::from_fn(d_count, |_, _| {
                (w.base_expenditure * (1.0 + uniform(rng, 0.0, w.expenditure_spread))).ln()
            })
        })
        .collect();

    let mut suppliers = regions.clone();
    suppliers.push("world_outside".to_string());
    let mut world = GravityWorld {
        suppliers,
        home_count: r_count,
        industries: industries[..k_traded].to_vec(),
        destinations: destinations.clone(),
        theta,
        productivity: (0..k_traded)
            .map(|k| {
                let mut t = DVector::from_element(r_count + 1, 1.0);
                for ri in 0..r_count {
                    t[ri] = ln_productivity[k][ri].exp();
                }
                t
            })
            .collect(),
        unit_cost,
        trade_cost,
        expenditure: ln_expenditure.iter().map(|x| x.map(f64::exp)).collect(),
    };

    // Power kernels do not depend on productivity, so the outside block can
    // be sized from home competitiveness after drawing everything else:
    // T_out = scale * mean over destinations of (home mass / outside kernel).
    let mut power = power_matrices(&world)?;
    for k in 0..k_traded {
        let mut mean_home = 0.0;
        for di in 0..d_count {
            let mut home_mass = 0.0;
            for ri in 0..r_count {
                home_mass += world.productivity[k][ri] * power[k][(ri, di)];
            }
            mean_home += home_mass / power[k][(r_count, di)];
        }
        world.productivity[k][r_count] = w.outside_scale * mean_home / d_count as f64;
    }
    let outside_productivity: Vec<f64> = (0..k_traded)
        .map(|k| world.productivity[k][r_count])
        .collect();

    // --- initial levels (fixed order) ---------------------------------
    let nontraded_init: Vec<Vec<f64>> = (0..r_count)
        .map(|_| {
            (0..k_all - k_traded)
                .map(|_| {
                    structure.nontraded_base * (1.0 + uniform(rng, 0.0, structure.nontraded_spread))
                })
                .collect()
        })
        .collect();
    let mut ln_wage: Vec<f64> = (0..r_count)
        .map(|_| (structure.wage_base + uniform(rng, 0.0, structure.wage_spread)).ln())
        .collect();
    let informal_spread: Vec<f64> = (0..r_count)
        .map(|_| 1.0 + 0.25 * uniform(rng, 0.0, 1.0))
        .collect();

    // Resolve per-industry response paths; flagged lists fall back to the
    // base path when no override is configured.
    let base_path = &config.response.employment_path;
    let risky_path = if config.response.risky_path.is_empty() {
        base_path.clone()
    } else {
        config.response.risky_path.clone()
    };
    let sustainable_path = if config.response.sustainable_path.is_empty() {
        base_path.clone()
    } else {
        config.response.sustainable_path.clone()
    };
    let base_deltas = path_deltas(base_path);
    let risky_deltas = path_deltas(&risky_path);
    let sustainable_deltas = path_deltas(&sustainable_path);
    let wage_deltas = path_deltas(&config.response.wage_path);
    let risky_set: BTreeSet<&str> = config.taxonomy.risky.iter().map(String::as_str).collect();
    let sustainable_set: BTreeSet<&str> = config
        .taxonomy
        .sustainable
        .iter()
        .map(String::as_str)
        .collect();
    // Per industry: 0 = base, 1 = risky, 2 = sustainable.
    let path_of: Vec<usize> = industries
        .iter()
        .map(|k| {
            if risky_set.contains(k.as_str()) {
                1
            } else if sustainable_set.contains(k.as_str()) {
                2
            } else {
                0
            }
        })
        .collect();
    let psi = config.response.informal_substitution;
    let emit_informal = psi != 0.0;

    // --- initial equilibrium and employment ---------------------------
    let mut equilibrium = solve_with_power(&world, &power)?;
    let mut ln_emp = DMatrix::zeros(r_count, k_all);
    for ri in 0..r_count {
        for k in 0..k_all {
            let level = if k < k_traded {
                (structure.emp_scale * equilibrium.income[k][ri])
                    .max(structure.min_employment as f64)
            } else {
                nontraded_init[ri][k - k_traded].max(structure.min_employment as f64)
            };
            ln_emp[(ri, k)] = level.ln();
        }
    }
    let mut ln_informal: Vec<f64> = (0..r_count)
        .map(|ri| {
            let formal: f64 = (0..k_all).map(|k| ln_emp[(ri, k)].exp()).sum();
            (structure.informal_ratio * formal * informal_spread[ri]).ln()
        })
        .collect();

    let mut panel_rows = Vec::with_capacity(periods * r_count * k_all);
    let mut export_rows = Vec::with_capacity(periods * r_count);
    let mut world_rows = Vec::with_capacity(periods * k_traded);
    let mut gdp_rows = Vec::with_capacity(periods * d_count);
    let mut share_rows = Vec::new();
    let mut informal_rows = if emit_informal { Some(Vec::new()) } else { None };

    let mut ln_exports = DMatrix::zeros(r_count, periods);
    let mut export_growth = DMatrix::zeros(r_count, periods);
    let mut confounder = vec![0.0; r_count];
    let mut home_share_max = 0.0f64;

    let round_employment = |value: f64, region: &str, code: &str, year: Year| -> Result<u64> {
        let emp = value.exp().round();
        if emp < 1.0 {
            return Err(Error::Config(format!(
                "employment at ({region}, {code}, {year}) collapsed to zero; \
                 reduce noise scales or raise initial levels"
            )));
        }
        Ok(emp as u64)
    };

    for t in 0..periods {
        let year = start + t as Year;

        if t > 0 {
            // Demand shocks (random walk in log expenditure).
            for k in 0..k_traded {
                for di in 0..d_count {
                    ln_expenditure[k][di] += shocks.demand_sigma * normal(rng);
                }
            }
            // Supply shocks (random walk in log productivity).
            for k in 0..k_traded {
                for ri in 0..r_count {
                    ln_productivity[k][ri] += shocks.supply_sigma * normal(rng);
                }
            }
            // Region confounder: one draw per region, loading on every
            // traded industry's productivity now and on employment below.
            for u in confounder.iter_mut() {
                *u = normal(rng);
            }
            for k in 0..k_traded {
                for ri in 0..r_count {
                    ln_productivity[k][ri] += shocks.confounder_supply_scale * confounder[ri];
                }
            }
            // Optional cost shocks force a kernel recompute.
            if shocks.cost_sigma > 0.0 {
                for k in 0..k_traded {
                    for ri in 0..r_count {
                        ln_unit_cost[k][ri] += shocks.cost_sigma * normal(rng);
                        world.unit_cost[k][ri] = ln_unit_cost[k][ri].exp();
                    }
                }
                power = power_matrices(&world)?;
            }
            for k in 0..k_traded {
                for ri in 0..r_count {
                    world.productivity[k][ri] = ln_productivity[k][ri].exp();
                }
                world.productivity[k][r_count] = outside_productivity[k];
                world.expenditure[k] = ln_expenditure[k].map(f64::exp);
            }
            equilibrium = solve_with_power(&world, &power)?;
        }

        // Trade-side emission.
        let mut home_total = 0.0;
        for ri in 0..r_count {
            let income: f64 = (0..k_traded).map(|k| equilibrium.income[k][ri]).sum();
            home_total += income;
            export_rows.push((regions[ri].clone(), year, income));
            ln_exports[(ri, t)] = income.ln();
            if t > 0 {
                export_growth[(ri, t)] = ln_exports[(ri, t)] - ln_exports[(ri, t - 1)];
            }
        }
        let mut world_total = 0.0;
        for k in 0..k_traded {
            let outside_sales = equilibrium.income[k][r_count];
            world_total += outside_sales;
            world_rows.push((industries[k].clone(), year, outside_sales));
        }
        home_share_max = home_share_max.max(home_total / world_total);
        for di in 0..d_count {
            let gdp: f64 = (0..k_traded).map(|k| world.expenditure[k][di]).sum();
            gdp_rows.push((destinations[di].clone(), year, gdp));
        }
        if year == base_year {
            for ri in 0..r_count {
                for k in 0..k_traded {
                    let income = equilibrium.income[k][ri];
                    for di in 0..d_count {
                        let sales = equilibrium.shares[k][(ri, di)] * world.expenditure[k][di];
                        share_rows.push((
                            regions[ri].clone(),
                            industries[k].clone(),
                            destinations[di].clone(),
                            base_year,
                            sales / income,
                        ));
                    }
                }
            }
        }

        // Employment-side dynamics.
        if t > 0 {
            let region_noise: Vec<f64> = (0..r_count)
                .map(|_| shocks.region_noise_sigma * normal(rng))
                .collect();
            let industry_noise: Vec<Vec<f64>> = (0..r_count)
                .map(|_| {
                    (0..k_all)
                        .map(|_| shocks.industry_noise_sigma * normal(rng))
                        .collect()
                })
                .collect();
            let wage_noise: Vec<f64> = (0..r_count)
                .map(|_| shocks.wage_noise_sigma * normal(rng))
                .collect();
            let informal_noise: Vec<f64> = (0..r_count)
                .map(|_| shocks.informal_noise_sigma * normal(rng))
                .collect();

            for ri in 0..r_count {
                let resp_base = lagged_response(&base_deltas, &export_growth, ri, t);
                let resp_risky = lagged_response(&risky_deltas, &export_growth, ri, t);
                let resp_sust = lagged_response(&sustainable_deltas, &export_growth, ri, t);
                let resp_wage = lagged_response(&wage_deltas, &export_growth, ri, t);
                let common = shocks.confounder_strength * confounder[ri] + region_noise[ri];
                for k in 0..k_all {
                    let resp = match path_of[k] {
                        1 => resp_risky,
                        2 => resp_sust,
                        _ => resp_base,
                    };
                    ln_emp[(ri, k)] += resp + common + industry_noise[ri][k];
                }
                ln_wage[ri] += resp_wage + wage_noise[ri];
                ln_informal[ri] += psi * resp_base + informal_noise[ri];
            }
        }

        // Employment-side emission.
        for ri in 0..r_count {
            let rate = ln_wage[ri].exp();
            for k in 0..k_all {
                let emp = round_employment(ln_emp[(ri, k)], &regions[ri], &industries[k], year)?;
                panel_rows.push((
                    regions[ri].clone(),
                    industries[k].clone(),
                    year,
                    emp,
                    emp as f64 * rate,
                ));
            }
            if let Some(rows) = informal_rows.as_mut() {
                let emp = round_employment(ln_informal[ri], &regions[ri], "informal", year)?;
                rows.push((regions[ri].clone(), year, emp));
            }
        }
    }

    // --- assemble loaded views ----------------------------------------
    let panel = RegionPanel::from_rows("synthetic", panel_rows.iter().cloned())?;
    let exports = ExportsSeries::from_rows("synthetic", export_rows.iter().cloned())?;
    let world_exports = WorldExportsSeries::from_rows("synthetic", world_rows.iter().cloned())?;
    let destination = DestinationData::from_rows(
        "synthetic",
        gdp_rows.iter().cloned(),
        share_rows.iter().cloned(),
    )?;
    let schema = SchemaConfig {
        base_year: Some(base_year),
        year_min: Some(start),
        year_max: Some(start + periods as Year - 1),
        growth_policy: GrowthPolicy::LogDropNonpositive,
        non_exporting_industries: industries[k_traded..].to_vec(),
        columns: ColumnMaps::default(),
    };

    // Realized instrument relevance against endogenous export growth.
    let flagged: BTreeSet<String> = industries[k_traded..].iter().cloned().collect();
    let instrument = build_instrument_series(
        &panel,
        ShifterData::World(&world_exports),
        InstrumentKind::Baseline,
        &flagged,
        (start + 1)..=(start + periods as Year - 1),
    )?;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for ((region, period), &z) in instrument.iter() {
        if let Ok(g) = exports.log_growth(region, *period, GrowthPolicy::LogDropNonpositive) {
            pairs.push((z, g));
        }
    }
    let n_obs = pairs.len();
    let (correlation, first_stage_slope) = if n_obs >= 2 {
        let zm = pairs.iter().map(|p| p.0).sum::<f64>() / n_obs as f64;
        let gm = pairs.iter().map(|p| p.1).sum::<f64>() / n_obs as f64;
        let mut szz = 0.0;
        let mut sgg = 0.0;
        let mut szg = 0.0;
        for (z, g) in &pairs {
            szz += (z - zm) * (z - zm);
            sgg += (g - gm) * (g - gm);
            szg += (z - zm) * (g - gm);
        }
        if szz > 0.0 && sgg > 0.0 {
            (szg / (szz * sgg).sqrt(), szg / szz)
        } else {
            (0.0, 0.0)
        }
    } else {
        (0.0, 0.0)
    };

    let truth = SyntheticTruth {
        seed: config.seed,
        regions: r_count,
        industries: k_all,
        destinations: d_count,
        periods,
        start_year: start,
        base_year,
        employment_path: base_path.clone(),
        wage_path: config.response.wage_path.clone(),
        risky_path,
        sustainable_path,
        informal_substitution: psi,
        informal_path: base_path.iter().map(|v| psi * v).collect(),
        long_run_elasticity: *base_path.last().expect("validated path is non-empty"),
        confounder_supply_scale: shocks.confounder_supply_scale,
        confounder_strength: shocks.confounder_strength,
        home_share_of_world_exports: home_share_max,
        instrument_relevance: InstrumentRelevance {
            correlation,
            first_stage_slope,
            n_obs,
        },
    };

    let emit_classification = config.taxonomy.emit_classification
        || !config.taxonomy.risky.is_empty()
        || !config.taxonomy.sustainable.is_empty();
    let classification = emit_classification.then(|| {
        industries
            .iter()
            .map(|k| {
                (
                    k.clone(),
                    risky_set.contains(k.as_str()),
                    sustainable_set.contains(k.as_str()),
                )
            })
            .collect()
    });

    Ok(SimulatedData {
        scenario: config.clone(),
        panel,
        exports,
        world_exports,
        destination,
        informal: informal_rows,
        classification,
        schema,
        truth,
        panel_rows,
        export_rows,
        world_rows,
        gdp_rows,
        share_rows,
    })
}
