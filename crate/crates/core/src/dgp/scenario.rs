//! Scenario configuration for the synthetic data generator.
//!
//! A scenario is a TOML file with five optional sections (`[world]`,
//! `[shocks]`, `[response]`, `[structure]`, `[taxonomy]`) plus a top-level
//! `seed`. Every field has a default, so `{}` is a valid scenario; unknown
//! keys are rejected. The same seed and config always generate identical
//! data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PRE_TREND_LONG_LAG;

/// World-size and gravity-parameter draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldConfig {
    /// Home regions.
    pub regions: usize,
    /// Total industries, including the non-exporting ones.
    pub industries: usize,
    /// Foreign destinations.
    pub destinations: usize,
    /// Simulated periods (years).
    pub periods: usize,
    /// Calendar year of the first period.
    pub start_year: i32,
    /// Trade elasticities are drawn uniformly from this range.
    pub theta_min: f64,
    pub theta_max: f64,
    /// Productivity draws: `T = 1 + U[0, spread]`.
    pub productivity_spread: f64,
    /// Unit-cost draws: `c = 1 + U[0, spread]`.
    pub unit_cost_spread: f64,
    /// Trade-cost draws: `tau = 1 + U[0, spread]`.
    pub trade_cost_spread: f64,
    /// Outside-block productivity relative to mean home competitiveness;
    /// larger values shrink the home share of world exports.
    pub outside_scale: f64,
    /// Initial destination expenditure: `base * (1 + U[0, spread])`.
    pub base_expenditure: f64,
    pub expenditure_spread: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            regions: 200,
            industries: 12,
            destinations: 8,
            periods: 25,
            start_year: 1990,
            theta_min: 3.0,
            theta_max: 6.0,
            productivity_spread: 0.5,
            unit_cost_spread: 0.3,
            trade_cost_spread: 0.8,
            outside_scale: 30.0,
            base_expenditure: 1000.0,
            expenditure_spread: 1.0,
        }
    }
}

/// Shock processes and the endogeneity dial.
///
/// The confounder is a region-year standard-normal draw `u` that enters
/// the supply side (log-productivity innovations of every industry in the
/// region, scaled by `confounder_supply_scale`) and, when
/// `confounder_strength` is non-zero, employment growth directly (scaled
/// by the signed `confounder_strength`). The foreign-demand shocks driving
/// the instrument never see `u`, so the instrument stays valid while OLS
/// picks up a bias whose sign follows `confounder_strength`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShockConfig {
    /// Std dev of i.i.d. log demand innovations per (destination, industry).
    pub demand_sigma: f64,
    /// Std dev of i.i.d. log productivity innovations per (region, industry).
    pub supply_sigma: f64,
    /// Std dev of log unit-cost innovations; 0 keeps costs static and the
    /// power kernels cached.
    pub cost_sigma: f64,
    /// Supply-side loading of the region confounder (kept positive).
    pub confounder_supply_scale: f64,
    /// Signed loading of the confounder in employment growth.
    pub confounder_strength: f64,
    /// Region-level employment growth noise.
    pub region_noise_sigma: f64,
    /// Region-industry employment growth noise.
    pub industry_noise_sigma: f64,
    /// Region wage growth noise.
    pub wage_noise_sigma: f64,
    /// Informal employment growth noise.
    pub informal_noise_sigma: f64,
}

impl Default for ShockConfig {
    fn default() -> Self {
        ShockConfig {
            demand_sigma: 0.08,
            supply_sigma: 0.03,
            cost_sigma: 0.0,
            confounder_supply_scale: 0.02,
            confounder_strength: 0.0,
            region_noise_sigma: 0.015,
            industry_noise_sigma: 0.02,
            wage_noise_sigma: 0.01,
            informal_noise_sigma: 0.02,
        }
    }
}

/// True cumulative elasticity paths.
///
/// `employment_path[h]` is the true elasticity of the `h`-year cumulative
/// formal-employment difference with respect to period-`t` export growth;
/// paths are flat beyond their last entry. Industries flagged risky or
/// sustainable in `[taxonomy]` follow their own paths (defaulting to the
/// base path when empty); an industry flagged as both follows the risky
/// path. Informal employment responds with `informal_substitution` times
/// the base-path response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseConfig {
    pub employment_path: Vec<f64>,
    pub wage_path: Vec<f64>,
    /// Path for risky-flagged industries; empty = employment_path.
    pub risky_path: Vec<f64>,
    /// Path for sustainable-flagged industries; empty = employment_path.
    pub sustainable_path: Vec<f64>,
    /// Informality substitution coefficient (<= 0).
    pub informal_substitution: f64,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        ResponseConfig {
            employment_path: vec![0.25, 0.30, 0.36, 0.40, 0.38, 0.36, 0.35],
            wage_path: vec![0.10, 0.14, 0.17, 0.20, 0.19, 0.18, 0.18],
            risky_path: Vec::new(),
            sustainable_path: Vec::new(),
            informal_substitution: 0.0,
        }
    }
}

/// Initial-level structure of the synthetic economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    /// How many industries (the last ones, coded `nXX`) do not export.
    pub non_exporting: usize,
    /// Initial traded employment per unit of initial export income.
    pub emp_scale: f64,
    /// Floor on initial employment per cell.
    pub min_employment: u64,
    /// Initial non-traded employment: `base * (1 + U[0, spread])`.
    pub nontraded_base: f64,
    pub nontraded_spread: f64,
    /// Initial wage rate: `base + U[0, spread]`.
    pub wage_base: f64,
    pub wage_spread: f64,
    /// Initial informal employment relative to formal.
    pub informal_ratio: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            non_exporting: 2,
            emp_scale: 25.0,
            min_employment: 20,
            nontraded_base: 400.0,
            nontraded_spread: 0.6,
            wage_base: 15.0,
            wage_spread: 8.0,
            informal_ratio: 0.4,
        }
    }
}

/// Which industries carry environmental flags in the simulated economy.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaxonomyConfig {
    /// Industry codes flagged environmentally risky.
    pub risky: Vec<String>,
    /// Industry codes flagged sustainable (high contribution level).
    pub sustainable: Vec<String>,
    /// Emit `classification.csv` even when both lists are empty.
    pub emit_classification: bool,
}

/// A complete generator scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub world: WorldConfig,
    pub shocks: ShockConfig,
    pub response: ResponseConfig,
    pub structure: StructureConfig,
    pub taxonomy: TaxonomyConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 42,
            world: WorldConfig::default(),
            shocks: ShockConfig::default(),
            response: ResponseConfig::default(),
            structure: StructureConfig::default(),
            taxonomy: TaxonomyConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Parses a scenario from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("scenario parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a scenario file.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Serializes the fully resolved scenario back to TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("scenario serialize error: {e}")))
    }

    /// Turns on the endogeneity channel: sets the signed outcome loading
    /// and ensures the supply-side loading is positive so the confounder
    /// actually reaches export growth.
    pub fn inject_confounder(mut self, strength: f64) -> Self {
        self.shocks.confounder_strength = strength;
        if self.shocks.confounder_supply_scale <= 0.0 {
            self.shocks.confounder_supply_scale = ShockConfig::default().confounder_supply_scale;
        }
        self
    }

    /// Number of traded (exporting) industries.
    pub fn traded_industries(&self) -> usize {
        self.world.industries - self.structure.non_exporting
    }

    /// All industry codes, traded (`kXX`) first, then non-traded (`nXX`).
    pub fn industry_codes(&self) -> Vec<String> {
        let traded = self.traded_industries();
        let width = |n: usize| n.max(1).to_string().len();
        let kw = width(traded);
        let nw = width(self.structure.non_exporting);
        let mut codes: Vec<String> = (1..=traded).map(|i| format!("k{i:0kw$}")).collect();
        codes.extend((1..=self.structure.non_exporting).map(|i| format!("n{i:0nw$}")));
        codes
    }

    /// Region codes `rXXX`, zero-padded to sort correctly.
    pub fn region_codes(&self) -> Vec<String> {
        let w = self.world.regions.max(1).to_string().len();
        (1..=self.world.regions).map(|i| format!("r{i:0w$}")).collect()
    }

    /// Destination codes `dX`.
    pub fn destination_codes(&self) -> Vec<String> {
        let w = self.world.destinations.max(1).to_string().len();
        (1..=self.world.destinations).map(|i| format!("d{i:0w$}")).collect()
    }

    /// Base year used for fixed controls and share vintages.
    pub fn base_year(&self) -> i32 {
        self.world.start_year + PRE_TREND_LONG_LAG
    }

    /// Longest configured cumulative-path horizon.
    pub fn longest_horizon(&self) -> usize {
        [
            &self.response.employment_path,
            &self.response.wage_path,
            &self.response.risky_path,
            &self.response.sustainable_path,
        ]
        .iter()
        .map(|p| p.len().saturating_sub(1))
        .max()
        .unwrap_or(0)
    }

    /// Validates every section; called by the parsers and the simulator.
    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        if w.regions < 2 {
            return Err(Error::Config(format!(
                "need at least 2 regions, got {}",
                w.regions
            )));
        }
        if w.destinations == 0 {
            return Err(Error::Config("need at least 1 destination".to_string()));
        }
        if self.structure.non_exporting >= w.industries {
            return Err(Error::Config(format!(
                "non_exporting ({}) must leave at least one traded industry of {}",
                self.structure.non_exporting, w.industries
            )));
        }
        let needed = self.longest_horizon() + PRE_TREND_LONG_LAG as usize + 1;
        if w.periods < needed {
            return Err(Error::Config(format!(
                "periods = {} is too short: the longest elasticity path plus the \
                 pre-trend window needs at least {needed}",
                w.periods
            )));
        }
        if !(w.theta_min > 0.0 && w.theta_max >= w.theta_min && w.theta_max.is_finite()) {
            return Err(Error::Config(format!(
                "trade elasticity range ({}, {}) must satisfy 0 < min <= max",
                w.theta_min, w.theta_max
            )));
        }
        for (name, value) in [
            ("productivity_spread", w.productivity_spread),
            ("unit_cost_spread", w.unit_cost_spread),
            ("trade_cost_spread", w.trade_cost_spread),
            ("expenditure_spread", w.expenditure_spread),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("outside_scale", w.outside_scale),
            ("base_expenditure", w.base_expenditure),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }

        let s = &self.shocks;
        for (name, value) in [
            ("demand_sigma", s.demand_sigma),
            ("supply_sigma", s.supply_sigma),
            ("cost_sigma", s.cost_sigma),
            ("confounder_supply_scale", s.confounder_supply_scale),
            ("region_noise_sigma", s.region_noise_sigma),
            ("industry_noise_sigma", s.industry_noise_sigma),
            ("wage_noise_sigma", s.wage_noise_sigma),
            ("informal_noise_sigma", s.informal_noise_sigma),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if !s.confounder_strength.is_finite() {
            return Err(Error::Config("confounder_strength must be finite".to_string()));
        }

        let r = &self.response;
        if r.employment_path.is_empty() || r.wage_path.is_empty() {
            return Err(Error::Config(
                "employment_path and wage_path must each have at least one entry".to_string(),
            ));
        }
        for (name, path) in [
            ("employment_path", &r.employment_path),
            ("wage_path", &r.wage_path),
            ("risky_path", &r.risky_path),
            ("sustainable_path", &r.sustainable_path),
        ] {
            if path.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("{name} contains a non-finite entry")));
            }
        }
        if !(r.informal_substitution <= 0.0 && r.informal_substitution.is_finite()) {
            return Err(Error::Config(format!(
                "informal_substitution must be <= 0, got {}",
                r.informal_substitution
            )));
        }

        let st = &self.structure;
        for (name, value) in [
            ("emp_scale", st.emp_scale),
            ("nontraded_base", st.nontraded_base),
            ("wage_base", st.wage_base),
            ("informal_ratio", st.informal_ratio),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("nontraded_spread", st.nontraded_spread),
            ("wage_spread", st.wage_spread),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if st.min_employment == 0 {
            return Err(Error::Config("min_employment must be at least 1".to_string()));
        }

        let codes = self.industry_codes();
        for (list_name, list) in [
            ("taxonomy.risky", &self.taxonomy.risky),
            ("taxonomy.sustainable", &self.taxonomy.sustainable),
        ] {
            let mut seen = std::collections::BTreeSet::new();
            for code in list {
                if !codes.contains(code) {
                    return Err(Error::Config(format!(
                        "{list_name} names unknown industry {code}; known codes: {}",
                        codes.join(", ")
                    )));
                }
                if !seen.insert(code) {
                    return Err(Error::Config(format!(
                        "{list_name} lists {code} twice"
                    )));
                }
            }
        }
        Ok(())
    }
}
