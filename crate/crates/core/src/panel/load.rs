//! CSV ingestion for the panel and export-side series.
//!
//! A [`SchemaConfig`] (usually `schema.toml`) declares column remappings,
//! the base year, the growth policy, and which industries are flagged as
//! non-exporting. Loaders validate hard (duplicate keys, bad fields are
//! errors); rows outside a declared year window are dropped and reported.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::panel::types::{
    DestinationData, ExportsSeries, GrowthPolicy, RegionPanel, WorldExportsSeries, Year,
};

/// Column remapping for one input file: logical name -> header name.
/// Omitted entries keep the canonical header names.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMap {
    pub region_id: Option<String>,
    pub industry_id: Option<String>,
    pub destination_id: Option<String>,
    pub year: Option<String>,
    pub base_year: Option<String>,
    pub employment: Option<String>,
    pub wage_bill: Option<String>,
    pub fob_value: Option<String>,
    pub value: Option<String>,
    pub gdp_usd: Option<String>,
    pub share: Option<String>,
}

impl ColumnMap {
    fn get<'a>(&'a self, logical: &'a str) -> &'a str {
        let mapped = match logical {
            "region_id" => &self.region_id,
            "industry_id" => &self.industry_id,
            "destination_id" => &self.destination_id,
            "year" => &self.year,
            "base_year" => &self.base_year,
            "employment" => &self.employment,
            "wage_bill" => &self.wage_bill,
            "fob_value" => &self.fob_value,
            "value" => &self.value,
            "gdp_usd" => &self.gdp_usd,
            "share" => &self.share,
            other => panic!("unknown logical column {other}"),
        };
        mapped.as_deref().unwrap_or(logical)
    }
}

/// Per-file column remappings.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMaps {
    pub panel: ColumnMap,
    pub exports: ColumnMap,
    pub world_exports: ColumnMap,
    pub dest_gdp: ColumnMap,
    pub dest_shares: ColumnMap,
}

/// Declarative description of the input data layout.
#[derive(Debug, Clone, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SchemaConfig {
    /// Base year for initial-condition controls; defaults to the first
    /// panel year when absent.
    pub base_year: Option<Year>,
    /// Optional year window; rows outside it are dropped and reported.
    pub year_min: Option<Year>,
    pub year_max: Option<Year>,
    /// How export levels are turned into growth.
    pub growth_policy: GrowthPolicy,
    /// Industries with employment but, by design, no export shifter; they
    /// contribute zero to instruments and define the non-export share.
    pub non_exporting_industries: Vec<String>,
    /// Column remappings per file.
    pub columns: ColumnMaps,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            base_year: None,
            year_min: None,
            year_max: None,
            growth_policy: GrowthPolicy::default(),
            non_exporting_industries: Vec::new(),
            columns: ColumnMaps::default(),
        }
    }
}

impl SchemaConfig {
    /// Parses a `schema.toml`; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))
    }

    /// Reads and parses a schema file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text)
    }

    /// Serializes back to TOML (used when the simulator emits a schema).
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("schema config serializes")
    }

    /// The non-exporting flag set as a lookup structure.
    pub fn non_exporting_set(&self) -> BTreeSet<String> {
        self.non_exporting_industries.iter().cloned().collect()
    }

    fn in_window(&self, year: Year) -> bool {
        self.year_min.map_or(true, |m| year >= m) && self.year_max.map_or(true, |m| year <= m)
    }
}

/// What happened while loading one file: row counts and dropped rows with
/// reasons. Parse failures are hard errors and never appear here.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub file: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: Vec<(u64, String)>,
}

impl LoadReport {
    fn new(file: &str) -> Self {
        LoadReport {
            file: file.to_string(),
            rows_read: 0,
            rows_kept: 0,
            dropped: Vec::new(),
        }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "{}: {} rows read, {} kept, {} dropped",
            self.file,
            self.rows_read,
            self.rows_kept,
            self.dropped.len()
        )
    }
}

/// Loads the region × industry × year panel.
pub fn load_panel(path: &Path, schema: &SchemaConfig) -> Result<(RegionPanel, LoadReport)> {
    let table = CsvTable::open(path)?;
    let cols = &schema.columns.panel;
    let c_region = table.col("region_id", cols.get("region_id"))?;
    let c_industry = table.col("industry_id", cols.get("industry_id"))?;
    let c_year = table.col("year", cols.get("year"))?;
    let c_emp = table.col("employment", cols.get("employment"))?;
    let c_wage = table.col("wage_bill", cols.get("wage_bill"))?;

    let mut report = LoadReport::new(table.file());
    let mut rows = Vec::new();
    for (line, record) in table.rows() {
        report.rows_read += 1;
        let year: Year = table.parse(line, record, c_year, "year")?;
        if !schema.in_window(year) {
            report.dropped.push((line, format!("year {year} outside declared window")));
            continue;
        }
        let region = table.field(line, record, c_region, "region_id")?;
        let industry = table.field(line, record, c_industry, "industry_id")?;
        let employment: u64 =
            table.parse(line, record, c_emp, "employment (non-negative integer)")?;
        let wage_bill: f64 = table.parse(line, record, c_wage, "wage_bill")?;
        report.rows_kept += 1;
        rows.push((region, industry, year, employment, wage_bill));
    }
    let panel = RegionPanel::from_rows(table.file(), rows)?;
    Ok((panel, report))
}

/// Loads per-region export totals.
pub fn load_exports(path: &Path, schema: &SchemaConfig) -> Result<(ExportsSeries, LoadReport)> {
    let table = CsvTable::open(path)?;
    let cols = &schema.columns.exports;
    let c_region = table.col("region_id", cols.get("region_id"))?;
    let c_year = table.col("year", cols.get("year"))?;
    let c_value = table.col("fob_value", cols.get("fob_value"))?;

    let mut report = LoadReport::new(table.file());
    let mut rows = Vec::new();
    for (line, record) in table.rows() {
        report.rows_read += 1;
        let year: Year = table.parse(line, record, c_year, "year")?;
        if !schema.in_window(year) {
            report.dropped.push((line, format!("year {year} outside declared window")));
            continue;
        }
        let region = table.field(line, record, c_region, "region_id")?;
        let value: f64 = table.parse(line, record, c_value, "fob_value")?;
        report.rows_kept += 1;
        rows.push((region, year, value));
    }
    let series = ExportsSeries::from_rows(table.file(), rows)?;
    Ok((series, report))
}

/// Loads world export levels by industry.
pub fn load_world_exports(
    path: &Path,
    schema: &SchemaConfig,
) -> Result<(WorldExportsSeries, LoadReport)> {
    let table = CsvTable::open(path)?;
    let cols = &schema.columns.world_exports;
    let c_industry = table.col("industry_id", cols.get("industry_id"))?;
    let c_year = table.col("year", cols.get("year"))?;
    let c_value = table.col("value", cols.get("value"))?;

    let mut report = LoadReport::new(table.file());
    let mut rows = Vec::new();
    for (line, record) in table.rows() {
        report.rows_read += 1;
        let year: Year = table.parse(line, record, c_year, "year")?;
        if !schema.in_window(year) {
            report.dropped.push((line, format!("year {year} outside declared window")));
            continue;
        }
        let industry = table.field(line, record, c_industry, "industry_id")?;
        let value: f64 = table.parse(line, record, c_value, "value")?;
        report.rows_kept += 1;
        rows.push((industry, year, value));
    }
    let series = WorldExportsSeries::from_rows(table.file(), rows)?;
    Ok((series, report))
}

/// Loads destination GDP levels and the destination-share snapshot.
pub fn load_destination(
    gdp_path: &Path,
    shares_path: &Path,
    schema: &SchemaConfig,
) -> Result<(DestinationData, Vec<LoadReport>)> {
    let gdp_table = CsvTable::open(gdp_path)?;
    let cols = &schema.columns.dest_gdp;
    let c_dest = gdp_table.col("destination_id", cols.get("destination_id"))?;
    let c_year = gdp_table.col("year", cols.get("year"))?;
    let c_gdp = gdp_table.col("gdp_usd", cols.get("gdp_usd"))?;

    let mut gdp_report = LoadReport::new(gdp_table.file());
    let mut gdp_rows = Vec::new();
    for (line, record) in gdp_table.rows() {
        gdp_report.rows_read += 1;
        let year: Year = gdp_table.parse(line, record, c_year, "year")?;
        if !schema.in_window(year) {
            gdp_report
                .dropped
                .push((line, format!("year {year} outside declared window")));
            continue;
        }
        let dest = gdp_table.field(line, record, c_dest, "destination_id")?;
        let value: f64 = gdp_table.parse(line, record, c_gdp, "gdp_usd")?;
        gdp_report.rows_kept += 1;
        gdp_rows.push((dest, year, value));
    }

    let share_table = CsvTable::open(shares_path)?;
    let cols = &schema.columns.dest_shares;
    let c_region = share_table.col("region_id", cols.get("region_id"))?;
    let c_industry = share_table.col("industry_id", cols.get("industry_id"))?;
    let c_dest = share_table.col("destination_id", cols.get("destination_id"))?;
    let c_base = share_table.col("base_year", cols.get("base_year"))?;
    let c_share = share_table.col("share", cols.get("share"))?;

    let mut share_report = LoadReport::new(share_table.file());
    let mut share_rows = Vec::new();
    for (line, record) in share_table.rows() {
        share_report.rows_read += 1;
        let region = share_table.field(line, record, c_region, "region_id")?;
        let industry = share_table.field(line, record, c_industry, "industry_id")?;
        let dest = share_table.field(line, record, c_dest, "destination_id")?;
        let base: Year = share_table.parse(line, record, c_base, "base_year")?;
        let share: f64 = share_table.parse(line, record, c_share, "share")?;
        share_report.rows_kept += 1;
        share_rows.push((region, industry, dest, base, share));
    }

    let data = DestinationData::from_rows(share_table.file(), gdp_rows, share_rows)?;
    Ok((data, vec![gdp_report, share_report]))
}
