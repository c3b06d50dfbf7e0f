//! Core data structures for the region × industry × year panel and the
//! export-side series that accompany it.
//!
//! All containers intern their identifiers into sorted tables and keep
//! deterministic iteration order, so that loading the same inputs twice
//! yields structurally identical (and identically serialized) values.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Calendar year. The panel window is a contiguous inclusive range of these.
pub type Year = i32;

/// One observed cell of the panel: employment head-count and the total wage
/// bill paid in that region, industry, and year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelCell {
    /// Employment head-count (non-negative by construction).
    pub employment: u64,
    /// Total wage bill in currency units; `> 0` requires `employment > 0`.
    pub wage_bill: f64,
}

/// Region × industry × year employment panel.
///
/// Identifiers are interned into sorted tables; the cell store is dense over
/// the declared year window, with absent cells representing unbalanced
/// coverage (absence is not the same as zero employment).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPanel {
    regions: Vec<String>,
    industries: Vec<String>,
    first_year: Year,
    last_year: Year,
    /// Dense storage indexed `[region][year - first_year][industry]`.
    cells: Vec<Option<PanelCell>>,
}

/// Upper bound on the panel window width; wider windows are almost certainly
/// a data error and would make the dense store explode.
const MAX_PANEL_YEARS: i64 = 1000;

impl RegionPanel {
    /// Builds a panel from raw rows, validating field ranges and rejecting
    /// duplicate `(region, industry, year)` keys. `source` names the origin
    /// (file path or "memory") for error messages.
    pub fn from_rows<I>(source: &str, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, Year, u64, f64)>,
    {
        let rows: Vec<_> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Invariant(format!("{source}: panel has no rows")));
        }

        let mut regions = BTreeSet::new();
        let mut industries = BTreeSet::new();
        let mut min_year = Year::MAX;
        let mut max_year = Year::MIN;
        for (region, industry, year, _, wage_bill) in &rows {
            if !wage_bill.is_finite() || *wage_bill < 0.0 {
                return Err(Error::Invariant(format!(
                    "{source}: wage_bill must be finite and non-negative, \
                     got {wage_bill} at ({region}, {industry}, {year})"
                )));
            }
            regions.insert(region.clone());
            industries.insert(industry.clone());
            min_year = min_year.min(*year);
            max_year = max_year.max(*year);
        }
        if (max_year as i64 - min_year as i64) >= MAX_PANEL_YEARS {
            return Err(Error::Invariant(format!(
                "{source}: panel year window {min_year}..={max_year} is implausibly wide"
            )));
        }

        let regions: Vec<String> = regions.into_iter().collect();
        let industries: Vec<String> = industries.into_iter().collect();
        let n_years = (max_year - min_year + 1) as usize;
        let mut cells = vec![None; regions.len() * n_years * industries.len()];

        for (region, industry, year, employment, wage_bill) in rows {
            if wage_bill > 0.0 && employment == 0 {
                return Err(Error::Invariant(format!(
                    "{source}: positive wage_bill with zero employment \
                     at ({region}, {industry}, {year})"
                )));
            }
            let r = regions.binary_search(&region).expect("interned");
            let k = industries.binary_search(&industry).expect("interned");
            let t = (year - min_year) as usize;
            let idx = (r * n_years + t) * industries.len() + k;
            if cells[idx].is_some() {
                return Err(Error::DuplicateKey {
                    file: source.to_string(),
                    key: format!("({region}, {industry}, {year})"),
                });
            }
            cells[idx] = Some(PanelCell {
                employment,
                wage_bill,
            });
        }

        Ok(RegionPanel {
            regions,
            industries,
            first_year: min_year,
            last_year: max_year,
            cells,
        })
    }

    /// Region identifiers, sorted.
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    /// Industry identifiers, sorted.
    pub fn industries(&self) -> &[String] {
        &self.industries
    }

    /// Declared contiguous year window.
    pub fn years(&self) -> RangeInclusive<Year> {
        self.first_year..=self.last_year
    }

    fn index(&self, r: usize, year: Year, k: usize) -> Option<usize> {
        if year < self.first_year || year > self.last_year {
            return None;
        }
        let t = (year - self.first_year) as usize;
        let n_years = (self.last_year - self.first_year + 1) as usize;
        Some((r * n_years + t) * self.industries.len() + k)
    }

    /// Position of a region in the sorted table.
    pub fn region_index(&self, region: &str) -> Option<usize> {
        self.regions.binary_search_by(|r| r.as_str().cmp(region)).ok()
    }

    /// Position of an industry in the sorted table.
    pub fn industry_index(&self, industry: &str) -> Option<usize> {
        self.industries
            .binary_search_by(|k| k.as_str().cmp(industry))
            .ok()
    }

    /// The cell at `(region, industry, year)`, if observed.
    pub fn cell(&self, region: &str, industry: &str, year: Year) -> Option<PanelCell> {
        let r = self.region_index(region)?;
        let k = self.industry_index(industry)?;
        self.cells[self.index(r, year, k)?]
    }

    /// Cell lookup by interned indices (hot path for construction loops).
    pub fn cell_at(&self, region_idx: usize, industry_idx: usize, year: Year) -> Option<PanelCell> {
        self.index(region_idx, year, industry_idx)
            .and_then(|i| self.cells[i])
    }

    /// Total employment of a region in a year, summed over observed cells.
    pub fn region_total_employment(&self, region_idx: usize, year: Year) -> u64 {
        (0..self.industries.len())
            .filter_map(|k| self.cell_at(region_idx, k, year))
            .map(|c| c.employment)
            .sum()
    }

    /// Employment shares of each observed industry in `(region, year)`.
    ///
    /// Shares are `employment / total`; the sum over the returned map is 1
    /// up to rounding. Errors if the region-period has zero total
    /// employment (shares undefined), or the region/period is unknown.
    pub fn industry_shares(&self, region: &str, year: Year) -> Result<BTreeMap<String, f64>> {
        let r = self
            .region_index(region)
            .ok_or_else(|| Error::Invariant(format!("unknown region {region}")))?;
        let total = self.region_total_employment(r, year);
        if total == 0 {
            return Err(Error::DegenerateShares {
                region: region.to_string(),
                period: year,
            });
        }
        let mut shares = BTreeMap::new();
        for (k, industry) in self.industries.iter().enumerate() {
            if let Some(cell) = self.cell_at(r, k, year) {
                shares.insert(industry.clone(), cell.employment as f64 / total as f64);
            }
        }
        Ok(shares)
    }

    /// Log total employment per `(region, year)`, optionally restricted to a
    /// subset of industries (used for taxonomy slices). Region-years with
    /// zero employment in the selection are excluded and recorded.
    pub fn log_employment_series(
        &self,
        name: &str,
        industries: Option<&BTreeSet<String>>,
    ) -> OutcomeSeries {
        let selected: Vec<usize> = match industries {
            Some(set) => self
                .industries
                .iter()
                .enumerate()
                .filter(|(_, id)| set.contains(*id))
                .map(|(k, _)| k)
                .collect(),
            None => (0..self.industries.len()).collect(),
        };
        let mut series = OutcomeSeries::new(name);
        for (r, region) in self.regions.iter().enumerate() {
            for year in self.first_year..=self.last_year {
                let total: u64 = selected
                    .iter()
                    .filter_map(|&k| self.cell_at(r, k, year))
                    .map(|c| c.employment)
                    .sum();
                if total > 0 {
                    series.insert(region.clone(), year, (total as f64).ln());
                } else {
                    series.exclude(region.clone(), year, "zero employment in selection");
                }
            }
        }
        series
    }

    /// Log average wage (`wage_bill / employment`) per `(region, year)`,
    /// optionally restricted to a subset of industries.
    pub fn log_wage_series(
        &self,
        name: &str,
        industries: Option<&BTreeSet<String>>,
    ) -> OutcomeSeries {
        let selected: Vec<usize> = match industries {
            Some(set) => self
                .industries
                .iter()
                .enumerate()
                .filter(|(_, id)| set.contains(*id))
                .map(|(k, _)| k)
                .collect(),
            None => (0..self.industries.len()).collect(),
        };
        let mut series = OutcomeSeries::new(name);
        for (r, region) in self.regions.iter().enumerate() {
            for year in self.first_year..=self.last_year {
                let (mut emp, mut bill) = (0u64, 0.0f64);
                for &k in &selected {
                    if let Some(cell) = self.cell_at(r, k, year) {
                        emp += cell.employment;
                        bill += cell.wage_bill;
                    }
                }
                if emp > 0 && bill > 0.0 {
                    series.insert(region.clone(), year, (bill / emp as f64).ln());
                } else {
                    series.exclude(region.clone(), year, "zero employment or wage bill");
                }
            }
        }
        series
    }
}

/// A per-(region, year) outcome in log levels, with a record of region-years
/// that had to be excluded (rather than silently zero-filled).
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSeries {
    /// Human-readable outcome name ("employment", "wages", "risky", ...).
    pub name: String,
    values: BTreeMap<(String, Year), f64>,
    exclusions: Vec<(String, Year, String)>,
}

impl OutcomeSeries {
    /// Empty series with the given name.
    pub fn new(name: &str) -> Self {
        OutcomeSeries {
            name: name.to_string(),
            values: BTreeMap::new(),
            exclusions: Vec::new(),
        }
    }

    /// Inserts a log-level value.
    pub fn insert(&mut self, region: String, year: Year, value: f64) {
        self.values.insert((region, year), value);
    }

    /// Records an excluded region-year with the reason.
    pub fn exclude(&mut self, region: String, year: Year, reason: &str) {
        self.exclusions.push((region, year, reason.to_string()));
    }

    /// Log-level value at `(region, year)`, if defined.
    pub fn get(&self, region: &str, year: Year) -> Option<f64> {
        self.values.get(&(region.to_string(), year)).copied()
    }

    /// Iterates `((region, year), value)` in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, Year), &f64)> {
        self.values.iter()
    }

    /// Region-years excluded during construction.
    pub fn exclusions(&self) -> &[(String, Year, String)] {
        &self.exclusions
    }

    /// Number of defined values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when no values are defined.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Policy for turning a level series into per-period growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPolicy {
    /// Log difference; observations with a non-positive level at either
    /// endpoint are excluded (and reported), never zero-filled.
    #[default]
    LogDropNonpositive,
    /// Inverse-hyperbolic-sine difference, defined at zero; provided for
    /// sensitivity runs.
    Asinh,
}

/// Why a growth observation was excluded instead of computed.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthExclusion {
    pub region: String,
    pub period: Year,
    pub reason: String,
}

/// Per-region export value series (free-on-board totals by year).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExportsSeries {
    values: BTreeMap<(String, Year), f64>,
}

impl ExportsSeries {
    /// Builds from rows, validating values and rejecting duplicates.
    pub fn from_rows<I>(source: &str, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Year, f64)>,
    {
        let mut values = BTreeMap::new();
        for (region, year, value) in rows {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Invariant(format!(
                    "{source}: export value must be finite and non-negative, \
                     got {value} at ({region}, {year})"
                )));
            }
            if values.insert((region.clone(), year), value).is_some() {
                return Err(Error::DuplicateKey {
                    file: source.to_string(),
                    key: format!("({region}, {year})"),
                });
            }
        }
        Ok(ExportsSeries { values })
    }

    /// Level at `(region, year)`, if present.
    pub fn get(&self, region: &str, year: Year) -> Option<f64> {
        self.values.get(&(region.to_string(), year)).copied()
    }

    /// Iterates `((region, year), value)` in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, Year), &f64)> {
        self.values.iter()
    }

    /// Per-period growth of the region's exports from `period - 1` to
    /// `period` under the given policy. Exclusions carry the reason.
    pub fn log_growth(
        &self,
        region: &str,
        period: Year,
        policy: GrowthPolicy,
    ) -> std::result::Result<f64, GrowthExclusion> {
        let exclude = |reason: String| GrowthExclusion {
            region: region.to_string(),
            period,
            reason,
        };
        let prev = self
            .get(region, period - 1)
            .ok_or_else(|| exclude(format!("no export value in {}", period - 1)))?;
        let curr = self
            .get(region, period)
            .ok_or_else(|| exclude(format!("no export value in {period}")))?;
        match policy {
            GrowthPolicy::LogDropNonpositive => {
                if prev <= 0.0 || curr <= 0.0 {
                    Err(exclude("non-positive export value under log policy".into()))
                } else {
                    Ok(curr.ln() - prev.ln())
                }
            }
            GrowthPolicy::Asinh => Ok(curr.asinh() - prev.asinh()),
        }
    }
}

/// World export value series by industry and year, with the reporting
/// country's own exports already excluded by the data producer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldExportsSeries {
    values: BTreeMap<(String, Year), f64>,
}

impl WorldExportsSeries {
    /// Builds from rows; world export values must be strictly positive
    /// (their logs are differenced unconditionally).
    pub fn from_rows<I>(source: &str, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Year, f64)>,
    {
        let mut values = BTreeMap::new();
        for (industry, year, value) in rows {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Invariant(format!(
                    "{source}: world export value must be finite and positive, \
                     got {value} at ({industry}, {year})"
                )));
            }
            if values.insert((industry.clone(), year), value).is_some() {
                return Err(Error::DuplicateKey {
                    file: source.to_string(),
                    key: format!("({industry}, {year})"),
                });
            }
        }
        Ok(WorldExportsSeries { values })
    }

    /// Level at `(industry, year)`, if present.
    pub fn get(&self, industry: &str, year: Year) -> Option<f64> {
        self.values.get(&(industry.to_string(), year)).copied()
    }

    /// Iterates `((industry, year), value)` in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, Year), &f64)> {
        self.values.iter()
    }

    /// Log growth from `period - 1` to `period`, if both levels exist.
    pub fn log_growth(&self, industry: &str, period: Year) -> Option<f64> {
        let prev = self.get(industry, period - 1)?;
        let curr = self.get(industry, period)?;
        Some(curr.ln() - prev.ln())
    }

    /// Log-level difference between two arbitrary years (long windows).
    pub fn log_level_diff(&self, industry: &str, from: Year, to: Year) -> Option<f64> {
        let a = self.get(industry, from)?;
        let b = self.get(industry, to)?;
        Some(b.ln() - a.ln())
    }
}

/// Destination-side data for the destination-GDP instrument: GDP levels per
/// destination-year and a base-year snapshot of each region-industry's
/// export destination shares.
#[derive(Debug, Clone, PartialEq)]
pub struct DestinationData {
    gdp: BTreeMap<(String, Year), f64>,
    /// `(region, industry, destination) -> share`, all from one snapshot year.
    shares: BTreeMap<(String, String, String), f64>,
    /// The single snapshot year the shares were taken from.
    share_base_year: Year,
}

/// Tolerance for destination-share sums per `(region, industry)`.
const DEST_SHARE_SUM_TOL: f64 = 1e-9;

impl DestinationData {
    /// Builds from GDP rows and destination-share rows. Shares must come
    /// from a single snapshot year and sum to 1 per `(region, industry)`.
    pub fn from_rows<G, S>(source: &str, gdp_rows: G, share_rows: S) -> Result<Self>
    where
        G: IntoIterator<Item = (String, Year, f64)>,
        S: IntoIterator<Item = (String, String, String, Year, f64)>,
    {
        let mut gdp = BTreeMap::new();
        for (dest, year, value) in gdp_rows {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Invariant(format!(
                    "{source}: destination GDP must be finite and positive, \
                     got {value} at ({dest}, {year})"
                )));
            }
            if gdp.insert((dest.clone(), year), value).is_some() {
                return Err(Error::DuplicateKey {
                    file: source.to_string(),
                    key: format!("gdp ({dest}, {year})"),
                });
            }
        }

        let mut shares = BTreeMap::new();
        let mut base_year: Option<Year> = None;
        for (region, industry, dest, year, share) in share_rows {
            if !share.is_finite() || !(0.0..=1.0).contains(&share) {
                return Err(Error::Invariant(format!(
                    "{source}: destination share must lie in [0, 1], \
                     got {share} at ({region}, {industry}, {dest}, {year})"
                )));
            }
            match base_year {
                None => base_year = Some(year),
                Some(b) if b != year => {
                    return Err(Error::Invariant(format!(
                        "{source}: destination shares mix snapshot years {b} and {year}; \
                         a single base-year vintage is required"
                    )))
                }
                _ => {}
            }
            if shares
                .insert((region.clone(), industry.clone(), dest.clone()), share)
                .is_some()
            {
                return Err(Error::DuplicateKey {
                    file: source.to_string(),
                    key: format!("share ({region}, {industry}, {dest}, {year})"),
                });
            }
        }
        let share_base_year = base_year
            .ok_or_else(|| Error::Invariant(format!("{source}: no destination shares")))?;

        // Per (region, industry), the destination mix must be a distribution.
        let mut sums: BTreeMap<(String, String), f64> = BTreeMap::new();
        for ((region, industry, _), share) in &shares {
            *sums.entry((region.clone(), industry.clone())).or_insert(0.0) += share;
        }
        for ((region, industry), sum) in &sums {
            if (sum - 1.0).abs() > DEST_SHARE_SUM_TOL {
                return Err(Error::Invariant(format!(
                    "{source}: destination shares for ({region}, {industry}) \
                     sum to {sum}, expected 1 within {DEST_SHARE_SUM_TOL:e}"
                )));
            }
        }

        Ok(DestinationData {
            gdp,
            shares,
            share_base_year,
        })
    }

    /// Snapshot year of the destination-share vintage.
    pub fn share_base_year(&self) -> Year {
        self.share_base_year
    }

    /// Log GDP growth of a destination from `period - 1` to `period`.
    pub fn gdp_log_growth(&self, dest: &str, period: Year) -> Option<f64> {
        let prev = self.gdp.get(&(dest.to_string(), period - 1))?;
        let curr = self.gdp.get(&(dest.to_string(), period))?;
        Some(curr.ln() - prev.ln())
    }

    /// Destination shares of `(region, industry)` in the snapshot, sorted by
    /// destination id.
    pub fn shares_for(&self, region: &str, industry: &str) -> Vec<(&str, f64)> {
        self.shares
            .range(
                (region.to_string(), industry.to_string(), String::new())
                    ..=(
                        region.to_string(),
                        industry.to_string(),
                        "\u{10FFFF}".to_string(),
                    ),
            )
            .map(|((_, _, d), v)| (d.as_str(), *v))
            .collect()
    }

    /// Iterates GDP rows `((destination, year), level)` in sorted order.
    pub fn gdp_iter(&self) -> impl Iterator<Item = (&(String, Year), &f64)> {
        self.gdp.iter()
    }

    /// Iterates share rows `((region, industry, destination), share)`.
    pub fn share_iter(&self) -> impl Iterator<Item = (&(String, String, String), &f64)> {
        self.shares.iter()
    }
}
