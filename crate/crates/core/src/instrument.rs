//! Shift-share instrument construction.
//!
//! Three variants share one skeleton — lagged employment shares contracted
//! against an external shifter:
//!
//! * **baseline**: industry world-export log growth as the shifter;
//! * **destination-GDP**: per-industry destination-share-weighted GDP
//!   growth as the shifter (a demand-pull instrument);
//! * **long-difference**: base-year shares against world-export log-level
//!   differences over a long window.
//!
//! Regions whose lagged shares are degenerate (zero employment) are
//! excluded with a logged reason; an industry with positive weight but no
//! shifter is a hard error unless flagged non-exporting, in which case it
//! deliberately contributes zero.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::panel::{DestinationData, RegionPanel, WorldExportsSeries, Year};

/// Which shift-share variant a series was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentKind {
    Baseline,
    DestinationGdp,
    LongDifference,
}

impl InstrumentKind {
    /// Stable lowercase token used in CSV output and CLI flags.
    pub fn token(&self) -> &'static str {
        match self {
            InstrumentKind::Baseline => "baseline",
            InstrumentKind::DestinationGdp => "destination_gdp",
            InstrumentKind::LongDifference => "long_difference",
        }
    }
}

/// How the employment-share vintage was chosen for a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareVintage {
    /// Shares taken at `t - 1` for each base period `t`.
    Lagged,
    /// Shares frozen at a single year (long-difference variant).
    Fixed(Year),
}

/// Provenance metadata carried by an [`InstrumentSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentMeta {
    pub share_vintage: ShareVintage,
    /// Human-readable description of the shifter source.
    pub shifter_source: String,
}

/// A constructed instrument: one value per `(region, base period)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSeries {
    pub kind: InstrumentKind,
    pub meta: InstrumentMeta,
    entries: BTreeMap<(String, Year), f64>,
    exclusions: Vec<(String, Year, String)>,
}

impl InstrumentSeries {
    /// Value at `(region, base_period)`, if constructed.
    pub fn get(&self, region: &str, base_period: Year) -> Option<f64> {
        self.entries.get(&(region.to_string(), base_period)).copied()
    }

    /// Iterates `((region, base_period), value)` in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, Year), &f64)> {
        self.entries.iter()
    }

    /// Region-periods skipped during construction, with reasons.
    pub fn exclusions(&self) -> &[(String, Year, String)] {
        &self.exclusions
    }

    /// Number of constructed entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when nothing was constructed.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders the series as `instrument.csv` content.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id,base_year,kind,value\n");
        for ((region, year), value) in &self.entries {
            out.push_str(&format!("{region},{year},{},{value}\n", self.kind.token()));
        }
        out
    }

    /// Builds a series from already-computed values, checking finiteness
    /// and key uniqueness. Used when reloading a previously written
    /// instrument file.
    pub fn from_entries<I>(kind: InstrumentKind, meta: InstrumentMeta, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Year, f64)>,
    {
        let mut entries = BTreeMap::new();
        for (region, year, value) in rows {
            if !value.is_finite() {
                return Err(Error::Invariant(format!(
                    "instrument value at ({region}, {year}) is not finite"
                )));
            }
            if entries.insert((region.clone(), year), value).is_some() {
                return Err(Error::Invariant(format!(
                    "duplicate instrument entry for ({region}, {year})"
                )));
            }
        }
        Ok(InstrumentSeries {
            kind,
            meta,
            entries,
            exclusions: Vec::new(),
        })
    }

    /// Parses the CSV format written by [`to_csv_string`](Self::to_csv_string).
    /// The `kind` column must be consistent across rows.
    pub fn from_csv_str(source: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Invariant(format!("{source}: empty instrument file")))?
            .1;
        if header.trim() != "region_id,base_year,kind,value" {
            return Err(Error::Invariant(format!(
                "{source}: unexpected instrument header `{header}`"
            )));
        }
        let mut kind: Option<InstrumentKind> = None;
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx as u64 + 1;
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::BadRow {
                    file: source.to_string(),
                    line: lineno,
                    message: format!("expected 4 fields, found {}", parts.len()),
                });
            }
            let year: Year = parts[1].parse().map_err(|_| Error::BadRow {
                file: source.to_string(),
                line: lineno,
                message: format!("bad base_year `{}`", parts[1]),
            })?;
            let row_kind = match parts[2] {
                "baseline" => InstrumentKind::Baseline,
                "destination_gdp" => InstrumentKind::DestinationGdp,
                "long_difference" => InstrumentKind::LongDifference,
                other => {
                    return Err(Error::BadRow {
                        file: source.to_string(),
                        line: lineno,
                        message: format!("unknown instrument kind `{other}`"),
                    })
                }
            };
            match kind {
                None => kind = Some(row_kind),
                Some(k) if k == row_kind => {}
                Some(k) => {
                    return Err(Error::BadRow {
                        file: source.to_string(),
                        line: lineno,
                        message: format!(
                            "mixed instrument kinds: `{}` after `{}`",
                            row_kind.token(),
                            k.token()
                        ),
                    })
                }
            }
            let value: f64 = parts[3].parse().map_err(|_| Error::BadRow {
                file: source.to_string(),
                line: lineno,
                message: format!("bad value `{}`", parts[3]),
            })?;
            rows.push((parts[0].to_string(), year, value));
        }
        let kind = kind
            .ok_or_else(|| Error::Invariant(format!("{source}: instrument file has no rows")))?;
        let meta = InstrumentMeta {
            share_vintage: ShareVintage::Lagged,
            shifter_source: format!("reloaded from {source}"),
        };
        InstrumentSeries::from_entries(kind, meta, rows)
    }
}

/// Tolerance for the employment-share sum check.
pub const SHARE_SUM_TOL: f64 = 1e-9;

fn check_share_sum(shares: &BTreeMap<String, f64>, period: Year) -> Result<()> {
    let sum: f64 = shares.values().sum();
    if (sum - 1.0).abs() > SHARE_SUM_TOL {
        return Err(Error::Invariant(format!(
            "industry shares sum to {sum} in period {period}, expected 1 within {SHARE_SUM_TOL:e}"
        )));
    }
    Ok(())
}

/// Baseline shift-share: `sum_k share_k * shift_k` over industries with
/// positive share. Shares must sum to 1; every positively weighted industry
/// must have a shifter entry.
pub fn shift_share_baseline(
    shares: &BTreeMap<String, f64>,
    shifts: &BTreeMap<String, f64>,
    period: Year,
) -> Result<f64> {
    check_share_sum(shares, period)?;
    let mut value = 0.0;
    for (industry, &share) in shares {
        if share == 0.0 {
            continue;
        }
        let shift = shifts
            .get(industry)
            .copied()
            .ok_or_else(|| Error::MissingShifter {
                industry: industry.clone(),
                period,
            })?;
        if !shift.is_finite() {
            return Err(Error::Invariant(format!(
                "non-finite shifter {shift} for industry {industry} in period {period}"
            )));
        }
        value += share * shift;
    }
    Ok(value)
}

/// Destination-GDP shift-share: for each industry, the shifter is the
/// destination-share-weighted GDP log growth; the outer sum weights those
/// by employment shares. Destination shares must sum to 1 per industry.
pub fn shift_share_destination(
    shares: &BTreeMap<String, f64>,
    dest_shares: &BTreeMap<String, Vec<(String, f64)>>,
    gdp_growth: &BTreeMap<String, f64>,
    period: Year,
) -> Result<f64> {
    let mut shifts = BTreeMap::new();
    for (industry, &share) in shares {
        if share == 0.0 {
            continue;
        }
        let mix = dest_shares
            .get(industry)
            .ok_or_else(|| Error::MissingShifter {
                industry: industry.clone(),
                period,
            })?;
        let mix_sum: f64 = mix.iter().map(|(_, s)| s).sum();
        if (mix_sum - 1.0).abs() > SHARE_SUM_TOL {
            return Err(Error::Invariant(format!(
                "destination shares for industry {industry} sum to {mix_sum}, \
                 expected 1 within {SHARE_SUM_TOL:e}"
            )));
        }
        let mut inner = 0.0;
        for (dest, weight) in mix {
            if *weight == 0.0 {
                continue;
            }
            let growth = gdp_growth.get(dest).copied().ok_or_else(|| {
                Error::Invariant(format!(
                    "no GDP growth for destination {dest} in period {period}"
                ))
            })?;
            inner += weight * growth;
        }
        shifts.insert(industry.clone(), inner);
    }
    shift_share_baseline(shares, &shifts, period)
}

/// Long-difference shift-share: base-year shares against log-level
/// differences of the world series over a long window. Structurally the
/// baseline contraction with a different shifter.
pub fn shift_share_long(
    shares: &BTreeMap<String, f64>,
    long_shifts: &BTreeMap<String, f64>,
    base_year: Year,
) -> Result<f64> {
    shift_share_baseline(shares, long_shifts, base_year)
}

/// Shifter data matching an [`InstrumentKind`].
pub enum ShifterData<'a> {
    /// World export levels, differenced per period (baseline kind).
    World(&'a WorldExportsSeries),
    /// Destination GDP levels plus the destination-share snapshot.
    Destination(&'a DestinationData),
    /// World export levels differenced across a long window.
    WorldLong {
        series: &'a WorldExportsSeries,
        from: Year,
        to: Year,
    },
}

/// Builds the full instrument series for a panel.
///
/// For the per-period kinds, each base period `t` in `base_periods` uses
/// employment shares at `t - 1`; the long-difference kind produces one
/// entry per region keyed at the window start, using start-year shares.
pub fn build_instrument_series(
    panel: &RegionPanel,
    shifters: ShifterData,
    kind: InstrumentKind,
    non_exporting: &BTreeSet<String>,
    base_periods: RangeInclusive<Year>,
) -> Result<InstrumentSeries> {
    let meta = match (&kind, &shifters) {
        (InstrumentKind::Baseline, ShifterData::World(_)) => InstrumentMeta {
            share_vintage: ShareVintage::Lagged,
            shifter_source: "world export log growth".to_string(),
        },
        (InstrumentKind::DestinationGdp, ShifterData::Destination(d)) => InstrumentMeta {
            share_vintage: ShareVintage::Lagged,
            shifter_source: format!(
                "destination GDP log growth, share snapshot {}",
                d.share_base_year()
            ),
        },
        (InstrumentKind::LongDifference, ShifterData::WorldLong { from, to, .. }) => {
            InstrumentMeta {
                share_vintage: ShareVintage::Fixed(*from),
                shifter_source: format!("world export log-level change {from}..{to}"),
            }
        }
        _ => {
            return Err(Error::Config(format!(
                "instrument kind {:?} does not match the provided shifter data",
                kind
            )))
        }
    };

    let mut entries = BTreeMap::new();
    let mut exclusions = Vec::new();

    match shifters {
        ShifterData::World(world) => {
            for &t in base_periods.clone().collect::<Vec<_>>().iter() {
                // One shifter map per period, shared across regions.
                let mut shifts: BTreeMap<String, f64> = BTreeMap::new();
                for industry in panel.industries() {
                    if non_exporting.contains(industry) {
                        shifts.insert(industry.clone(), 0.0);
                    } else if let Some(g) = world.log_growth(industry, t) {
                        shifts.insert(industry.clone(), g);
                    }
                    // Missing growth for an unflagged industry stays absent;
                    // the contraction errors only if it carries weight.
                }
                for region in panel.regions() {
                    match panel.industry_shares(region, t - 1) {
                        Ok(shares) => {
                            let value = shift_share_baseline(&shares, &shifts, t)?;
                            entries.insert((region.clone(), t), value);
                        }
                        Err(Error::DegenerateShares { .. }) => exclusions.push((
                            region.clone(),
                            t,
                            format!("zero total employment in {}", t - 1),
                        )),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        ShifterData::Destination(dest) => {
            for &t in base_periods.clone().collect::<Vec<_>>().iter() {
                // GDP growth per destination for this period.
                let mut gdp_growth: BTreeMap<String, f64> = BTreeMap::new();
                for ((d, year), _) in dest.gdp_iter() {
                    if *year == t {
                        if let Some(g) = dest.gdp_log_growth(d, t) {
                            gdp_growth.insert(d.clone(), g);
                        }
                    }
                }
                for region in panel.regions() {
                    match panel.industry_shares(region, t - 1) {
                        Ok(shares) => {
                            // Compose the per-industry shifter: destination-
                            // weighted GDP growth, or zero when flagged.
                            let mut shifts: BTreeMap<String, f64> = BTreeMap::new();
                            for (industry, &share) in &shares {
                                if share == 0.0 {
                                    continue;
                                }
                                if non_exporting.contains(industry) {
                                    shifts.insert(industry.clone(), 0.0);
                                    continue;
                                }
                                let mix = dest.shares_for(region, industry);
                                if mix.is_empty() {
                                    return Err(Error::MissingShifter {
                                        industry: industry.clone(),
                                        period: t,
                                    });
                                }
                                let mix_sum: f64 = mix.iter().map(|(_, s)| s).sum();
                                if (mix_sum - 1.0).abs() > SHARE_SUM_TOL {
                                    return Err(Error::Invariant(format!(
                                        "destination shares for ({region}, {industry}) \
                                         sum to {mix_sum}, expected 1 within {SHARE_SUM_TOL:e}"
                                    )));
                                }
                                let mut inner = 0.0;
                                for (d, weight) in &mix {
                                    if *weight == 0.0 {
                                        continue;
                                    }
                                    let growth =
                                        gdp_growth.get(*d).copied().ok_or_else(|| {
                                            Error::Invariant(format!(
                                                "no GDP growth for destination {d} in period {t}"
                                            ))
                                        })?;
                                    inner += weight * growth;
                                }
                                shifts.insert(industry.clone(), inner);
                            }
                            let value = shift_share_baseline(&shares, &shifts, t)?;
                            entries.insert((region.clone(), t), value);
                        }
                        Err(Error::DegenerateShares { .. }) => exclusions.push((
                            region.clone(),
                            t,
                            format!("zero total employment in {}", t - 1),
                        )),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        ShifterData::WorldLong { series, from, to } => {
            let mut shifts: BTreeMap<String, f64> = BTreeMap::new();
            for industry in panel.industries() {
                if non_exporting.contains(industry) {
                    shifts.insert(industry.clone(), 0.0);
                } else if let Some(d) = series.log_level_diff(industry, from, to) {
                    shifts.insert(industry.clone(), d);
                }
            }
            for region in panel.regions() {
                match panel.industry_shares(region, from) {
                    Ok(shares) => {
                        let value = shift_share_long(&shares, &shifts, from)?;
                        entries.insert((region.clone(), from), value);
                    }
                    Err(Error::DegenerateShares { .. }) => exclusions.push((
                        region.clone(),
                        from,
                        format!("zero total employment in {from}"),
                    )),
                    Err(e) => return Err(e),
                }
            }
        }
    }

    Ok(InstrumentSeries {
        kind,
        meta,
        entries,
        exclusions,
    })
}
