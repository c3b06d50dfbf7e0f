//! Environmental activity classification and employment slicing.
//!
//! Activities are flagged along two independent axes: `risky` (subject to
//! environmental impact analysis) and a `contribution_level` whose `high`
//! value defines the sustainable flag. Classifications written at one
//! coding level are moved to another through explicit concordances, with a
//! configurable propagation rule (default: a target is flagged as soon as
//! any mapped source is). An annotated panel then yields per-region
//! employment shares of flagged activities and per-slice outcome series
//! that feed the estimators exactly like total employment.
//!
//! Slices are formal-employment slices: informal employment carries no
//! activity codes, so risky/sustainable splits are undefined for it and
//! informal series are handled at the pipeline layer.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::panel::{OutcomeSeries, RegionPanel, Year};

/// Ordered contribution-to-sustainability rating; `High` defines the
/// sustainable flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ContributionLevel {
    None,
    Moderate,
    High,
}

impl ContributionLevel {
    /// CSV token.
    pub fn token(self) -> &'static str {
        match self {
            ContributionLevel::None => "none",
            ContributionLevel::Moderate => "moderate",
            ContributionLevel::High => "high",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        match token {
            "none" => Some(ContributionLevel::None),
            "moderate" => Some(ContributionLevel::Moderate),
            "high" => Some(ContributionLevel::High),
            _ => None,
        }
    }
}

/// How flags propagate when several source codes map to one target code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationRule {
    /// Target flagged iff at least one mapped source is flagged.
    #[default]
    Any,
    /// Target flagged iff every mapped source is flagged.
    All,
    /// Target flagged iff strictly more than half the mapped sources are.
    Majority,
}

impl AggregationRule {
    /// Parses a rule token (`any`, `all`, `majority`).
    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "any" => Ok(AggregationRule::Any),
            "all" => Ok(AggregationRule::All),
            "majority" => Ok(AggregationRule::Majority),
            other => Err(Error::Config(format!(
                "unknown aggregation rule `{other}` (expected any, all, or majority)"
            ))),
        }
    }
}

/// Per-activity risky/sustainability flags; the sustainable flag is
/// `contribution_level == high` by construction, so the two can never
/// disagree.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivityClassification {
    records: BTreeMap<String, (bool, ContributionLevel)>,
}

impl ActivityClassification {
    /// Builds a classification from `(code, risky, level)` records,
    /// rejecting duplicate codes.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, bool, ContributionLevel)>,
    {
        let mut map = BTreeMap::new();
        for (code, risky, level) in records {
            if map.insert(code.clone(), (risky, level)).is_some() {
                return Err(Error::Invariant(format!(
                    "duplicate activity code {code} in classification"
                )));
            }
        }
        Ok(ActivityClassification { records: map })
    }

    /// Parses `classification.csv` content
    /// (`activity_code,risky,contribution_level`).
    pub fn from_csv_str(source: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Invariant(format!("{source}: empty classification file")))?
            .1;
        if header.trim() != "activity_code,risky,contribution_level" {
            return Err(Error::Invariant(format!(
                "{source}: unexpected classification header `{header}`"
            )));
        }
        let mut rows = Vec::new();
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
            let risky = match parts[1] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::BadRow {
                        file: source.to_string(),
                        line: lineno,
                        message: format!("bad risky flag `{other}` (expected true or false)"),
                    })
                }
            };
            let level = ContributionLevel::parse(parts[2]).ok_or_else(|| Error::BadRow {
                file: source.to_string(),
                line: lineno,
                message: format!(
                    "bad contribution level `{}` (expected high, moderate, or none)",
                    parts[2]
                ),
            })?;
            rows.push((parts[0].to_string(), risky, level));
        }
        Self::from_records(rows)
    }

    /// Reads and parses a classification file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&path.display().to_string(), &text)
    }

    /// Renders the classification back to CSV.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("activity_code,risky,contribution_level\n");
        for (code, (risky, level)) in &self.records {
            out.push_str(&format!("{code},{risky},{}\n", level.token()));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `(risky, level)` for a code, if classified.
    pub fn get(&self, code: &str) -> Option<(bool, ContributionLevel)> {
        self.records.get(code).copied()
    }

    /// Whether a code is flagged risky.
    pub fn risky(&self, code: &str) -> Option<bool> {
        self.get(code).map(|(risky, _)| risky)
    }

    /// Whether a code is sustainable (`contribution_level == high`).
    pub fn sustainable(&self, code: &str) -> Option<bool> {
        self.get(code).map(|(_, level)| level == ContributionLevel::High)
    }

    /// Iterates `(code, risky, level)` in code order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, bool, ContributionLevel)> {
        self.records
            .iter()
            .map(|(code, &(risky, level))| (code, risky, level))
    }
}

/// A directed code mapping between two classification levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concordance {
    /// Label used in error messages (usually the file name).
    pub name: String,
    links: BTreeMap<String, BTreeSet<String>>,
}

impl Concordance {
    /// Builds a concordance from `(source, target)` pairs. Duplicate pairs
    /// collapse; an empty pair set is rejected.
    pub fn from_pairs<I>(name: &str, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut links: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (source, target) in pairs {
            links.entry(source).or_default().insert(target);
        }
        if links.is_empty() {
            return Err(Error::Invariant(format!("concordance {name} has no links")));
        }
        Ok(Concordance {
            name: name.to_string(),
            links,
        })
    }

    /// Parses `concordance_*.csv` content (`source_code,target_code`).
    pub fn from_csv_str(source: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::Invariant(format!("{source}: empty concordance file")))?
            .1;
        if header.trim() != "source_code,target_code" {
            return Err(Error::Invariant(format!(
                "{source}: unexpected concordance header `{header}`"
            )));
        }
        let mut pairs = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::BadRow {
                    file: source.to_string(),
                    line: idx as u64 + 1,
                    message: format!("expected 2 fields, found {}", parts.len()),
                });
            }
            pairs.push((parts[0].to_string(), parts[1].to_string()));
        }
        Self::from_pairs(source, pairs)
    }

    /// Reads and parses a concordance file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&path.display().to_string(), &text)
    }

    /// Target codes of a source code.
    pub fn targets(&self, source: &str) -> Option<&BTreeSet<String>> {
        self.links.get(source)
    }

    /// Source codes, sorted.
    pub fn sources(&self) -> impl Iterator<Item = &String> {
        self.links.keys()
    }

    /// Composes `self` then `next` into a single source-to-final mapping.
    /// Errors if an intermediate code of `self` has no links in `next`.
    pub fn compose(&self, next: &Concordance) -> Result<Concordance> {
        let mut pairs = Vec::new();
        let mut missing = BTreeSet::new();
        for (source, mids) in &self.links {
            for mid in mids {
                match next.links.get(mid) {
                    Some(targets) => {
                        for target in targets {
                            pairs.push((source.clone(), target.clone()));
                        }
                    }
                    None => {
                        missing.insert(mid.clone());
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::Invariant(format!(
                "codes not covered by concordance {}: {}",
                next.name,
                missing.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        Concordance::from_pairs(&format!("{}+{}", self.name, next.name), pairs)
    }
}

/// Checks that a declared chain of concordances has no cycle: no code may
/// reach itself by following links through the stages.
pub fn validate_chain(stages: &[Concordance]) -> Result<()> {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for stage in stages {
        for (source, targets) in &stage.links {
            let entry = edges.entry(source.as_str()).or_default();
            for target in targets {
                entry.insert(target.as_str());
            }
        }
    }
    // Iterative depth-first search with an explicit in-progress mark.
    let mut state: BTreeMap<&str, u8> = BTreeMap::new(); // 1 = visiting, 2 = done
    for &start in edges.keys().collect::<Vec<_>>().iter() {
        if state.contains_key(start) {
            continue;
        }
        let mut stack: Vec<(&str, Vec<&str>)> = vec![(
            start,
            edges.get(start).map(|t| t.iter().map(|s| *s).collect()).unwrap_or_default(),
        )];
        state.insert(start, 1);
        while let Some((node, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match state.get(next) {
                    Some(1) => {
                        return Err(Error::Invariant(format!(
                            "concordance chain has a cycle through code {next}"
                        )));
                    }
                    Some(_) => {}
                    None => {
                        state.insert(next, 1);
                        let children = edges
                            .get(next)
                            .map(|t| t.iter().map(|s| *s).collect())
                            .unwrap_or_default();
                        stack.push((next, children));
                    }
                },
                None => {
                    state.insert(node, 2);
                    stack.pop();
                }
            }
        }
    }
    Ok(())
}

/// Moves a classification across one concordance stage.
///
/// Every classified source code must appear in the concordance; targets
/// aggregate their mapped sources' flags under `rule` (risky as a boolean,
/// the contribution level ordinally: `any` takes the maximum level, `all`
/// the minimum, `majority` the highest level held by more than half).
pub fn apply_concordance(
    classification: &ActivityClassification,
    concordance: &Concordance,
    rule: AggregationRule,
) -> Result<ActivityClassification> {
    let unmapped: Vec<&String> = classification
        .records
        .keys()
        .filter(|code| !concordance.links.contains_key(*code))
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::Invariant(format!(
            "codes not covered by concordance {}: {}",
            concordance.name,
            unmapped
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    let mut grouped: BTreeMap<&String, Vec<(bool, ContributionLevel)>> = BTreeMap::new();
    for (code, &flags) in &classification.records {
        for target in &concordance.links[code] {
            grouped.entry(target).or_default().push(flags);
        }
    }

    let mut records = Vec::with_capacity(grouped.len());
    for (target, sources) in grouped {
        let n = sources.len();
        let risky_count = sources.iter().filter(|(risky, _)| *risky).count();
        let risky = match rule {
            AggregationRule::Any => risky_count > 0,
            AggregationRule::All => risky_count == n,
            AggregationRule::Majority => 2 * risky_count > n,
        };
        let level = match rule {
            AggregationRule::Any => sources
                .iter()
                .map(|(_, level)| *level)
                .max()
                .expect("non-empty group"),
            AggregationRule::All => sources
                .iter()
                .map(|(_, level)| *level)
                .min()
                .expect("non-empty group"),
            AggregationRule::Majority => {
                let at_least = |threshold: ContributionLevel| {
                    2 * sources.iter().filter(|(_, l)| *l >= threshold).count() > n
                };
                if at_least(ContributionLevel::High) {
                    ContributionLevel::High
                } else if at_least(ContributionLevel::Moderate) {
                    ContributionLevel::Moderate
                } else {
                    ContributionLevel::None
                }
            }
        };
        records.push((target.clone(), risky, level));
    }
    ActivityClassification::from_records(records)
}

/// A panel whose activity codes all carry risky/sustainable flags.
#[derive(Debug, Clone)]
pub struct AnnotatedPanel<'a> {
    panel: &'a RegionPanel,
    risky: BTreeSet<String>,
    sustainable: BTreeSet<String>,
}

/// Slice labels produced by [`AnnotatedPanel::subgroup_outcomes`].
pub const SLICES: [&str; 5] = ["risky", "nonrisky", "sustainable", "nonsustainable", "total"];

/// Per-slice log employment and log average-wage series.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupSeries {
    /// Log employment per slice, keyed by [`SLICES`] label.
    pub employment: BTreeMap<String, OutcomeSeries>,
    /// Log average wage per slice, keyed by [`SLICES`] label.
    pub wages: BTreeMap<String, OutcomeSeries>,
}

/// Attaches a classification to a panel, requiring every panel activity
/// code to be classified.
pub fn classify_panel<'a>(
    panel: &'a RegionPanel,
    classification: &ActivityClassification,
) -> Result<AnnotatedPanel<'a>> {
    if classification.is_empty() {
        return Err(Error::Invariant(
            "classification is empty; nothing can be flagged".to_string(),
        ));
    }
    let missing: Vec<&String> = panel
        .industries()
        .iter()
        .filter(|code| classification.get(code).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invariant(format!(
            "panel activity codes missing from classification: {}",
            missing
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let mut risky = BTreeSet::new();
    let mut sustainable = BTreeSet::new();
    for code in panel.industries() {
        if classification.risky(code) == Some(true) {
            risky.insert(code.clone());
        }
        if classification.sustainable(code) == Some(true) {
            sustainable.insert(code.clone());
        }
    }
    Ok(AnnotatedPanel {
        panel,
        risky,
        sustainable,
    })
}

impl<'a> AnnotatedPanel<'a> {
    /// The underlying panel.
    pub fn panel(&self) -> &'a RegionPanel {
        self.panel
    }

    /// Codes flagged risky, restricted to codes present in the panel.
    pub fn risky_codes(&self) -> &BTreeSet<String> {
        &self.risky
    }

    /// Codes flagged sustainable, restricted to codes present in the panel.
    pub fn sustainable_codes(&self) -> &BTreeSet<String> {
        &self.sustainable
    }

    /// `(risky, sustainable, total)` counts of panel activity codes.
    pub fn flag_counts(&self) -> (usize, usize, usize) {
        (
            self.risky.len(),
            self.sustainable.len(),
            self.panel.industries().len(),
        )
    }

    fn complement(&self, flagged: &BTreeSet<String>) -> BTreeSet<String> {
        self.panel
            .industries()
            .iter()
            .filter(|code| !flagged.contains(*code))
            .cloned()
            .collect()
    }

    /// Flagged employment counts `(risky, sustainable, total)` for one
    /// region-year; the integer partition `risky + nonrisky = total` is
    /// exact by construction.
    pub fn employment_counts(&self, region: &str, year: Year) -> Result<(u64, u64, u64)> {
        let r = self
            .panel
            .region_index(region)
            .ok_or_else(|| Error::Invariant(format!("unknown region {region}")))?;
        let mut risky = 0u64;
        let mut sustainable = 0u64;
        let mut total = 0u64;
        for (k, code) in self.panel.industries().iter().enumerate() {
            if let Some(cell) = self.panel.cell_at(r, k, year) {
                total += cell.employment;
                if self.risky.contains(code) {
                    risky += cell.employment;
                }
                if self.sustainable.contains(code) {
                    sustainable += cell.employment;
                }
            }
        }
        Ok((risky, sustainable, total))
    }

    /// `(risky_share, sustainable_share)` of employment in a region-year.
    /// The complementary shares are `1 - x` exactly.
    pub fn shares(&self, region: &str, year: Year) -> Result<(f64, f64)> {
        let (risky, sustainable, total) = self.employment_counts(region, year)?;
        if total == 0 {
            return Err(Error::DegenerateShares {
                region: region.to_string(),
                period: year,
            });
        }
        Ok((
            risky as f64 / total as f64,
            sustainable as f64 / total as f64,
        ))
    }

    /// Log employment and log average-wage series for every slice.
    /// Region-years with zero employment in a slice are excluded and
    /// reported on the series, never zero-filled.
    pub fn subgroup_outcomes(&self) -> SubgroupSeries {
        let nonrisky = self.complement(&self.risky);
        let nonsustainable = self.complement(&self.sustainable);
        let sets: [(&str, Option<&BTreeSet<String>>); 5] = [
            ("risky", Some(&self.risky)),
            ("nonrisky", Some(&nonrisky)),
            ("sustainable", Some(&self.sustainable)),
            ("nonsustainable", Some(&nonsustainable)),
            ("total", None),
        ];
        let mut employment = BTreeMap::new();
        let mut wages = BTreeMap::new();
        for (label, set) in sets {
            employment.insert(
                label.to_string(),
                self.panel
                    .log_employment_series(&format!("employment_{label}"), set),
            );
            wages.insert(
                label.to_string(),
                self.panel.log_wage_series(&format!("wage_{label}"), set),
            );
        }
        SubgroupSeries { employment, wages }
    }

    /// Cross-region Pearson correlation between risky and sustainable
    /// employment shares in one year, with the number of regions used.
    pub fn share_correlation(&self, year: Year) -> Result<(f64, usize)> {
        let mut pairs = Vec::new();
        for region in self.panel.regions() {
            let (risky, sustainable, total) = self.employment_counts(region, year)?;
            if total > 0 {
                pairs.push((
                    risky as f64 / total as f64,
                    sustainable as f64 / total as f64,
                ));
            }
        }
        let n = pairs.len();
        if n < 3 {
            return Err(Error::Estimation(format!(
                "share correlation needs at least 3 regions with employment, found {n}"
            )));
        }
        let rm = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let sm = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let mut srr = 0.0;
        let mut sss = 0.0;
        let mut srs = 0.0;
        for (r, s) in &pairs {
            srr += (r - rm) * (r - rm);
            sss += (s - sm) * (s - sm);
            srs += (r - rm) * (s - sm);
        }
        if srr <= 0.0 || sss <= 0.0 {
            return Err(Error::Estimation(
                "share correlation undefined: a share has zero cross-region variance".to_string(),
            ));
        }
        Ok((srs / (srr * sss).sqrt(), n))
    }
}
