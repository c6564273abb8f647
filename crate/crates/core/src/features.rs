//! Regression rows per location mention and their encoding into a design
//! matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::authors::{posted_in_all_phases, AuthorProfile, LocalProvenance, OrgProvenance};
use crate::corpus::{AnnotatedPost, SECONDS_PER_DAY};
use crate::gazetteer::RegionSpec;
use crate::mentions::{LocationMention, MentionKey};
use crate::timeline::{phase_of, PeakInfo, Phase};

pub const RARE: &str = "RARE";
pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Static factors in group-based corpora.
    Rq1Grouped,
    /// Static factors in event-based corpora.
    Rq1Event,
    /// Adds collective-attention timing.
    Rq2a,
    /// Adds per-author history and audience engagement.
    Rq2b,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Rq1Grouped, Analysis::Rq1Event, Analysis::Rq2a, Analysis::Rq2b];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Rq1Grouped => "rq1_grouped",
            Analysis::Rq1Event => "rq1_event",
            Analysis::Rq2a => "rq2a",
            Analysis::Rq2b => "rq2b",
        }
    }

    pub fn needs_peaks(self) -> bool {
        matches!(self, Analysis::Rq2a | Analysis::Rq2b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    /// z-scored before fitting.
    Numeric,
    /// 0/1, left unscaled.
    Binary,
    /// One-hot encoded against a reference level.
    FixedEffect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorPopulation {
    All,
    /// At or above the activity percentile.
    Active,
    /// Below the activity percentile.
    Regular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Label used for artifact names; defaults to the analysis name.
    pub name: Option<String>,
    pub analysis: Analysis,
    /// Replace the author locality/organization columns by an author fixed effect.
    pub author_fixed_effects: bool,
    pub rare_threshold: usize,
    pub author_rare_threshold: usize,
    /// log1p-transform prior_location_mentions.
    pub log_prior_mentions: bool,
    pub author_population: AuthorPopulation,
    /// Keep only authors whose mentions cover every phase.
    pub require_all_phases: bool,
    /// Restrict rows to these events; empty means all.
    pub events: BTreeSet<String>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec::new(Analysis::Rq1Event)
    }
}

impl AnalysisSpec {
    pub fn new(analysis: Analysis) -> Self {
        let rq2b = analysis == Analysis::Rq2b;
        AnalysisSpec {
            name: None,
            analysis,
            author_fixed_effects: false,
            rare_threshold: 20,
            author_rare_threshold: 2,
            log_prior_mentions: true,
            author_population: if rq2b { AuthorPopulation::Active } else { AuthorPopulation::All },
            require_all_phases: rq2b,
            events: BTreeSet::new(),
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let base = self.analysis.as_str();
            if self.author_fixed_effects {
                format!("{base}_author_fe")
            } else {
                base.to_string()
            }
        })
    }

    /// Columns of the analysis in report order, excluding the intercept.
    pub fn columns(&self) -> Vec<(&'static str, ColumnType)> {
        use ColumnType::*;
        let a = self.analysis;
        let mut cols = vec![("prior_location_mentions", Numeric)];
        match a {
            Analysis::Rq1Grouped => {
                cols.extend([
                    ("author_in_group_posts", Numeric),
                    ("location_local_to_group", Binary),
                    ("group_size", Numeric),
                ]);
            }
            Analysis::Rq1Event | Analysis::Rq2a | Analysis::Rq2b => {
                if !self.author_fixed_effects {
                    cols.extend([
                        ("is_organization", Binary),
                        ("is_organization_unknown", Binary),
                        ("is_local", Binary),
                        ("is_local_unknown", Binary),
                    ]);
                }
                if a == Analysis::Rq2b {
                    cols.extend([
                        ("author_event_posts", Numeric),
                        ("author_event_location_posts", Numeric),
                        ("prior_engagement", Numeric),
                        ("delta_prior_engagement", Numeric),
                        ("engagement_missing", Binary),
                    ]);
                }
                cols.extend([("has_url", Binary), ("has_media", Binary)]);
                if a.needs_peaks() {
                    cols.extend([("days_since_start", Numeric), ("during_peak", Binary), ("post_peak", Binary)]);
                }
            }
        }
        cols.push(("location_id", FixedEffect));
        match a {
            Analysis::Rq1Grouped => cols.push(("group_id", FixedEffect)),
            _ => cols.push(("event_id", FixedEffect)),
        }
        if self.author_fixed_effects {
            cols.push(("author_id", FixedEffect));
        }
        cols
    }

    fn rare_threshold_for(&self, column: &str) -> usize {
        if column == "author_id" {
            self.author_rare_threshold
        } else {
            self.rare_threshold
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub key: MentionKey,
    pub y: u8,
    pub timestamp: i64,
    /// Numeric and binary columns.
    pub values: BTreeMap<String, f64>,
    /// Fixed-effect columns.
    pub categories: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("analysis {analysis} needs {what}")]
    MissingPrerequisite { analysis: &'static str, what: &'static str },
    #[error("no rows for analysis {0}")]
    NoRows(String),
}

/// Everything row building reads.
pub struct FeatureInputs<'a> {
    pub posts: &'a [AnnotatedPost],
    /// Mentions with descriptor annotations.
    pub mentions: &'a [LocationMention],
    pub profiles: &'a BTreeMap<String, AuthorProfile>,
    /// Peaks per (event, location), already sparse-filtered.
    pub peaks: Option<&'a BTreeMap<(String, u64), PeakInfo>>,
    /// Home region of each group.
    pub group_regions: &'a BTreeMap<String, RegionSpec>,
}

/// Sorted timestamps; counts strictly earlier entries.
#[derive(Default)]
struct Timeline(Vec<i64>);

impl Timeline {
    fn finish(&mut self) {
        self.0.sort_unstable();
    }

    fn before(&self, t: i64) -> usize {
        self.0.partition_point(|&x| x < t)
    }
}

/// Per-event author-day engagement z-scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngagementTable {
    z: BTreeMap<(String, String, i64), f64>,
}

impl EngagementTable {
    /// e(a, t) is the mean log1p engagement over the author's posts that day;
    /// values are z-scored across all author-days of the event (population
    /// sd; zero sd gives z = 0).
    pub fn build(posts: &[AnnotatedPost]) -> Self {
        let mut sums: BTreeMap<(String, String, i64), (f64, usize)> = BTreeMap::new();
        for p in posts {
            if let Some(e) = p.engagement {
                let slot = sums.entry((p.event_id.clone(), p.author_id.clone(), p.day())).or_default();
                slot.0 += e.ln_1p();
                slot.1 += 1;
            }
        }
        let mut by_event: BTreeMap<String, Vec<((String, String, i64), f64)>> = BTreeMap::new();
        for (k, (s, n)) in sums {
            by_event.entry(k.0.clone()).or_default().push((k, s / n as f64));
        }
        let mut z = BTreeMap::new();
        for (_, cells) in by_event {
            let n = cells.len() as f64;
            let mean = cells.iter().map(|(_, v)| v).sum::<f64>() / n;
            let var = cells.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for (k, v) in cells {
                z.insert(k, if sd > 0.0 { (v - mean) / sd } else { 0.0 });
            }
        }
        EngagementTable { z }
    }

    pub fn z(&self, event: &str, author: &str, day: i64) -> Option<f64> {
        self.z.get(&(event.to_string(), author.to_string(), day)).copied()
    }

    /// (prior_engagement, delta_prior_engagement, missing) for a post on `day`.
    pub fn features(&self, event: &str, author: &str, day: i64) -> (f64, f64, bool) {
        let z1 = self.z(event, author, day - 1);
        let z2 = self.z(event, author, day - 2).unwrap_or(0.0);
        let prior = z1.unwrap_or(0.0);
        (prior, prior - z2, z1.is_none())
    }
}

/// Builds one row per eligible mention, sorted by (timestamp, post, span).
pub fn build_rows(inputs: &FeatureInputs<'_>, spec: &AnalysisSpec) -> Result<Vec<FeatureRow>, FeatureError> {
    let analysis = spec.analysis;
    let empty_peaks = BTreeMap::new();
    let peaks = match inputs.peaks {
        Some(p) => p,
        None if analysis.needs_peaks() || spec.require_all_phases => {
            return Err(FeatureError::MissingPrerequisite { analysis: analysis.as_str(), what: "attention peaks" })
        }
        None => &empty_peaks,
    };
    let grouped = analysis == Analysis::Rq1Grouped;
    let posts: HashMap<&str, &AnnotatedPost> = inputs.posts.iter().map(|p| (p.post_id.as_str(), p)).collect();
    let in_scope = |p: &AnnotatedPost| spec.events.is_empty() || spec.events.contains(&p.event_id);

    let scope_of = |p: &AnnotatedPost| -> Option<String> {
        if grouped {
            p.group_id.clone()
        } else {
            Some(p.event_id.clone())
        }
    };

    let mut location_times: HashMap<(String, u64), Timeline> = HashMap::new();
    let mut author_event_times: HashMap<(&str, &str), Timeline> = HashMap::new();
    let mut author_event_location_times: HashMap<(&str, &str, u64), Timeline> = HashMap::new();
    let mut event_start: BTreeMap<&str, i64> = BTreeMap::new();
    let mut group_members: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut group_posts: HashMap<(&str, &str), usize> = HashMap::new();

    for p in inputs.posts {
        author_event_times.entry((&p.author_id, &p.event_id)).or_default().0.push(p.timestamp);
        event_start.entry(&p.event_id).and_modify(|t| *t = (*t).min(p.timestamp)).or_insert(p.timestamp);
        if let Some(g) = p.group_id.as_deref() {
            group_members.entry(g).or_default().insert(&p.author_id);
            *group_posts.entry((g, &p.author_id)).or_default() += 1;
        }
    }
    let mut seen_post_location = BTreeSet::new();
    for m in inputs.mentions {
        let Some(p) = posts.get(m.post_id.as_str()) else { continue };
        if let Some(scope) = scope_of(p) {
            location_times.entry((scope, m.location_id())).or_default().0.push(m.timestamp);
        }
        if seen_post_location.insert((m.post_id.as_str(), m.location_id())) {
            author_event_location_times
                .entry((&p.author_id, &p.event_id, m.location_id()))
                .or_default()
                .0
                .push(p.timestamp);
        }
    }
    location_times.values_mut().for_each(Timeline::finish);
    author_event_times.values_mut().for_each(Timeline::finish);
    author_event_location_times.values_mut().for_each(Timeline::finish);

    let engagement =
        if analysis == Analysis::Rq2b { EngagementTable::build(inputs.posts) } else { EngagementTable::default() };

    let authors_by_post: BTreeMap<String, String> =
        inputs.posts.iter().map(|p| (p.post_id.clone(), p.author_id.clone())).collect();
    let mut all_phases_cache: HashMap<(&str, &str), bool> = HashMap::new();

    let mut rows = Vec::new();
    for m in inputs.mentions {
        if m.is_context {
            continue;
        }
        let Some(p) = posts.get(m.post_id.as_str()).copied() else { continue };
        if !in_scope(p) {
            continue;
        }
        let Some(scope) = scope_of(p) else { continue };
        let profile = inputs.profiles.get(&p.author_id);
        match spec.author_population {
            AuthorPopulation::All => {}
            AuthorPopulation::Active | AuthorPopulation::Regular => {
                let active = profile.is_some_and(|a| a.active_events.contains(&p.event_id));
                if active != (spec.author_population == AuthorPopulation::Active) {
                    continue;
                }
            }
        }
        let peak = peaks.get(&(m.event_id.clone(), m.location_id()));
        if analysis.needs_peaks() && peak.is_none() {
            continue;
        }
        if spec.require_all_phases {
            let ok = *all_phases_cache.entry((&p.author_id, &p.event_id)).or_insert_with(|| {
                posted_in_all_phases(&p.author_id, &p.event_id, inputs.mentions, &authors_by_post, peaks)
            });
            if !ok {
                continue;
            }
        }

        let mut values = BTreeMap::new();
        let mut categories = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            values.insert(k.to_string(), v);
        };
        let prior = location_times[&(scope.clone(), m.location_id())].before(m.timestamp) as f64;
        put("prior_location_mentions", if spec.log_prior_mentions { prior.ln_1p() } else { prior });
        match analysis {
            Analysis::Rq1Grouped => {
                let g = p.group_id.as_deref().expect("grouped scope implies group");
                put("author_in_group_posts", group_posts[&(g, p.author_id.as_str())] as f64);
                let local = inputs.group_regions.get(g).is_some_and(|r| r.contains(&m.entry));
                put("location_local_to_group", f64::from(u8::from(local)));
                put("group_size", group_members[g].len() as f64);
            }
            _ => {
                if !spec.author_fixed_effects {
                    let (org, org_unknown) = match profile.map(|a| a.organization) {
                        Some(s) if s.provenance != OrgProvenance::NoMetadata => (s.is_organization, false),
                        _ => (false, true),
                    };
                    let (local, local_unknown) = match profile.map(|a| a.local) {
                        Some(s) if s.provenance != LocalProvenance::NoProfile => (s.is_local, false),
                        _ => (false, true),
                    };
                    put("is_organization", f64::from(u8::from(org)));
                    put("is_organization_unknown", f64::from(u8::from(org_unknown)));
                    put("is_local", f64::from(u8::from(local)));
                    put("is_local_unknown", f64::from(u8::from(local_unknown)));
                }
                if analysis == Analysis::Rq2b {
                    let ae = author_event_times[&(p.author_id.as_str(), p.event_id.as_str())].before(p.timestamp);
                    let ael = author_event_location_times
                        [&(p.author_id.as_str(), p.event_id.as_str(), m.location_id())]
                        .before(p.timestamp);
                    put("author_event_posts", (ae as f64).ln_1p());
                    put("author_event_location_posts", (ael as f64).ln_1p());
                    let (prior_e, delta_e, missing) = engagement.features(&p.event_id, &p.author_id, p.day());
                    put("prior_engagement", prior_e);
                    put("delta_prior_engagement", delta_e);
                    put("engagement_missing", f64::from(u8::from(missing)));
                }
                put("has_url", f64::from(u8::from(p.has_url)));
                put("has_media", f64::from(u8::from(p.has_media)));
                if let Some(peak) = peak.filter(|_| analysis.needs_peaks()) {
                    let start = event_start[p.event_id.as_str()];
                    put("days_since_start", (p.timestamp - start) as f64 / SECONDS_PER_DAY as f64);
                    let phase = phase_of(m.timestamp, peak);
                    put("during_peak", f64::from(u8::from(phase == Phase::During)));
                    put("post_peak", f64::from(u8::from(phase == Phase::Post)));
                }
            }
        }
        categories.insert("location_id".to_string(), m.location_id().to_string());
        if grouped {
            categories.insert("group_id".to_string(), scope.clone());
        } else {
            categories.insert("event_id".to_string(), p.event_id.clone());
        }
        if spec.author_fixed_effects {
            categories.insert("author_id".to_string(), p.author_id.clone());
        }
        rows.push(FeatureRow {
            key: m.key(),
            y: u8::from(m.has_descriptor),
            timestamp: m.timestamp,
            values,
            categories,
        });
    }
    rows.sort_by(|a, b| (a.timestamp, &a.key).cmp(&(b.timestamp, &b.key)));
    Ok(rows)
}

/// Maps categories seen fewer than `threshold` times to RARE. Returns the
/// binned column and the original -> binned mapping for changed values.
pub fn bin_rare_categories(column: &[String], threshold: usize) -> (Vec<String>, BTreeMap<String, String>) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in column {
        *counts.entry(v).or_default() += 1;
    }
    let mapping: BTreeMap<String, String> =
        counts.iter().filter(|(_, &c)| c < threshold).map(|(v, _)| (v.to_string(), RARE.to_string())).collect();
    let binned = column.iter().map(|v| mapping.get(v).cloned().unwrap_or_else(|| v.clone())).collect();
    (binned, mapping)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncodedColumn {
    Intercept,
    Numeric { source: String, mean: f64, sd: f64 },
    Binary { source: String },
    Level { source: String, level: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    #[serde(flatten)]
    pub encoding: EncodedColumn,
}

impl ColumnMeta {
    pub fn source(&self) -> &str {
        match &self.encoding {
            EncodedColumn::Intercept => INTERCEPT,
            EncodedColumn::Numeric { source, .. }
            | EncodedColumn::Binary { source }
            | EncodedColumn::Level { source, .. } => source,
        }
    }

    pub fn is_fixed_effect(&self) -> bool {
        matches!(self.encoding, EncodedColumn::Level { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffectMeta {
    pub source: String,
    pub reference: String,
    pub levels: Vec<String>,
    pub rare_mapping: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub source: String,
    pub constant: f64,
    pub warning: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub analysis: String,
    pub columns: Vec<ColumnMeta>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub row_keys: Vec<MentionKey>,
    pub fixed_effects: Vec<FixedEffectMeta>,
    pub dropped: Vec<DroppedColumn>,
    pub standardized: bool,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Encodes new rows with this matrix's levels and standardization stats.
    /// Levels unseen at fit time fall back to the reference.
    pub fn encode_rows(&self, rows: &[FeatureRow]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(rows.len(), self.columns.len());
        for (i, r) in rows.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                x[(i, j)] = match &c.encoding {
                    EncodedColumn::Intercept => 1.0,
                    EncodedColumn::Numeric { source, mean, sd } => (r.values[source] - mean) / sd,
                    EncodedColumn::Binary { source } => r.values[source],
                    EncodedColumn::Level { source, level } => {
                        let meta = self.fixed_effects.iter().find(|f| &f.source == source).expect("meta");
                        let raw = &r.categories[source];
                        let v = meta.rare_mapping.get(raw).unwrap_or(raw);
                        f64::from(u8::from(v == level))
                    }
                };
            }
        }
        x
    }

    /// Recovers each row's values and categories (after RARE binning).
    pub fn decode(&self) -> Vec<(BTreeMap<String, f64>, BTreeMap<String, String>)> {
        (0..self.nrows())
            .map(|i| {
                let mut values = BTreeMap::new();
                let mut categories: BTreeMap<String, String> =
                    self.fixed_effects.iter().map(|f| (f.source.clone(), f.reference.clone())).collect();
                for (j, c) in self.columns.iter().enumerate() {
                    let v = self.x[(i, j)];
                    match &c.encoding {
                        EncodedColumn::Intercept => {}
                        EncodedColumn::Numeric { source, mean, sd } => {
                            values.insert(source.clone(), v * sd + mean);
                        }
                        EncodedColumn::Binary { source } => {
                            values.insert(source.clone(), v);
                        }
                        EncodedColumn::Level { source, level } => {
                            if v == 1.0 {
                                categories.insert(source.clone(), level.clone());
                            }
                        }
                    }
                }
                for d in &self.dropped {
                    values.insert(d.source.clone(), d.constant);
                }
                (values, categories)
            })
            .collect()
    }

    /// Tab-separated export; metadata lines start with `#`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# analysis={} rows={} standardized={}", self.analysis, self.nrows(), self.standardized).unwrap();
        for c in &self.columns {
            writeln!(out, "# column {}", serde_json::to_string(c).unwrap()).unwrap();
        }
        for f in &self.fixed_effects {
            writeln!(out, "# fixed_effect {}", serde_json::to_string(f).unwrap()).unwrap();
        }
        for d in &self.dropped {
            writeln!(out, "# dropped {}", serde_json::to_string(d).unwrap()).unwrap();
        }
        out.push_str("post_id\tspan\ty");
        for c in &self.columns {
            write!(out, "\t{}", c.name).unwrap();
        }
        out.push('\n');
        for i in 0..self.nrows() {
            let k = &self.row_keys[i];
            write!(out, "{}\t{}\t{}", k.post_id, k.span, self.y[i]).unwrap();
            for j in 0..self.ncols() {
                write!(out, "\t{}", self.x[(i, j)]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Encodes rows: intercept, then each column of `spec` in order. Numeric
/// columns are z-scored when `standardize_numeric`; fixed effects are RARE
/// binned and one-hot encoded against their first sorted level. Constant
/// columns are dropped and recorded.
pub fn encode(
    rows: &[FeatureRow],
    spec: &AnalysisSpec,
    standardize_numeric: bool,
) -> Result<DesignMatrix, FeatureError> {
    if rows.is_empty() {
        return Err(FeatureError::NoRows(spec.label()));
    }
    let n = rows.len();
    let mut columns = vec![ColumnMeta { name: INTERCEPT.into(), encoding: EncodedColumn::Intercept }];
    let mut data: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut fixed_effects = Vec::new();
    let mut dropped = Vec::new();

    for (name, kind) in spec.columns() {
        match kind {
            ColumnType::Numeric | ColumnType::Binary => {
                let col: Vec<f64> = rows.iter().map(|r| r.values[name]).collect();
                let mean = col.iter().sum::<f64>() / n as f64;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                if col.iter().all(|&v| v == col[0]) {
                    dropped.push(DroppedColumn {
                        source: name.into(),
                        constant: col[0],
                        warning: format!("column {name} is constant ({}) and was dropped", col[0]),
                    });
                    continue;
                }
                if kind == ColumnType::Numeric && standardize_numeric {
                    data.push(col.iter().map(|v| (v - mean) / sd).collect());
                    columns.push(ColumnMeta {
                        name: name.into(),
                        encoding: EncodedColumn::Numeric { source: name.into(), mean, sd },
                    });
                } else if kind == ColumnType::Numeric {
                    data.push(col);
                    columns.push(ColumnMeta {
                        name: name.into(),
                        encoding: EncodedColumn::Numeric { source: name.into(), mean: 0.0, sd: 1.0 },
                    });
                } else {
                    data.push(col);
                    columns.push(ColumnMeta {
                        name: name.into(),
                        encoding: EncodedColumn::Binary { source: name.into() },
                    });
                }
            }
            ColumnType::FixedEffect => {
                let raw: Vec<String> = rows.iter().map(|r| r.categories[name].clone()).collect();
                let (binned, rare_mapping) = bin_rare_categories(&raw, spec.rare_threshold_for(name));
                let levels: Vec<String> = binned.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                let reference = levels[0].clone();
                for level in &levels[1..] {
                    data.push(binned.iter().map(|v| f64::from(u8::from(v == level))).collect());
                    columns.push(ColumnMeta {
                        name: format!("{name}={level}"),
                        encoding: EncodedColumn::Level { source: name.into(), level: level.clone() },
                    });
                }
                fixed_effects.push(FixedEffectMeta { source: name.into(), reference, levels, rare_mapping });
            }
        }
    }
    let p = data.len();
    let x = DMatrix::from_fn(n, p, |i, j| data[j][i]);
    let y = DVector::from_iterator(n, rows.iter().map(|r| f64::from(r.y)));
    Ok(DesignMatrix {
        analysis: spec.label(),
        columns,
        x,
        y,
        row_keys: rows.iter().map(|r| r.key.clone()).collect(),
        fixed_effects,
        dropped,
        standardized: standardize_numeric,
    })
}
