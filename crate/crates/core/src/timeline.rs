//! Per-location daily timelines, attention peaks and pre/during/post phases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mentions::LocationMention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    /// UTC day number (days since the Unix epoch).
    pub day: i64,
    pub mention_count: u64,
    pub descriptor_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineSeries {
    pub location_id: u64,
    pub event_id: String,
    /// Contiguous days from the first to the last active day.
    pub bins: Vec<Bin>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimelineError {
    #[error("no mentions to build a timeline from")]
    EmptyInput,
    #[error("mentions span several locations or events")]
    MixedSeries,
}

impl TimelineSeries {
    pub fn total_mentions(&self) -> u64 {
        self.bins.iter().map(|b| b.mention_count).sum()
    }

    pub fn active_days(&self) -> usize {
        self.bins.iter().filter(|b| b.mention_count > 0).count()
    }

    /// Bins as (day, f_t, d_t) triples.
    pub fn counts(&self) -> impl Iterator<Item = (i64, u64, u64)> + '_ {
        self.bins.iter().map(|b| (b.day, b.mention_count, b.descriptor_count))
    }
}

/// Bins the mentions of one (location, event) pair by UTC day.
pub fn build_timeline(mentions: &[&LocationMention]) -> Result<TimelineSeries, TimelineError> {
    let first = mentions.first().ok_or(TimelineError::EmptyInput)?;
    let mut per_day: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for m in mentions {
        if m.location_id() != first.location_id() || m.event_id != first.event_id {
            return Err(TimelineError::MixedSeries);
        }
        let slot = per_day.entry(m.day()).or_default();
        slot.0 += 1;
        slot.1 += u64::from(m.has_descriptor);
    }
    let lo = *per_day.keys().next().expect("non-empty");
    let hi = *per_day.keys().next_back().expect("non-empty");
    let bins = (lo..=hi)
        .map(|day| {
            let (f, d) = per_day.get(&day).copied().unwrap_or((0, 0));
            Bin { day, mention_count: f, descriptor_count: d }
        })
        .collect();
    Ok(TimelineSeries { location_id: first.location_id(), event_id: first.event_id.clone(), bins })
}

/// Timelines for every (event, location) pair, keyed in that order.
pub fn build_timelines<'a>(
    mentions: impl IntoIterator<Item = &'a LocationMention>,
) -> BTreeMap<(String, u64), TimelineSeries> {
    let mut groups: BTreeMap<(String, u64), Vec<&LocationMention>> = BTreeMap::new();
    for m in mentions {
        groups.entry((m.event_id.clone(), m.location_id())).or_default().push(m);
    }
    groups.into_iter().map(|(k, ms)| (k, build_timeline(&ms).expect("grouped by key and non-empty"))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeakInfo {
    pub peak_day: i64,
    pub t_buffer: i64,
}

impl PeakInfo {
    /// First day of the during-peak window.
    pub fn during_start(&self) -> i64 {
        self.peak_day - self.t_buffer
    }

    /// Last day of the during-peak window.
    pub fn during_end(&self) -> i64 {
        self.peak_day + self.t_buffer
    }
}

/// Earliest day with the largest mention count. `None` for a series with no
/// bins.
pub fn find_peak(series: &TimelineSeries, t_buffer: i64) -> Option<PeakInfo> {
    assert!(t_buffer >= 0, "t_buffer must be non-negative");
    let mut best: Option<&Bin> = None;
    for b in &series.bins {
        if best.is_none_or(|x| b.mention_count > x.mention_count) {
            best = Some(b);
        }
    }
    best.map(|b| PeakInfo { peak_day: b.day, t_buffer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    During,
    Post,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Pre, Phase::During, Phase::Post];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::During => "during",
            Phase::Post => "post",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

pub fn phase_of_day(day: i64, peak: &PeakInfo) -> Phase {
    if day < peak.during_start() {
        Phase::Pre
    } else if day <= peak.during_end() {
        Phase::During
    } else {
        Phase::Post
    }
}

pub fn phase_of(timestamp: i64, peak: &PeakInfo) -> Phase {
    phase_of_day(crate::corpus::utc_day(timestamp), peak)
}

/// Keeps series with at least `min_dates` days of nonzero mentions.
pub fn filter_sparse_locations(series: Vec<TimelineSeries>, min_dates: usize) -> Vec<TimelineSeries> {
    series.into_iter().filter(|s| s.active_days() >= min_dates).collect()
}

/// Per-day descriptor rate d_t / f_t; `None` where f_t = 0.
pub fn descriptor_rate_series(series: &TimelineSeries) -> Vec<(i64, Option<f64>)> {
    series
        .bins
        .iter()
        .map(|b| {
            let rate = (b.mention_count > 0).then(|| b.descriptor_count as f64 / b.mention_count as f64);
            (b.day, rate)
        })
        .collect()
}

/// Peaks per (event, location) for the series kept by the sparse filter.
pub fn peaks_for(
    timelines: &BTreeMap<(String, u64), TimelineSeries>,
    t_buffer: i64,
    min_dates: usize,
) -> BTreeMap<(String, u64), PeakInfo> {
    timelines
        .iter()
        .filter(|(_, s)| s.active_days() >= min_dates)
        .filter_map(|(k, s)| find_peak(s, t_buffer).map(|p| (k.clone(), p)))
        .collect()
}

/// The set of phases covered by a collection of mention days.
pub fn phases_covered(days_and_peaks: impl IntoIterator<Item = (i64, PeakInfo)>) -> BTreeSet<Phase> {
    days_and_peaks.into_iter().map(|(d, p)| phase_of_day(d, &p)).collect()
}
