//! Location mentions: LOCATION-tagged spans that resolve uniquely inside the
//! event's affected region.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{entity_spans, AnnotatedPost, EntityType};
use crate::descriptors::PatternKind;
use crate::gazetteer::{resolve, GazetteerEntry, GazetteerIndex, RegionSpec, ResolutionResult};

/// Inclusive 1-based token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start >= 1 && start <= end);
        Span { start, end }
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Unique key of a mention within a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionKey {
    pub post_id: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationMention {
    pub post_id: String,
    pub span: Span,
    pub surface: String,
    pub entry: GazetteerEntry,
    pub event_id: String,
    pub timestamp: i64,
    pub has_descriptor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor_kind: Option<PatternKind>,
    /// The mention lies inside another mention's descriptor phrase
    /// ("Puerto Rico" in "San Juan, Puerto Rico").
    #[serde(default)]
    pub is_context: bool,
}

impl LocationMention {
    pub fn key(&self) -> MentionKey {
        MentionKey { post_id: self.post_id.clone(), span: self.span }
    }

    pub fn location_id(&self) -> u64 {
        self.entry.geoname_id
    }

    pub fn day(&self) -> i64 {
        crate::corpus::utc_day(self.timestamp)
    }
}

/// Why a LOCATION candidate did not become a mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropReason {
    NotFound,
    Ambiguous,
    OutsideRegion,
    FeatureFiltered,
}

impl DropReason {
    pub const ALL: [DropReason; 4] =
        [DropReason::NotFound, DropReason::Ambiguous, DropReason::OutsideRegion, DropReason::FeatureFiltered];
}

/// Applies the filtering criteria to one surface string.
pub fn classify_candidate(
    surface: &str,
    region: &RegionSpec,
    index: &GazetteerIndex,
) -> Result<GazetteerEntry, DropReason> {
    match resolve(surface, region, index) {
        ResolutionResult::Resolved(e) => Ok(e),
        ResolutionResult::Ambiguous(_) => Err(DropReason::Ambiguous),
        ResolutionResult::OutsideRegion => Err(DropReason::OutsideRegion),
        ResolutionResult::NotFound if index.is_feature_filtered(surface) => Err(DropReason::FeatureFiltered),
        ResolutionResult::NotFound => Err(DropReason::NotFound),
    }
}

/// LOCATION spans of a post with their surfaces, in span order.
pub fn location_candidates(post: &AnnotatedPost) -> Vec<(Span, String)> {
    entity_spans(&post.tokens, EntityType::Location)
        .into_iter()
        .map(|(s, e)| (Span::new(s, e), post.surface(s, e)))
        .collect()
}

/// Mentions of a post that resolve within the region, in span order. The
/// descriptor fields start unset.
pub fn extract_mentions(post: &AnnotatedPost, region: &RegionSpec, index: &GazetteerIndex) -> Vec<LocationMention> {
    location_candidates(post)
        .into_iter()
        .filter_map(|(span, surface)| {
            let entry = classify_candidate(&surface, region, index).ok()?;
            Some(LocationMention {
                post_id: post.post_id.clone(),
                span,
                surface,
                entry,
                event_id: post.event_id.clone(),
                timestamp: post.timestamp,
                has_descriptor: false,
                descriptor_kind: None,
                is_context: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub candidates: u64,
    pub kept: u64,
    pub dropped_by_reason: BTreeMap<DropReason, u64>,
    /// Posts skipped because their event has no region configured.
    pub posts_without_region: u64,
}

impl ExtractionStats {
    pub fn dropped(&self, reason: DropReason) -> u64 {
        self.dropped_by_reason.get(&reason).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: ExtractionStats) -> Self {
        self.candidates += other.candidates;
        self.kept += other.kept;
        self.posts_without_region += other.posts_without_region;
        for (r, c) in other.dropped_by_reason {
            *self.dropped_by_reason.entry(r).or_default() += c;
        }
        self
    }
}

/// Candidate bookkeeping over a corpus. `regions` maps event ids to regions.
pub fn extraction_stats<'a>(
    posts: impl IntoIterator<Item = &'a AnnotatedPost>,
    regions: &BTreeMap<String, RegionSpec>,
    index: &GazetteerIndex,
) -> ExtractionStats {
    let mut stats = ExtractionStats::default();
    for r in DropReason::ALL {
        stats.dropped_by_reason.insert(r, 0);
    }
    for post in posts {
        let Some(region) = regions.get(&post.event_id) else {
            stats.posts_without_region += 1;
            continue;
        };
        for (_, surface) in location_candidates(post) {
            stats.candidates += 1;
            match classify_candidate(&surface, region, index) {
                Ok(_) => stats.kept += 1,
                Err(reason) => *stats.dropped_by_reason.entry(reason).or_default() += 1,
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostBuilder;
    use crate::gazetteer::tests::row;
    use crate::gazetteer::{AdminUnit, FeatureFilter};

    fn index() -> GazetteerIndex {
        let dump = [
            row(4568127, "San Juan", "", "P", "PPLA", "PR", "127", 418_140),
            row(4726440, "San Juan", "", "P", "PPL", "US", "TX", 35_294),
            row(4726441, "San Juan", "", "P", "PPL", "US", "TX", 120),
            row(4565119, "Guayama", "", "P", "PPLA", "PR", "057", 21_624),
            row(4566966, "Puerto Rico", "", "A", "PCLD", "PR", "", 3_195_153),
        ]
        .join("\n");
        GazetteerIndex::build(dump.as_bytes(), &FeatureFilter::default()).unwrap()
    }

    fn maria() -> RegionSpec {
        RegionSpec::new("maria", [AdminUnit::new("PR", "*")])
    }

    fn harvey() -> RegionSpec {
        RegionSpec::new("harvey", [AdminUnit::new("US", "TX")])
    }

    fn flooding() -> AnnotatedPost {
        // San Juan is flooding
        PostBuilder::new("p1", "maria")
            .tok("San", 4, "nsubj", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok("is", 4, "aux", "O")
            .tok("flooding", 0, "root", "O")
            .build()
    }

    #[test]
    fn san_juan_kept_for_maria() {
        let m = extract_mentions(&flooding(), &maria(), &index());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "San Juan");
        assert_eq!(m[0].span, Span::new(1, 2));
        assert_eq!(m[0].entry.geoname_id, 4568127);
        assert!(!m[0].has_descriptor);
    }

    #[test]
    fn san_juan_dropped_for_harvey() {
        assert!(extract_mentions(&flooding(), &harvey(), &index()).is_empty());
    }

    #[test]
    fn no_location_tags_no_mentions() {
        let post = PostBuilder::new("p", "maria").tok("hello", 0, "root", "O").build();
        assert!(extract_mentions(&post, &maria(), &index()).is_empty());
    }

    #[test]
    fn stats_partition_reasons() {
        // "Guayama and San Juan need help" in a Harvey-region event: San Juan
        // ambiguous, Guayama outside the region, Puerto Rico feature-filtered,
        // Atlantis unknown.
        let post = PostBuilder::new("p", "harvey")
            .tok("Guayama", 0, "root", "B-LOCATION")
            .tok("San", 1, "conj", "B-LOCATION")
            .tok("Juan", 2, "flat", "I-LOCATION")
            .tok("Puerto", 1, "conj", "B-LOCATION")
            .tok("Rico", 4, "flat", "I-LOCATION")
            .tok("Atlantis", 1, "conj", "B-LOCATION")
            .build();
        let regions = BTreeMap::from([("harvey".to_string(), harvey())]);
        let s = extraction_stats([&post], &regions, &index());
        assert_eq!(s.candidates, 4);
        assert_eq!(s.kept, 0);
        assert_eq!(s.dropped(DropReason::Ambiguous), 1);
        assert_eq!(s.dropped(DropReason::OutsideRegion), 1);
        assert_eq!(s.dropped(DropReason::FeatureFiltered), 1);
        assert_eq!(s.dropped(DropReason::NotFound), 1);
    }

    #[test]
    fn stats_all_resolved() {
        let regions = BTreeMap::from([("maria".to_string(), maria())]);
        let s = extraction_stats([&flooding()], &regions, &index());
        assert_eq!((s.candidates, s.kept), (1, 1));
        assert!(s.dropped_by_reason.values().all(|&c| c == 0));
    }

    #[test]
    fn one_ambiguous_one_resolved() {
        let mut idx_rows = [
            row(1, "Springfield", "", "P", "PPL", "US", "TX", 10),
            row(2, "Springfield", "", "P", "PPL", "US", "TX", 20),
            row(3, "Houston", "", "P", "PPL", "US", "TX", 2_000_000),
        ];
        idx_rows.reverse();
        let idx = GazetteerIndex::build(idx_rows.join("\n").as_bytes(), &FeatureFilter::default()).unwrap();
        let post = PostBuilder::new("p", "harvey")
            .tok("Springfield", 0, "root", "B-LOCATION")
            .tok("Houston", 1, "conj", "B-LOCATION")
            .build();
        let regions = BTreeMap::from([("harvey".to_string(), harvey())]);
        let s = extraction_stats([&post], &regions, &idx);
        assert_eq!(s.kept, 1);
        assert_eq!(s.dropped(DropReason::Ambiguous), 1);
    }
}
