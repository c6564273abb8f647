//! Author-level predicates: locality, organization status, activity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedPost, AuthorMetadata};
use crate::gazetteer::{GazetteerIndex, RegionSpec};
use crate::mentions::LocationMention;
use crate::timeline::{phase_of, PeakInfo, Phase};

/// Lowercased words with periods removed, so "P.R." reads as "pr".
fn words(text: &str) -> Vec<String> {
    text.replace('.', "")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A set of word sequences matched at word boundaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseSet {
    phrases: BTreeSet<Vec<String>>,
    max_len: usize,
}

impl PhraseSet {
    pub fn new<S: AsRef<str>>(phrases: impl IntoIterator<Item = S>) -> Self {
        let mut set = PhraseSet::default();
        for p in phrases {
            set.insert(p.as_ref());
        }
        set
    }

    pub fn insert(&mut self, phrase: &str) {
        let w = words(phrase);
        if !w.is_empty() {
            self.max_len = self.max_len.max(w.len());
            self.phrases.insert(w);
        }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Number of (start, length) windows of `text` that are phrases.
    pub fn count_hits(&self, text: &str) -> usize {
        let w = words(text);
        let mut hits = 0;
        for start in 0..w.len() {
            for len in 1..=self.max_len.min(w.len() - start) {
                if self.phrases.contains(&w[start..start + len]) {
                    hits += 1;
                }
            }
        }
        hits
    }

    pub fn matches(&self, text: &str) -> bool {
        self.count_hits(text) > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalProvenance {
    MatchedAlias,
    NoProfile,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalStatus {
    pub is_local: bool,
    pub provenance: LocalProvenance,
}

/// Region aliases plus the names of every candidate place inside the region.
pub fn local_phrases(region: &RegionSpec, index: &GazetteerIndex) -> PhraseSet {
    PhraseSet::new(region.local_name_aliases.iter().cloned().chain(index.names_in_region(region)))
}

pub fn classify_local_with(profile_location: Option<&str>, phrases: &PhraseSet) -> LocalStatus {
    match profile_location.map(str::trim).filter(|s| !s.is_empty()) {
        None => LocalStatus { is_local: false, provenance: LocalProvenance::NoProfile },
        Some(p) if phrases.matches(p) => LocalStatus { is_local: true, provenance: LocalProvenance::MatchedAlias },
        Some(_) => LocalStatus { is_local: false, provenance: LocalProvenance::NoMatch },
    }
}

/// True when the self-reported location names the region or a place in it.
pub fn classify_local(profile_location: Option<&str>, region: &RegionSpec, index: &GazetteerIndex) -> LocalStatus {
    classify_local_with(profile_location, &local_phrases(region, index))
}

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("rule file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("rule file: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrganizationRules {
    pub keywords: Vec<String>,
    pub min_keyword_hits: usize,
    pub min_follower_friend_ratio: f64,
}

impl OrganizationRules {
    pub fn parse(text: &str) -> Result<Self, RulesError> {
        let rules: OrganizationRules = toml::from_str(text)?;
        if rules.min_keyword_hits == 0 {
            return Err(RulesError::Invalid("min_keyword_hits must be at least 1".into()));
        }
        if rules.min_follower_friend_ratio.is_nan() || rules.min_follower_friend_ratio <= 0.0 {
            return Err(RulesError::Invalid("min_follower_friend_ratio must be positive".into()));
        }
        Ok(rules)
    }

    pub fn shipped() -> Self {
        Self::parse(include_str!("../data/organization_rules.toml")).expect("shipped rule file is valid")
    }
}

impl Default for OrganizationRules {
    fn default() -> Self {
        Self::shipped()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgProvenance {
    KeywordRule,
    FollowerRatioRule,
    NoMetadata,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgStatus {
    pub is_organization: bool,
    pub provenance: OrgProvenance,
}

pub struct OrganizationClassifier {
    rules: OrganizationRules,
    keywords: PhraseSet,
}

impl OrganizationClassifier {
    pub fn new(rules: OrganizationRules) -> Self {
        let keywords = PhraseSet::new(&rules.keywords);
        OrganizationClassifier { rules, keywords }
    }

    pub fn rules(&self) -> &OrganizationRules {
        &self.rules
    }

    pub fn classify(&self, metadata: Option<&AuthorMetadata>) -> OrgStatus {
        let Some(m) = metadata.filter(|m| !m.is_empty()) else {
            return OrgStatus { is_organization: false, provenance: OrgProvenance::NoMetadata };
        };
        let hits = [m.name.as_deref(), m.description.as_deref()]
            .into_iter()
            .flatten()
            .map(|t| self.keywords.count_hits(t))
            .sum::<usize>();
        if hits >= self.rules.min_keyword_hits {
            return OrgStatus { is_organization: true, provenance: OrgProvenance::KeywordRule };
        }
        if let Some(followers) = m.followers_count {
            let friends = m.friends_count.unwrap_or(0).max(1);
            if followers as f64 / friends as f64 >= self.rules.min_follower_friend_ratio {
                return OrgStatus { is_organization: true, provenance: OrgProvenance::FollowerRatioRule };
            }
        }
        OrgStatus { is_organization: false, provenance: OrgProvenance::NoMatch }
    }
}

pub fn classify_organization(metadata: Option<&AuthorMetadata>, rules: &OrganizationRules) -> OrgStatus {
    OrganizationClassifier::new(rules.clone()).classify(metadata)
}

/// Posts per author within each event.
pub fn event_post_counts<'a>(
    posts: impl IntoIterator<Item = &'a AnnotatedPost>,
) -> BTreeMap<String, BTreeMap<String, u64>> {
    let mut out: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for p in posts {
        *out.entry(p.event_id.clone()).or_default().entry(p.author_id.clone()).or_default() += 1;
    }
    out
}

/// Nearest-rank percentile of a non-empty sample: the value at sorted
/// position ceil(p/100 * N), 1-based.
pub fn nearest_rank(values: &[u64], percentile: f64) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Authors whose post count is at or above the nearest-rank percentile.
pub fn select_active_authors(counts: &BTreeMap<String, u64>, percentile: f64) -> BTreeSet<String> {
    let values: Vec<u64> = counts.values().copied().collect();
    let Some(threshold) = nearest_rank(&values, percentile) else {
        return BTreeSet::new();
    };
    counts.iter().filter(|(_, &c)| c >= threshold).map(|(a, _)| a.clone()).collect()
}

/// Whether the author's mentions in the event fall in all three phases.
/// Mentions of locations without a peak are ignored.
pub fn posted_in_all_phases(
    author: &str,
    event: &str,
    mentions: &[LocationMention],
    authors_by_post: &BTreeMap<String, String>,
    peaks: &BTreeMap<(String, u64), PeakInfo>,
) -> bool {
    let mut seen = BTreeSet::new();
    for m in mentions {
        if m.event_id != event || authors_by_post.get(&m.post_id).map(String::as_str) != Some(author) {
            continue;
        }
        if let Some(peak) = peaks.get(&(m.event_id.clone(), m.location_id())) {
            seen.insert(phase_of(m.timestamp, peak));
        }
    }
    seen.len() == Phase::ALL.len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub author_id: String,
    pub local: LocalStatus,
    pub organization: OrgStatus,
    pub post_count_per_event: BTreeMap<String, u64>,
    pub active_events: BTreeSet<String>,
}

/// Builds a profile for every author. Profile strings and metadata come from
/// the author's earliest post that carries them. Locality is judged against
/// the region of the author's first event.
pub fn build_profiles(
    posts: &[AnnotatedPost],
    regions: &BTreeMap<String, RegionSpec>,
    index: &GazetteerIndex,
    rules: &OrganizationRules,
    percentile: f64,
) -> BTreeMap<String, AuthorProfile> {
    let mut ordered: Vec<&AnnotatedPost> = posts.iter().collect();
    ordered.sort_by(|a, b| (a.timestamp, &a.post_id).cmp(&(b.timestamp, &b.post_id)));

    let counts = event_post_counts(ordered.iter().copied());
    let active: BTreeMap<&String, BTreeSet<String>> =
        counts.iter().map(|(e, c)| (e, select_active_authors(c, percentile))).collect();

    let phrases: BTreeMap<&String, PhraseSet> = regions.iter().map(|(e, r)| (e, local_phrases(r, index))).collect();
    let classifier = OrganizationClassifier::new(rules.clone());

    let mut first_event: BTreeMap<&str, &str> = BTreeMap::new();
    let mut location: BTreeMap<&str, &str> = BTreeMap::new();
    let mut metadata: BTreeMap<&str, &AuthorMetadata> = BTreeMap::new();
    for p in &ordered {
        first_event.entry(&p.author_id).or_insert(&p.event_id);
        if let Some(loc) = p.author_profile_location.as_deref().filter(|s| !s.trim().is_empty()) {
            location.entry(&p.author_id).or_insert(loc);
        }
        if let Some(md) = p.author_metadata.as_ref().filter(|m| !m.is_empty()) {
            metadata.entry(&p.author_id).or_insert(md);
        }
    }

    let empty = PhraseSet::default();
    first_event
        .into_iter()
        .map(|(author, event)| {
            let local_set = phrases.get(&event.to_string()).unwrap_or(&empty);
            let per_event: BTreeMap<String, u64> =
                counts.iter().filter_map(|(e, c)| c.get(author).map(|&n| (e.clone(), n))).collect();
            let active_events =
                per_event.keys().filter(|e| active.get(e).is_some_and(|s| s.contains(author))).cloned().collect();
            let profile = AuthorProfile {
                author_id: author.to_string(),
                local: classify_local_with(location.get(author).copied(), local_set),
                organization: classifier.classify(metadata.get(author).copied()),
                post_count_per_event: per_event,
                active_events,
            };
            (author.to_string(), profile)
        })
        .collect()
}
