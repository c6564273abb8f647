//! Descriptor-phrase detection over dependency trees.
//!
//! A descriptor links a head location to a better-known context location.
//! Four patterns are recognised, tried in fixed precedence:
//!
//! | kind        | shape                                           | example                                   |
//! |-------------|-------------------------------------------------|-------------------------------------------|
//! | STATE       | head, optional comma, state or territory        | San Juan, PR                              |
//! | MODIFIER    | dependent clause of the head holding a location | San Juan, capital of Puerto Rico          |
//! | COMPOUND    | head embedded in a noun phrase with a location  | the Vega Alta neighborhood of San Juan    |
//! | CONJUNCTION | head conjoined with a location that has one     | San Juan, Guayama and Vieques, Puerto Rico |
//!
//! Except for STATE, the context must have a larger gazetteer population than
//! the head; population stands in for how well known a place is.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{
    entity_spans, parse_post_record, AnnotatedPost, DependencyTree, EntityType, ParseOptions, SchemaError,
};
use crate::gazetteer::{GazetteerIndex, StateAliasTable};
use crate::mentions::{LocationMention, MentionKey, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatternKind {
    State,
    Modifier,
    Compound,
    Conjunction,
}

impl PatternKind {
    /// Precedence order.
    pub const ALL: [PatternKind; 4] =
        [PatternKind::State, PatternKind::Modifier, PatternKind::Compound, PatternKind::Conjunction];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::State => "STATE",
            PatternKind::Modifier => "MODIFIER",
            PatternKind::Compound => "COMPOUND",
            PatternKind::Conjunction => "CONJUNCTION",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown pattern kind {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PatternConfigError {
    #[error("relation set `{0}` is empty")]
    EmptyRelations(&'static str),
}

fn labels(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternConfig {
    /// Arcs from the head into a descriptive subclause. Prepositional
    /// attachment surfaces as `nmod` (plus `case`) in UD-style trees.
    pub modifier_relations: BTreeSet<String>,
    /// Arcs attaching the head into a governing noun phrase.
    pub compound_relations: BTreeSet<String>,
    pub conjunction_relations: BTreeSet<String>,
    #[serde(skip, default = "StateAliasTable::us_default")]
    pub state_alias_table: StateAliasTable,
    pub require_population_check: bool,
    pub max_arc_distance: usize,
    /// Maps labels of another parser's tag set onto the labels above.
    pub label_map: BTreeMap<String, String>,
    pub enabled_kinds: BTreeSet<PatternKind>,
    /// Mentions serving as another mention's context are left out of the
    /// regression sample.
    pub exclude_context_mentions: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            modifier_relations: labels(&["amod", "appos", "nmod", "nummod"]),
            compound_relations: labels(&["nmod", "compound", "appos"]),
            conjunction_relations: labels(&["conj"]),
            state_alias_table: StateAliasTable::us_default(),
            require_population_check: true,
            max_arc_distance: 4,
            label_map: BTreeMap::new(),
            enabled_kinds: PatternKind::ALL.into_iter().collect(),
            exclude_context_mentions: true,
        }
    }
}

impl PatternConfig {
    pub fn validate(&self) -> Result<(), PatternConfigError> {
        if self.modifier_relations.is_empty() {
            return Err(PatternConfigError::EmptyRelations("modifier_relations"));
        }
        if self.compound_relations.is_empty() {
            return Err(PatternConfigError::EmptyRelations("compound_relations"));
        }
        if self.conjunction_relations.is_empty() {
            return Err(PatternConfigError::EmptyRelations("conjunction_relations"));
        }
        Ok(())
    }

    fn canonical<'a>(&'a self, label: &'a str) -> &'a str {
        self.label_map.get(label).map(String::as_str).unwrap_or(label)
    }
}

fn in_set(set: &BTreeSet<String>, label: &str) -> bool {
    set.contains(label) || label.split_once(':').is_some_and(|(base, _)| set.contains(base))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorMatch {
    pub post_id: String,
    pub head_span: Span,
    pub context_span: Span,
    pub kind: PatternKind,
    /// Relation labels traversed from the head to the context. Empty for a
    /// STATE match with no arc between the two.
    pub relation_path: Vec<String>,
    pub head_population: Option<u64>,
    pub context_population: Option<u64>,
}

impl DescriptorMatch {
    pub fn mention_key(&self) -> MentionKey {
        MentionKey { post_id: self.post_id.clone(), span: self.head_span }
    }
}

/// Per-post matching state.
struct PostView<'a> {
    post: &'a AnnotatedPost,
    tree: DependencyTree,
    /// Token index -> LOCATION span containing it.
    location_of: HashMap<usize, Span>,
    config: &'a PatternConfig,
    index: &'a GazetteerIndex,
}

struct Found {
    context: Span,
    path: Vec<String>,
    context_population: Option<u64>,
}

impl<'a> PostView<'a> {
    fn new(post: &'a AnnotatedPost, config: &'a PatternConfig, index: &'a GazetteerIndex) -> Self {
        let mut location_of = HashMap::new();
        for (s, e) in entity_spans(&post.tokens, EntityType::Location) {
            for i in s..=e {
                location_of.insert(i, Span::new(s, e));
            }
        }
        PostView { post, tree: DependencyTree::from_post(post), location_of, config, index }
    }

    fn n(&self) -> usize {
        self.post.tokens.len()
    }

    fn rel(&self, index: usize) -> &str {
        self.config.canonical(&self.post.token(index).deprel)
    }

    fn form(&self, index: usize) -> &str {
        &self.post.token(index).form
    }

    /// Syntactic head of a span: the token attached outside the span, closest
    /// to the root.
    fn span_head(&self, span: Span) -> usize {
        span.indices()
            .filter(|&i| !span.contains(self.tree.head(i)))
            .min_by_key(|&i| (self.tree.level(i), i))
            .unwrap_or(span.start)
    }

    fn population_of_surface(&self, surface: &str) -> Option<u64> {
        self.index.context_population(surface).or_else(|| {
            self.config.state_alias_table.full_name(surface).and_then(|full| self.index.context_population(full))
        })
    }

    fn passes(&self, head_population: Option<u64>, context_population: Option<u64>) -> bool {
        if !self.config.require_population_check {
            return true;
        }
        match (head_population, context_population) {
            (Some(h), Some(c)) => c > h,
            _ => false,
        }
    }

    /// STATE: the head followed, optionally across a comma, by a state or
    /// territory name or abbreviation. Surface adjacency, no arcs required.
    fn state(&self, span: Span) -> Option<Found> {
        let mut p = span.end + 1;
        if p <= self.n() && self.form(p) == "," {
            p += 1;
        }
        if p > self.n() {
            return None;
        }
        let aliases = &self.config.state_alias_table;
        let max_len = aliases.max_words().max(3);
        for len in (1..=max_len).rev() {
            let end = p + len - 1;
            if end > self.n() {
                continue;
            }
            let surface = self.post.surface(p, end);
            if aliases.contains(&surface) || self.index.is_admin_level(&surface) {
                let context = Span::new(p, end);
                let head = self.span_head(span);
                let ctx_head = self.span_head(context);
                let path = if self.tree.head(ctx_head) == head {
                    vec![self.rel(ctx_head).to_string()]
                } else if self.tree.head(head) == ctx_head {
                    vec![self.rel(head).to_string()]
                } else {
                    Vec::new()
                };
                return Some(Found { context, path, context_population: self.population_of_surface(&surface) });
            }
        }
        None
    }

    /// Breadth-first search below `start` for a LOCATION span outside
    /// `exclude`. `first_arc` restricts the relation of the first arc taken.
    /// Returns candidates in (distance, token index) order.
    fn locations_below(
        &self,
        start: usize,
        exclude: &[Span],
        first_arc: Option<&BTreeSet<String>>,
        skip_subtree: Option<usize>,
    ) -> Vec<(Span, Vec<String>)> {
        let mut out = Vec::new();
        let mut seen_spans = BTreeSet::new();
        let mut queue: VecDeque<(usize, Vec<String>)> = VecDeque::new();
        for &c in self.tree.children(start) {
            if Some(c) == skip_subtree || exclude.iter().any(|s| s.contains(c)) {
                continue;
            }
            if first_arc.is_some_and(|set| !in_set(set, self.rel(c))) {
                continue;
            }
            queue.push_back((c, vec![self.rel(c).to_string()]));
        }
        while let Some((t, path)) = queue.pop_front() {
            if let Some(span) = self.location_of.get(&t) {
                if !exclude.iter().any(|s| s.overlaps(span)) && seen_spans.insert(*span) {
                    out.push((*span, path.clone()));
                }
            }
            if path.len() >= self.config.max_arc_distance {
                continue;
            }
            let mut kids: Vec<usize> = self.tree.children(t).to_vec();
            kids.retain(|&c| Some(c) != skip_subtree);
            for c in kids {
                let mut p = path.clone();
                p.push(self.rel(c).to_string());
                queue.push_back((c, p));
            }
        }
        out
    }

    /// MODIFIER: a dependent of the head, attached by a modifier relation,
    /// whose subtree holds a better-known location.
    fn modifier(&self, span: Span, head_population: Option<u64>) -> Option<Found> {
        let head = self.span_head(span);
        self.locations_below(head, &[span], Some(&self.config.modifier_relations), None).into_iter().find_map(
            |(context, path)| {
                let pop = self.population_of_surface(&self.post.surface(context.start, context.end));
                self.passes(head_population, pop).then_some(Found { context, path, context_population: pop })
            },
        )
    }

    /// COMPOUND: the head attaches to a governing noun by a compound-type
    /// relation and that noun's phrase holds a better-known location.
    fn compound(&self, span: Span, head_population: Option<u64>) -> Option<Found> {
        let head = self.span_head(span);
        let rel = self.rel(head);
        if !in_set(&self.config.compound_relations, rel) {
            return None;
        }
        let governor = self.tree.head(head);
        if governor == 0 || span.contains(governor) {
            return None;
        }
        // A governor that is itself a location is described by the head, not
        // the other way round.
        let mut exclude = vec![span];
        exclude.extend(self.location_of.get(&governor).copied());
        self.locations_below(governor, &exclude, None, Some(head)).into_iter().find_map(|(context, below)| {
            let pop = self.population_of_surface(&self.post.surface(context.start, context.end));
            let mut path = vec![rel.to_string()];
            path.extend(below);
            self.passes(head_population, pop).then_some(Found { context, path, context_population: pop })
        })
    }

    /// CONJUNCTION: the head is a non-final member of a conjunction whose
    /// final conjunct carries a STATE or MODIFIER descriptor; that descriptor
    /// distributes over the whole conjunction.
    fn conjunction(&self, span: Span, head_population: Option<u64>) -> Option<Found> {
        let conj = &self.config.conjunction_relations;
        let head = self.span_head(span);
        let mut first = head;
        while in_set(conj, self.rel(first)) && self.tree.head(first) != 0 {
            first = self.tree.head(first);
        }
        let mut members = vec![first];
        let mut i = 0;
        while i < members.len() {
            let m = members[i];
            members.extend(self.tree.children(m).iter().copied().filter(|&c| in_set(conj, self.rel(c))));
            i += 1;
        }
        if members.len() < 2 || !members.contains(&head) {
            return None;
        }
        let last = *members.iter().max().expect("non-empty");
        if span.contains(last) {
            return None;
        }
        let last_span = *self.location_of.get(&last)?;
        let last_population = self.population_of_surface(&self.post.surface(last_span.start, last_span.end));
        let inner = if self.config.enabled_kinds.contains(&PatternKind::State) { self.state(last_span) } else { None };
        let inner = inner.or_else(|| {
            if self.config.enabled_kinds.contains(&PatternKind::Modifier) {
                self.modifier(last_span, last_population)
            } else {
                None
            }
        })?;
        if inner.context.overlaps(&span) || !self.passes(head_population, inner.context_population) {
            return None;
        }
        let mut path = vec![self.rel(self.span_head(last_span)).to_string()];
        path.extend(inner.path);
        Some(Found { context: inner.context, path, context_population: inner.context_population })
    }

    fn match_mention(&self, mention: &LocationMention) -> Option<DescriptorMatch> {
        let span = mention.span;
        let head_population = Some(mention.entry.population);
        let enabled = &self.config.enabled_kinds;
        PatternKind::ALL.into_iter().filter(|k| enabled.contains(k)).find_map(|kind| {
            let found = match kind {
                PatternKind::State => self.state(span),
                PatternKind::Modifier => self.modifier(span, head_population),
                PatternKind::Compound => self.compound(span, head_population),
                PatternKind::Conjunction => self.conjunction(span, head_population),
            }?;
            Some(DescriptorMatch {
                post_id: mention.post_id.clone(),
                head_span: span,
                context_span: found.context,
                kind,
                relation_path: found.path,
                head_population,
                context_population: found.context_population,
            })
        })
    }
}

/// Matches descriptor patterns for the mentions of one post. At most one
/// match per mention, first pattern in precedence order wins.
pub fn match_descriptors(
    post: &AnnotatedPost,
    mentions: &[LocationMention],
    config: &PatternConfig,
    index: &GazetteerIndex,
) -> Vec<DescriptorMatch> {
    if config.enabled_kinds.is_empty() || mentions.is_empty() {
        return Vec::new();
    }
    let view = PostView::new(post, config, index);
    mentions.iter().filter(|m| m.post_id == post.post_id).filter_map(|m| view.match_mention(m)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("match for post {post_id} span {span} has no corresponding mention")]
pub struct MismatchError {
    pub post_id: String,
    pub span: Span,
}

/// Writes match outcomes onto mentions. Mentions overlapping another match's
/// context span are flagged as context when `exclude_context` is set.
/// Recomputes every field from `matches`, so applying it twice is harmless.
pub fn annotate_mentions(
    mentions: &[LocationMention],
    matches: &[DescriptorMatch],
    exclude_context: bool,
) -> Result<Vec<LocationMention>, MismatchError> {
    let keys: BTreeSet<MentionKey> = mentions.iter().map(LocationMention::key).collect();
    let mut by_key: BTreeMap<MentionKey, &DescriptorMatch> = BTreeMap::new();
    for m in matches {
        let key = m.mention_key();
        if !keys.contains(&key) {
            return Err(MismatchError { post_id: m.post_id.clone(), span: m.head_span });
        }
        by_key.insert(key, m);
    }
    let mut contexts: BTreeMap<&str, Vec<Span>> = BTreeMap::new();
    for m in matches {
        contexts.entry(m.post_id.as_str()).or_default().push(m.context_span);
    }
    Ok(mentions
        .iter()
        .map(|m| {
            let mut out = m.clone();
            let hit = by_key.get(&m.key());
            out.has_descriptor = hit.is_some();
            out.descriptor_kind = hit.map(|d| d.kind);
            out.is_context = exclude_context
                && contexts.get(m.post_id.as_str()).is_some_and(|spans| spans.iter().any(|s| s.overlaps(&m.span)));
            out
        })
        .collect())
}

/// Gold label of one mention; `None` means no descriptor.
pub type GoldLabel = Option<PatternKind>;

fn label_str(l: GoldLabel) -> &'static str {
    l.map(PatternKind::as_str).unwrap_or("none")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlignmentError {
    #[error("mention {0:?} is predicted but has no gold label")]
    MissingGold(MentionKey),
    #[error("mention {0:?} has a gold label but no prediction")]
    MissingPrediction(MentionKey),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldEvaluation {
    pub precision: f64,
    pub recall: f64,
    /// No positive predictions; precision reported as 1.0.
    pub precision_undefined: bool,
    /// No positive gold labels; recall reported as 1.0.
    pub recall_undefined: bool,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// (gold, predicted) label pair -> count.
    pub per_kind_confusion: BTreeMap<(String, String), usize>,
}

/// Precision and recall of descriptor presence against gold labels, plus a
/// kind confusion table.
pub fn evaluate_against_gold(
    predicted: &BTreeMap<MentionKey, GoldLabel>,
    gold: &BTreeMap<MentionKey, GoldLabel>,
) -> Result<GoldEvaluation, AlignmentError> {
    if let Some(k) = predicted.keys().find(|k| !gold.contains_key(*k)) {
        return Err(AlignmentError::MissingGold(k.clone()));
    }
    if let Some(k) = gold.keys().find(|k| !predicted.contains_key(*k)) {
        return Err(AlignmentError::MissingPrediction(k.clone()));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut confusion = BTreeMap::new();
    for (key, g) in gold {
        let p = predicted[key];
        match (g.is_some(), p.is_some()) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
        *confusion.entry((label_str(*g).to_string(), label_str(p).to_string())).or_insert(0) += 1;
    }
    let precision_undefined = tp + fp == 0;
    let recall_undefined = tp + fn_ == 0;
    Ok(GoldEvaluation {
        precision: if precision_undefined { 1.0 } else { tp as f64 / (tp + fp) as f64 },
        recall: if recall_undefined { 1.0 } else { tp as f64 / (tp + fn_) as f64 },
        precision_undefined,
        recall_undefined,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        per_kind_confusion: confusion,
    })
}

#[derive(Debug, Error)]
pub enum GoldError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("gold record {record}: {reason}")]
    BadGold { record: String, reason: String },
}

#[derive(Debug, Deserialize)]
struct GoldMentionRaw {
    span: Span,
    label: String,
}

/// One gold-fixture record: an interchange post with per-mention labels in
/// an extra `gold_mentions` field (`[{"span": {...}, "label": "none"|"STATE"|...}]`).
#[derive(Debug, Clone)]
pub struct GoldRecord {
    pub post: AnnotatedPost,
    pub labels: Vec<(Span, GoldLabel)>,
}

pub fn parse_gold_record(line: &str) -> Result<GoldRecord, GoldError> {
    let mut value: Value =
        serde_json::from_str(line).map_err(|e| GoldError::BadGold { record: "?".into(), reason: e.to_string() })?;
    let raw = value.as_object_mut().and_then(|o| o.remove("gold_mentions")).unwrap_or(Value::Array(Vec::new()));
    let post = parse_post_record(&value.to_string(), &ParseOptions::default())?;
    let bad = |reason: String| GoldError::BadGold { record: post.post_id.clone(), reason };
    let raw: Vec<GoldMentionRaw> = serde_json::from_value(raw).map_err(|e| bad(e.to_string()))?;
    let labels = raw
        .into_iter()
        .map(|g| {
            let label = match g.label.as_str() {
                "none" => None,
                other => Some(other.parse::<PatternKind>().map_err(&bad)?),
            };
            if g.span.start == 0 || g.span.end > post.tokens.len() || g.span.start > g.span.end {
                return Err(bad(format!("span {} out of range", g.span)));
            }
            Ok((g.span, label))
        })
        .collect::<Result<_, _>>()?;
    Ok(GoldRecord { post, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostBuilder;
    use crate::gazetteer::tests::row;
    use crate::gazetteer::{AdminUnit, FeatureFilter, RegionSpec};
    use crate::mentions::extract_mentions;

    pub(crate) fn pr_index() -> GazetteerIndex {
        let dump = [
            row(4566966, "Puerto Rico", "", "A", "PCLD", "PR", "", 3_195_153),
            row(4568127, "San Juan", "", "P", "PPLA", "PR", "127", 418_140),
            row(4565119, "Guayama", "", "P", "PPLA", "PR", "057", 21_624),
            row(4567885, "Vieques", "", "P", "PPLA", "PR", "147", 9_301),
            row(4569067, "Vega Alta", "", "P", "PPLA", "PR", "143", 12_036),
            row(4566880, "Ponce", "", "P", "PPLA", "PR", "113", 132_502),
        ]
        .join("\n");
        GazetteerIndex::build(dump.as_bytes(), &FeatureFilter::default()).unwrap()
    }

    fn maria() -> RegionSpec {
        RegionSpec::new("maria", [AdminUnit::new("PR", "*")])
    }

    fn run(post: &AnnotatedPost) -> (Vec<LocationMention>, Vec<DescriptorMatch>) {
        let idx = pr_index();
        let mentions = extract_mentions(post, &maria(), &idx);
        let matches = match_descriptors(post, &mentions, &PatternConfig::default(), &idx);
        (mentions, matches)
    }

    /// San Juan , PR
    fn state_post() -> AnnotatedPost {
        PostBuilder::new("s", "maria")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("PR", 1, "appos", "B-LOCATION")
            .build()
    }

    /// San Juan , capital of Puerto Rico
    fn modifier_post() -> AnnotatedPost {
        PostBuilder::new("m", "maria")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("capital", 1, "appos", "O")
            .tok("of", 6, "case", "O")
            .tok("Puerto", 4, "nmod", "B-LOCATION")
            .tok("Rico", 6, "flat", "I-LOCATION")
            .build()
    }

    /// the Vega Alta neighborhood of San Juan
    fn compound_post() -> AnnotatedPost {
        PostBuilder::new("c", "maria")
            .tok("the", 4, "det", "O")
            .tok("Vega", 4, "compound", "B-LOCATION")
            .tok("Alta", 2, "flat", "I-LOCATION")
            .tok("neighborhood", 0, "root", "O")
            .tok("of", 7, "case", "O")
            .tok("San", 4, "nmod", "B-LOCATION")
            .tok("Juan", 6, "flat", "I-LOCATION")
            .build()
    }

    /// San Juan , Guayama and Vieques , Puerto Rico
    fn conjunction_post() -> AnnotatedPost {
        PostBuilder::new("j", "maria")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("Guayama", 1, "conj", "B-LOCATION")
            .tok("and", 6, "cc", "O")
            .tok("Vieques", 1, "conj", "B-LOCATION")
            .tok(",", 8, "punct", "O")
            .tok("Puerto", 6, "appos", "B-LOCATION")
            .tok("Rico", 8, "flat", "I-LOCATION")
            .build()
    }

    #[test]
    fn state_pattern() {
        let (_, matches) = run(&state_post());
        assert_eq!(matches.len(), 1);
        assert_eq!(matches[0].kind, PatternKind::State);
        assert_eq!(matches[0].context_span, Span::new(4, 4));
        assert_eq!(matches[0].relation_path, vec!["appos"]);
    }

    #[test]
    fn modifier_pattern() {
        let (_, matches) = run(&modifier_post());
        assert_eq!(matches.len(), 1);
        let m = &matches[0];
        assert_eq!(m.kind, PatternKind::Modifier);
        assert_eq!(m.context_span, Span::new(6, 7));
        assert_eq!(m.relation_path, vec!["appos", "nmod"]);
        assert!(m.context_population.unwrap() > m.head_population.unwrap());
    }

    #[test]
    fn compound_pattern() {
        let (mentions, matches) = run(&compound_post());
        assert_eq!(mentions.len(), 2);
        assert_eq!(matches.len(), 1);
        let m = &matches[0];
        assert_eq!(m.kind, PatternKind::Compound);
        assert_eq!(m.head_span, Span::new(2, 3));
        assert_eq!(m.context_span, Span::new(6, 7));
        let annotated = annotate_mentions(&mentions, &matches, true).unwrap();
        assert!(annotated[0].has_descriptor && !annotated[0].is_context);
        assert!(!annotated[1].has_descriptor && annotated[1].is_context);
    }

    #[test]
    fn governing_location_is_not_compound_context() {
        // San Juan , near Guayama
        let post = PostBuilder::new("g", "maria")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok(",", 5, "punct", "O")
            .tok("near", 5, "case", "O")
            .tok("Guayama", 1, "nmod", "B-LOCATION")
            .build();
        let (mentions, matches) = run(&post);
        assert_eq!(mentions.len(), 2);
        assert!(matches.is_empty(), "{matches:?}");
    }

    #[test]
    fn conjunction_pattern_distributes() {
        let (mentions, matches) = run(&conjunction_post());
        assert_eq!(mentions.len(), 3);
        let kinds: Vec<(Span, PatternKind)> = matches.iter().map(|m| (m.head_span, m.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (Span::new(1, 2), PatternKind::Conjunction),
                (Span::new(4, 4), PatternKind::Conjunction),
                (Span::new(6, 6), PatternKind::State),
            ]
        );
        assert!(matches.iter().all(|m| m.context_span == Span::new(8, 9)));
    }

    #[test]
    fn no_dependent_clause_no_match() {
        let post = PostBuilder::new("n", "maria")
            .tok("San", 4, "nsubj", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok("is", 4, "aux", "O")
            .tok("flooding", 0, "root", "O")
            .build();
        let (mentions, matches) = run(&post);
        assert_eq!(mentions.len(), 1);
        assert!(matches.is_empty());
    }

    #[test]
    fn population_check_blocks_smaller_context() {
        // Ponce , near Vieques: Vieques is smaller, so no MODIFIER.
        let post = PostBuilder::new("p", "maria")
            .tok("Ponce", 0, "root", "B-LOCATION")
            .tok(",", 3, "punct", "O")
            .tok("near", 1, "amod", "O")
            .tok("Vieques", 3, "nmod", "B-LOCATION")
            .build();
        let (_, matches) = run(&post);
        assert!(matches.is_empty());
        let idx = pr_index();
        let mentions = extract_mentions(&post, &maria(), &idx);
        let cfg = PatternConfig { require_population_check: false, ..Default::default() };
        let matches = match_descriptors(&post, &mentions, &cfg, &idx);
        assert_eq!(matches.iter().find(|m| m.head_span == Span::new(1, 1)).unwrap().kind, PatternKind::Modifier);
    }

    #[test]
    fn arc_distance_bound() {
        let post = modifier_post();
        let idx = pr_index();
        let mentions = extract_mentions(&post, &maria(), &idx);
        let cfg = PatternConfig { max_arc_distance: 1, ..Default::default() };
        assert!(match_descriptors(&post, &mentions, &cfg, &idx).is_empty());
    }

    #[test]
    fn label_map_adapts_foreign_tags() {
        // Same tree with spaCy-style labels.
        let post = PostBuilder::new("m", "maria")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "compound", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("capital", 1, "appos", "O")
            .tok("of", 4, "OTHER", "O")
            .tok("Puerto", 5, "OTHER", "B-LOCATION")
            .tok("Rico", 6, "flat", "I-LOCATION")
            .build();
        let idx = pr_index();
        let mentions = extract_mentions(&post, &maria(), &idx);
        let mut cfg = PatternConfig { max_arc_distance: 2, ..Default::default() };
        assert!(match_descriptors(&post, &mentions, &cfg, &idx).is_empty());
        cfg.label_map.insert("OTHER".into(), "nmod".into());
        cfg.max_arc_distance = 3;
        let m = match_descriptors(&post, &mentions, &cfg, &idx);
        assert_eq!(m[0].kind, PatternKind::Modifier);
        assert_eq!(m[0].relation_path, vec!["appos", "nmod", "nmod"]);
    }

    #[test]
    fn disabling_all_kinds_yields_nothing() {
        let cfg = PatternConfig { enabled_kinds: BTreeSet::new(), ..Default::default() };
        let idx = pr_index();
        for post in [state_post(), modifier_post(), compound_post(), conjunction_post()] {
            let mentions = extract_mentions(&post, &maria(), &idx);
            assert!(match_descriptors(&post, &mentions, &cfg, &idx).is_empty());
        }
    }

    #[test]
    fn empty_relation_set_rejected() {
        let cfg = PatternConfig { conjunction_relations: BTreeSet::new(), ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(PatternConfig::default().validate().is_ok());
    }

    #[test]
    fn annotate_basic_and_idempotent() {
        let (mentions, matches) = run(&state_post());
        let once = annotate_mentions(&mentions, &matches, true).unwrap();
        assert!(once[0].has_descriptor);
        assert_eq!(once[0].descriptor_kind, Some(PatternKind::State));
        let twice = annotate_mentions(&once, &matches, true).unwrap();
        assert_eq!(once, twice);
        let none = annotate_mentions(&once, &[], true).unwrap();
        assert!(none.iter().all(|m| !m.has_descriptor && m.descriptor_kind.is_none()));
    }

    #[test]
    fn annotate_rejects_unknown_mention() {
        let (mentions, mut matches) = run(&state_post());
        matches[0].head_span = Span::new(3, 3);
        assert!(annotate_mentions(&mentions, &matches, true).is_err());
    }

    fn key(i: usize) -> MentionKey {
        MentionKey { post_id: format!("p{i}"), span: Span::new(1, 1) }
    }

    #[test]
    fn gold_perfect_agreement() {
        let gold: BTreeMap<_, _> =
            (0..5).map(|i| (key(i), if i % 2 == 0 { Some(PatternKind::State) } else { None })).collect();
        let e = evaluate_against_gold(&gold, &gold).unwrap();
        assert_eq!((e.precision, e.recall), (1.0, 1.0));
    }

    #[test]
    fn gold_all_negative_predictions() {
        let gold: BTreeMap<_, _> = (0..4).map(|i| (key(i), Some(PatternKind::Modifier))).collect();
        let pred: BTreeMap<_, _> = (0..4).map(|i| (key(i), None)).collect();
        let e = evaluate_against_gold(&pred, &gold).unwrap();
        assert_eq!(e.precision, 1.0);
        assert!(e.precision_undefined);
        assert_eq!(e.recall, 0.0);
    }

    #[test]
    fn gold_one_fp_one_fn_over_ten_positives() {
        // 10 gold positives: 9 found, 1 missed; plus 1 false alarm.
        let mut gold = BTreeMap::new();
        let mut pred = BTreeMap::new();
        for i in 0..10 {
            gold.insert(key(i), Some(PatternKind::State));
            pred.insert(key(i), if i == 0 { None } else { Some(PatternKind::State) });
        }
        gold.insert(key(10), None);
        pred.insert(key(10), Some(PatternKind::Compound));
        // Constructed confusion: TP=9, FP=1, FN=1 -> P = 9/10, R = 9/10.
        let e = evaluate_against_gold(&pred, &gold).unwrap();
        assert_eq!((e.true_positives, e.false_positives, e.false_negatives), (9, 1, 1));
        assert!((e.precision - 0.9).abs() < 1e-15);
        assert!((e.recall - 0.9).abs() < 1e-15);
        // With 10 true positives among 11 predicted and 11 gold positives:
        let mut gold2 = gold.clone();
        let mut pred2 = pred.clone();
        gold2.insert(key(0), Some(PatternKind::State));
        pred2.insert(key(0), Some(PatternKind::State));
        gold2.insert(key(11), Some(PatternKind::Modifier));
        pred2.insert(key(11), None);
        let e = evaluate_against_gold(&pred2, &gold2).unwrap();
        assert!((e.precision - 10.0 / 11.0).abs() < 1e-15);
        assert!((e.recall - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(e.per_kind_confusion[&("none".to_string(), "COMPOUND".to_string())], 1);
    }

    #[test]
    fn gold_alignment_errors() {
        let gold: BTreeMap<_, _> = [(key(0), None)].into();
        let pred: BTreeMap<_, _> = [(key(1), None)].into();
        assert!(evaluate_against_gold(&pred, &gold).is_err());
    }

    #[test]
    fn gold_record_parses() {
        let mut v = serde_json::to_value(state_post()).unwrap();
        v["gold_mentions"] = serde_json::json!([{"span": {"start": 1, "end": 2}, "label": "STATE"}]);
        let rec = parse_gold_record(&v.to_string()).unwrap();
        assert_eq!(rec.labels, vec![(Span::new(1, 2), Some(PatternKind::State))]);
        v["gold_mentions"] = serde_json::json!([{"span": {"start": 1, "end": 9}, "label": "STATE"}]);
        assert!(parse_gold_record(&v.to_string()).is_err());
    }
}
