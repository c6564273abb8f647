//! Interchange data model for annotated posts.
//!
//! A corpus is UTF-8 text with one JSON object per line. Each object carries
//! post metadata plus a token list with BIO named-entity tags and a dependency
//! tree. Lines that are blank or start with `#` are treated as comments so that
//! pipeline artifacts can carry a provenance header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Seconds in one UTC day.
pub const SECONDS_PER_DAY: i64 = 86_400;

/// UTC calendar day index (days since the Unix epoch) of a timestamp.
pub fn utc_day(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_DAY)
}

/// Universal-Dependencies relation labels accepted in the `deprel` column.
///
/// Subtyped labels (`nmod:poss`, `acl:relcl`) are accepted when their base is
/// listed. `OTHER` is the catch-all emitted by label mappers for relations
/// with no counterpart.
pub const DEPREL_LABELS: &[&str] = &[
    "acl",
    "advcl",
    "advmod",
    "amod",
    "appos",
    "aux",
    "case",
    "cc",
    "ccomp",
    "clf",
    "compound",
    "conj",
    "cop",
    "csubj",
    "dep",
    "det",
    "discourse",
    "dislocated",
    "expl",
    "fixed",
    "flat",
    "goeswith",
    "iobj",
    "list",
    "mark",
    "nmod",
    "nsubj",
    "nummod",
    "obj",
    "obl",
    "orphan",
    "parataxis",
    "punct",
    "reparandum",
    "root",
    "vocative",
    "xcomp",
    "OTHER",
];

pub fn is_known_deprel(label: &str) -> bool {
    let base = label.split(':').next().unwrap_or(label);
    DEPREL_LABELS.contains(&base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityType {
    Location,
    Other,
}

/// One BIO tag over the closed entity set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NerTag {
    Outside,
    Begin(EntityType),
    Inside(EntityType),
}

impl NerTag {
    pub fn parse(s: &str) -> Option<NerTag> {
        let ty = |t: &str| match t {
            "LOCATION" => Some(EntityType::Location),
            "OTHER" => Some(EntityType::Other),
            _ => None,
        };
        match s {
            "O" => Some(NerTag::Outside),
            _ => {
                let (prefix, rest) = s.split_once('-')?;
                match prefix {
                    "B" => ty(rest).map(NerTag::Begin),
                    "I" => ty(rest).map(NerTag::Inside),
                    _ => None,
                }
            }
        }
    }

    pub fn entity(self) -> Option<EntityType> {
        match self {
            NerTag::Outside => None,
            NerTag::Begin(t) | NerTag::Inside(t) => Some(t),
        }
    }

    pub fn is_location(self) -> bool {
        self.entity() == Some(EntityType::Location)
    }
}

impl fmt::Display for NerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |t: &EntityType| match t {
            EntityType::Location => "LOCATION",
            EntityType::Other => "OTHER",
        };
        match self {
            NerTag::Outside => f.write_str("O"),
            NerTag::Begin(t) => write!(f, "B-{}", name(t)),
            NerTag::Inside(t) => write!(f, "I-{}", name(t)),
        }
    }
}

impl Serialize for NerTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NerTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NerTag::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid NER tag {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the post.
    pub index: usize,
    pub form: String,
    /// Index of the syntactic head, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub ner: NerTag,
}

/// Free-form author metadata used by the organization heuristic.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuthorMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followers_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friends_count: Option<u64>,
}

impl AuthorMetadata {
    pub fn is_empty(&self) -> bool {
        self.name.as_deref().is_none_or(|s| s.trim().is_empty())
            && self.description.as_deref().is_none_or(|s| s.trim().is_empty())
            && self.followers_count.is_none()
            && self.friends_count.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedPost {
    pub post_id: String,
    pub author_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    pub event_id: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub text: String,
    pub tokens: Vec<Token>,
    pub has_url: bool,
    pub has_media: bool,
    /// Mean of retweets and likes, raw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engagement: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_profile_location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_metadata: Option<AuthorMetadata>,
}

impl AnnotatedPost {
    pub fn day(&self) -> i64 {
        utc_day(self.timestamp)
    }

    pub fn token(&self, index: usize) -> &Token {
        &self.tokens[index - 1]
    }

    /// Serializes to one interchange line (no trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("posts always serialize")
    }

    /// Surface string of the inclusive 1-based token range.
    pub fn surface(&self, start: usize, end: usize) -> String {
        self.tokens[start - 1..end].iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ")
    }
}

const REQUIRED_FIELDS: &[&str] =
    &["post_id", "author_id", "event_id", "timestamp", "text", "tokens", "has_url", "has_media"];
const OPTIONAL_FIELDS: &[&str] = &["group_id", "engagement", "author_profile_location", "author_metadata"];
const TOKEN_FIELDS: &[&str] = &["index", "form", "head", "deprel", "ner"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaErrorKind {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("bad dependency tree: {0}")]
    BadTree(String),
    #[error("bad BIO sequence: {0}")]
    BadBio(String),
    #[error("bad timestamp: {0}")]
    BadTimestamp(String),
    #[error("bad value for `{field}`: {reason}")]
    BadField { field: String, reason: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("duplicate post_id")]
    DuplicatePostId,
    #[error("malformed record: {0}")]
    Malformed(String),
}

/// A rejected record. `record` is the post_id when one could be read,
/// otherwise the 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("record {record}: {kind}")]
pub struct SchemaError {
    pub record: String,
    pub kind: SchemaErrorKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Strictness {
    /// Unknown fields are rejected.
    #[default]
    Strict,
    /// Unknown fields are ignored.
    Lenient,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub strictness: Strictness,
    /// Inclusive `[start, end]` UTC-second window per event. Events absent from
    /// the map are unconstrained.
    pub event_windows: BTreeMap<String, (i64, i64)>,
}

impl ParseOptions {
    pub fn lenient() -> Self {
        ParseOptions { strictness: Strictness::Lenient, ..Default::default() }
    }
}

/// Parses and validates a single interchange record.
pub fn parse_post_record(line: &str, opts: &ParseOptions) -> Result<AnnotatedPost, SchemaError> {
    parse_with_fallback_id(line, opts, "?")
}

fn parse_with_fallback_id(line: &str, opts: &ParseOptions, fallback_id: &str) -> Result<AnnotatedPost, SchemaError> {
    let value: Value = serde_json::from_str(line).map_err(|e| SchemaError {
        record: fallback_id.to_string(),
        kind: SchemaErrorKind::Malformed(e.to_string()),
    })?;
    let Value::Object(mut obj) = value else {
        return Err(SchemaError {
            record: fallback_id.to_string(),
            kind: SchemaErrorKind::Malformed("record is not an object".into()),
        });
    };
    let record =
        obj.get("post_id").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| fallback_id.to_string());
    let err = |kind| SchemaError { record: record.clone(), kind };

    for field in REQUIRED_FIELDS {
        if obj.get(*field).is_none_or(Value::is_null) {
            return Err(err(SchemaErrorKind::MissingField(field.to_string())));
        }
    }
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !REQUIRED_FIELDS.contains(&k.as_str()) && !OPTIONAL_FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    if opts.strictness == Strictness::Strict {
        if let Some(k) = unknown.first() {
            return Err(err(SchemaErrorKind::UnknownField(k.clone())));
        }
    }
    for k in &unknown {
        obj.remove(k);
    }

    let timestamp = normalize_timestamp(&obj["timestamp"]).map_err(|r| err(SchemaErrorKind::BadTimestamp(r)))?;
    obj.insert("timestamp".into(), Value::from(timestamp));

    if let Some(Value::Array(tokens)) = obj.get_mut("tokens") {
        for (i, tok) in tokens.iter_mut().enumerate() {
            let Value::Object(t) = tok else {
                return Err(err(SchemaErrorKind::BadField {
                    field: format!("tokens[{i}]"),
                    reason: "token is not an object".into(),
                }));
            };
            for f in TOKEN_FIELDS {
                if t.get(*f).is_none_or(Value::is_null) {
                    return Err(err(SchemaErrorKind::MissingField(format!("tokens[{i}].{f}"))));
                }
            }
            strip_unknown(t, TOKEN_FIELDS, opts.strictness, &format!("tokens[{i}]"))
                .map_err(|k| err(SchemaErrorKind::UnknownField(k)))?;
        }
    }
    if let Some(Value::Object(meta)) = obj.get_mut("author_metadata") {
        const META: &[&str] = &["name", "description", "followers_count", "friends_count"];
        // Metadata is an open key-value map; only the keys the heuristics use are kept.
        meta.retain(|k, _| META.contains(&k.as_str()));
    }

    let post: AnnotatedPost = serde_json::from_value(Value::Object(obj)).map_err(|e| {
        let msg = e.to_string();
        let field = REQUIRED_FIELDS
            .iter()
            .chain(OPTIONAL_FIELDS)
            .find(|f| msg.contains(*f))
            .map(|f| f.to_string())
            .unwrap_or_else(|| "record".to_string());
        err(SchemaErrorKind::BadField { field, reason: msg })
    })?;

    validate_post(&post, opts).map_err(err)?;
    Ok(post)
}

fn strip_unknown(
    obj: &mut Map<String, Value>,
    known: &[&str],
    strictness: Strictness,
    ctx: &str,
) -> Result<(), String> {
    let unknown: Vec<String> = obj.keys().filter(|k| !known.contains(&k.as_str())).cloned().collect();
    if strictness == Strictness::Strict {
        if let Some(k) = unknown.first() {
            return Err(format!("{ctx}.{k}"));
        }
    }
    for k in unknown {
        obj.remove(&k);
    }
    Ok(())
}

/// Accepts integer UTC seconds or an RFC 3339 string with offset.
fn normalize_timestamp(v: &Value) -> Result<i64, String> {
    match v {
        Value::Number(n) => n.as_i64().ok_or_else(|| format!("{n} is not an integer second count")),
        Value::String(s) => {
            chrono::DateTime::parse_from_rfc3339(s).map(|dt| dt.timestamp()).map_err(|e| format!("{s:?}: {e}"))
        }
        other => Err(format!("unsupported timestamp value {other}")),
    }
}

fn validate_post(post: &AnnotatedPost, opts: &ParseOptions) -> Result<(), SchemaErrorKind> {
    if post.post_id.is_empty() {
        return Err(SchemaErrorKind::BadField { field: "post_id".into(), reason: "empty".into() });
    }
    if let Some((lo, hi)) = opts.event_windows.get(&post.event_id) {
        if post.timestamp < *lo || post.timestamp > *hi {
            return Err(SchemaErrorKind::BadTimestamp(format!("{} outside event window [{lo}, {hi}]", post.timestamp)));
        }
    }
    if let Some(e) = post.engagement {
        if !e.is_finite() || e < 0.0 {
            return Err(SchemaErrorKind::BadField {
                field: "engagement".into(),
                reason: format!("{e} is not a non-negative real"),
            });
        }
    }
    validate_tokens(&post.tokens)
}

/// Checks indexing, tree shape, relation labels and BIO well-formedness.
pub fn validate_tokens(tokens: &[Token]) -> Result<(), SchemaErrorKind> {
    if tokens.is_empty() {
        return Err(SchemaErrorKind::BadField { field: "tokens".into(), reason: "empty token list".into() });
    }
    let n = tokens.len();
    for (i, t) in tokens.iter().enumerate() {
        if t.index != i + 1 {
            return Err(SchemaErrorKind::BadTree(format!("token at position {} has index {}", i + 1, t.index)));
        }
        if t.head > n {
            return Err(SchemaErrorKind::BadTree(format!("token {} head {} out of range", t.index, t.head)));
        }
        if t.head == t.index {
            return Err(SchemaErrorKind::BadTree(format!("token {} is its own head", t.index)));
        }
        if !is_known_deprel(&t.deprel) {
            return Err(SchemaErrorKind::BadField {
                field: format!("tokens[{i}].deprel"),
                reason: format!("unknown relation {:?}", t.deprel),
            });
        }
    }
    let roots = tokens.iter().filter(|t| t.head == 0).count();
    if roots != 1 {
        return Err(SchemaErrorKind::BadTree(format!("{roots} root tokens, expected 1")));
    }
    // Every walk toward the root must terminate within n steps.
    for t in tokens {
        let mut cur = t.index;
        let mut steps = 0;
        while cur != 0 {
            cur = tokens[cur - 1].head;
            steps += 1;
            if steps > n {
                return Err(SchemaErrorKind::BadTree(format!("cycle through token {}", t.index)));
            }
        }
    }
    let mut prev: Option<EntityType> = None;
    for t in tokens {
        match t.ner {
            NerTag::Inside(ty) if prev != Some(ty) => {
                return Err(SchemaErrorKind::BadBio(format!(
                    "token {} tagged {} does not continue an entity of the same type",
                    t.index, t.ner
                )));
            }
            _ => {}
        }
        prev = t.ner.entity();
    }
    Ok(())
}

/// Aggregate counts over valid records.
///
/// Merging is associative and commutative, so stats from record shards can be
/// combined in any order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub post_count: u64,
    pub authors: BTreeSet<String>,
    pub location_token_count: u64,
    pub parse_error_count: u64,
    /// Per event: earliest and latest timestamp.
    pub date_ranges: BTreeMap<String, (i64, i64)>,
}

impl CorpusStats {
    pub fn author_count(&self) -> usize {
        self.authors.len()
    }

    pub fn add_post(&mut self, post: &AnnotatedPost) {
        self.post_count += 1;
        self.authors.insert(post.author_id.clone());
        self.location_token_count += post.tokens.iter().filter(|t| t.ner.is_location()).count() as u64;
        self.date_ranges
            .entry(post.event_id.clone())
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(post.timestamp);
                *hi = (*hi).max(post.timestamp);
            })
            .or_insert((post.timestamp, post.timestamp));
    }

    pub fn merge(mut self, other: CorpusStats) -> CorpusStats {
        self.post_count += other.post_count;
        self.authors.extend(other.authors);
        self.location_token_count += other.location_token_count;
        self.parse_error_count += other.parse_error_count;
        for (event, (lo, hi)) in other.date_ranges {
            self.date_ranges
                .entry(event)
                .and_modify(|r| {
                    r.0 = r.0.min(lo);
                    r.1 = r.1.max(hi);
                })
                .or_insert((lo, hi));
        }
        self
    }
}

/// Result of validating a whole record stream.
#[derive(Debug, Clone, Default)]
pub struct ValidatedCorpus {
    pub posts: Vec<AnnotatedPost>,
    pub stats: CorpusStats,
    pub errors: Vec<SchemaError>,
}

/// Validates every line of a stream. Errors are collected, never fatal.
/// Comment lines (`#`) and blank lines are skipped. A repeated post_id is
/// reported as an error and the later record dropped.
pub fn validate_corpus<I, S>(lines: I, opts: &ParseOptions) -> ValidatedCorpus
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = ValidatedCorpus::default();
    let mut seen = BTreeSet::new();
    for (lineno, line) in lines.into_iter().enumerate() {
        let line = line.as_ref().trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_with_fallback_id(line, opts, &format!("line {}", lineno + 1)) {
            Ok(post) => {
                if !seen.insert(post.post_id.clone()) {
                    out.errors.push(SchemaError { record: post.post_id, kind: SchemaErrorKind::DuplicatePostId });
                    out.stats.parse_error_count += 1;
                    continue;
                }
                out.stats.add_post(&post);
                out.posts.push(post);
            }
            Err(e) => {
                out.errors.push(e);
                out.stats.parse_error_count += 1;
            }
        }
    }
    out
}

/// Navigable view of a post's dependency arcs.
#[derive(Debug, Clone)]
pub struct DependencyTree {
    heads: Vec<usize>,
    children: Vec<Vec<usize>>,
    root: usize,
}

impl DependencyTree {
    /// Builds the tree view. Tokens must already satisfy [`validate_tokens`].
    pub fn new(tokens: &[Token]) -> Self {
        let n = tokens.len();
        let mut heads = vec![0; n + 1];
        let mut children = vec![Vec::new(); n + 1];
        let mut root = 0;
        for t in tokens {
            heads[t.index] = t.head;
            children[t.head].push(t.index);
            if t.head == 0 {
                root = t.index;
            }
        }
        DependencyTree { heads, children, root }
    }

    pub fn from_post(post: &AnnotatedPost) -> Self {
        Self::new(&post.tokens)
    }

    pub fn len(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn head(&self, index: usize) -> usize {
        self.heads[index]
    }

    /// Dependents of `index` in ascending order. `children(0)` is the root.
    pub fn children(&self, index: usize) -> &[usize] {
        &self.children[index]
    }

    /// Token indices in the subtree rooted at `index`, ascending.
    pub fn subtree(&self, index: usize) -> Vec<usize> {
        let mut out = vec![index];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&self.children[out[i]]);
            i += 1;
        }
        out.sort_unstable();
        out
    }

    /// Inclusive (min, max) token index covered by the subtree of `index`.
    pub fn subtree_span(&self, index: usize) -> (usize, usize) {
        let sub = self.subtree(index);
        (sub[0], *sub.last().expect("subtree contains its root"))
    }

    /// Indices from `index` up to and including the root token.
    pub fn path_to_root(&self, index: usize) -> Vec<usize> {
        let mut path = vec![index];
        let mut cur = index;
        while self.heads[cur] != 0 {
            cur = self.heads[cur];
            path.push(cur);
        }
        path
    }

    /// Number of arcs from `index` to the root.
    pub fn level(&self, index: usize) -> usize {
        self.path_to_root(index).len() - 1
    }

    /// Number of levels in the tree; a lone root has depth 1.
    pub fn depth(&self) -> usize {
        (1..=self.len()).map(|i| self.level(i) + 1).max().unwrap_or(0)
    }

    pub fn is_ancestor(&self, ancestor: usize, mut index: usize) -> bool {
        while index != 0 {
            if index == ancestor {
                return true;
            }
            index = self.heads[index];
        }
        false
    }
}

/// Maximal runs of B-/I- tokens of the given entity type, as inclusive
/// 1-based spans.
pub fn entity_spans(tokens: &[Token], ty: EntityType) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for t in tokens {
        match t.ner {
            NerTag::Begin(x) if x == ty => {
                if let Some(s) = open.take() {
                    spans.push((s, t.index - 1));
                }
                open = Some(t.index);
            }
            NerTag::Inside(x) if x == ty => {
                if open.is_none() {
                    open = Some(t.index);
                }
            }
            _ => {
                if let Some(s) = open.take() {
                    spans.push((s, t.index - 1));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push((s, tokens.len()));
    }
    spans
}

/// Programmatic post construction, used by the simulator, fixtures and tests.
///
/// Tokens are appended in order; indices are assigned automatically.
#[derive(Debug, Clone)]
pub struct PostBuilder {
    post: AnnotatedPost,
}

impl PostBuilder {
    pub fn new(post_id: &str, event_id: &str) -> Self {
        PostBuilder {
            post: AnnotatedPost {
                post_id: post_id.to_string(),
                author_id: "author".to_string(),
                group_id: None,
                event_id: event_id.to_string(),
                timestamp: 0,
                text: String::new(),
                tokens: Vec::new(),
                has_url: false,
                has_media: false,
                engagement: None,
                author_profile_location: None,
                author_metadata: None,
            },
        }
    }

    /// Appends a token. `ner` must be a valid BIO tag.
    pub fn tok(mut self, form: &str, head: usize, deprel: &str, ner: &str) -> Self {
        let index = self.post.tokens.len() + 1;
        self.post.tokens.push(Token {
            index,
            form: form.to_string(),
            head,
            deprel: deprel.to_string(),
            ner: NerTag::parse(ner).unwrap_or_else(|| panic!("bad NER tag {ner:?}")),
        });
        self
    }

    pub fn author(mut self, author_id: &str) -> Self {
        self.post.author_id = author_id.to_string();
        self
    }

    pub fn group(mut self, group_id: &str) -> Self {
        self.post.group_id = Some(group_id.to_string());
        self
    }

    pub fn at(mut self, timestamp: i64) -> Self {
        self.post.timestamp = timestamp;
        self
    }

    pub fn url(mut self, has_url: bool) -> Self {
        self.post.has_url = has_url;
        self
    }

    pub fn media(mut self, has_media: bool) -> Self {
        self.post.has_media = has_media;
        self
    }

    pub fn engagement(mut self, engagement: f64) -> Self {
        self.post.engagement = Some(engagement);
        self
    }

    pub fn profile(mut self, location: &str) -> Self {
        self.post.author_profile_location = Some(location.to_string());
        self
    }

    pub fn metadata(mut self, metadata: AuthorMetadata) -> Self {
        self.post.author_metadata = Some(metadata);
        self
    }

    /// Finishes without validation; text defaults to the space-joined forms.
    pub fn build(mut self) -> AnnotatedPost {
        if self.post.text.is_empty() {
            self.post.text = self.post.tokens.iter().map(|t| t.form.as_str()).collect::<Vec<_>>().join(" ");
        }
        self.post
    }

    pub fn try_build(self) -> Result<AnnotatedPost, SchemaError> {
        let post = self.build();
        validate_tokens(&post.tokens).map_err(|kind| SchemaError { record: post.post_id.clone(), kind })?;
        Ok(post)
    }
}
