//! Synthetic corpora with known descriptor-generating processes.
//!
//! Generation order: timestamps and locations first, then the empirical
//! attention peaks and phases, then labels drawn chronologically from
//! logit(rate[phase]) + Σ β_k (x_k − E x_k) + β_days (days − mean days in phase).
//! Posts carrying a descriptor are rendered with STATE or MODIFIER sentence
//! templates; the rest with templates the matcher does not fire on.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedPost, AuthorMetadata, PostBuilder, SECONDS_PER_DAY};
use crate::features::{Analysis, AnalysisSpec};
use crate::gazetteer::GazetteerEntry;
use crate::glm::sigmoid;
use crate::pipeline::{RegionConfig, RunConfig};
use crate::timeline::{phase_of_day, PeakInfo, Phase};

/// 2017-09-16T00:00:00Z.
pub const DEFAULT_START: i64 = 1_505_520_000;

const FIRST: [&str; 12] =
    ["Villa", "Barrio", "Monte", "Playa", "Cerro", "Loma", "Valle", "Punta", "Isla", "Vega", "Costa", "Sierra"];
const SECOND: [&str; 12] =
    ["Alta", "Baja", "Verde", "Blanca", "Honda", "Clara", "Nueva", "Vieja", "Grande", "Serena", "Dorada", "Bonita"];
const TERRITORY_ID: u64 = 4_566_966;
const TERRITORY_POPULATION: u64 = 3_195_153;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRates {
    pub pre: f64,
    pub during: f64,
    pub post: f64,
}

impl PhaseRates {
    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Pre => self.pre,
            Phase::During => self.during,
            Phase::Post => self.post,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub event_id: String,
    pub n_posts: usize,
    pub n_authors: usize,
    pub n_locations: usize,
    pub days: i64,
    pub start: i64,
    pub t_buffer: i64,
    pub phase_rates: PhaseRates,
    /// True coefficients. Keys: is_local, is_organization, has_url,
    /// has_media, days.
    pub beta: BTreeMap<String, f64>,
    pub p_local: f64,
    pub p_local_known: f64,
    pub p_organization: f64,
    pub p_organization_known: f64,
    pub p_url: f64,
    pub p_media: f64,
    /// Share of posts concentrated around each location's peak.
    pub burst_share: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 1,
            event_id: "sim".into(),
            n_posts: 10_000,
            n_authors: 400,
            n_locations: 30,
            days: 28,
            start: DEFAULT_START,
            t_buffer: 1,
            phase_rates: PhaseRates { pre: 0.6, during: 0.5, post: 0.3 },
            beta: BTreeMap::from([
                ("is_local".into(), -0.5),
                ("is_organization".into(), 0.3),
                ("has_url".into(), -0.2),
                ("has_media".into(), 0.3),
                ("days".into(), -0.03),
            ]),
            p_local: 0.4,
            p_local_known: 0.8,
            p_organization: 0.15,
            p_organization_known: 0.7,
            p_url: 0.3,
            p_media: 0.25,
            burst_share: 0.55,
        }
    }
}

const BETA_KEYS: [&str; 5] = ["is_local", "is_organization", "has_url", "has_media", "days"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{0} must be in [0, 1]")]
    Probability(&'static str),
    #[error("unknown coefficient {0}")]
    UnknownCoefficient(String),
    #[error("{0}")]
    Invalid(&'static str),
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        let probs = [
            ("phase_rates.pre", self.phase_rates.pre),
            ("phase_rates.during", self.phase_rates.during),
            ("phase_rates.post", self.phase_rates.post),
            ("p_local", self.p_local),
            ("p_local_known", self.p_local_known),
            ("p_organization", self.p_organization),
            ("p_organization_known", self.p_organization_known),
            ("p_url", self.p_url),
            ("p_media", self.p_media),
            ("burst_share", self.burst_share),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SpecError::Probability(name));
            }
        }
        if let Some(k) = self.beta.keys().find(|k| !BETA_KEYS.contains(&k.as_str())) {
            return Err(SpecError::UnknownCoefficient(k.clone()));
        }
        if self.n_posts == 0 || self.n_authors == 0 {
            return Err(SpecError::Invalid("n_posts and n_authors must be positive"));
        }
        if self.n_locations == 0 || self.n_locations > FIRST.len() * SECOND.len() {
            return Err(SpecError::Invalid("n_locations must be in 1..=144"));
        }
        if self.days < 1 || self.t_buffer < 0 {
            return Err(SpecError::Invalid("days must be positive and t_buffer non-negative"));
        }
        Ok(())
    }

    fn coef(&self, key: &str) -> f64 {
        self.beta.get(key).copied().unwrap_or(0.0)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationTruth {
    pub location_id: u64,
    pub name: String,
    pub population: u64,
    pub peak_day: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SyntheticSpec,
    pub locations: Vec<LocationTruth>,
    pub posts_per_phase: BTreeMap<Phase, usize>,
    pub descriptors_per_phase: BTreeMap<Phase, usize>,
    pub descriptor_rate: f64,
}

impl Truth {
    pub fn phase_rate(&self, phase: Phase) -> Option<f64> {
        let n = *self.posts_per_phase.get(&phase)?;
        (n > 0).then(|| self.descriptors_per_phase.get(&phase).copied().unwrap_or(0) as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub posts: Vec<AnnotatedPost>,
    pub gazetteer: Vec<GazetteerEntry>,
    pub truth: Truth,
}

impl SyntheticCorpus {
    pub fn corpus_text(&self) -> String {
        self.posts.iter().map(|p| p.to_line() + "\n").collect()
    }

    pub fn gazetteer_text(&self) -> String {
        self.gazetteer.iter().map(|e| e.to_row() + "\n").collect()
    }
}

struct Author {
    id: String,
    local: Option<bool>,
    organization: Option<bool>,
    weight: f64,
}

fn place(id: u64, name: &str, class: &str, code: &str, admin1: &str, population: u64) -> GazetteerEntry {
    GazetteerEntry {
        geoname_id: id,
        canonical_name: name.into(),
        ascii_name: name.into(),
        alternate_names: Vec::new(),
        feature_class: class.into(),
        feature_code: code.into(),
        country_code: "PR".into(),
        admin1_code: admin1.into(),
        admin2_code: String::new(),
        population,
        latitude: 18.2,
        longitude: -66.5,
    }
}

fn render(builder: PostBuilder, words: &[&str], template: usize) -> PostBuilder {
    let k = words.len();
    let loc = |mut b: PostBuilder, start: usize, head: usize, deprel: &str| {
        for (i, w) in words.iter().enumerate() {
            b = if i == 0 { b.tok(w, head, deprel, "B-LOCATION") } else { b.tok(w, start, "flat", "I-LOCATION") };
        }
        b
    };
    match template {
        // L needs help
        0 => loc(builder, 1, k + 1, "nsubj").tok("needs", 0, "root", "O").tok("help", k + 1, "obj", "O"),
        // Flooding in L tonight
        1 => loc(builder.tok("Flooding", 0, "root", "O").tok("in", 3, "case", "O"), 3, 1, "nmod")
            .tok("tonight", 1, "obl:tmod", "O"),
        // Thinking of everyone in L
        2 => loc(
            builder
                .tok("Thinking", 0, "root", "O")
                .tok("of", 3, "case", "O")
                .tok("everyone", 1, "obl", "O")
                .tok("in", 5, "case", "O"),
            5,
            3,
            "nmod",
        ),
        // L , PR needs help
        3 => loc(builder, 1, k + 3, "nsubj")
            .tok(",", k + 2, "punct", "O")
            .tok("PR", 1, "appos", "B-LOCATION")
            .tok("needs", 0, "root", "O")
            .tok("help", k + 3, "obj", "O"),
        // Flooding in L , Puerto Rico
        4 => loc(builder.tok("Flooding", 0, "root", "O").tok("in", 3, "case", "O"), 3, 1, "nmod")
            .tok(",", k + 4, "punct", "O")
            .tok("Puerto", 3, "appos", "B-LOCATION")
            .tok("Rico", k + 4, "flat", "I-LOCATION"),
        // L , a town in Puerto Rico , needs help
        _ => {
            let town = k + 3;
            let puerto = k + 5;
            loc(builder, 1, k + 8, "nsubj")
                .tok(",", town, "punct", "O")
                .tok("a", town, "det", "O")
                .tok("town", 1, "appos", "O")
                .tok("in", puerto, "case", "O")
                .tok("Puerto", town, "nmod", "B-LOCATION")
                .tok("Rico", puerto, "flat", "I-LOCATION")
                .tok(",", town, "punct", "O")
                .tok("needs", 0, "root", "O")
                .tok("help", k + 8, "obj", "O")
        }
    }
}

/// Generates a corpus and its gazetteer from `spec`.
pub fn simulate(spec: &SyntheticSpec) -> Result<SyntheticCorpus, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut names: Vec<String> = FIRST.iter().flat_map(|a| SECOND.iter().map(move |b| format!("{a} {b}"))).collect();
    names.shuffle(&mut rng);
    names.truncate(spec.n_locations);
    let locations: Vec<GazetteerEntry> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let population = (2_000.0 * (200f64).powf(rng.random::<f64>())).round() as u64;
            place(9_000_001 + i as u64, name, "P", "PPL", &format!("{:03}", i + 1), population)
        })
        .collect();
    let peak_days: Vec<i64> = (0..spec.n_locations)
        .map(|_| {
            let lo = (spec.days / 5).max(0);
            let hi = (spec.days - spec.days / 4).max(lo + 1);
            rng.random_range(lo..hi)
        })
        .collect();
    let location_weights: Vec<f64> = (0..spec.n_locations).map(|r| 1.0 / ((r + 1) as f64).powf(0.7)).collect();

    let authors: Vec<Author> = (0..spec.n_authors)
        .map(|i| Author {
            id: format!("u{i:04}"),
            local: (rng.random::<f64>() < spec.p_local_known).then(|| rng.random::<f64>() < spec.p_local),
            organization: (rng.random::<f64>() < spec.p_organization_known)
                .then(|| rng.random::<f64>() < spec.p_organization),
            weight: 1.0 / ((i + 1) as f64).powf(0.8),
        })
        .collect();

    let author_dist = WeightedIndex::new(authors.iter().map(|a| a.weight)).expect("positive weights");
    let location_dist = WeightedIndex::new(&location_weights).expect("positive weights");
    let jitter = Normal::new(0.0, 1.2).expect("valid");
    let engagement = LogNormal::new(1.0, 1.0).expect("valid");

    struct Draft {
        timestamp: i64,
        author: usize,
        location: usize,
        has_url: bool,
        has_media: bool,
        engagement: f64,
        template_roll: usize,
    }
    let mut drafts: Vec<Draft> = (0..spec.n_posts)
        .map(|_| {
            let location = location_dist.sample(&mut rng);
            let day = if rng.random::<f64>() < spec.burst_share {
                (peak_days[location] as f64 + jitter.sample(&mut rng)).round() as i64
            } else {
                rng.random_range(0..spec.days)
            }
            .clamp(0, spec.days - 1);
            Draft {
                timestamp: spec.start + day * SECONDS_PER_DAY + rng.random_range(0..SECONDS_PER_DAY),
                author: author_dist.sample(&mut rng),
                location,
                has_url: rng.random::<f64>() < spec.p_url,
                has_media: rng.random::<f64>() < spec.p_media,
                engagement: (Distribution::<f64>::sample(&engagement, &mut rng) * 100.0).round() / 100.0,
                template_roll: rng.random_range(0..3),
            }
        })
        .collect();
    drafts.sort_by_key(|d| d.timestamp);

    // Empirical peaks, exactly as the pipeline will find them.
    let mut counts: BTreeMap<(usize, i64), usize> = BTreeMap::new();
    for d in &drafts {
        *counts.entry((d.location, crate::corpus::utc_day(d.timestamp))).or_default() += 1;
    }
    let peaks: Vec<PeakInfo> = (0..spec.n_locations)
        .map(|l| {
            let best = counts.range((l, i64::MIN)..=(l, i64::MAX)).fold(
                None::<(i64, usize)>,
                |acc, (&(_, day), &c)| match acc {
                    Some((_, bc)) if bc >= c => acc,
                    _ => Some((day, c)),
                },
            );
            PeakInfo { peak_day: best.map(|b| b.0).unwrap_or(0), t_buffer: spec.t_buffer }
        })
        .collect();

    let first = drafts.first().map(|d| d.timestamp).unwrap_or(spec.start);
    let days_since = |t: i64| (t - first) as f64 / SECONDS_PER_DAY as f64;
    let phases: Vec<Phase> =
        drafts.iter().map(|d| phase_of_day(crate::corpus::utc_day(d.timestamp), &peaks[d.location])).collect();
    let mut phase_day_sum: BTreeMap<Phase, (f64, usize)> = BTreeMap::new();
    for (d, ph) in drafts.iter().zip(&phases) {
        let slot = phase_day_sum.entry(*ph).or_default();
        slot.0 += days_since(d.timestamp);
        slot.1 += 1;
    }

    let e_local = spec.p_local_known * spec.p_local;
    let e_org = spec.p_organization_known * spec.p_organization;
    let mut posts = Vec::with_capacity(spec.n_posts);
    let mut posts_per_phase: BTreeMap<Phase, usize> = Phase::ALL.iter().map(|&p| (p, 0)).collect();
    let mut descriptors_per_phase = posts_per_phase.clone();
    for (i, (d, phase)) in drafts.iter().zip(&phases).enumerate() {
        let author = &authors[d.author];
        let is_local = f64::from(u8::from(author.local == Some(true)));
        let is_org = f64::from(u8::from(author.organization == Some(true)));
        let (sum, n) = phase_day_sum[phase];
        let eta = logit(spec.phase_rates.get(*phase))
            + spec.coef("is_local") * (is_local - e_local)
            + spec.coef("is_organization") * (is_org - e_org)
            + spec.coef("has_url") * (f64::from(u8::from(d.has_url)) - spec.p_url)
            + spec.coef("has_media") * (f64::from(u8::from(d.has_media)) - spec.p_media)
            + spec.coef("days") * (days_since(d.timestamp) - sum / n as f64);
        let y = rng.random::<f64>() < sigmoid(eta);
        *posts_per_phase.get_mut(phase).expect("all phases") += 1;
        if y {
            *descriptors_per_phase.get_mut(phase).expect("all phases") += 1;
        }

        let mut b = PostBuilder::new(&format!("{}-{:06}", spec.event_id, i + 1), &spec.event_id)
            .author(&author.id)
            .at(d.timestamp)
            .url(d.has_url)
            .media(d.has_media)
            .engagement(d.engagement);
        b = match author.local {
            Some(true) => b.profile(if d.author % 2 == 0 { "Puerto Rico" } else { "Bayamón, PR" }),
            Some(false) => b.profile(if d.author % 2 == 0 { "Miami, FL" } else { "New York" }),
            None => b,
        };
        b = match author.organization {
            Some(true) => b.metadata(AuthorMetadata {
                name: Some(format!("Island News {}", d.author)),
                description: Some("official updates".into()),
                followers_count: Some(20_000),
                friends_count: Some(150),
            }),
            Some(false) => b.metadata(AuthorMetadata {
                name: Some(format!("Resident {}", d.author)),
                description: Some("coffee and family".into()),
                followers_count: Some(150),
                friends_count: Some(300),
            }),
            None => b,
        };
        let words: Vec<&str> = locations[d.location].canonical_name.split(' ').collect();
        let template = if y { 3 + d.template_roll } else { d.template_roll };
        posts.push(render(b, &words, template).build());
    }

    let mut gazetteer = vec![place(TERRITORY_ID, "Puerto Rico", "A", "PCLD", "", TERRITORY_POPULATION)];
    gazetteer.extend(locations.iter().cloned());
    let total_desc: usize = descriptors_per_phase.values().sum();
    let truth = Truth {
        spec: spec.clone(),
        locations: locations
            .iter()
            .zip(&peaks)
            .map(|(e, p)| LocationTruth {
                location_id: e.geoname_id,
                name: e.canonical_name.clone(),
                population: e.population,
                peak_day: p.peak_day,
            })
            .collect(),
        posts_per_phase,
        descriptors_per_phase,
        descriptor_rate: total_desc as f64 / spec.n_posts as f64,
    };
    Ok(SyntheticCorpus { posts, gazetteer, truth })
}

/// A run configuration for a simulated corpus written next to it.
pub fn default_run_config(spec: &SyntheticSpec) -> RunConfig {
    let mut fe = AnalysisSpec::new(Analysis::Rq2a);
    fe.author_fixed_effects = true;
    let mut cfg = RunConfig {
        corpus: vec!["corpus.jsonl".into()],
        gazetteer: "gazetteer.tsv".into(),
        state_aliases: None,
        organization_rules: None,
        output_dir: "out".into(),
        seed: spec.seed,
        lenient: false,
        feature_filter: None,
        thresholds: Default::default(),
        events: BTreeMap::from([(
            spec.event_id.clone(),
            RegionConfig {
                admin_units: vec!["PR".into()],
                aliases: vec!["Puerto Rico".into(), "PR".into()],
                window: None,
            },
        )]),
        groups: BTreeMap::new(),
        patterns: Default::default(),
        analyses: vec![
            AnalysisSpec::new(Analysis::Rq1Event),
            AnalysisSpec::new(Analysis::Rq2a),
            AnalysisSpec::new(Analysis::Rq2b),
            fe,
        ],
        fit: Default::default(),
        base_dir: Default::default(),
    };
    cfg.thresholds.t_buffer = spec.t_buffer;
    cfg
}

/// Writes corpus.jsonl, gazetteer.tsv, config.toml and truth.json to `dir`.
pub fn write_simulation(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticCorpus, SimulateError> {
    let corpus = simulate(spec)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("corpus.jsonl"), corpus.corpus_text())?;
    fs::write(dir.join("gazetteer.tsv"), corpus.gazetteer_text())?;
    fs::write(dir.join("config.toml"), default_run_config(spec).to_toml())?;
    fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&corpus.truth).expect("truth serializes") + "\n")?;
    Ok(corpus)
}

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{validate_corpus, ParseOptions};
    use crate::descriptors::{match_descriptors, PatternConfig, PatternKind};
    use crate::gazetteer::{AdminUnit, FeatureFilter, GazetteerIndex, RegionSpec};
    use crate::mentions::extract_mentions;

    fn small() -> SyntheticSpec {
        SyntheticSpec { n_posts: 600, n_authors: 40, n_locations: 8, ..Default::default() }
    }

    #[test]
    fn templates_round_trip_through_matcher() {
        let sim = simulate(&small()).unwrap();
        let index = GazetteerIndex::build(sim.gazetteer_text().as_bytes(), &FeatureFilter::default()).unwrap();
        let region = RegionSpec::new("sim", [AdminUnit::new("PR", "*")]);
        let cfg = PatternConfig::default();
        let mut kinds = BTreeMap::new();
        for post in &sim.posts {
            let ms = extract_mentions(post, &region, &index);
            assert_eq!(ms.len(), 1, "{}", post.text);
            let found = match_descriptors(post, &ms, &cfg, &index);
            let has = post.text.contains("PR") || post.text.contains("Puerto Rico");
            assert_eq!(found.len(), usize::from(has), "{}", post.text);
            for f in found {
                *kinds.entry(f.kind).or_insert(0) += 1;
            }
        }
        assert!(kinds.contains_key(&PatternKind::State) && kinds.contains_key(&PatternKind::Modifier));
    }

    #[test]
    fn output_is_valid_interchange() {
        let sim = simulate(&small()).unwrap();
        let text = sim.corpus_text();
        let v = validate_corpus(text.lines(), &ParseOptions::default());
        assert!(v.errors.is_empty());
        assert_eq!(v.posts.len(), 600);
    }

    #[test]
    fn seeded_determinism() {
        let a = simulate(&small()).unwrap();
        let b = simulate(&small()).unwrap();
        assert_eq!(a.corpus_text(), b.corpus_text());
        let c = simulate(&SyntheticSpec { seed: 2, ..small() }).unwrap();
        assert_ne!(a.corpus_text(), c.corpus_text());
    }

    #[test]
    fn null_model_rate() {
        let spec = SyntheticSpec {
            phase_rates: PhaseRates { pre: 0.5, during: 0.5, post: 0.5 },
            beta: BTreeMap::new(),
            ..Default::default()
        };
        let sim = simulate(&spec).unwrap();
        assert!((sim.truth.descriptor_rate - 0.5).abs() < 0.02, "{}", sim.truth.descriptor_rate);
    }

    #[test]
    fn phase_profile_rates() {
        let sim = simulate(&SyntheticSpec::default()).unwrap();
        for (phase, target) in [(Phase::Pre, 0.6), (Phase::During, 0.5), (Phase::Post, 0.3)] {
            let r = sim.truth.phase_rate(phase).unwrap();
            assert!((r - target).abs() < 0.03, "{phase}: {r}");
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = SyntheticSpec { p_url: 1.5, ..Default::default() };
        assert_eq!(bad.validate(), Err(SpecError::Probability("p_url")));
        let mut unknown = SyntheticSpec::default();
        unknown.beta.insert("shoe_size".into(), 1.0);
        assert!(matches!(unknown.validate(), Err(SpecError::UnknownCoefficient(_))));
    }

    #[test]
    fn written_config_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_simulation(&small(), dir.path()).unwrap();
        let cfg = RunConfig::load(&dir.path().join("config.toml")).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.analyses.len(), 4);
    }
}
