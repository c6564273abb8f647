//! End-to-end runs: configuration, stage execution, artifacts and reports.
//!
//! Every artifact starts with a header line
//! `# attention-core <version> config_hash=<sha256> stage=<stage>` and is
//! otherwise line-oriented (JSON lines or tab-separated), so reruns can be
//! compared byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::authors::{build_profiles, OrganizationRules};
use crate::corpus::{validate_corpus, AnnotatedPost, ParseOptions, Strictness, ValidatedCorpus};
use crate::descriptors::{annotate_mentions, match_descriptors, DescriptorMatch, PatternConfig, PatternKind};
use crate::features::{build_rows, encode, AnalysisSpec, DesignMatrix, FeatureInputs, INTERCEPT};
use crate::gazetteer::{AdminUnit, FeatureFilter, GazetteerIndex, RegionSpec, StateAliasTable};
use crate::glm::{analyze, grid_search_l2, FitOptions, InferenceConfig, ModelReport, PenaltySpec};
use crate::mentions::{extract_mentions, extraction_stats, LocationMention};
use crate::timeline::{build_timelines, descriptor_rate_series, find_peak, phase_of_day, PeakInfo, TimelineSeries};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const LOCK_FILE: &str = ".attention.lock";
const REPORT_SCHEMA: &str = include_str!("../data/report_schema.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    /// "CC" for a whole country or "CC.ADMIN1" for one first-level unit.
    pub admin_units: Vec<String>,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// Inclusive [start, end] window in UTC seconds.
    #[serde(default)]
    pub window: Option<(i64, i64)>,
}

impl RegionConfig {
    pub fn to_region(&self, id: &str) -> Result<RegionSpec, String> {
        let units = self
            .admin_units
            .iter()
            .map(|u| match u.split_once('.') {
                None if !u.is_empty() => Ok(AdminUnit::new(u, "*")),
                Some((c, a)) if !c.is_empty() && !a.is_empty() => Ok(AdminUnit::new(c, a)),
                _ => Err(format!("region {id}: bad admin unit {u:?}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if units.is_empty() {
            return Err(format!("region {id}: no admin units"));
        }
        Ok(RegionSpec::new(id, units).with_aliases(self.aliases.iter().map(String::as_str)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub t_buffer: i64,
    pub min_dates: usize,
    pub active_percentile: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { t_buffer: 1, min_dates: 5, active_percentile: 95.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub inference: InferenceConfig,
    /// When non-empty, l2 is chosen from this grid on a held-out split.
    pub l2_grid: Vec<f64>,
    pub grid_split: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { inference: InferenceConfig::default(), l2_grid: Vec::new(), grid_split: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub gazetteer: PathBuf,
    #[serde(default)]
    pub state_aliases: Option<PathBuf>,
    #[serde(default)]
    pub organization_rules: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub feature_filter: Option<Vec<String>>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub events: BTreeMap<String, RegionConfig>,
    #[serde(default)]
    pub groups: BTreeMap<String, RegionConfig>,
    #[serde(default)]
    pub patterns: PatternConfig,
    #[serde(default, rename = "analysis")]
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default)]
    pub fit: FitConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String, completed: Vec<PathBuf> },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Stage { .. } => 3,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, RunError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(canonical.as_bytes()))
    }

    /// Checks everything that can be checked before any work is done.
    pub fn validate(&self) -> Result<(), RunError> {
        let err = |m: String| Err(RunError::Config(m));
        if self.corpus.is_empty() {
            return err("no corpus files".into());
        }
        for p in self.corpus.iter().chain([&self.gazetteer]).chain(&self.state_aliases).chain(&self.organization_rules)
        {
            if !self.resolve(p).is_file() {
                return err(format!("missing input file {}", p.display()));
            }
        }
        if self.events.is_empty() {
            return err("no events configured".into());
        }
        for (id, r) in self.events.iter().chain(&self.groups) {
            r.to_region(id).map_err(RunError::Config)?;
        }
        self.patterns.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let t = &self.thresholds;
        if t.t_buffer < 0 {
            return err("t_buffer must be non-negative".into());
        }
        if !(t.active_percentile > 0.0 && t.active_percentile <= 100.0) {
            return err("active_percentile must be in (0, 100]".into());
        }
        let pen = &self.fit.inference.penalty;
        if pen.l2_weight < 0.0 || pen.l1_weight < 0.0 || self.fit.l2_grid.iter().any(|&g| g < 0.0) {
            return err("penalty weights must be non-negative".into());
        }
        let mut labels = BTreeSet::new();
        for a in &self.analyses {
            if !labels.insert(a.label()) {
                return err(format!("duplicate analysis label {}", a.label()));
            }
        }
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Gazetteer,
    Extract,
    Timeline,
    Features,
    Fit,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] =
        [Stage::Ingest, Stage::Gazetteer, Stage::Extract, Stage::Timeline, Stage::Features, Stage::Fit, Stage::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Gazetteer => "gazetteer",
            Stage::Extract => "extract",
            Stage::Timeline => "timeline",
            Stage::Features => "features",
            Stage::Fit => "fit",
            Stage::Report => "report",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Removes the lock file when the run ends, however it ends.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(LOCK_FILE);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| RunError::Config(format!("cannot lock {}: {e}", dir.display())))?;
        Ok(OutputLock(path))
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOutcome {
    pub label: String,
    pub rows: usize,
    pub columns: Vec<String>,
    pub selected_l2: f64,
    pub model: ModelReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub stages: Vec<Stage>,
    pub artifacts: Vec<PathBuf>,
    pub post_count: usize,
    pub parse_errors: usize,
    pub mention_count: usize,
    pub descriptor_count: usize,
    pub analyses: Vec<AnalysisOutcome>,
}

struct Writer {
    dir: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl Writer {
    fn header(&self, stage: Stage) -> String {
        format!("# attention-core v{VERSION} config_hash={} stage={}", self.hash, stage)
    }

    fn write(&mut self, stage: Stage, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| self.fail(stage, e.to_string()))?;
        }
        let mut text = self.header(stage);
        text.push('\n');
        text.push_str(body);
        fs::write(&path, text).map_err(|e| self.fail(stage, format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn jsonl<T: Serialize>(
        &mut self,
        stage: Stage,
        name: &str,
        items: impl IntoIterator<Item = T>,
    ) -> Result<(), RunError> {
        let mut body = String::new();
        for item in items {
            body.push_str(&serde_json::to_string(&item).map_err(|e| self.fail(stage, e.to_string()))?);
            body.push('\n');
        }
        self.write(stage, name, &body)
    }

    fn fail(&self, stage: Stage, message: String) -> RunError {
        RunError::Stage { stage, message, completed: self.written.clone() }
    }
}

/// Runs every stage.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    run_until(config, Stage::Report)
}

/// Runs the stages up to and including `last`, writing their artifacts.
pub fn run_until(config: &RunConfig, last: Stage) -> Result<RunReport, RunError> {
    config.validate()?;
    let out = config.output_path();
    fs::create_dir_all(&out).map_err(|e| RunError::Config(format!("{}: {e}", out.display())))?;
    let _lock = OutputLock::acquire(&out)?;
    let mut w = Writer { dir: out, hash: config.hash(), written: Vec::new() };
    let mut report = RunReport { config_hash: w.hash.clone(), ..Default::default() };

    let events: BTreeMap<String, RegionSpec> = config
        .events
        .iter()
        .map(|(id, r)| Ok((id.clone(), r.to_region(id).map_err(RunError::Config)?)))
        .collect::<Result<_, RunError>>()?;
    let groups: BTreeMap<String, RegionSpec> = config
        .groups
        .iter()
        .map(|(id, r)| Ok((id.clone(), r.to_region(id).map_err(RunError::Config)?)))
        .collect::<Result<_, RunError>>()?;

    // ingest
    let stage = Stage::Ingest;
    let opts = ParseOptions {
        strictness: if config.lenient { Strictness::Lenient } else { Strictness::Strict },
        event_windows: config.events.iter().filter_map(|(id, r)| r.window.map(|w| (id.clone(), w))).collect(),
    };
    let mut lines = Vec::new();
    for p in &config.corpus {
        let path = config.resolve(p);
        let text = fs::read_to_string(&path).map_err(|e| w.fail(stage, format!("{}: {e}", path.display())))?;
        lines.extend(text.lines().map(str::to_string));
    }
    let corpus: ValidatedCorpus = validate_corpus(lines.iter().map(String::as_str), &opts);
    report.post_count = corpus.posts.len();
    report.parse_errors = corpus.errors.len();
    w.jsonl(stage, "01_posts.jsonl", corpus.posts.iter())?;
    w.jsonl(
        stage,
        "01_ingest_stats.jsonl",
        std::iter::once(serde_json::to_value(&corpus.stats).expect("stats serialize"))
            .chain(corpus.errors.iter().map(|e| serde_json::json!({"error": e.to_string()}))),
    )?;
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    // gazetteer
    let stage = Stage::Gazetteer;
    let filter = config.feature_filter.clone().map(FeatureFilter).unwrap_or_default();
    let gaz_path = config.resolve(&config.gazetteer);
    let gaz_file = File::open(&gaz_path).map_err(|e| w.fail(stage, format!("{}: {e}", gaz_path.display())))?;
    let index = GazetteerIndex::build(BufReader::new(gaz_file), &filter).map_err(|e| w.fail(stage, e.to_string()))?;
    let mut patterns = config.patterns.clone();
    if let Some(p) = &config.state_aliases {
        let text = fs::read_to_string(config.resolve(p)).map_err(|e| w.fail(stage, e.to_string()))?;
        patterns.state_alias_table = StateAliasTable::parse(&text).map_err(|e| w.fail(stage, e.to_string()))?;
    }
    w.jsonl(
        stage,
        "02_gazetteer.jsonl",
        [serde_json::json!({
            "entries": index.len(),
            "name_keys": index.key_count(),
            "feature_filter": filter.0,
            "sha256": hex(&Sha256::digest(fs::read(&gaz_path).map_err(|e| w.fail(stage, e.to_string()))?)),
        })],
    )?;
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    // extract + match
    let stage = Stage::Extract;
    let (mentions, matches) = extract_and_match(&corpus.posts, &events, &index, &patterns);
    let stats = extraction_stats(&corpus.posts, &events, &index);
    report.mention_count = mentions.len();
    report.descriptor_count = mentions.iter().filter(|m| m.has_descriptor).count();
    w.jsonl(stage, "03_mentions.jsonl", mentions.iter())?;
    w.jsonl(stage, "03_descriptors.jsonl", matches.iter())?;
    let mut by_kind: BTreeMap<PatternKind, usize> = BTreeMap::new();
    for m in &matches {
        *by_kind.entry(m.kind).or_default() += 1;
    }
    w.jsonl(
        stage,
        "03_extraction_stats.jsonl",
        [serde_json::json!({"extraction": stats, "descriptors_by_kind": by_kind})],
    )?;
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    // timelines
    let stage = Stage::Timeline;
    let t = config.thresholds;
    let timelines = build_timelines(&mentions);
    let all_peaks: BTreeMap<(String, u64), PeakInfo> =
        timelines.iter().filter_map(|(k, s)| find_peak(s, t.t_buffer).map(|p| (k.clone(), p))).collect();
    let peaks: BTreeMap<(String, u64), PeakInfo> = all_peaks
        .iter()
        .filter(|(k, _)| timelines[*k].active_days() >= t.min_dates)
        .map(|(k, p)| (k.clone(), *p))
        .collect();
    let names: BTreeMap<u64, &str> =
        mentions.iter().map(|m| (m.location_id(), m.entry.canonical_name.as_str())).collect();
    w.jsonl(
        stage,
        "04_timelines.jsonl",
        timelines.iter().map(|(k, s)| {
            serde_json::json!({
                "event_id": k.0,
                "location_id": k.1,
                "name": names[&k.1],
                "peak_day": all_peaks[k].peak_day,
                "t_buffer": t.t_buffer,
                "active_days": s.active_days(),
                "kept": peaks.contains_key(k),
                "bins": s.bins,
            })
        }),
    )?;
    for (name, body) in figure_files(&timelines, &all_peaks) {
        w.write(stage, &format!("figures/{name}"), &body)?;
    }
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    // features
    let stage = Stage::Features;
    let rules = match &config.organization_rules {
        Some(p) => {
            let text = fs::read_to_string(config.resolve(p)).map_err(|e| w.fail(stage, e.to_string()))?;
            OrganizationRules::parse(&text).map_err(|e| w.fail(stage, e.to_string()))?
        }
        None => OrganizationRules::shipped(),
    };
    let profiles = build_profiles(&corpus.posts, &events, &index, &rules, t.active_percentile);
    w.jsonl(stage, "05_profiles.jsonl", profiles.values())?;
    let inputs = FeatureInputs {
        posts: &corpus.posts,
        mentions: &mentions,
        profiles: &profiles,
        peaks: Some(&peaks),
        group_regions: &groups,
    };
    let mut designs: Vec<(AnalysisSpec, DesignMatrix)> = Vec::new();
    for spec in &config.analyses {
        let rows = build_rows(&inputs, spec).map_err(|e| w.fail(stage, e.to_string()))?;
        let dm = encode(&rows, spec, true).map_err(|e| w.fail(stage, e.to_string()))?;
        w.write(stage, &format!("05_design_{}.tsv", spec.label()), &dm.to_tsv())?;
        designs.push((spec.clone(), dm));
    }
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    // fit
    let stage = Stage::Fit;
    for (spec, dm) in &designs {
        let outcome = fit_design(spec, dm, &config.fit, config.seed).map_err(|e| w.fail(stage, e))?;
        w.jsonl(stage, &format!("06_fit_{}.jsonl", spec.label()), [&outcome])?;
        report.analyses.push(outcome);
    }
    report.stages.push(stage);
    if last == stage {
        report.artifacts = w.written;
        return Ok(report);
    }

    let stage = Stage::Report;
    w.write(stage, "07_report.tsv", &render_report(&report.analyses, &designs))?;
    report.stages.push(stage);
    report.artifacts = w.written;
    Ok(report)
}

/// Extracts mentions per post and annotates them with descriptor matches.
pub fn extract_and_match(
    posts: &[AnnotatedPost],
    events: &BTreeMap<String, RegionSpec>,
    index: &GazetteerIndex,
    patterns: &PatternConfig,
) -> (Vec<LocationMention>, Vec<DescriptorMatch>) {
    let mut mentions = Vec::new();
    let mut matches = Vec::new();
    for post in posts {
        let Some(region) = events.get(&post.event_id) else { continue };
        let ms = extract_mentions(post, region, index);
        let found = match_descriptors(post, &ms, patterns, index);
        mentions.extend(
            annotate_mentions(&ms, &found, patterns.exclude_context_mentions)
                .expect("matches come from these mentions"),
        );
        matches.extend(found);
    }
    (mentions, matches)
}

fn fit_design(spec: &AnalysisSpec, dm: &DesignMatrix, cfg: &FitConfig, seed: u64) -> Result<AnalysisOutcome, String> {
    let names: Vec<String> = dm.columns.iter().map(|c| c.name.clone()).collect();
    let fe: Vec<bool> = dm.columns.iter().map(|c| c.is_fixed_effect()).collect();
    let mut inference = cfg.inference;
    inference.seed = seed;
    if !cfg.l2_grid.is_empty() {
        let is_intercept: Vec<bool> = names.iter().map(|n| n == INTERCEPT).collect();
        let mask = inference.penalty.mask(&is_intercept, &fe);
        let opts = FitOptions { tol: inference.tol, max_iter: inference.max_iter };
        let l2 = grid_search_l2(&dm.x, &dm.y, &cfg.l2_grid, cfg.grid_split, seed, &mask, &opts)
            .map_err(|e| e.to_string())?;
        inference.penalty = PenaltySpec { l2_weight: l2, ..inference.penalty };
    }
    let model = analyze(&dm.x, &dm.y, &names, &fe, &inference).map_err(|e| e.to_string())?;
    Ok(AnalysisOutcome {
        label: spec.label(),
        rows: dm.nrows(),
        columns: names,
        selected_l2: inference.penalty.l2_weight,
        model,
    })
}

fn safe_name(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Per-series plot data: day, log10 frequency, descriptor rate, phase and a
/// peak marker. Empty cells stand for undefined values.
pub fn figure_files(
    timelines: &BTreeMap<(String, u64), TimelineSeries>,
    peaks: &BTreeMap<(String, u64), PeakInfo>,
) -> Vec<(String, String)> {
    timelines
        .iter()
        .filter_map(|(k, s)| {
            let peak = peaks.get(k)?;
            let mut body = String::from("day\tlog10_frequency\tdescriptor_rate\tphase\tpeak\n");
            for (bin, (day, rate)) in s.bins.iter().zip(descriptor_rate_series(s)) {
                let logf = if bin.mention_count > 0 {
                    format!("{}", (bin.mention_count as f64).log10())
                } else {
                    String::new()
                };
                let rate = rate.map(|r| format!("{r}")).unwrap_or_default();
                let phase = phase_of_day(day, peak);
                let marker = u8::from(day == peak.peak_day);
                writeln!(body, "{day}\t{logf}\t{rate}\t{phase}\t{marker}").unwrap();
            }
            Some((format!("{}_{}.tsv", safe_name(&k.0), k.1), body))
        })
        .collect()
}

/// Writes figure files into `outdir`, returning their paths.
pub fn emit_figure_data(
    timelines: &BTreeMap<(String, u64), TimelineSeries>,
    peaks: &BTreeMap<(String, u64), PeakInfo>,
    outdir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    let files = figure_files(timelines, peaks);
    if !files.is_empty() {
        fs::create_dir_all(outdir)?;
    }
    files
        .into_iter()
        .map(|(name, body)| {
            let p = outdir.join(name);
            fs::write(&p, body)?;
            Ok(p)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaRow {
    pub column: String,
    pub factor: String,
    pub variable: String,
    pub headline: bool,
    #[serde(default)]
    pub author_level: bool,
    pub analyses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSchema {
    #[serde(rename = "row")]
    pub rows: Vec<SchemaRow>,
}

impl ReportSchema {
    pub fn shipped() -> Self {
        toml::from_str(REPORT_SCHEMA).expect("shipped schema parses")
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "inf".into()
    }
}

/// Table-style report: one row per variable, an estimate and SE column pair
/// per analysis; `*` marks Holm-adjusted p < 0.05. Fixed-effect levels are
/// summarized by count.
pub fn render_report(outcomes: &[AnalysisOutcome], designs: &[(AnalysisSpec, DesignMatrix)]) -> String {
    let schema = ReportSchema::shipped();
    let mut out = String::from("factor\tvariable");
    for o in outcomes {
        write!(out, "\t{0} estimate\t{0} S.E.", o.label).unwrap();
    }
    out.push('\n');
    for row in &schema.rows {
        if !outcomes.iter().any(|o| o.columns.contains(&row.column)) {
            continue;
        }
        write!(out, "{}\t{}", row.factor, row.variable).unwrap();
        for o in outcomes {
            match o.model.coefficient(&row.column) {
                Some(c) => {
                    let star = if c.significant(0.05) { "*" } else { "" };
                    write!(out, "\t{}{star}\t{}", fmt_num(c.estimate), fmt_num(c.se)).unwrap();
                }
                None => out.push_str("\t-\t-"),
            }
        }
        out.push('\n');
    }
    out.push_str("Fixed effects\tlevels");
    for (_, dm) in designs {
        let desc: Vec<String> = dm.fixed_effects.iter().map(|f| format!("{}:{}", f.source, f.levels.len())).collect();
        write!(out, "\t{}\t", desc.join(" ")).unwrap();
    }
    out.push('\n');
    out.push_str("Rows\t");
    for o in outcomes {
        write!(out, "\t{}\t", o.rows).unwrap();
    }
    out.push('\n');
    out.push_str("Model deviance\t");
    for o in outcomes {
        write!(out, "\t{:.0}\t", o.model.deviance.model_deviance).unwrap();
    }
    out.push('\n');
    out.push_str("Null deviance\t");
    for o in outcomes {
        write!(out, "\t{:.0}\t", o.model.deviance.null_deviance).unwrap();
    }
    out.push('\n');
    out.push_str("Accuracy\t");
    for o in outcomes {
        match &o.model.accuracy {
            Some(a) => write!(out, "\t{:.1}%\t{:.1}", a.mean * 100.0, a.sd * 100.0).unwrap(),
            None => out.push_str("\t-\t-"),
        }
    }
    out.push('\n');
    let o0 = outcomes.first();
    writeln!(
        out,
        "# se_method={} correction={} alpha=0.05 converged={}",
        o0.map(|o| serde_json::to_value(o.model.se_method).unwrap().as_str().unwrap_or("").to_string())
            .unwrap_or_default(),
        o0.map(|o| o.model.correction.clone()).unwrap_or_default(),
        outcomes.iter().all(|o| o.model.converged),
    )
    .unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::Bin;

    #[test]
    fn region_config_parsing() {
        let r =
            RegionConfig { admin_units: vec!["PR".into(), "US.TX".into()], aliases: vec!["PR".into()], window: None };
        let spec = r.to_region("x").unwrap();
        assert!(spec.admin_units.contains(&AdminUnit::new("US", "TX")));
        assert!(spec.admin_units.contains(&AdminUnit::new("PR", "*")));
        let bad = RegionConfig { admin_units: vec!["US.".into()], aliases: vec![], window: None };
        assert!(bad.to_region("x").is_err());
    }

    #[test]
    fn figure_rows() {
        let s = TimelineSeries {
            location_id: 9,
            event_id: "maria".into(),
            bins: vec![
                Bin { day: 10, mention_count: 4, descriptor_count: 1 },
                Bin { day: 11, mention_count: 0, descriptor_count: 0 },
                Bin { day: 12, mention_count: 10, descriptor_count: 2 },
            ],
        };
        let timelines = BTreeMap::from([(("maria".to_string(), 9), s)]);
        let peaks = BTreeMap::from([(("maria".to_string(), 9), PeakInfo { peak_day: 12, t_buffer: 1 })]);
        let files = figure_files(&timelines, &peaks);
        assert_eq!(files.len(), 1);
        let (name, body) = &files[0];
        assert_eq!(name, "maria_9.tsv");
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[1], format!("10\t{}\t0.25\tpre\t0", 4f64.log10()));
        assert_eq!(lines[2], "11\t\t\tduring\t0");
        assert_eq!(lines[3], "12\t1\t0.2\tduring\t1");
    }

    #[test]
    fn no_timelines_no_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("figs");
        assert!(emit_figure_data(&BTreeMap::new(), &BTreeMap::new(), &out).unwrap().is_empty());
        assert!(!out.exists());
    }

    #[test]
    fn schema_parses() {
        let s = ReportSchema::shipped();
        assert_eq!(s.rows[0].column, "intercept");
        assert!(s.rows.iter().any(|r| !r.headline));
    }
}
