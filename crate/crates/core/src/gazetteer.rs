//! GeoNames-backed name index and region-scoped toponym resolution.
//!
//! A name is a usable location for an event only when it is found in the
//! gazetteer, maps to a city or county, falls inside the event's affected
//! region, and is unambiguous there. [`resolve`] applies all of these.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column count of the GeoNames `allCountries.txt` dump.
pub const GEONAMES_COLUMNS: usize = 19;

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("line {line}: expected {GEONAMES_COLUMNS} tab-separated columns, found {found}")]
    DumpFormat { line: usize, found: usize },
    #[error("line {line}: bad {field}: {value:?}")]
    BadValue { line: usize, field: &'static str, value: String },
    #[error("line {line}: geoname id {id} appears twice with different content")]
    DuplicateId { line: usize, id: u64 },
    #[error("abbreviation table line {line}: expected two tab-separated columns")]
    AliasFormat { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no gazetteer entry for {name:?}")]
pub struct NotFound {
    pub name: String,
}

/// Case-folds and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub geoname_id: u64,
    pub canonical_name: String,
    pub ascii_name: String,
    pub alternate_names: Vec<String>,
    pub feature_class: String,
    pub feature_code: String,
    pub country_code: String,
    pub admin1_code: String,
    pub admin2_code: String,
    pub population: u64,
    pub latitude: f64,
    pub longitude: f64,
}

impl GazetteerEntry {
    /// Parses one dump row. `line` is 1-based, for error reporting.
    pub fn parse_row(row: &str, line: usize) -> Result<Self, GazetteerError> {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != GEONAMES_COLUMNS {
            return Err(GazetteerError::DumpFormat { line, found: cols.len() });
        }
        let bad = |field, value: &str| GazetteerError::BadValue { line, field, value: value.to_string() };
        let geoname_id = cols[0].trim().parse().map_err(|_| bad("geonameid", cols[0]))?;
        let latitude: f64 = cols[4].trim().parse().map_err(|_| bad("latitude", cols[4]))?;
        let longitude: f64 = cols[5].trim().parse().map_err(|_| bad("longitude", cols[5]))?;
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(bad("latitude", cols[4]));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(bad("longitude", cols[5]));
        }
        let population = match cols[14].trim() {
            "" => 0,
            p => p.parse().map_err(|_| bad("population", p))?,
        };
        Ok(GazetteerEntry {
            geoname_id,
            canonical_name: cols[1].to_string(),
            ascii_name: cols[2].to_string(),
            alternate_names: cols[3].split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect(),
            feature_class: cols[6].to_string(),
            feature_code: cols[7].to_string(),
            country_code: cols[8].to_string(),
            admin1_code: cols[10].to_string(),
            admin2_code: cols[11].to_string(),
            population,
            latitude,
            longitude,
        })
    }

    /// Renders the entry as a 19-column dump row.
    pub fn to_row(&self) -> String {
        [
            self.geoname_id.to_string(),
            self.canonical_name.clone(),
            self.ascii_name.clone(),
            self.alternate_names.join(","),
            self.latitude.to_string(),
            self.longitude.to_string(),
            self.feature_class.clone(),
            self.feature_code.clone(),
            self.country_code.clone(),
            String::new(),
            self.admin1_code.clone(),
            self.admin2_code.clone(),
            String::new(),
            String::new(),
            self.population.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]
        .join("\t")
    }

    /// Normalized names under which the entry is indexed.
    pub fn index_names(&self) -> BTreeSet<String> {
        std::iter::once(&self.canonical_name)
            .chain(std::iter::once(&self.ascii_name))
            .chain(&self.alternate_names)
            .map(|n| normalize_name(n))
            .filter(|n| !n.is_empty())
            .collect()
    }

    pub fn admin_unit(&self) -> AdminUnit {
        AdminUnit { country: self.country_code.clone(), admin1: self.admin1_code.clone() }
    }
}

/// Feature class/code patterns such as `P.*` or `A.ADM2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureFilter(pub Vec<String>);

impl FeatureFilter {
    /// Populated places and second-order administrative divisions.
    pub fn cities_and_counties() -> Self {
        FeatureFilter(vec!["P.*".into(), "A.ADM2".into()])
    }

    /// First-order divisions and independent or dependent political entities,
    /// i.e. states, territories and countries.
    pub fn states_and_territories() -> Self {
        FeatureFilter(vec!["A.ADM1".into(), "A.PCL*".into()])
    }

    pub fn matches(&self, class: &str, code: &str) -> bool {
        self.0.iter().any(|pat| {
            let (pc, pcode) = pat.split_once('.').unwrap_or((pat.as_str(), "*"));
            let class_ok = pc == "*" || pc == class;
            let code_ok = match pcode.strip_suffix('*') {
                Some(prefix) => code.starts_with(prefix),
                None => pcode == code,
            };
            class_ok && code_ok
        })
    }
}

impl Default for FeatureFilter {
    fn default() -> Self {
        Self::cities_and_counties()
    }
}

/// A (country, first-order admin) pair. `admin1 = "*"` covers the whole country.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AdminUnit {
    pub country: String,
    pub admin1: String,
}

impl AdminUnit {
    pub fn new(country: &str, admin1: &str) -> Self {
        AdminUnit { country: country.to_string(), admin1: admin1.to_string() }
    }
}

/// The affected region of one event (or the home region of one group).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub region_id: String,
    pub admin_units: BTreeSet<AdminUnit>,
    /// Strings naming the region itself, e.g. "puerto rico" and "pr".
    #[serde(default)]
    pub local_name_aliases: BTreeSet<String>,
}

impl RegionSpec {
    pub fn new(region_id: &str, units: impl IntoIterator<Item = AdminUnit>) -> Self {
        RegionSpec {
            region_id: region_id.to_string(),
            admin_units: units.into_iter().collect(),
            local_name_aliases: BTreeSet::new(),
        }
    }

    pub fn with_aliases<'a>(mut self, aliases: impl IntoIterator<Item = &'a str>) -> Self {
        self.local_name_aliases.extend(aliases.into_iter().map(normalize_name));
        self
    }

    pub fn contains(&self, entry: &GazetteerEntry) -> bool {
        self.admin_units
            .iter()
            .any(|u| u.country == entry.country_code && (u.admin1 == "*" || u.admin1 == entry.admin1_code))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResolutionResult {
    Resolved(GazetteerEntry),
    Ambiguous(usize),
    NotFound,
    OutsideRegion,
}

impl ResolutionResult {
    pub fn entry(&self) -> Option<&GazetteerEntry> {
        match self {
            ResolutionResult::Resolved(e) => Some(e),
            _ => None,
        }
    }
}

/// Immutable name index over a GeoNames dump.
///
/// Rows passing the feature filter are mention candidates. Rows at state or
/// territory level are kept separately as context locations: they can lend
/// population to a descriptor but never resolve as a mention themselves.
#[derive(Debug, Clone, Default)]
pub struct GazetteerIndex {
    entries: Vec<GazetteerEntry>,
    candidates: HashMap<String, Vec<usize>>,
    context: HashMap<String, Vec<usize>>,
    filtered_names: HashSet<String>,
    feature_filter: FeatureFilter,
}

impl PartialEq for GazetteerIndex {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.candidates == other.candidates
            && self.context == other.context
            && self.filtered_names == other.filtered_names
    }
}

impl GazetteerIndex {
    /// Builds the index from parsed entries. Entries are sorted by id, so the
    /// result does not depend on input order; byte-identical repeats are
    /// collapsed.
    pub fn from_entries(mut rows: Vec<GazetteerEntry>, feature_filter: &FeatureFilter) -> Result<Self, GazetteerError> {
        rows.sort_by(|a, b| a.geoname_id.cmp(&b.geoname_id).then_with(|| a.to_row().cmp(&b.to_row())));
        let mut entries: Vec<GazetteerEntry> = Vec::with_capacity(rows.len());
        for row in rows {
            if let Some(last) = entries.last() {
                if last.geoname_id == row.geoname_id {
                    if *last == row {
                        continue;
                    }
                    return Err(GazetteerError::DuplicateId { line: 0, id: row.geoname_id });
                }
            }
            entries.push(row);
        }

        let context_filter = FeatureFilter::states_and_territories();
        let mut candidates: HashMap<String, Vec<usize>> = HashMap::new();
        let mut context: HashMap<String, Vec<usize>> = HashMap::new();
        let mut filtered_names = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            let names = e.index_names();
            if feature_filter.matches(&e.feature_class, &e.feature_code) {
                for n in names {
                    candidates.entry(n).or_default().push(i);
                }
            } else {
                let is_context = context_filter.matches(&e.feature_class, &e.feature_code);
                for n in names {
                    if is_context {
                        context.entry(n.clone()).or_default().push(i);
                    }
                    filtered_names.insert(n);
                }
            }
        }
        Ok(GazetteerIndex { entries, candidates, context, filtered_names, feature_filter: feature_filter.clone() })
    }

    /// Reads a tab-separated GeoNames dump. Blank lines and `#` comments are
    /// skipped.
    pub fn build<R: BufRead>(dump: R, feature_filter: &FeatureFilter) -> Result<Self, GazetteerError> {
        let mut rows = Vec::new();
        for (i, line) in dump.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            rows.push(GazetteerEntry::parse_row(line, i + 1)?);
        }
        Self::from_entries(rows, feature_filter)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn feature_filter(&self) -> &FeatureFilter {
        &self.feature_filter
    }

    /// Number of distinct indexed candidate names.
    pub fn key_count(&self) -> usize {
        self.candidates.len()
    }

    /// City/county candidates for a name, ascending by geoname id.
    pub fn candidates(&self, name: &str) -> Vec<&GazetteerEntry> {
        self.candidates
            .get(&normalize_name(name))
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// True when the name matches only rows the feature filter rejected.
    pub fn is_feature_filtered(&self, name: &str) -> bool {
        let key = normalize_name(name);
        !self.candidates.contains_key(&key) && self.filtered_names.contains(&key)
    }

    /// True when the name denotes a state, territory or country.
    pub fn is_admin_level(&self, name: &str) -> bool {
        self.context.contains_key(&normalize_name(name))
    }

    /// Population of the best-known entry among candidates and context
    /// locations. Used to decide whether a context location is better known
    /// than the head it describes.
    pub fn context_population(&self, name: &str) -> Option<u64> {
        let key = normalize_name(name);
        let cands = self.candidates.get(&key).into_iter().flatten();
        let ctx = self.context.get(&key).into_iter().flatten();
        best_of(cands.chain(ctx).map(|&i| &self.entries[i])).map(|e| e.population)
    }

    /// Normalized canonical and ASCII names of candidate entries inside a region.
    pub fn names_in_region(&self, region: &RegionSpec) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| self.feature_filter.matches(&e.feature_class, &e.feature_code) && region.contains(e))
            .flat_map(|e| [normalize_name(&e.canonical_name), normalize_name(&e.ascii_name)])
            .filter(|n| !n.is_empty())
            .collect()
    }
}

/// Highest population wins; ties go to the smaller geoname id.
fn best_of<'a>(entries: impl Iterator<Item = &'a GazetteerEntry>) -> Option<&'a GazetteerEntry> {
    entries.min_by(|a, b| b.population.cmp(&a.population).then(a.geoname_id.cmp(&b.geoname_id)))
}

/// Region-scoped resolution: unique in-region city/county match or a reason
/// for rejection.
pub fn resolve(name: &str, region: &RegionSpec, index: &GazetteerIndex) -> ResolutionResult {
    let key = normalize_name(name);
    if key.is_empty() {
        return ResolutionResult::NotFound;
    }
    let all = index.candidates(&key);
    if all.is_empty() {
        return ResolutionResult::NotFound;
    }
    let mut in_region: Vec<&GazetteerEntry> = all.into_iter().filter(|e| region.contains(e)).collect();
    in_region.dedup_by_key(|e| e.geoname_id);
    match in_region.len() {
        0 => ResolutionResult::OutsideRegion,
        1 => ResolutionResult::Resolved(in_region[0].clone()),
        n => ResolutionResult::Ambiguous(n),
    }
}

/// Most populous global candidate for a name.
pub fn resolve_best<'a>(name: &str, index: &'a GazetteerIndex) -> Result<&'a GazetteerEntry, NotFound> {
    best_of(index.candidates(name).into_iter()).ok_or_else(|| NotFound { name: name.to_string() })
}

/// Most populous candidate inside a region.
pub fn resolve_best_in_region<'a>(
    name: &str,
    region: &RegionSpec,
    index: &'a GazetteerIndex,
) -> Result<&'a GazetteerEntry, NotFound> {
    best_of(index.candidates(name).into_iter().filter(|e| region.contains(e)))
        .ok_or_else(|| NotFound { name: name.to_string() })
}

pub fn population_of(name: &str, index: &GazetteerIndex) -> Result<u64, NotFound> {
    resolve_best(name, index).map(|e| e.population)
}

/// State and territory names with their abbreviations.
///
/// GeoNames alternate names are inconsistent for postal abbreviations, so the
/// table is shipped separately as `name<TAB>abbreviation` lines. Full names
/// match case-insensitively; abbreviations match case-sensitively (periods
/// ignored), since lowercase "or", "in" and "me" are ordinary words.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateAliasTable {
    /// Abbreviation as written -> normalized full name.
    by_abbreviation: BTreeMap<String, String>,
    full_names: BTreeSet<String>,
}

fn abbreviation_key(s: &str) -> String {
    s.trim().replace('.', "")
}

impl StateAliasTable {
    pub fn parse(text: &str) -> Result<Self, GazetteerError> {
        let mut table = StateAliasTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, abbr) = line.split_once('\t').ok_or(GazetteerError::AliasFormat { line: i + 1 })?;
            if name.trim().is_empty() || abbr.trim().is_empty() || abbr.contains('\t') {
                return Err(GazetteerError::AliasFormat { line: i + 1 });
            }
            table.insert(name, abbr);
        }
        Ok(table)
    }

    /// The table shipped with the crate: US states, territories and DC.
    pub fn us_default() -> Self {
        Self::parse(include_str!("../data/state_abbreviations.tsv")).expect("bundled table is well formed")
    }

    pub fn insert(&mut self, name: &str, abbreviation: &str) {
        let name = normalize_name(name);
        self.by_abbreviation.insert(abbreviation_key(abbreviation), name.clone());
        self.full_names.insert(name);
    }

    /// True for either a full name or an abbreviation.
    pub fn contains(&self, surface: &str) -> bool {
        self.full_name(surface).is_some()
    }

    /// Expands an abbreviation to its full name; full names map to themselves.
    pub fn full_name(&self, surface: &str) -> Option<&str> {
        if let Some(full) = self.by_abbreviation.get(&abbreviation_key(surface)) {
            return Some(full);
        }
        self.full_names.get(&normalize_name(surface)).map(String::as_str)
    }

    /// Every full name and abbreviation, normalized, for profile matching.
    pub fn all_aliases(&self) -> impl Iterator<Item = String> + '_ {
        self.full_names.iter().cloned().chain(self.by_abbreviation.keys().map(|a| normalize_name(a)))
    }

    /// Longest entry, in words.
    pub fn max_words(&self) -> usize {
        self.full_names
            .iter()
            .chain(self.by_abbreviation.keys())
            .map(|s| s.split_whitespace().count())
            .max()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.full_names.is_empty()
    }
}
