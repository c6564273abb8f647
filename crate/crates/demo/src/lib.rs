//! Browser bindings: timeline phases, l2 shrinkage and descriptor matching.
//!
//! Every export takes and returns plain strings so the page needs no glue
//! beyond the generated module. Failures come back as `{"error": "..."}`.

use attention_core::corpus::{AnnotatedPost, PostBuilder};
use attention_core::descriptors::{annotate_mentions, match_descriptors, PatternConfig, PatternKind};
use attention_core::gazetteer::{AdminUnit, FeatureFilter, GazetteerEntry, GazetteerIndex, RegionSpec};
use attention_core::glm::{fit, FitOptions, PenaltySpec};
use attention_core::mentions::extract_mentions;
use attention_core::timeline::{descriptor_rate_series, find_peak, phase_of_day, Bin, TimelineSeries};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
struct DayOut {
    day: i64,
    mentions: u64,
    descriptors: u64,
    rate: Option<f64>,
    phase: &'static str,
}

/// `counts` is a JSON array of `[mentions, descriptors]` pairs, one per day
/// starting at day 0.
#[wasm_bindgen]
pub fn timeline_phases(counts: &str, t_buffer: i32) -> String {
    respond(timeline_inner(counts, t_buffer))
}

fn timeline_inner(counts: &str, t_buffer: i32) -> Result<Value, String> {
    let pairs: Vec<(u64, u64)> = serde_json::from_str(counts).map_err(|e| format!("counts: {e}"))?;
    if t_buffer < 0 {
        return Err("buffer must be non-negative".into());
    }
    if let Some((d, _)) = pairs.iter().enumerate().find(|(_, (m, d))| d > m) {
        return Err(format!("day {d} has more descriptors than mentions"));
    }
    let bins: Vec<Bin> = pairs
        .iter()
        .enumerate()
        .map(|(d, &(m, k))| Bin { day: d as i64, mention_count: m, descriptor_count: k })
        .collect();
    let series = TimelineSeries { location_id: 0, event_id: "demo".into(), bins };
    if pairs.iter().all(|&(m, _)| m == 0) {
        return Err("no mentions".into());
    }
    let peak = find_peak(&series, i64::from(t_buffer)).ok_or("no mentions")?;
    let days: Vec<DayOut> = descriptor_rate_series(&series)
        .into_iter()
        .zip(&series.bins)
        .map(|((day, rate), b)| DayOut {
            day,
            mentions: b.mention_count,
            descriptors: b.descriptor_count,
            rate,
            phase: phase_of_day(day, &peak).as_str(),
        })
        .collect();
    Ok(json!({ "peak_day": peak.peak_day, "during": [peak.during_start(), peak.during_end()], "days": days }))
}

const SHRINK_NAMES: [&str; 5] = ["intercept", "x1", "x2", "x3", "x4"];
const SHRINK_TRUTH: [f64; 5] = [-0.2, 1.2, -0.8, 0.4, 0.0];

fn shrinkage_data(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, SHRINK_TRUTH.len(), |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.7..1.7) });
    let beta = DVector::from_column_slice(&SHRINK_TRUTH);
    let eta = &x * beta;
    let y = DVector::from_fn(n, |i, _| f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta[i]).exp()))));
    (x, y)
}

/// Fits a fixed synthetic logistic sample at the given l2 weight and reports
/// the coefficients next to the unpenalized fit and the generating values.
#[wasm_bindgen]
pub fn shrinkage_fit(l2: f64, n: u32, seed: u32) -> String {
    respond(shrinkage_inner(l2, n, seed))
}

fn shrinkage_inner(l2: f64, n: u32, seed: u32) -> Result<Value, String> {
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err("l2 must be a non-negative number".into());
    }
    if !(20..=20_000).contains(&n) {
        return Err("n must be between 20 and 20000".into());
    }
    let (x, y) = shrinkage_data(n as usize, u64::from(seed));
    let mask = [false, true, true, true, true];
    let opts = FitOptions { max_iter: 500, ..Default::default() };
    let penalized = fit(&x, &y, &PenaltySpec::l2(l2), &mask, &opts).map_err(|e| e.to_string())?;
    let plain = fit(&x, &y, &PenaltySpec::none(), &mask, &opts).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = (0..SHRINK_NAMES.len())
        .map(|j| {
            json!({
                "name": SHRINK_NAMES[j],
                "truth": SHRINK_TRUTH[j],
                "unpenalized": plain.beta[j],
                "penalized": penalized.beta[j],
            })
        })
        .collect();
    Ok(json!({
        "l2": l2,
        "converged": penalized.converged && plain.converged,
        "iterations": penalized.iterations,
        "objective": penalized.objective,
        "coefficients": rows,
    }))
}

fn place(id: u64, name: &str, class: &str, code: &str, country: &str, population: u64) -> GazetteerEntry {
    GazetteerEntry {
        geoname_id: id,
        canonical_name: name.into(),
        ascii_name: name.into(),
        alternate_names: Vec::new(),
        feature_class: class.into(),
        feature_code: code.into(),
        country_code: country.into(),
        admin1_code: String::new(),
        admin2_code: String::new(),
        population,
        latitude: 0.0,
        longitude: 0.0,
    }
}

fn demo_index() -> GazetteerIndex {
    let rows = vec![
        place(1, "Puerto Rico", "A", "PCLD", "PR", 3_195_153),
        place(2, "San Juan", "P", "PPLC", "PR", 418_140),
        place(3, "Ponce", "P", "PPLA", "PR", 132_502),
        place(4, "Guayama", "P", "PPLA", "PR", 21_624),
        place(5, "Vieques", "P", "PPL", "PR", 9_301),
        place(6, "Culebra", "P", "PPLA", "PR", 1_818),
        place(7, "Vega Alta", "P", "PPLA", "PR", 12_036),
    ];
    GazetteerIndex::from_entries(rows, &FeatureFilter::default()).expect("demo gazetteer is valid")
}

fn presets() -> Vec<AnnotatedPost> {
    vec![
        PostBuilder::new("state", "demo")
            .tok("Guayama", 5, "nsubj", "B-LOCATION")
            .tok(",", 3, "punct", "O")
            .tok("PR", 1, "appos", "B-LOCATION")
            .tok("needs", 0, "root", "O")
            .tok("water", 4, "obj", "O")
            .build(),
        PostBuilder::new("modifier", "demo")
            .tok("Vega", 0, "root", "B-LOCATION")
            .tok("Alta", 1, "flat", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("town", 1, "appos", "O")
            .tok("near", 6, "case", "O")
            .tok("San", 4, "nmod", "B-LOCATION")
            .tok("Juan", 6, "flat", "I-LOCATION")
            .build(),
        PostBuilder::new("compound", "demo")
            .tok("the", 3, "det", "O")
            .tok("Culebra", 3, "compound", "B-LOCATION")
            .tok("coast", 0, "root", "O")
            .tok("of", 5, "case", "O")
            .tok("Puerto", 3, "nmod", "B-LOCATION")
            .tok("Rico", 5, "flat", "I-LOCATION")
            .build(),
        PostBuilder::new("conjunction", "demo")
            .tok("Vieques", 0, "root", "B-LOCATION")
            .tok(",", 3, "punct", "O")
            .tok("Culebra", 1, "conj", "B-LOCATION")
            .tok("and", 5, "cc", "O")
            .tok("Ponce", 1, "conj", "B-LOCATION")
            .tok(",", 7, "punct", "O")
            .tok("Puerto", 5, "appos", "B-LOCATION")
            .tok("Rico", 7, "flat", "I-LOCATION")
            .build(),
        PostBuilder::new("population", "demo")
            .tok("San", 0, "root", "B-LOCATION")
            .tok("Juan", 1, "flat", "I-LOCATION")
            .tok(",", 4, "punct", "O")
            .tok("near", 5, "case", "O")
            .tok("Guayama", 1, "nmod", "B-LOCATION")
            .build(),
        PostBuilder::new("plain", "demo")
            .tok("Flooding", 0, "root", "O")
            .tok("in", 3, "case", "O")
            .tok("Ponce", 1, "nmod", "B-LOCATION")
            .tok("tonight", 1, "obl:tmod", "O")
            .build(),
    ]
}

/// Preset sentences as `[{id, text}]`.
#[wasm_bindgen]
pub fn descriptor_presets() -> String {
    let list: Vec<Value> = presets().iter().map(|p| json!({ "id": p.post_id, "text": p.text })).collect();
    Value::Array(list).to_string()
}

/// Runs the matcher on one preset with only the listed pattern kinds
/// (comma separated, e.g. "STATE,MODIFIER") enabled.
#[wasm_bindgen]
pub fn match_preset(id: &str, kinds: &str) -> String {
    respond(match_inner(id, kinds))
}

fn match_inner(id: &str, kinds: &str) -> Result<Value, String> {
    let post = presets().into_iter().find(|p| p.post_id == id).ok_or_else(|| format!("unknown preset {id}"))?;
    let enabled_kinds = kinds
        .split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(|k| k.parse::<PatternKind>())
        .collect::<Result<_, _>>()?;
    let config = PatternConfig { enabled_kinds, ..Default::default() };
    let index = demo_index();
    let region = RegionSpec::new("demo", [AdminUnit::new("PR", "*")]).with_aliases(["Puerto Rico", "PR"]);
    let mentions = extract_mentions(&post, &region, &index);
    let matches = match_descriptors(&post, &mentions, &config, &index);
    let annotated = annotate_mentions(&mentions, &matches, true).map_err(|e| e.to_string())?;
    let tokens: Vec<&str> = post.tokens.iter().map(|t| t.form.as_str()).collect();
    let mentions: Vec<Value> = annotated
        .iter()
        .map(|m| {
            let found = matches.iter().find(|d| d.head_span == m.span);
            json!({
                "surface": m.surface,
                "start": m.span.start,
                "end": m.span.end,
                "population": m.entry.population,
                "is_context": m.is_context,
                "kind": m.descriptor_kind.map(PatternKind::as_str),
                "context": found.map(|d| post.surface(d.context_span.start, d.context_span.end)),
                "path": found.map(|d| d.relation_path.clone()),
            })
        })
        .collect();
    Ok(json!({ "text": post.text, "tokens": tokens, "mentions": mentions }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn timeline_assigns_phases() {
        let v = parse(&timeline_phases("[[1,1],[2,1],[6,2],[3,1],[0,0],[1,0]]", 1));
        assert_eq!(v["peak_day"], 2);
        let phases: Vec<&str> = v["days"].as_array().unwrap().iter().map(|d| d["phase"].as_str().unwrap()).collect();
        assert_eq!(phases, ["pre", "during", "during", "during", "post", "post"]);
        assert!(v["days"][4]["rate"].is_null());
    }

    #[test]
    fn timeline_rejects_bad_input() {
        assert!(parse(&timeline_phases("[[1,2]]", 0))["error"].is_string());
        assert!(parse(&timeline_phases("[[0,0]]", 0))["error"].is_string());
        assert!(parse(&timeline_phases("nope", 0))["error"].is_string());
    }

    #[test]
    fn stronger_penalty_shrinks() {
        let norm = |v: &Value| -> f64 {
            v["coefficients"].as_array().unwrap()[1..].iter().map(|c| c["penalized"].as_f64().unwrap().powi(2)).sum()
        };
        let weak = parse(&shrinkage_fit(0.001, 500, 3));
        let strong = parse(&shrinkage_fit(1.0, 500, 3));
        assert!(norm(&strong) < norm(&weak));
        assert_eq!(weak["converged"], true);
        let zero = parse(&shrinkage_fit(0.0, 500, 3));
        for c in zero["coefficients"].as_array().unwrap() {
            assert!((c["penalized"].as_f64().unwrap() - c["unpenalized"].as_f64().unwrap()).abs() < 1e-9);
        }
        assert!(parse(&shrinkage_fit(-1.0, 500, 3))["error"].is_string());
    }

    fn kinds_of(v: &Value) -> Vec<Option<String>> {
        v["mentions"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|m| m["is_context"] == false)
            .map(|m| m["kind"].as_str().map(String::from))
            .collect()
    }

    #[test]
    fn presets_show_each_pattern() {
        let all = "STATE,MODIFIER,COMPOUND,CONJUNCTION";
        let expect = [
            ("state", vec![Some("STATE")]),
            ("modifier", vec![Some("MODIFIER")]),
            ("compound", vec![Some("COMPOUND")]),
            ("conjunction", vec![Some("CONJUNCTION"), Some("CONJUNCTION"), Some("STATE")]),
            ("population", vec![None, None]),
            ("plain", vec![None]),
        ];
        let listed = parse(&descriptor_presets());
        assert_eq!(listed.as_array().unwrap().len(), expect.len());
        for (id, kinds) in expect {
            let got = kinds_of(&parse(&match_preset(id, all)));
            let want: Vec<Option<String>> = kinds.into_iter().map(|k| k.map(String::from)).collect();
            assert_eq!(got, want, "{id}");
        }
    }

    #[test]
    fn disabling_kinds_changes_matches() {
        let v = parse(&match_preset("conjunction", "STATE"));
        assert_eq!(kinds_of(&v), vec![None, None, Some("STATE".to_string())]);
        assert!(parse(&match_preset("state", "BOGUS"))["error"].is_string());
        assert!(parse(&match_preset("missing", "STATE"))["error"].is_string());
    }
}
