//! Acceptance suite. Each test prints one PASS/FAIL line for its criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use attention_core::corpus::SECONDS_PER_DAY;
use attention_core::descriptors::{
    annotate_mentions, evaluate_against_gold, match_descriptors, parse_gold_record, GoldLabel, PatternConfig,
};
use attention_core::features::{Analysis, AnalysisSpec, ColumnType};
use attention_core::gazetteer::{
    resolve, resolve_best, resolve_best_in_region, AdminUnit, FeatureFilter, GazetteerEntry, GazetteerIndex,
    RegionSpec, ResolutionResult,
};
use attention_core::glm::{
    analyze, fit, gradient, negative_log_likelihood, FitOptions, FitResult, InferenceConfig, Objective, PenaltySpec,
};
use attention_core::mentions::{extract_mentions, LocationMention, MentionKey, Span};
use attention_core::pipeline::{run, ReportSchema, RunConfig};
use attention_core::simulate::{write_simulation, SyntheticSpec};
use attention_core::timeline::{build_timeline, find_peak, phase_of, phase_of_day, Phase};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn report(criterion: &str, pass: bool, detail: String) {
    println!("{} {criterion}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn fixture_index() -> GazetteerIndex {
    let text = std::fs::read_to_string(fixture("geonames_fixture.tsv")).unwrap();
    GazetteerIndex::build(text.as_bytes(), &FeatureFilter::default()).unwrap()
}

fn fixture_regions() -> BTreeMap<&'static str, RegionSpec> {
    BTreeMap::from([
        ("harvey", RegionSpec::new("harvey", [AdminUnit::new("US", "TX")]).with_aliases(["Texas", "TX"])),
        ("maria", RegionSpec::new("maria", [AdminUnit::new("PR", "*")]).with_aliases(["Puerto Rico", "PR"])),
    ])
}

#[test]
fn descriptor_fixture_precision_recall() {
    let started = Instant::now();
    let index = fixture_index();
    let regions = fixture_regions();
    let config = PatternConfig::default();
    let text = std::fs::read_to_string(fixture("descriptor_gold.jsonl")).unwrap();
    let mut predicted: BTreeMap<MentionKey, GoldLabel> = BTreeMap::new();
    let mut gold: BTreeMap<MentionKey, GoldLabel> = BTreeMap::new();
    let mut sentences = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let record = parse_gold_record(line).unwrap();
        sentences += 1;
        let region = &regions[record.post.event_id.as_str()];
        let mentions = extract_mentions(&record.post, region, &index);
        let matches = match_descriptors(&record.post, &mentions, &config, &index);
        for m in annotate_mentions(&mentions, &matches, true).unwrap() {
            if !m.is_context {
                predicted.insert(m.key(), m.descriptor_kind);
            }
        }
        for (span, label) in record.labels {
            gold.insert(MentionKey { post_id: record.post.post_id.clone(), span }, label);
        }
    }
    let eval = evaluate_against_gold(&predicted, &gold).unwrap();
    let elapsed = started.elapsed();
    let kinds: BTreeSet<String> = gold.values().flatten().map(|k| k.as_str().to_string()).collect();
    let pass = sentences >= 50
        && kinds.len() == 4
        && eval.precision >= 0.95
        && eval.recall >= 0.85
        && elapsed < Duration::from_secs(1);
    report(
        "descriptor fixture precision/recall",
        pass,
        format!(
            "{sentences} sentences, P={:.3} R={:.3} (tp={} fp={} fn={}), {elapsed:?}",
            eval.precision, eval.recall, eval.true_positives, eval.false_positives, eval.false_negatives
        ),
    );
    assert!(pass);
}

struct OracleRow {
    id: u64,
    names: BTreeSet<String>,
    class: String,
    code: String,
    country: String,
    admin1: String,
    population: u64,
}

fn oracle_key(s: &str) -> String {
    s.split_whitespace().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ")
}

fn oracle_rows() -> Vec<OracleRow> {
    std::fs::read_to_string(fixture("geonames_fixture.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let mut names: BTreeSet<String> = [f[1], f[2]].into_iter().map(oracle_key).collect();
            names.extend(f[3].split(',').filter(|s| !s.is_empty()).map(oracle_key));
            OracleRow {
                id: f[0].parse().unwrap(),
                names,
                class: f[6].into(),
                code: f[7].into(),
                country: f[8].into(),
                admin1: f[10].into(),
                population: f[14].parse().unwrap_or(0),
            }
        })
        .collect()
}

fn oracle_is_candidate(r: &OracleRow) -> bool {
    r.class == "P" || (r.class == "A" && r.code == "ADM2")
}

fn oracle_in_region(r: &OracleRow, units: &[(&str, &str)]) -> bool {
    units.iter().any(|(c, a)| r.country == *c && (*a == "*" || r.admin1 == *a))
}

fn oracle_best<'a>(rows: impl Iterator<Item = &'a OracleRow>) -> Option<u64> {
    let mut best: Option<&OracleRow> = None;
    for r in rows {
        best = match best {
            Some(b) if b.population > r.population || (b.population == r.population && b.id < r.id) => Some(b),
            _ => Some(r),
        };
    }
    best.map(|b| b.id)
}

#[test]
fn gazetteer_oracle_equivalence() {
    let started = Instant::now();
    let index = fixture_index();
    let rows = oracle_rows();
    let regions: Vec<Vec<(&str, &str)>> = vec![
        vec![("PR", "*")],
        vec![("US", "TX")],
        vec![("US", "*")],
        vec![("US", "FL"), ("US", "LA")],
        vec![("FR", "*"), ("US", "OR")],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let fixed = ["Lakeview", "Riverside", "Springfield", "Paris", "Victoria", "San Juan", "Rio Grande", "El Yunque"];
    let mut queries: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    while queries.len() < 100 {
        let q = if rng.random::<f64>() < 0.85 {
            let r = &rows[rng.random_range(0..rows.len())];
            let names: Vec<&String> = r.names.iter().collect();
            let n = names[rng.random_range(0..names.len())].clone();
            match rng.random_range(0..3) {
                0 => n.to_uppercase(),
                1 => format!("  {} ", n.replace(' ', "  ")),
                _ => n,
            }
        } else {
            format!("Nowhere {}", rng.random_range(0..1000))
        };
        queries.push(q);
    }
    let mut mismatches = Vec::new();
    for (qi, q) in queries.iter().enumerate() {
        let units = &regions[qi % regions.len()];
        let region = RegionSpec::new("r", units.iter().map(|(c, a)| AdminUnit::new(c, a)));
        let key = oracle_key(q);
        let cands: Vec<&OracleRow> = rows.iter().filter(|r| oracle_is_candidate(r) && r.names.contains(&key)).collect();
        let inside: Vec<&OracleRow> = cands.iter().copied().filter(|r| oracle_in_region(r, units)).collect();
        let expected = match (cands.len(), inside.len()) {
            (0, _) => "not_found".to_string(),
            (_, 0) => "outside".to_string(),
            (_, 1) => format!("resolved:{}", inside[0].id),
            (_, n) => format!("ambiguous:{n}"),
        };
        let got = match resolve(q, &region, &index) {
            ResolutionResult::NotFound => "not_found".to_string(),
            ResolutionResult::OutsideRegion => "outside".to_string(),
            ResolutionResult::Resolved(e) => format!("resolved:{}", e.geoname_id),
            ResolutionResult::Ambiguous(n) => format!("ambiguous:{n}"),
        };
        let best_expected = oracle_best(cands.iter().copied());
        let best_got = resolve_best(q, &index).ok().map(|e| e.geoname_id);
        let regional_expected = oracle_best(inside.iter().copied());
        let regional_got = resolve_best_in_region(q, &region, &index).ok().map(|e| e.geoname_id);
        if expected != got || best_expected != best_got || regional_expected != regional_got {
            mismatches.push(format!("{q:?}: {expected}/{got} {best_expected:?}/{best_got:?}"));
        }
    }
    let tie = resolve_best("Lakeview", &index).unwrap();
    let tie_ok =
        rows.iter().filter(|r| r.names.contains("lakeview")).map(|r| r.id).min().is_some_and(|id| id == tie.geoname_id);
    let elapsed = started.elapsed();
    let pass = mismatches.is_empty() && tie_ok && elapsed < Duration::from_secs(1);
    report(
        "gazetteer oracle equivalence",
        pass,
        format!("{} queries, {} mismatches, tie rule ok={tie_ok}, {elapsed:?}", queries.len(), mismatches.len()),
    );
    assert!(pass, "{mismatches:?}");
}

fn entry(id: u64) -> GazetteerEntry {
    GazetteerEntry {
        geoname_id: id,
        canonical_name: format!("Place {id}"),
        ascii_name: format!("Place {id}"),
        alternate_names: Vec::new(),
        feature_class: "P".into(),
        feature_code: "PPL".into(),
        country_code: "US".into(),
        admin1_code: "TX".into(),
        admin2_code: String::new(),
        population: 1000,
        latitude: 0.0,
        longitude: 0.0,
    }
}

#[test]
fn peak_phase_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut failures = 0usize;
    let mut checked_days = 0usize;
    for s in 0..1000u64 {
        let first = rng.random_range(17_000..17_500i64);
        let len = rng.random_range(1..40i64);
        let mut counts: Vec<u64> =
            (0..len).map(|_| if rng.random::<f64>() < 0.3 { 0 } else { rng.random_range(1..6) }).collect();
        counts[0] = counts[0].max(1);
        counts[len as usize - 1] = counts[len as usize - 1].max(1);
        let e = entry(s);
        let mentions: Vec<LocationMention> = counts
            .iter()
            .enumerate()
            .flat_map(|(d, &c)| {
                let day = first + d as i64;
                let e = e.clone();
                (0..c).map(move |k| LocationMention {
                    post_id: format!("p{day}-{k}"),
                    span: Span::new(1, 1),
                    surface: e.canonical_name.clone(),
                    entry: e.clone(),
                    event_id: "e".into(),
                    timestamp: day * SECONDS_PER_DAY + 60 * k as i64,
                    has_descriptor: k % 2 == 0,
                    descriptor_kind: None,
                    is_context: false,
                })
            })
            .collect();
        let refs: Vec<&LocationMention> = mentions.iter().collect();
        let series = build_timeline(&refs).unwrap();

        let mut argmax = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[argmax] {
                argmax = i;
            }
        }
        let peak_day = first + argmax as i64;
        for b in 0..=2i64 {
            let peak = find_peak(&series, b).unwrap();
            if peak.peak_day != peak_day {
                failures += 1;
            }
            for d in first - 3..first + len + 3 {
                let expected = if d < peak_day - b {
                    Phase::Pre
                } else if d <= peak_day + b {
                    Phase::During
                } else {
                    Phase::Post
                };
                let members = [d < peak_day - b, (peak_day - b..=peak_day + b).contains(&d), d > peak_day + b];
                checked_days += 1;
                if phase_of_day(d, &peak) != expected
                    || phase_of(d * SECONDS_PER_DAY + SECONDS_PER_DAY - 1, &peak) != expected
                    || members.iter().filter(|&&m| m).count() != 1
                {
                    failures += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = failures == 0 && elapsed < Duration::from_secs(5);
    report(
        "peak/phase oracle",
        pass,
        format!("1000 series x t_buffer 0..=2, {checked_days} day checks, {failures} failures, {elapsed:?}"),
    );
    assert!(pass);
}

/// Row-major data for the reference optimizer.
struct Dense {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dense {
    /// Unit-variance features: correlated Gaussians and standardized binaries.
    fn generate(n: usize, beta: &[f64], rng: &mut ChaCha8Rng) -> Dense {
        let p = beta.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let base: f64 = StandardNormal.sample(rng);
            let mut eta = 0.0;
            for (j, b) in beta.iter().enumerate() {
                let v = if j == 0 {
                    1.0
                } else if j % 4 == 0 {
                    (f64::from(u8::from(rng.random::<f64>() < 0.3)) - 0.3) / 0.21f64.sqrt()
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    0.95 * z + 0.31 * base
                };
                eta += b * v;
                x.push(v);
            }
            y.push(f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))));
        }
        Dense { n, p, x, y }
    }

    fn matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::from_row_slice(self.n, self.p, &self.x), DVector::from_column_slice(&self.y))
    }

    /// Gradient of NLL/n + (l2/2)·Σ_{j≥1} β_j².
    fn grad(&self, beta: &[f64], l2: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.p];
        for i in 0..self.n {
            let row = &self.x[i * self.p..(i + 1) * self.p];
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let r = 1.0 / (1.0 + (-eta).exp()) - self.y[i];
            for j in 0..self.p {
                g[j] += r * row[j];
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= self.n as f64;
            if j > 0 {
                *gj += l2 * beta[j];
            }
        }
        g
    }

    fn lipschitz(&self, l2: f64) -> f64 {
        let mut v = vec![1.0; self.p];
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut w = vec![0.0; self.p];
            for i in 0..self.n {
                let row = &self.x[i * self.p..(i + 1) * self.p];
                let d: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                for j in 0..self.p {
                    w[j] += d * row[j];
                }
            }
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            lambda = norm / self.n as f64;
            v = w.into_iter().map(|a| a / norm).collect();
        }
        1.05 * lambda / 4.0 + l2
    }

    /// Nesterov accelerated gradient with gradient-based restarts.
    fn reference_solve(&self, l2: f64, tol: f64) -> Vec<f64> {
        let step = 1.0 / self.lipschitz(l2);
        let mut x = vec![0.0; self.p];
        let mut yk = x.clone();
        let mut t = 1.0f64;
        for _ in 0..20_000 {
            let g = self.grad(&yk, l2);
            let next: Vec<f64> = yk.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let moved: f64 = next.iter().zip(&x).zip(&g).map(|((n, o), gi)| gi * (n - o)).sum();
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            if moved > 0.0 {
                t = 1.0;
                yk = x.clone();
                continue;
            }
            yk = next.iter().zip(&x).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
            x = next;
            t = t_next;
            if self.grad(&x, l2).iter().map(|a| a * a).sum::<f64>().sqrt() < tol {
                break;
            }
        }
        x
    }
}

fn monotone(f: &FitResult) -> bool {
    f.objective_history.windows(2).all(|w| w[1] <= w[0])
}

#[test]
fn glm_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut monotone_fits = 0;
    let mut all_monotone = true;

    let mut worst_fd = 0.0f64;
    for _ in 0..20 {
        let p = rng.random_range(2..7);
        let beta_true: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..1.5)).collect();
        let data = Dense::generate(rng.random_range(30..120), &beta_true, &mut rng);
        let (x, y) = data.matrix();
        let beta = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let analytic = gradient(&beta, &x, &y).unwrap();
        let h = 1e-5;
        for j in 0..p {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (negative_log_likelihood(&up, &x, &y).unwrap() - negative_log_likelihood(&down, &x, &y).unwrap())
                / (2.0 * h);
            let rel = (analytic[j] - fd).abs() / analytic[j].abs().max(1.0);
            worst_fd = worst_fd.max(rel);
        }
        let mask: Vec<bool> = (0..p).map(|j| j > 0).collect();
        for penalty in
            [PenaltySpec::none(), PenaltySpec::l2(0.1), PenaltySpec { l1_weight: 0.01, ..PenaltySpec::l2(0.01) }]
        {
            let obj = Objective { x: &x, y: &y, l2: penalty.l2_weight, l1: 0.0, mask: &mask };
            if penalty.l1_weight == 0.0 {
                let g = obj.optimality_gap(&beta);
                for j in 0..p {
                    let mut up = beta.clone();
                    let mut down = beta.clone();
                    up[j] += h;
                    down[j] -= h;
                    let fd = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
                    worst_fd = worst_fd.max((g[j] - fd).abs() / g[j].abs().max(1.0));
                }
            }
            let f = fit(&x, &y, &penalty, &mask, &FitOptions { max_iter: 500, ..Default::default() }).unwrap();
            monotone_fits += 1;
            all_monotone &= monotone(&f);
        }
    }

    let beta_star = [-0.3, 0.8, -0.6, 0.4, -0.5, 0.1, 0.0, 0.5, -0.9, 0.3, -0.1, 0.25, 0.6];
    let l2 = 0.01;
    let data = Dense::generate(10_000, &beta_star, &mut rng);
    let (x, y) = data.matrix();
    let mask: Vec<bool> = (0..beta_star.len()).map(|j| j > 0).collect();
    let fitted = fit(&x, &y, &PenaltySpec::l2(l2), &mask, &FitOptions::default()).unwrap();
    monotone_fits += 1;
    all_monotone &= monotone(&fitted);
    let reference = data.reference_solve(l2, 1e-11);
    let agreement = fitted.beta.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let population = Dense::generate(200_000, &beta_star, &mut ChaCha8Rng::seed_from_u64(8));
    let target = population.reference_solve(l2, 1e-10);
    let mut recovery_ok = true;
    let mut worst_recovery = 0.0f64;
    for (b, t) in fitted.beta.iter().zip(&target) {
        let tol = f64::max(0.05, 0.1 * t.abs());
        worst_recovery = worst_recovery.max((b - t).abs() / tol);
        recovery_ok &= (b - t).abs() <= tol;
    }

    let names: Vec<String> =
        (0..beta_star.len()).map(|j| if j == 0 { "intercept".into() } else { format!("x{j}") }).collect();
    let fe = vec![false; beta_star.len()];
    let cfg = InferenceConfig { seed: 99, ..Default::default() };
    let a = analyze(&x, &y, &names, &fe, &cfg).unwrap();
    let b = analyze(&x, &y, &names, &fe, &cfg).unwrap();
    let acc_a = a.accuracy.clone().unwrap();
    let acc_b = b.accuracy.clone().unwrap();
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    let reproducible = a.deviance.model_deviance.to_bits() == b.deviance.model_deviance.to_bits()
        && a.deviance.null_deviance.to_bits() == b.deviance.null_deviance.to_bits()
        && bits(&acc_a.runs) == bits(&acc_b.runs)
        && acc_a.mean.to_bits() == acc_b.mean.to_bits()
        && acc_a.sd.to_bits() == acc_b.sd.to_bits();

    let elapsed = started.elapsed();
    let pass = worst_fd < 1e-6
        && all_monotone
        && agreement < 1e-6
        && recovery_ok
        && reproducible
        && elapsed < Duration::from_secs(60);
    report(
        "GLM correctness",
        pass,
        format!(
            "max FD rel err {worst_fd:.2e}, {monotone_fits} fits monotone={all_monotone}, reference agreement \
             {agreement:.2e}, worst recovery {worst_recovery:.2} of tolerance, reproducible={reproducible}, {elapsed:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn end_to_end_temporal_direction() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    write_simulation(&SyntheticSpec::default(), dir.path()).unwrap();
    let cfg = RunConfig::load(&dir.path().join("config.toml")).unwrap();
    let outcome = run(&cfg).unwrap();
    let rq2a = outcome.analyses.iter().find(|a| a.label == "rq2a").expect("rq2a analysis");
    let post = rq2a.model.coefficient("post_peak").unwrap();
    let days = rq2a.model.coefficient("days_since_start").unwrap();
    let elapsed = started.elapsed();
    let pass =
        post.estimate < 0.0 && post.significant(0.05) && days.estimate < 0.0 && elapsed < Duration::from_secs(120);
    report(
        "end-to-end temporal direction",
        pass,
        format!(
            "post_peak {:.3} (Holm p {:.2e}), days_since_start {:.3}, {elapsed:?}",
            post.estimate, post.p_adjusted, days.estimate
        ),
    );
    assert!(pass);
}

#[test]
fn report_schema_structure() {
    let schema = ReportSchema::shipped();
    let mut problems = Vec::new();
    for analysis in [Analysis::Rq1Grouped, Analysis::Rq1Event, Analysis::Rq2a, Analysis::Rq2b] {
        for author_fe in [false, true] {
            let mut spec = AnalysisSpec::new(analysis);
            spec.author_fixed_effects = author_fe;
            let cols = spec.columns();
            let mut actual: BTreeSet<&str> =
                cols.iter().filter(|(_, t)| *t != ColumnType::FixedEffect).map(|(n, _)| *n).collect();
            actual.insert("intercept");
            let expected: BTreeSet<&str> = schema
                .rows
                .iter()
                .filter(|r| r.analyses.iter().any(|a| a == analysis.as_str()))
                .filter(|r| !(author_fe && r.author_level))
                .map(|r| r.column.as_str())
                .collect();
            if actual != expected {
                problems.push(format!("{}: {actual:?} != {expected:?}", spec.label()));
            }
            let fe: Vec<&str> = cols.iter().filter(|(_, t)| *t == ColumnType::FixedEffect).map(|(n, _)| *n).collect();
            let mut expected_fe =
                vec!["location_id", if analysis == Analysis::Rq1Grouped { "group_id" } else { "event_id" }];
            if author_fe {
                expected_fe.push("author_id");
            }
            if fe != expected_fe {
                problems.push(format!("{}: fixed effects {fe:?}", spec.label()));
            }
        }
    }
    let grouped: BTreeSet<&str> = AnalysisSpec::new(Analysis::Rq1Grouped).columns().iter().map(|c| c.0).collect();
    let temporal = ["days_since_start", "during_peak", "post_peak"];
    if !grouped.contains("location_local_to_group") || !grouped.contains("group_size") {
        problems.push("grouped analysis lacks group rows".into());
    }
    if temporal.iter().any(|t| grouped.contains(t)) {
        problems.push("grouped analysis has temporal rows".into());
    }
    let pass = problems.is_empty();
    report("report schema structure", pass, format!("8 analysis variants, {} problems", problems.len()));
    assert!(pass, "{problems:?}");
}
