//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them).
//!
//! Every tolerance is pinned here, not configurable:
//! inner products and norms 1e-9, IoU vs rasterized oracle 1e-3,
//! counting-oracle metric agreement 1e-12, loss arithmetic exact.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use htk_cli::pipeline::build_baseline_samples;
use htk_cli::report::render_report;
use htk_cli::samples::{evaluate_samples, resolve_sample, EvalInput};
use htk_cli::taxonomy_file::load_taxonomy;

use htk_core::cluster::levenshtein;
use htk_core::embed::{embed_taxonomy, EmbeddingMatrix};
use htk_core::grammar::{parse_label, Alphabet, HorizonLabel};
use htk_core::metrics::{
    aggregated_accuracy, classification_metrics, iou_1d, teacher_forcing_rate, topk_metrics,
    total_loss, DepthSequence, TeacherForcing,
};
use htk_core::simgen::{generate, stratified_split, GeneratorConfig};
use htk_core::taxonomy::{PairRelation, TaxonomyGraph};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn labels(names: &[&str]) -> Vec<HorizonLabel> {
    let alphabet = Alphabet::universal();
    names.iter().map(|n| parse_label(n, &alphabet).unwrap()).collect()
}

fn pass(criterion: &str, started: Instant) {
    println!("criterion {criterion}: PASS ({:.3} s)", started.elapsed().as_secs_f64());
}

fn assert_runtime(criterion: &str, started: Instant, limit: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= limit,
        "criterion {criterion}: runtime {elapsed:?} exceeds {limit:?}"
    );
}

/// 1. The ten-label worked example reproduces its known coordinates to 1e-9
///    in under a second.
#[test]
fn acceptance_1_ten_label_golden_coordinates() {
    let started = Instant::now();
    let loaded = load_taxonomy(&data("taxonomy_demo.json")).unwrap();
    let matrix = embed_taxonomy(&loaded.graph).unwrap();
    assert_eq!(matrix.shape(), (9, 10));

    let s3 = 3.0f64.sqrt();
    let s6 = 6.0f64.sqrt();
    let s10 = 10.0f64.sqrt();
    let s5 = 5.0f64.sqrt();
    let expect = |label: &str, expected: &[f64]| {
        let column = matrix.column(matrix.index_of(label).unwrap());
        for (i, (got, want)) in column.iter().zip(expected).enumerate() {
            assert!(
                (got - want).abs() <= 1e-9,
                "{label}[{i}]: got {got}, want {want}"
            );
        }
    };
    expect("iC", &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    expect("Gor", &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    expect("Al", &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    expect("Ael", &[0.0, 0.0, 0.5, s3 / 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    expect("Acp", &[0.0, 0.0, 0.5, s3 / 6.0, s6 / 3.0, 0.0, 0.0, 0.0, 0.0]);
    expect("Bt", &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    expect("Bs", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, s3 / 2.0, 0.0, 0.0]);
    expect("Bv", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, s3 / 6.0, s6 / 3.0, 0.0]);
    expect(
        "Btv",
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, s3 / 6.0, s6 / 12.0, s10 / 4.0],
    );
    // Mixture column equals (first + 2 * second) / sqrt(5).
    let al = matrix.column(matrix.index_of("Al").unwrap()).to_vec();
    let bv = matrix.column(matrix.index_of("Bv").unwrap()).to_vec();
    let expected: Vec<f64> = al.iter().zip(&bv).map(|(a, b)| (a + 2.0 * b) / s5).collect();
    expect("Al-Bv", &expected);

    assert_runtime("1", started, Duration::from_secs(1));
    pass("1 [ten-label golden coordinates]", started);
}

/// Random two-level taxonomy whose mixture pairs all fall into the named
/// relation patterns (no overlapping/compound combinations).
fn random_named_taxonomy(seed: u64) -> Vec<HorizonLabel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let main_count = rng.random_range(2..=12usize);
    let mains: Vec<char> = ('A'..='L').take(main_count).collect();
    let suffixes = ["", "a", "b", "c", "d", "e", "f", "h", "k", "m"];
    let mut simple: Vec<String> = Vec::new();
    for main in &mains {
        for suffix in suffixes.iter().take(rng.random_range(1..=5usize)) {
            simple.push(format!("{main}{suffix}"));
        }
    }
    simple.truncate(60);
    let main_of = |label: &str| label.chars().next().unwrap();

    let target = rng.random_range(0..=40usize);
    let mut mixtures: Vec<(usize, usize)> = Vec::new();
    let mut attempts = 0;
    while mixtures.len() < target && attempts < 1000 {
        attempts += 1;
        let a = rng.random_range(0..simple.len());
        let b = rng.random_range(0..simple.len());
        if main_of(&simple[a]) == main_of(&simple[b]) {
            continue;
        }
        let clashes = mixtures.iter().any(|&(q1, q2)| {
            let same = a == q1 && b == q2;
            let reversed = a == q2 && b == q1;
            let straight_overlap = (a == q1 && main_of(&simple[b]) == main_of(&simple[q2]))
                || (b == q2 && main_of(&simple[a]) == main_of(&simple[q1]));
            let crossed_overlap = (a == q2 && main_of(&simple[b]) == main_of(&simple[q1]))
                || (b == q1 && main_of(&simple[a]) == main_of(&simple[q2]));
            same || reversed || straight_overlap || crossed_overlap
        });
        if !clashes {
            mixtures.push((a, b));
        }
    }

    let mut names: Vec<String> = simple.clone();
    names.extend(
        mixtures
            .iter()
            .map(|&(a, b)| format!("{}-{}", simple[a], simple[b])),
    );
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    labels(&name_refs)
}

/// 2. On 200 randomized taxonomies every leaf-pair inner product equals the
///    closed-form constant of its relation (and the general target) within
///    1e-9; all norms within 1e-9 of 1; under 30 seconds.
#[test]
fn acceptance_2_identity_suite_on_random_taxonomies() {
    let started = Instant::now();
    let mut checked_pairs = 0usize;
    for seed in 0..200u64 {
        let taxonomy_labels = random_named_taxonomy(0xac2 + seed);
        let g = TaxonomyGraph::build(&taxonomy_labels).unwrap();
        let matrix = embed_taxonomy(&g).unwrap();
        assert!(matrix.dim() <= 60 && matrix.len() <= 100);
        for i in 0..matrix.len() {
            assert!(
                (matrix.norm(i) - 1.0).abs() <= 1e-9,
                "seed {seed}: norm of {}",
                matrix.rendered(i)
            );
            for j in (i + 1)..matrix.len() {
                let relation = g.pair_relation(matrix.label(i), matrix.label(j)).unwrap();
                assert_ne!(
                    relation,
                    PairRelation::Compound,
                    "seed {seed}: generator leaked an overlapping pattern"
                );
                let constant = relation.flat_target().unwrap();
                let dot = matrix.dot(i, j);
                assert!(
                    (dot - constant).abs() <= 1e-9,
                    "seed {seed}: {} vs {} ({relation:?}): {dot} vs {constant}",
                    matrix.rendered(i),
                    matrix.rendered(j)
                );
                let general = g
                    .required_similarity(matrix.label(i), matrix.label(j))
                    .unwrap();
                assert!((dot - general).abs() <= 1e-9);
                checked_pairs += 1;
            }
        }
    }
    assert!(checked_pairs > 100_000, "only {checked_pairs} pairs checked");
    assert_runtime("2", started, Duration::from_secs(30));
    pass("2 [identity suite, 200 random taxonomies]", started);
}

/// 3. The shipped default taxonomy yields a 61 x 99 matrix with a triangular
///    non-mixture block.
#[test]
fn acceptance_3_paper_scale_shape_and_triangularity() {
    let started = Instant::now();
    let loaded = load_taxonomy(&data("taxonomy_default.json")).unwrap();
    assert_eq!(loaded.graph.non_mixture_count(), 61);
    assert_eq!(loaded.graph.mixture_count(), 38);
    let matrix = embed_taxonomy(&loaded.graph).unwrap();
    assert_eq!(matrix.shape(), (61, 99));
    for column in 0..matrix.non_mixture_count() {
        for coord in (column + 1)..matrix.dim() {
            assert_eq!(
                matrix.column(column)[coord],
                0.0,
                "column {column} coordinate {coord} must be zero"
            );
        }
    }
    // Columns are pairwise distinct at this scale: decoding a column ranks
    // its own label first with similarity 1.
    for i in 0..matrix.len() {
        let prediction = htk_core::decode::rank_labels(&matrix, matrix.column(i)).unwrap();
        assert_eq!(prediction.best().label, matrix.rendered(i));
        assert!((prediction.best().score - 1.0).abs() <= 1e-12);
    }
    pass("3 [61 x 99 shape, triangular block]", started);
}

fn random_sequence(rng: &mut ChaCha8Rng) -> DepthSequence {
    let count = rng.random_range(1..=7usize);
    let mut markers: Vec<f64> = (0..count)
        .map(|_| (rng.random_range(1..99u32) as f64) / 100.0)
        .collect();
    markers.sort_by(f64::total_cmp);
    markers.dedup();
    markers.push(1.0);
    DepthSequence::new(markers).unwrap()
}

fn rasterized_iou(pred: &DepthSequence, truth: &DepthSequence, step: f64) -> f64 {
    let pairs = pred.horizon_count().max(truth.horizon_count());
    let cells = (1.0 / step) as usize;
    let mut total = 0.0;
    for t in 0..pred.horizon_count().min(truth.horizon_count()) {
        let (plo, phi) = pred.stripe(t);
        let (tlo, thi) = truth.stripe(t);
        let mut intersection = 0usize;
        let mut union = 0usize;
        for cell in 0..cells {
            let x = (cell as f64 + 0.5) * step;
            let in_pred = x > plo && x < phi;
            let in_truth = x > tlo && x < thi;
            if in_pred && in_truth {
                intersection += 1;
            }
            if in_pred || in_truth {
                union += 1;
            }
        }
        if union > 0 {
            total += intersection as f64 / union as f64;
        }
    }
    total / pairs as f64
}

/// 4. Analytic 1D-IoU matches the 1e-4-step rasterized oracle within 1e-3 on
///    1000 random pairs; identical sequences score exactly 1.
#[test]
fn acceptance_4_iou_matches_rasterized_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac4);
    for case in 0..1000 {
        let a = random_sequence(&mut rng);
        let b = random_sequence(&mut rng);
        let analytic = iou_1d(&a, &b);
        let rasterized = rasterized_iou(&a, &b, 1e-4);
        assert!(
            (analytic - rasterized).abs() <= 1e-3,
            "case {case}: {:?} vs {:?}: {analytic} vs {rasterized}",
            a.markers(),
            b.markers()
        );
        assert_eq!(iou_1d(&a, &a), 1.0);
        assert_eq!(iou_1d(&b, &b), 1.0);
    }
    pass("4 [1D-IoU vs rasterized oracle, 1000 pairs]", started);
}

fn levenshtein_oracle(a: &str, b: &str) -> usize {
    fn go(
        a: &[char],
        b: &[char],
        i: usize,
        j: usize,
        memo: &mut std::collections::HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == 0 {
            return j;
        }
        if j == 0 {
            return i;
        }
        if let Some(d) = memo.get(&(i, j)) {
            return *d;
        }
        let d = (go(a, b, i - 1, j, memo) + 1)
            .min(go(a, b, i, j - 1, memo) + 1)
            .min(go(a, b, i - 1, j - 1, memo) + usize::from(a[i - 1] != b[j - 1]));
        memo.insert((i, j), d);
        d
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    go(&a, &b, a.len(), b.len(), &mut std::collections::HashMap::new())
}

fn random_string(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let chars = ['A', 'B', 'G', 'S', 'a', 'h', 'v', 'w', 'l', 'o'];
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

/// 5. The DP distance equals the memoized recursive oracle exactly on 10 000
///    random pairs; the metric axioms hold on sampled triples.
#[test]
fn acceptance_5_levenshtein_oracle_and_axioms() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac5);
    for _ in 0..10_000 {
        let a = random_string(&mut rng, 12);
        let b = random_string(&mut rng, 12);
        assert_eq!(levenshtein(&a, &b), levenshtein_oracle(&a, &b), "{a} vs {b}");
    }
    for _ in 0..2_000 {
        let a = random_string(&mut rng, 10);
        let b = random_string(&mut rng, 10);
        let c = random_string(&mut rng, 10);
        assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        assert_eq!(levenshtein(&a, &b) == 0, a == b);
        assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
    }
    pass("5 [Levenshtein vs recursive oracle, 10 000 pairs]", started);
}

struct NaiveTopK {
    accuracy: f64,
    precision: f64,
    recall: f64,
}

fn naive_topk(samples: &[(usize, Vec<usize>)], k: usize, num_classes: usize) -> NaiveTopK {
    let in_topk = |c: usize, ranked: &[usize]| ranked[..k].contains(&c);
    let accuracy = samples
        .iter()
        .filter(|(truth, ranked)| in_topk(*truth, ranked))
        .count() as f64
        / samples.len() as f64;
    let mut precision = 0.0;
    let mut precision_classes = 0usize;
    let mut recall = 0.0;
    let mut recall_classes = 0usize;
    for c in 0..num_classes {
        let support = samples.iter().filter(|(truth, _)| *truth == c).count();
        let predicted = samples.iter().filter(|(_, ranked)| in_topk(c, ranked)).count();
        let hits = samples
            .iter()
            .filter(|(truth, ranked)| *truth == c && in_topk(c, ranked))
            .count();
        if support > 0 || predicted > 0 {
            precision_classes += 1;
            if predicted > 0 {
                precision += hits as f64 / predicted as f64;
            }
        }
        if support > 0 {
            recall_classes += 1;
            recall += hits as f64 / support as f64;
        }
    }
    NaiveTopK {
        accuracy,
        precision: precision / precision_classes as f64,
        recall: recall / recall_classes as f64,
    }
}

/// 6. Classification and @k metrics agree with naive counting oracles to
///    1e-12 on 100 random 200-sample sets; accuracy@k is monotone in k and
///    the aggregated main-symbol accuracy never drops below the exact one.
#[test]
fn acceptance_6_metric_counting_oracles() {
    let started = Instant::now();
    let g = TaxonomyGraph::build(&labels(&[
        "Ah", "Al", "Bv", "Bt", "Sw", "Sd", "Cv", "Gor", "Ah-Bv", "Sw-Bt",
    ]))
    .unwrap();
    let num_classes = g.leaf_count();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac6);
    for _ in 0..100 {
        let samples: Vec<(usize, Vec<usize>)> = (0..200)
            .map(|_| {
                let truth = rng.random_range(0..num_classes);
                let mut ranked: Vec<usize> = (0..num_classes).collect();
                for i in (1..ranked.len()).rev() {
                    let j = rng.random_range(0..=i);
                    ranked.swap(i, j);
                }
                (truth, ranked)
            })
            .collect();

        // Top-1 classification vs a naive confusion-matrix oracle.
        let top1: Vec<(usize, usize)> = samples.iter().map(|(t, r)| (*t, r[0])).collect();
        let metrics = classification_metrics(&top1, num_classes).unwrap();
        let naive_accuracy =
            top1.iter().filter(|(t, p)| t == p).count() as f64 / top1.len() as f64;
        assert!((metrics.accuracy - naive_accuracy).abs() <= 1e-12);
        let (mut precision, mut recall, mut f1, mut classes) = (0.0, 0.0, 0.0, 0usize);
        for c in 0..num_classes {
            let tp = top1.iter().filter(|(t, p)| *t == c && *p == c).count() as f64;
            let fp = top1.iter().filter(|(t, p)| *t != c && *p == c).count() as f64;
            let fn_ = top1.iter().filter(|(t, p)| *t == c && *p != c).count() as f64;
            if tp + fp + fn_ == 0.0 {
                continue;
            }
            classes += 1;
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            precision += p;
            recall += r;
            if p + r > 0.0 {
                f1 += 2.0 * p * r / (p + r);
            }
        }
        assert!((metrics.macro_precision - precision / classes as f64).abs() <= 1e-12);
        assert!((metrics.macro_recall - recall / classes as f64).abs() <= 1e-12);
        assert!((metrics.macro_f1 - f1 / classes as f64).abs() <= 1e-12);

        // @k vs the naive oracle, and monotonicity up to the full ranking.
        for k in [1, 3, 5] {
            let fast = topk_metrics(&samples, k, num_classes).unwrap();
            let naive = naive_topk(&samples, k, num_classes);
            assert!((fast.accuracy - naive.accuracy).abs() <= 1e-12);
            assert!((fast.macro_precision - naive.precision).abs() <= 1e-12);
            assert!((fast.macro_recall - naive.recall).abs() <= 1e-12);
        }
        let mut previous = 0.0;
        for k in 1..=num_classes {
            let accuracy = topk_metrics(&samples, k, num_classes).unwrap().accuracy;
            assert!(accuracy >= previous);
            previous = accuracy;
        }
        assert_eq!(previous, 1.0);

        // Aggregating to main symbols can only merge errors into hits.
        let label_pairs: Vec<(HorizonLabel, HorizonLabel)> = top1
            .iter()
            .map(|(t, p)| (g.leaf(*t).clone(), g.leaf(*p).clone()))
            .collect();
        let aggregated = aggregated_accuracy(&label_pairs, &g).unwrap();
        assert!(aggregated >= metrics.accuracy);
    }
    pass("6 [metric counting oracles, 100 x 200 samples]", started);
}

/// 7. The multitask loss weights and the teacher-forcing schedule are exact.
#[test]
fn acceptance_7_loss_and_teacher_forcing_arithmetic() {
    let started = Instant::now();
    assert_eq!(total_loss(1.0, 1.0, &[1.0; 5], 1.0).unwrap(), 25.1);
    let decay = TeacherForcing::LinearDecay { epochs: 5 };
    for epoch in 0..=6u32 {
        let expected = (1.0 - epoch as f64 / 5.0).max(0.0);
        assert_eq!(teacher_forcing_rate(decay, epoch).unwrap(), expected);
    }
    pass("7 [loss and teacher-forcing arithmetic]", started);
}

fn pipeline_report_bytes(seed: u64) -> (Vec<u8>, Vec<u8>) {
    let loaded = load_taxonomy(&data("taxonomy_default.json")).unwrap();
    let config = GeneratorConfig::new(seed, 1000);
    let records = generate(&config, &loaded.graph).unwrap();
    let mut record_bytes = Vec::new();
    htk_cli::records_io::write_records(&records, &mut record_bytes).unwrap();

    let split = stratified_split(&records, (0.6, 0.2, 0.2), seed).unwrap();
    let matrix: EmbeddingMatrix = embed_taxonomy(&loaded.graph).unwrap();
    let samples = build_baseline_samples(&records, &split, &matrix, &loaded.graph, seed).unwrap();
    let inputs: Vec<EvalInput> = samples
        .iter()
        .map(|line| resolve_sample(line, &loaded.graph, &matrix).unwrap())
        .collect();
    let report = evaluate_samples(&inputs, &loaded.graph, &[1, 3, 5]).unwrap();
    (record_bytes, render_report(&report).unwrap())
}

fn assert_rates_in_range(value: &serde_json::Value, path: &str) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, child) in map {
                let child_path = format!("{path}.{key}");
                if let Some(rate) = child.as_f64() {
                    if key == "stones_mse" {
                        assert!(rate >= 0.0, "{child_path} = {rate}");
                    } else if matches!(
                        key.as_str(),
                        "iou" | "accuracy" | "f1" | "precision" | "recall" | "aggregated_main_accuracy"
                    ) {
                        assert!(
                            (0.0..=100.0).contains(&rate),
                            "{child_path} = {rate} out of [0, 100]"
                        );
                    }
                } else {
                    assert_rates_in_range(child, &child_path);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                assert_rates_in_range(item, &format!("{path}[{i}]"));
            }
        }
        _ => {}
    }
}

/// 8. Seed 7, 1000 profiles: the full generate/split/embed/decode/evaluate
///    chain is byte-deterministic across two runs, all report rates are in
///    [0, 100], and the whole thing stays under a minute.
#[test]
fn acceptance_8_pipeline_determinism() {
    let started = Instant::now();
    let (records_a, report_a) = pipeline_report_bytes(7);
    let (records_b, report_b) = pipeline_report_bytes(7);
    assert_eq!(records_a, records_b, "record stream must be byte-identical");
    assert_eq!(report_a, report_b, "report must be byte-identical");

    let report: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_rates_in_range(&report, "report");
    assert_eq!(report["samples"].as_u64().unwrap(), 200);

    assert_runtime("8", started, Duration::from_secs(60));
    pass("8 [end-to-end determinism, seed 7, 1000 profiles]", started);
}
