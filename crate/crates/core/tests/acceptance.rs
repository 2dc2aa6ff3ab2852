//! Acceptance criteria. Prints one PASS / FAIL / SKIP line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use factcurve::claims::{claim_id, QaOptions, QaPair};
use factcurve::estimator::{
    estimate_factuality, fixed_point_oracle, simulate_claim_stream, EstimatorError, SelfScorePair, SimulationConfig,
};
use factcurve::gateway::Gateway;
use factcurve::ingestion::{
    apply_filters, load_annotated, load_factscore, AnnotatedCorpus, FilterRule, FilterScope, DEFAULT_FILTER_PHRASES,
};
use factcurve::judgment::{flip_rate, render_prompt, JudgeOptions, JudgmentRecord, JudgmentStrategy, Verdict};
use factcurve::model::{
    bucket_claim_counts, bucket_of_sentence, macro_average_fractions, AtomicClaim, ClaimLabel, GenerationRecord,
    Sentence, N_BUCKETS,
};
use factcurve::pipeline;
use factcurve::rag::{build_rag_prompt, chunk_corpus, CorpusDoc, RetrievalChunk, MAX_CHUNK_TOKENS};
use factcurve::report::{self, sha256_hex};

type Outcome = Result<String, String>;
type Criterion = Box<dyn Fn() -> Status>;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:?}, budget {budget:?}"))
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

fn sigma(sk: f64, su: f64) -> Result<f64, EstimatorError> {
    estimate_factuality(SelfScorePair::new(sk, su)?).map(|e| e.sigma)
}

fn c1_analytic_points() -> Outcome {
    let start = Instant::now();
    for (sk, su, want) in [(1.0, 0.0, 1.0), (0.0, 0.0, 0.5), (0.0, 1.0, 0.0), (0.5, 0.5, 0.5)] {
        let got = sigma(sk, su).map_err(|e| format!("({sk}, {su}): {e}"))?;
        ensure((got - want).abs() <= 1e-12, || format!("({sk}, {su}) -> {got}, want {want}"))?;
    }
    ensure(matches!(sigma(1.0, 1.0), Err(EstimatorError::Degenerate { .. })), || {
        "(1, 1) did not raise the degeneracy error".into()
    })?;
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("4 points exact to 1e-12, (1,1) degenerate, {:?}", start.elapsed()))
}

fn c2_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(2);
    let h = 1e-6;
    let mut n = 0;
    while n < 1000 {
        let sk: f64 = rng.random_range(0.0..1.0 - h);
        let su: f64 = rng.random_range(0.0..1.0 - h);
        if sk + su + h > 1.9 {
            continue;
        }
        let base = sigma(sk, su).unwrap();
        let d_sk = sigma(sk + h, su).unwrap() - base;
        let d_su = sigma(sk, su + h).unwrap() - base;
        ensure(d_sk > 0.0, || format!("dσ/dSK = {d_sk} at ({sk}, {su})"))?;
        ensure(d_su < 0.0, || format!("dσ/dSU = {d_su} at ({sk}, {su})"))?;
        n += 1;
    }
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{n} pairs with SK+SU <= 1.9, {:?}", start.elapsed()))
}

fn c3_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(3);
    let mut n = 0;
    let mut worst: f64 = 0.0;
    while n < 1000 {
        let sk: f64 = rng.random_range(0.0..=1.0);
        let su: f64 = rng.random_range(0.0..=1.0);
        if (sk - (1.0 - su)).abs() >= 1.0 {
            continue;
        }
        let fp = fixed_point_oracle(sk, su, 1e-12, 10_000_000).map_err(|e| format!("({sk}, {su}): {e}"))?;
        let closed = sigma(sk, su).unwrap();
        let err = (fp.sigma - closed).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("({sk}, {su}): oracle {} vs closed form {closed}", fp.sigma))?;
        n += 1;
    }
    within_budget(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{n} pairs, max |Δ| = {worst:.2e}, {:?}", start.elapsed()))
}

fn c4_monte_carlo() -> Outcome {
    let start = Instant::now();
    let target = 0.7 / 0.9;
    let cfg = SimulationConfig {
        n_claims: 100_000,
        true_sigma: target,
        self_known: 0.8,
        self_unknown: 0.3,
        seed: 42,
    };
    let a = simulate_claim_stream(&cfg).map_err(|e| e.to_string())?;
    let b = simulate_claim_stream(&cfg).map_err(|e| e.to_string())?;
    ensure(a == b, || "two runs with the same seed differ".into())?;
    let j = a.empirical_judged_correct_fraction;
    ensure((j - target).abs() <= 0.01, || format!("judged-correct fraction {j} vs {target}"))?;
    let (sk, su) = (a.empirical_self_known.unwrap(), a.empirical_self_unknown.unwrap());
    let est = sigma(sk, su).map_err(|e| e.to_string())?;
    ensure((est - target).abs() <= 0.02, || format!("estimate {est} vs {target}"))?;
    within_budget(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!(
        "judged-correct {j:.5}, estimate {est:.5} (target {target:.5}), reproducible, {:?}",
        start.elapsed()
    ))
}

/// Bucket containing i/n by exact comparison `k·n < 5·i ≤ (k+1)·n`.
fn brute_bucket(i: usize, n: usize) -> usize {
    let hits: Vec<usize> = (0..N_BUCKETS).filter(|&k| k * n < N_BUCKETS * i && N_BUCKETS * i <= (k + 1) * n).collect();
    assert_eq!(hits.len(), 1, "bucket intervals do not partition at {i}/{n}");
    hits[0]
}

fn c5_bucketing() -> Outcome {
    let mut checked = 0;
    for n in 1..=12 {
        for i in 1..=n {
            let got = bucket_of_sentence(i, n).map_err(|e| e.to_string())?;
            let want = brute_bucket(i, n);
            ensure(got.index == want, || format!("{i}/{n} -> bucket {}, want {want}", got.index))?;
            checked += 1;
        }
    }
    let ex = bucket_of_sentence(3, 6).map_err(|e| e.to_string())?;
    ensure(ex.index == 2 && ex.label() == "40-60", || format!("3 of 6 -> {}", ex.label()))?;
    Ok(format!("{checked} (i, n) pairs with n <= 12; 3 of 6 -> (40,60]"))
}

struct RandomCorpus {
    gens: Vec<GenerationRecord>,
    claims: Vec<AtomicClaim>,
    b: Vec<JudgmentRecord>,
    c: Vec<JudgmentRecord>,
}

fn random_corpus(rng: &mut StdRng) -> RandomCorpus {
    let n_gen = rng.random_range(1..=5);
    let mut gens = Vec::new();
    for g in 0..n_gen {
        let n = rng.random_range(1..=12);
        gens.push(GenerationRecord {
            id: format!("g{g}"),
            entity: format!("E{g}"),
            prompt: String::new(),
            model_id: "m".into(),
            text: String::new(),
            sentences: (1..=n)
                .map(|i| Sentence {
                    index: i,
                    total: n,
                    text: format!("s{i}"),
                })
                .collect(),
            filtered: false,
        });
    }
    let n_claims = rng.random_range(1..=200);
    let mut ordinal: HashMap<(usize, usize), usize> = HashMap::new();
    let mut claims = Vec::new();
    for _ in 0..n_claims {
        let g = rng.random_range(0..n_gen);
        let s = rng.random_range(1..=gens[g].sentences.len());
        let k = ordinal.entry((g, s)).or_insert(0);
        *k += 1;
        let label = [ClaimLabel::Supported, ClaimLabel::Unsupported, ClaimLabel::Irrelevant][rng.random_range(0..3)];
        claims.push(AtomicClaim {
            id: claim_id(&gens[g].id, s, *k),
            generation_id: gens[g].id.clone(),
            sentence_index: s,
            text: String::new(),
            label,
        });
    }
    let verdicts_b = [Verdict::JudgedTrue, Verdict::JudgedFalse, Verdict::Unparseable];
    let verdicts_c = [Verdict::JudgedTrue, Verdict::JudgedFalse, Verdict::JudgedNoa, Verdict::Unparseable];
    let mut b = Vec::new();
    let mut c = Vec::new();
    for claim in claims.iter().filter(|c| c.label != ClaimLabel::Irrelevant) {
        let record = |strategy, verdict| JudgmentRecord {
            claim_id: claim.id.clone(),
            strategy,
            raw_response: String::new(),
            verdict,
        };
        b.push(record(JudgmentStrategy::QuestionAnswering, verdicts_b[rng.random_range(0..3)]));
        c.push(record(JudgmentStrategy::QaWithNoa, verdicts_c[rng.random_range(0..4)]));
    }
    RandomCorpus { gens, claims, b, c }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn check_aggregates(rc: &RandomCorpus) -> Result<(), String> {
    let n_of: HashMap<&str, usize> = rc.gens.iter().map(|g| (g.id.as_str(), g.sentences.len())).collect();
    let bucket_of = |c: &AtomicClaim| brute_bucket(c.sentence_index, n_of[c.generation_id.as_str()]);

    // Macro-average: enumerate every sentence, keep those holding claims.
    let mut frac_sum = [[0.0f64; 3]; N_BUCKETS];
    let mut n_sent = [0usize; N_BUCKETS];
    for g in &rc.gens {
        for s in 1..=g.sentences.len() {
            let here: Vec<&AtomicClaim> =
                rc.claims.iter().filter(|c| c.generation_id == g.id && c.sentence_index == s).collect();
            if here.is_empty() {
                continue;
            }
            let k = brute_bucket(s, g.sentences.len());
            n_sent[k] += 1;
            for (slot, label) in [ClaimLabel::Supported, ClaimLabel::Unsupported, ClaimLabel::Irrelevant].iter().enumerate() {
                frac_sum[k][slot] += here.iter().filter(|c| c.label == *label).count() as f64 / here.len() as f64;
            }
        }
    }
    let fr = macro_average_fractions(&rc.gens, &rc.claims).map_err(|e| e.to_string())?;
    for k in 0..N_BUCKETS {
        let mean = |slot: usize| if n_sent[k] == 0 { 0.0 } else { frac_sum[k][slot] / n_sent[k] as f64 };
        let row = &fr[k];
        ensure(row.n_sentences == n_sent[k], || format!("bucket {k}: n_sentences {} vs {}", row.n_sentences, n_sent[k]))?;
        ensure(
            close(row.frac_supported, mean(0)) && close(row.frac_unsupported, mean(1)) && close(row.frac_irrelevant, mean(2)),
            || format!("bucket {k}: fractions differ"),
        )?;
    }

    // Counts: per-generation average over all generations.
    let counts = bucket_claim_counts(&rc.gens, &rc.claims).map_err(|e| e.to_string())?;
    for (k, row) in counts.iter().enumerate() {
        let count = |label| rc.claims.iter().filter(|c| c.label == label && bucket_of(c) == k).count() as f64;
        let n = rc.gens.len() as f64;
        ensure(
            close(row.avg_supported_count, count(ClaimLabel::Supported) / n)
                && close(row.avg_unsupported_count, count(ClaimLabel::Unsupported) / n),
            || format!("bucket {k}: counts differ"),
        )?;
    }

    // Flip rate: walk every claim, both verdicts must parse.
    let vb: HashMap<&str, Verdict> = rc.b.iter().map(|j| (j.claim_id.as_str(), j.verdict)).collect();
    let vc: HashMap<&str, Verdict> = rc.c.iter().map(|j| (j.claim_id.as_str(), j.verdict)).collect();
    let flips = flip_rate(&rc.gens, &rc.claims, &rc.b, &rc.c).map_err(|e| e.to_string())?;
    ensure(flips.len() == 2 * N_BUCKETS, || format!("{} flip records", flips.len()))?;
    for rec in &flips {
        let (mut denom, mut num) = (0, 0);
        for claim in &rc.claims {
            if claim.label != rec.label_class || bucket_of(claim) != rec.bucket.index {
                continue;
            }
            let (b, c) = (vb[claim.id.as_str()], vc[claim.id.as_str()]);
            if b == Verdict::Unparseable || c == Verdict::Unparseable {
                continue;
            }
            if b == Verdict::JudgedTrue {
                denom += 1;
                if matches!(c, Verdict::JudgedFalse | Verdict::JudgedNoa) {
                    num += 1;
                }
            }
        }
        let want = (denom > 0).then(|| num as f64 / denom as f64);
        ensure(
            rec.n_correct_in_b == denom && rec.n_flipped == num && rec.flip_rate == want,
            || format!("flip {:?} {}: got {}/{}, want {num}/{denom}", rec.label_class, rec.bucket.label(), rec.n_flipped, rec.n_correct_in_b),
        )?;
    }
    Ok(())
}

fn c6_aggregation_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    let mut total_claims = 0;
    for case in 0..100 {
        let rc = random_corpus(&mut rng);
        total_claims += rc.claims.len();
        check_aggregates(&rc).map_err(|e| format!("case {case}: {e}"))?;
    }
    within_budget(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("100 random corpora ({total_claims} claims), {:?}", start.elapsed()))
}

fn refusal_for(phrase: &str) -> String {
    let stem = phrase.trim_end_matches("...").trim_end();
    format!("{stem} any details about Orla Fenwick, so I cannot write a biography.")
}

fn record(id: &str, text: &str) -> GenerationRecord {
    GenerationRecord {
        id: id.into(),
        entity: "Orla Fenwick".into(),
        prompt: String::new(),
        model_id: "m".into(),
        text: text.into(),
        sentences: vec![Sentence {
            index: 1,
            total: 1,
            text: text.into(),
        }],
        filtered: false,
    }
}

fn c7_filter_rules() -> Outcome {
    let rules = FilterRule::defaults();
    for phrase in DEFAULT_FILTER_PHRASES {
        let (out, _) = apply_filters(vec![record("r", &refusal_for(phrase))], &rules, FilterScope::Opening);
        ensure(out[0].filtered, || format!("{phrase:?} did not trigger"))?;
    }
    let clean = "Orla Fenwick is an Irish botanist born in 1950. She studied plant genetics at Trinity College Dublin.";
    let (out, _) = apply_filters(vec![record("c", clean)], &rules, FilterScope::Opening);
    ensure(!out[0].filtered, || "clean biography was filtered".into())?;

    let mut records: Vec<GenerationRecord> = (0..7).map(|k| record(&format!("c{k}"), clean)).collect();
    records.push(record("r", &refusal_for(DEFAULT_FILTER_PHRASES[0])));
    let (records, stats) = apply_filters(records, &rules, FilterScope::Opening);
    let corpus = AnnotatedCorpus {
        records,
        ..Default::default()
    };
    let (rows, _) = pipeline::stats(&corpus).map_err(|e| e.to_string())?;
    let shown = report::pct(rows[0].filtered_rate);
    ensure(shown == "12.5" && report::pct(stats.filtered_rate) == "12.5", || format!("filtered rate shown as {shown}"))?;
    Ok(format!("{} phrases trigger, clean bio passes, 1 of 8 filtered -> \"{shown}\"", DEFAULT_FILTER_PHRASES.len()))
}

fn c8_prompt_fidelity() -> Outcome {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden");
    let sums = std::fs::read_to_string(golden.join("SHA256SUMS")).map_err(|e| e.to_string())?;
    let expected: HashMap<&str, &str> = sums
        .lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(sum, name)| (name, sum))
        .collect();
    let claim = AtomicClaim {
        id: "g:s1:c1".into(),
        generation_id: "g".into(),
        sentence_index: 1,
        text: "Lanny Flaherty is an American.".into(),
        label: ClaimLabel::Supported,
    };
    let qa = QaPair {
        claim_id: claim.id.clone(),
        question: "What nationality is Lanny Flaherty?".into(),
        answer: "American".into(),
    };
    let cases = [
        ("direct_asking.txt", JudgmentStrategy::DirectAsking, None),
        ("question_answering.txt", JudgmentStrategy::QuestionAnswering, Some(&qa)),
        ("qa_with_noa.txt", JudgmentStrategy::QaWithNoa, Some(&qa)),
    ];
    for (file, strategy, qa) in cases {
        let rendered = render_prompt(strategy, &claim, qa, "Lanny Flaherty").map_err(|e| e.to_string())?;
        let want = std::fs::read(golden.join(file)).map_err(|e| e.to_string())?;
        ensure(rendered.as_bytes() == want.as_slice(), || format!("{file}: rendered prompt differs from golden"))?;
        let sum = sha256_hex(rendered.as_bytes());
        ensure(expected.get(file) == Some(&sum.as_str()), || format!("{file}: checksum {sum} not in SHA256SUMS"))?;
        let lines: Vec<&str> = rendered.lines().collect();
        if strategy != JudgmentStrategy::DirectAsking {
            ensure(lines.contains(&"(A) True") && lines.contains(&"(B) False"), || format!("{file}: option lines"))?;
        }
        ensure(
            lines.contains(&"(C) None of the above") == (strategy == JudgmentStrategy::QaWithNoa),
            || format!("{file}: NOA option line"),
        )?;
    }
    Ok("3 rendered templates byte-match golden files and checksums".into())
}

fn c9_rag_chunker() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz.,'-0123456789".chars().collect();
    let seps = [" ", "  ", "\n", "\t", " \n "];
    for case in 0..100 {
        let n_tokens = rng.random_range(0..=2000);
        let mut text = String::new();
        for t in 0..n_tokens {
            if t > 0 || rng.random_bool(0.2) {
                text.push_str(seps[rng.random_range(0..seps.len())]);
            }
            for _ in 0..rng.random_range(1..=9) {
                text.push(alphabet[rng.random_range(0..alphabet.len())]);
            }
        }
        let doc = CorpusDoc {
            doc_id: format!("d{case}"),
            title: "T".into(),
            text: text.clone(),
        };
        let chunks = chunk_corpus(&[doc]);
        ensure(chunks.iter().all(|c| c.token_count <= MAX_CHUNK_TOKENS), || format!("case {case}: oversized chunk"))?;
        ensure(
            chunks.iter().all(|c| c.token_count == c.text.split_whitespace().count()),
            || format!("case {case}: token_count mismatch"),
        )?;
        let joined = chunks.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        ensure(joined == normalized, || format!("case {case}: reassembly differs"))?;
    }
    let chunks: Vec<RetrievalChunk> = ["first passage", "second passage", "third passage"]
        .iter()
        .enumerate()
        .map(|(i, t)| RetrievalChunk {
            doc_id: "d".into(),
            chunk_index: i,
            text: t.to_string(),
            token_count: 2,
        })
        .collect();
    let refs: Vec<&RetrievalChunk> = chunks.iter().collect();
    let prompt = build_rag_prompt("Jessie Mae Brown Beavers", &refs).map_err(|e| e.to_string())?;
    let want = "Document [0] first passage\nDocument [1] second passage\nDocument [2] third passage\nQuestion: Tell me a bio of Jessie Mae Brown Beavers.";
    ensure(prompt == want, || format!("prompt layout: {prompt:?}"))?;
    Ok("100 random documents bounded and reassembled; Document [i] layout matches".into())
}

fn c10_end_to_end() -> Outcome {
    let corpus = load_annotated(&fixtures().join("corpus.jsonl")).map_err(|e| e.to_string())?;
    ensure(corpus.records.len() >= 10, || format!("fixture has {} generations", corpus.records.len()))?;
    let model = corpus.records[0].model_id.clone();
    let qa = QaOptions {
        model_id: model.clone(),
        max_in_flight: 4,
        retry_temperature: 0.7,
    };
    let judge = JudgeOptions {
        model_id: model,
        max_in_flight: 4,
        max_tokens: 1024,
    };
    let run = || {
        let gateway = Gateway::replay(fixtures().join("cache"));
        pipeline::full_report(&corpus, &gateway, &qa, &judge).map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(!a.is_partial(), || format!("fixture run is partial: {:?}", a.failures))?;
    let names = ["buckets.csv", "selfscores.csv", "fliprate.csv", "estimates.csv"];
    for name in names {
        let (fa, fb) = (a.file(name), b.file(name));
        ensure(fa.is_some() && fa == fb, || format!("{name} missing or not byte-identical"))?;
    }
    Ok(format!("{} generations replayed twice; {} byte-identical", corpus.records.len(), names.join(", ")))
}

fn c11_trend() -> Status {
    let Some(path) = std::env::var_os("FACTCURVE_HUMAN_ANNOTATIONS") else {
        return Status::Skip("set FACTCURVE_HUMAN_ANNOTATIONS to a human-annotated ChatGPT file".into());
    };
    let start = Instant::now();
    let result = (|| -> Outcome {
        let corpus = load_factscore(Path::new(&path), "ChatGPT").map_err(|e| e.to_string())?.unfiltered();
        let fr = macro_average_fractions(&corpus.records, &corpus.claims).map_err(|e| e.to_string())?;
        let counts = bucket_claim_counts(&corpus.records, &corpus.claims).map_err(|e| e.to_string())?;
        let (first, last) = (fr[0].frac_unsupported, fr[N_BUCKETS - 1].frac_unsupported);
        ensure(last > first, || format!("frac_unsupported (80,100] {last:.3} <= (0,20] {first:.3}"))?;
        let avg: Vec<f64> = counts.iter().map(|c| c.avg_unsupported_count).collect();
        ensure(avg.windows(2).all(|w| w[0] <= w[1]), || format!("avg_unsupported_count not non-decreasing: {avg:?}"))?;
        within_budget(start.elapsed(), Duration::from_secs(30))?;
        Ok(format!(
            "{} generations: unsupported {:.1}% -> {:.1}%, counts {avg:.2?}, {:?}",
            corpus.records.len(),
            100.0 * first,
            100.0 * last,
            start.elapsed()
        ))
    })();
    match result {
        Ok(m) => Status::Pass(m),
        Err(m) => Status::Fail(m),
    }
}

fn main() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 estimator analytic points", Box::new(|| c1_analytic_points().into())),
        ("2 estimator monotonicity", Box::new(|| c2_monotonicity().into())),
        ("3 fixed-point oracle equivalence", Box::new(|| c3_oracle_equivalence().into())),
        ("4 Monte Carlo self-consistency", Box::new(|| c4_monte_carlo().into())),
        ("5 bucketing", Box::new(|| c5_bucketing().into())),
        ("6 aggregation oracles", Box::new(|| c6_aggregation_oracles().into())),
        ("7 filter rules", Box::new(|| c7_filter_rules().into())),
        ("8 prompt fidelity", Box::new(|| c8_prompt_fidelity().into())),
        ("9 RAG chunker and prompt", Box::new(|| c9_rag_chunker().into())),
        ("10 end-to-end determinism", Box::new(|| c10_end_to_end().into())),
        ("11 dataset trend check", Box::new(c11_trend)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Status::Pass(m) => println!("PASS  {name}: {m}"),
            Status::Skip(m) => println!("SKIP  {name}: {m}"),
            Status::Fail(m) => {
                failed += 1;
                println!("FAIL  {name}: {m}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

impl From<Outcome> for Status {
    fn from(o: Outcome) -> Self {
        match o {
            Ok(m) => Status::Pass(m),
            Err(m) => Status::Fail(m),
        }
    }
}
