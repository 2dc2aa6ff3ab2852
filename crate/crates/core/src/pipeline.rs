//! Pipeline commands. Each returns a [`CommandOutput`]; writing it to disk
//! is left to [`crate::report::emit`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::claims::{decompose_generation, derive_qa_batch, DecompositionResult, QaOptions, QaPair};
use crate::estimator::{estimate_factuality, simulate_claim_stream, SelfScorePair, SimulationConfig, SimulationOutcome};
use crate::gateway::Gateway;
use crate::ingestion::{
    apply_filters, generate_bios, generation_id, record_from_output, write_annotated, AnnotatedCorpus, EntityList,
    FilterRule, FilterScope, FilteredStats, GenerationOptions, IngestError,
};
use crate::judgment::{
    flip_rate, judge_batch, self_scores, JudgeItem, JudgeOptions, JudgmentRecord, JudgmentStrategy, SelfScores,
};
use crate::model::{analyze_buckets, ClaimLabel, ModelError};
use crate::rag::{build_rag_prompt, ChunkIndex, CorpusDoc};
use crate::report::{self, io_err, CommandOutput, OutputFile, ReportError, StatsRow};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QA_FILE: &str = "qa.jsonl";
pub const UNDERIVABLE_FILE: &str = "underivable.jsonl";
pub const JUDGMENTS_FILE: &str = "judgments.jsonl";

fn corpus_bytes(corpus: &AnnotatedCorpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_annotated(corpus, &mut buf).expect("in-memory write");
    buf
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ReportError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_qa(path: &Path) -> Result<Vec<QaPair>, ReportError> {
    read_jsonl(path)
}

pub fn load_judgments(path: &Path) -> Result<Vec<JudgmentRecord>, ReportError> {
    read_jsonl(path)
}

/// Bucket fractions and counts over the unfiltered generations.
pub fn analyze(corpus: &AnnotatedCorpus) -> Result<CommandOutput, ReportError> {
    let kept = corpus.unfiltered();
    let stats = analyze_buckets(&kept.records, &kept.claims)?;
    let mut out = CommandOutput::default();
    out.push(OutputFile::versioned("buckets.csv", report::buckets_csv(&stats), report::BUCKETS_CSV_VERSION));
    out.push(OutputFile::versioned("buckets.json", report::buckets_json(&stats), report::BUCKETS_CSV_VERSION));
    out.push(OutputFile::new("fractions.svg", report::fractions_svg(&stats)));
    out.push(OutputFile::new("counts.svg", report::counts_svg(&stats)));
    Ok(out)
}

/// One biography per entity. Failed entities are left out of the corpus and
/// counted as stage failures.
pub fn generate(entities: &EntityList, gateway: &Gateway, opts: &GenerationOptions) -> Result<CommandOutput, ReportError> {
    let mut corpus = AnnotatedCorpus::default();
    let mut failed = 0;
    for result in generate_bios(entities, gateway, opts) {
        match result {
            Ok(record) => corpus.records.push(record),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    let mut out = CommandOutput::default();
    out.push(OutputFile::new(CORPUS_FILE, corpus_bytes(&corpus)));
    out.record_failures("generate", failed, entities.as_slice().len());
    Ok(out)
}

/// Retrieval-augmented variant of [`generate`]: the prompt carries the top-k
/// chunks for the entity. Retrieval choices go to `retrieval.jsonl`.
pub fn rag_generate(
    index: &ChunkIndex,
    entities: &EntityList,
    k: usize,
    gateway: &Gateway,
    opts: &GenerationOptions,
) -> Result<CommandOutput, ReportError> {
    #[derive(Serialize)]
    struct Retrieval<'a> {
        entity: &'a str,
        chunks: Vec<(&'a str, usize)>,
    }
    let mut prompts = Vec::new();
    let mut trace = Vec::new();
    for entity in entities.as_slice() {
        let chunks = index.retrieve(entity, k)?;
        prompts.push(build_rag_prompt(entity, &chunks)?);
        trace.push(Retrieval {
            entity,
            chunks: chunks.iter().map(|c| (c.doc_id.as_str(), c.chunk_index)).collect(),
        });
    }
    let reqs: Vec<_> = prompts
        .iter()
        .map(|p| {
            crate::gateway::ModelRequest::new(&opts.model_id, p.as_str())
                .with_temperature(opts.temperature)
                .with_max_tokens(opts.max_tokens)
        })
        .collect();
    let mut corpus = AnnotatedCorpus::default();
    let mut failed = 0;
    for ((resp, entity), prompt) in gateway
        .complete_many(&reqs, opts.max_in_flight)
        .into_iter()
        .zip(entities.as_slice())
        .zip(prompts)
    {
        let record = resp.map_err(|source| IngestError::Generation {
            entity: entity.clone(),
            source,
        });
        match record.and_then(|r| record_from_output(generation_id(&opts.model_id, entity), entity, prompt, &opts.model_id, r.text)) {
            Ok(r) => corpus.records.push(r),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    let mut out = CommandOutput::default();
    out.push(OutputFile::new(CORPUS_FILE, corpus_bytes(&corpus)));
    out.push(OutputFile::new("retrieval.jsonl", report::jsonl_bytes(&trace)));
    out.record_failures("rag-generate", failed, entities.as_slice().len());
    Ok(out)
}

pub fn rag_index(docs: &[CorpusDoc]) -> Result<CommandOutput, ReportError> {
    let index = ChunkIndex::build(docs)?;
    let mut out = CommandOutput::default();
    out.push(OutputFile::versioned("index.json", report::json_bytes(&index), crate::rag::INDEX_VERSION));
    Ok(out)
}

/// Re-flags every generation against the rules; `filter.json` holds the
/// counts.
pub fn filter(corpus: AnnotatedCorpus, rules: &[FilterRule], scope: FilterScope) -> Result<CommandOutput, ReportError> {
    let AnnotatedCorpus {
        records,
        claims,
        source_name,
    } = corpus;
    let (records, stats): (_, FilteredStats) = apply_filters(records, rules, scope);
    let corpus = AnnotatedCorpus {
        records,
        claims,
        source_name,
    };
    let mut out = CommandOutput::default();
    out.push(OutputFile::new(CORPUS_FILE, corpus_bytes(&corpus)));
    out.push(OutputFile::new("filter.json", report::json_bytes(&stats)));
    Ok(out)
}

/// Replaces the claims of every unfiltered generation with unlabeled claims
/// decomposed sentence by sentence. Filtered generations keep theirs.
pub fn decompose(corpus: &AnnotatedCorpus, gateway: &Gateway, model_id: &str, max_in_flight: usize) -> Result<CommandOutput, ReportError> {
    let mut claims: Vec<_> = corpus
        .claims
        .iter()
        .filter(|c| corpus.records.iter().any(|r| r.filtered && r.id == c.generation_id))
        .cloned()
        .collect();
    let (mut failed, mut total) = (0, 0);
    for record in corpus.records.iter().filter(|r| !r.filtered) {
        for result in decompose_generation(record, gateway, model_id, max_in_flight) {
            total += 1;
            match result {
                Ok(d) => claims.extend(DecompositionResult::into_claims(d, &record.id)),
                Err(e) => {
                    log::warn!("{}: {e}", record.id);
                    failed += 1;
                }
            }
        }
    }
    let out_corpus = AnnotatedCorpus {
        records: corpus.records.clone(),
        claims,
        source_name: corpus.source_name.clone(),
    };
    let mut out = CommandOutput::default();
    out.push(OutputFile::new(CORPUS_FILE, corpus_bytes(&out_corpus)));
    out.record_failures("decompose", failed, total);
    Ok(out)
}

/// Claims that can be judged: those of unfiltered generations, minus
/// Irrelevant ones.
fn judgeable(corpus: &AnnotatedCorpus) -> AnnotatedCorpus {
    let mut kept = corpus.unfiltered();
    kept.claims.retain(|c| c.label != ClaimLabel::Irrelevant);
    kept
}

pub fn derive_qa(corpus: &AnnotatedCorpus, gateway: &Gateway, opts: &QaOptions) -> Result<(Vec<QaPair>, CommandOutput), ReportError> {
    let kept = judgeable(corpus);
    let entity_of = kept.entity_of();
    let items: Vec<_> = kept
        .claims
        .iter()
        .map(|c| (c, entity_of.get(c.generation_id.as_str()).copied().unwrap_or_default()))
        .collect();
    let batch = derive_qa_batch(&items, gateway, opts);
    log::info!("qa: {} pairs, {} retried, {} underivable", batch.pairs.len(), batch.retried, batch.underivable.len());
    let mut out = CommandOutput::default();
    out.push(OutputFile::new(QA_FILE, report::jsonl_bytes(&batch.pairs)));
    out.push(OutputFile::new(UNDERIVABLE_FILE, report::jsonl_bytes(&batch.underivable)));
    out.record_failures("qa", batch.underivable.len(), items.len());
    Ok((batch.pairs, out))
}

/// Judges Supported and Unsupported claims under each strategy and reports
/// self-scores. With both QA strategies present, flip rates are added.
pub fn judge(
    corpus: &AnnotatedCorpus,
    qa: &[QaPair],
    strategies: &[JudgmentStrategy],
    gateway: &Gateway,
    opts: &JudgeOptions,
) -> Result<(Vec<SelfScores>, CommandOutput), ReportError> {
    let mut kept = judgeable(corpus);
    kept.claims.retain(|c| c.label != ClaimLabel::Unlabeled);
    let entity_of = kept.entity_of();
    let qa_of: HashMap<&str, &QaPair> = qa.iter().map(|p| (p.claim_id.as_str(), p)).collect();
    let mut out = CommandOutput::default();
    let mut all_records = Vec::new();
    let mut by_strategy: BTreeMap<JudgmentStrategy, Vec<JudgmentRecord>> = BTreeMap::new();
    let mut ordered: Vec<JudgmentStrategy> = Vec::new();
    for &s in JudgmentStrategy::ALL.iter().filter(|s| strategies.contains(s)) {
        let items: Vec<JudgeItem<'_>> = kept
            .claims
            .iter()
            .map(|c| JudgeItem {
                claim: c,
                qa: if s.needs_qa() { qa_of.get(c.id.as_str()).copied() } else { None },
                entity: entity_of.get(c.generation_id.as_str()).copied().unwrap_or_default(),
            })
            .collect();
        let batch = judge_batch(&items, s, gateway, opts);
        for (id, e) in &batch.errors {
            log::debug!("{s} {id}: {e}");
        }
        out.record_failures(&format!("judge {s}"), batch.errors.len(), items.len());
        all_records.extend(batch.records.iter().cloned());
        by_strategy.insert(s, batch.records);
        ordered.push(s);
    }
    let scores: Vec<SelfScores> = ordered
        .iter()
        .map(|s| {
            let mut sc = self_scores(&kept.records, &kept.claims, &by_strategy[s])?;
            sc.strategy = *s;
            Ok(sc)
        })
        .collect::<Result<_, ReportError>>()?;
    out.push(OutputFile::new(JUDGMENTS_FILE, report::jsonl_bytes(&all_records)));
    out.push(OutputFile::versioned("selfscores.csv", report::selfscores_csv(&scores), report::SELFSCORES_CSV_VERSION));
    out.push(OutputFile::versioned("selfscores.json", report::selfscores_json(&scores), report::SELFSCORES_CSV_VERSION));
    if let (Some(b), Some(c)) = (
        by_strategy.get(&JudgmentStrategy::QuestionAnswering),
        by_strategy.get(&JudgmentStrategy::QaWithNoa),
    ) {
        // A claim that errored under one setting only has no verdict pair.
        let in_b: HashSet<&str> = b.iter().map(|j| j.claim_id.as_str()).collect();
        let in_c: HashSet<&str> = c.iter().map(|j| j.claim_id.as_str()).collect();
        let b: Vec<_> = b.iter().filter(|j| in_c.contains(j.claim_id.as_str())).cloned().collect();
        let c: Vec<_> = c.iter().filter(|j| in_b.contains(j.claim_id.as_str())).cloned().collect();
        let flips = flip_rate(&kept.records, &kept.claims, &b, &c)?;
        out.push(OutputFile::versioned("fliprate.csv", report::fliprate_csv(&flips), report::FLIPRATE_CSV_VERSION));
    }
    Ok((scores, out))
}

/// Flip rates from previously written judgments.
pub fn fliprate(corpus: &AnnotatedCorpus, judgments: &[JudgmentRecord]) -> Result<CommandOutput, ReportError> {
    let kept = corpus.unfiltered();
    let pick = |s: JudgmentStrategy| -> Vec<JudgmentRecord> { judgments.iter().filter(|j| j.strategy == s).cloned().collect() };
    let flips = flip_rate(
        &kept.records,
        &kept.claims,
        &pick(JudgmentStrategy::QuestionAnswering),
        &pick(JudgmentStrategy::QaWithNoa),
    )?;
    let mut out = CommandOutput::default();
    out.push(OutputFile::versioned("fliprate.csv", report::fliprate_csv(&flips), report::FLIPRATE_CSV_VERSION));
    Ok(out)
}

pub fn estimate(inputs: &[report::ScoreInput]) -> Result<CommandOutput, ReportError> {
    let rows = report::estimate_rows(inputs)?;
    let mut out = CommandOutput::default();
    out.push(OutputFile::versioned("estimates.csv", report::estimates_csv(&rows), report::ESTIMATES_CSV_VERSION));
    out.push(OutputFile::versioned("estimates.json", report::estimates_json(&rows), report::ESTIMATES_CSV_VERSION));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub analytic_sigma: Option<f64>,
    pub empirical_rates: SimulationOutcome,
    /// The estimator applied to the empirical self-scores.
    pub estimate: Option<f64>,
}

pub fn simulate(cfg: &SimulationConfig) -> Result<(SimulationReport, CommandOutput), ReportError> {
    let empirical = simulate_claim_stream(cfg)?;
    let analytic_sigma = estimate_factuality(SelfScorePair::new(cfg.self_known, cfg.self_unknown)?)
        .ok()
        .map(|e| e.sigma);
    let estimate = match (empirical.empirical_self_known, empirical.empirical_self_unknown) {
        (Some(sk), Some(su)) => estimate_factuality(SelfScorePair::new(sk, su)?).ok().map(|e| e.sigma),
        _ => None,
    };
    let rep = SimulationReport {
        config: *cfg,
        analytic_sigma,
        empirical_rates: empirical,
        estimate,
    };
    let mut out = CommandOutput::default();
    out.push(OutputFile::new("simulation.json", report::json_bytes(&rep)));
    Ok((rep, out))
}

/// Per-model generation counts, filtered rate and mean claims per
/// unfiltered generation.
pub fn stats(corpus: &AnnotatedCorpus) -> Result<(Vec<StatsRow>, CommandOutput), ReportError> {
    if corpus.records.is_empty() {
        return Err(ModelError::EmptyCorpus.into());
    }
    let mut claims_of: HashMap<&str, usize> = HashMap::new();
    for c in &corpus.claims {
        *claims_of.entry(c.generation_id.as_str()).or_insert(0) += 1;
    }
    let mut per_model: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in &corpus.records {
        let e = per_model.entry(r.model_id.as_str()).or_default();
        e.0 += 1;
        if r.filtered {
            e.1 += 1;
        } else {
            e.2 += claims_of.get(r.id.as_str()).copied().unwrap_or(0);
        }
    }
    let rows: Vec<StatsRow> = per_model
        .into_iter()
        .map(|(model, (n, filtered, claims))| StatsRow {
            model_id: model.to_string(),
            n_generations: n,
            n_filtered: filtered,
            claims_per_gen: (n > filtered).then(|| claims as f64 / (n - filtered) as f64),
            filtered_rate: filtered as f64 / n as f64,
        })
        .collect();
    let mut out = CommandOutput::default();
    out.push(OutputFile::versioned("stats.csv", report::stats_csv(&rows), report::STATS_CSV_VERSION));
    Ok((rows, out))
}

/// Full pipeline over an annotated corpus: bucket analysis, QA derivation,
/// judgments under every strategy, flip rates and estimates.
pub fn full_report(
    corpus: &AnnotatedCorpus,
    gateway: &Gateway,
    qa_opts: &QaOptions,
    judge_opts: &JudgeOptions,
) -> Result<CommandOutput, ReportError> {
    let mut out = analyze(corpus)?;
    let (pairs, qa_out) = derive_qa(corpus, gateway, qa_opts)?;
    out.extend(qa_out);
    let (scores, judge_out) = judge(corpus, &pairs, &JudgmentStrategy::ALL, gateway, judge_opts)?;
    out.extend(judge_out);
    out.extend(estimate(&report::score_inputs(&scores))?);
    if let Ok((_, stats_out)) = stats(corpus) {
        out.extend(stats_out);
    }
    Ok(out)
}
