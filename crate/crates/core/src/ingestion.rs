//! Corpus loading, biography generation, and refusal filtering.
//!
//! The annotated corpus is JSON-lines, one generation per line:
//!
//! ```text
//! {"id": "...", "entity": "...", "model_id": "...", "prompt": "...", "output": "...",
//!  "filtered": false,                     // optional
//!  "sentences": ["...", "..."],           // optional; segmented from output when absent
//!  "annotations": [{"claim": "...", "label": "S" | "NS" | "IR", "sentence_index": 1}]}
//! ```
//!
//! Claim ids are `<generation id>:s<sentence>:c<ordinal within sentence>`.
//! [`load_factscore`] adapts FActScore-style human annotation files
//! (`input`/`output`/`topic`/`annotations[].human-atomic-facts`).

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{claim_id, segment_sentences};
use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::model::{AtomicClaim, ClaimLabel, GenerationRecord, Sentence};
use crate::prompts;

/// Characters scanned by the refusal filters unless full-text scanning is on.
pub const DEFAULT_FILTER_WINDOW: usize = 400;

/// Refusal phrases; a trailing `...` means "the phrase followed by anything".
pub const DEFAULT_FILTER_PHRASES: [&str; 11] = [
    "I don't have ...",
    "I do not have ...",
    "I need more information ...",
    "Please provide me ...",
    "Please clarify",
    "I apologize ...",
    "there isn't enough information",
    "Unfortunately, there is no ...",
    "If you can provide more information ...",
    "you could provide more ...",
    "It seems you might ...",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("claim {claim_id} references sentence {sentence_index}, but generation {generation_id} has {n_sentences}")]
    Referential {
        claim_id: String,
        generation_id: String,
        sentence_index: usize,
        n_sentences: usize,
    },
    #[error("duplicate generation id {0}")]
    DuplicateGeneration(String),
    #[error("entity list is empty")]
    EmptyEntityList,
    #[error("filter phrase is empty")]
    EmptyFilterPhrase,
    #[error("generation for {entity}: {source}")]
    Generation {
        entity: String,
        #[source]
        source: GatewayError,
    },
    #[error("model returned an empty bio for {0}")]
    EmptyGeneration(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotatedCorpus {
    pub records: Vec<GenerationRecord>,
    pub claims: Vec<AtomicClaim>,
    pub source_name: String,
}

impl AnnotatedCorpus {
    /// Claims of unfiltered generations only.
    pub fn unfiltered(&self) -> AnnotatedCorpus {
        let keep: HashSet<&str> = self
            .records
            .iter()
            .filter(|r| !r.filtered)
            .map(|r| r.id.as_str())
            .collect();
        AnnotatedCorpus {
            records: self.records.iter().filter(|r| !r.filtered).cloned().collect(),
            claims: self
                .claims
                .iter()
                .filter(|c| keep.contains(c.generation_id.as_str()))
                .cloned()
                .collect(),
            source_name: self.source_name.clone(),
        }
    }

    pub fn entity_of(&self) -> HashMap<&str, &str> {
        self.records
            .iter()
            .map(|r| (r.id.as_str(), r.entity.as_str()))
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    id: String,
    entity: String,
    model_id: String,
    prompt: String,
    output: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    filtered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<String>>,
    #[serde(default)]
    annotations: Vec<AnnotationLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationLine {
    claim: String,
    /// `null` for claims not yet labeled.
    #[serde(default)]
    label: Option<String>,
    sentence_index: usize,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String, IngestError>)>, IngestError> {
    let file = fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let owned = path.to_path_buf();
    Ok(BufReader::new(file).lines().enumerate().map(move |(k, line)| {
        (
            k + 1,
            line.map_err(|source| IngestError::Io {
                path: owned.clone(),
                source,
            }),
        )
    }))
}

fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sentences_from(texts: Vec<String>) -> Vec<Sentence> {
    let texts: Vec<String> = texts
        .into_iter()
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect();
    let total = texts.len();
    texts
        .into_iter()
        .enumerate()
        .map(|(k, text)| Sentence { index: k + 1, total, text })
        .collect()
}

/// Loads an annotated corpus, validating labels and claim references.
pub fn load_annotated(path: &Path) -> Result<AnnotatedCorpus, IngestError> {
    let mut corpus = AnnotatedCorpus {
        source_name: source_name(path),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let parsed: CorpusLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !seen.insert(parsed.id.clone()) {
            return Err(IngestError::DuplicateGeneration(parsed.id));
        }
        let sentences = match parsed.sentences {
            Some(list) => sentences_from(list),
            None => segment_sentences(&parsed.output).map_err(|e| parse_err(e.to_string()))?,
        };
        let mut ordinals: HashMap<usize, usize> = HashMap::new();
        for ann in parsed.annotations {
            let label = match &ann.label {
                None => ClaimLabel::Unlabeled,
                Some(code) => ClaimLabel::from_code(code)
                    .ok_or_else(|| parse_err(format!("unknown label {code:?} (expected S, NS, IR or null)")))?,
            };
            let ordinal = ordinals.entry(ann.sentence_index).or_insert(0);
            *ordinal += 1;
            let id = claim_id(&parsed.id, ann.sentence_index, *ordinal);
            if ann.sentence_index == 0 || ann.sentence_index > sentences.len() {
                return Err(IngestError::Referential {
                    claim_id: id,
                    generation_id: parsed.id.clone(),
                    sentence_index: ann.sentence_index,
                    n_sentences: sentences.len(),
                });
            }
            corpus.claims.push(AtomicClaim {
                id,
                generation_id: parsed.id.clone(),
                sentence_index: ann.sentence_index,
                text: ann.claim,
                label,
            });
        }
        corpus.records.push(GenerationRecord {
            id: parsed.id,
            entity: parsed.entity,
            prompt: parsed.prompt,
            model_id: parsed.model_id,
            text: parsed.output,
            sentences,
            filtered: parsed.filtered,
        });
    }
    Ok(corpus)
}

/// Writes the corpus in the JSON-lines format read by [`load_annotated`].
/// Unlabeled claims get a `null` label.
pub fn write_annotated<W: Write>(corpus: &AnnotatedCorpus, mut out: W) -> std::io::Result<()> {
    let mut by_gen: HashMap<&str, Vec<&AtomicClaim>> = HashMap::new();
    for c in &corpus.claims {
        by_gen.entry(c.generation_id.as_str()).or_default().push(c);
    }
    for r in &corpus.records {
        let annotations = by_gen
            .get(r.id.as_str())
            .map(|cs| {
                cs.iter()
                    .map(|c| AnnotationLine {
                        claim: c.text.clone(),
                        label: c.label.code().map(str::to_string),
                        sentence_index: c.sentence_index,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let line = CorpusLine {
            id: r.id.clone(),
            entity: r.entity.clone(),
            model_id: r.model_id.clone(),
            prompt: r.prompt.clone(),
            output: r.text.clone(),
            filtered: r.filtered,
            sentences: Some(r.sentences.iter().map(|s| s.text.clone()).collect()),
            annotations,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FactScoreLine {
    #[serde(default)]
    input: String,
    #[serde(default)]
    output: String,
    topic: String,
    #[serde(default)]
    annotations: Option<Vec<FactScoreSentence>>,
}

#[derive(Debug, Deserialize)]
struct FactScoreSentence {
    text: String,
    #[serde(rename = "human-atomic-facts", default)]
    human_atomic_facts: Option<Vec<FactScoreFact>>,
}

#[derive(Debug, Deserialize)]
struct FactScoreFact {
    text: String,
    label: String,
}

/// Adapter for FActScore-style human annotation files. The annotators'
/// sentence split is kept; generations without annotations (the model
/// abstained) are loaded as filtered.
pub fn load_factscore(path: &Path, model_id: &str) -> Result<AnnotatedCorpus, IngestError> {
    let mut corpus = AnnotatedCorpus {
        source_name: source_name(path),
        ..Default::default()
    };
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let parsed: FactScoreLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let n = ids.entry(parsed.topic.clone()).or_insert(0);
        *n += 1;
        let id = if *n == 1 {
            format!("{model_id}::{}", parsed.topic)
        } else {
            format!("{model_id}::{}#{n}", parsed.topic)
        };
        let prompt = parsed
            .input
            .strip_prefix("Question: ")
            .unwrap_or(&parsed.input)
            .to_string();
        let (sentences, filtered) = match &parsed.annotations {
            Some(anns) => (sentences_from(anns.iter().map(|a| a.text.clone()).collect()), false),
            None if parsed.output.trim().is_empty() => (Vec::new(), true),
            None => (segment_sentences(&parsed.output).map_err(|e| parse_err(e.to_string()))?, true),
        };
        if let Some(anns) = parsed.annotations {
            let mut index = 0;
            for ann in anns {
                if ann.text.trim().is_empty() {
                    continue;
                }
                index += 1;
                for (k, fact) in ann.human_atomic_facts.unwrap_or_default().into_iter().enumerate() {
                    let label = ClaimLabel::from_code(&fact.label)
                        .ok_or_else(|| parse_err(format!("unknown label {:?}", fact.label)))?;
                    corpus.claims.push(AtomicClaim {
                        id: claim_id(&id, index, k + 1),
                        generation_id: id.clone(),
                        sentence_index: index,
                        text: fact.text,
                        label,
                    });
                }
            }
        }
        corpus.records.push(GenerationRecord {
            id,
            entity: parsed.topic,
            prompt,
            model_id: model_id.to_string(),
            text: parsed.output,
            sentences,
            filtered,
        });
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityList {
    entities: Vec<String>,
}

impl EntityList {
    /// Trims, drops blanks, and deduplicates keeping first occurrences.
    pub fn new<I, S>(entities: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let entities: Vec<String> = entities
            .into_iter()
            .map(|e| e.as_ref().trim().to_string())
            .filter(|e| !e.is_empty() && seen.insert(e.clone()))
            .collect();
        if entities.is_empty() {
            return Err(IngestError::EmptyEntityList);
        }
        Ok(EntityList { entities })
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let raw = fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(raw.lines())
    }

    pub fn as_slice(&self) -> &[String] {
        &self.entities
    }
}

#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_in_flight: usize,
}

pub fn generation_id(model_id: &str, entity: &str) -> String {
    format!("{model_id}::{entity}")
}

/// Builds an unannotated record from a prompt/response pair.
pub fn record_from_output(
    id: String,
    entity: &str,
    prompt: String,
    model_id: &str,
    text: String,
) -> Result<GenerationRecord, IngestError> {
    let sentences = segment_sentences(&text).map_err(|_| IngestError::EmptyGeneration(entity.to_string()))?;
    Ok(GenerationRecord {
        id,
        entity: entity.to_string(),
        prompt,
        model_id: model_id.to_string(),
        text,
        sentences,
        filtered: false,
    })
}

/// Asks the model for one biography per entity. Output is positional;
/// a failure for one entity leaves the others intact.
pub fn generate_bios(
    entities: &EntityList,
    gateway: &Gateway,
    opts: &GenerationOptions,
) -> Vec<Result<GenerationRecord, IngestError>> {
    let reqs: Vec<ModelRequest> = entities
        .as_slice()
        .iter()
        .map(|e| {
            ModelRequest::new(&opts.model_id, prompts::bio_prompt(e))
                .with_temperature(opts.temperature)
                .with_max_tokens(opts.max_tokens)
        })
        .collect();
    gateway
        .complete_many(&reqs, opts.max_in_flight)
        .into_iter()
        .zip(entities.as_slice())
        .zip(reqs)
        .map(|((resp, entity), req)| {
            let resp = resp.map_err(|source| IngestError::Generation {
                entity: entity.clone(),
                source,
            })?;
            record_from_output(
                generation_id(&opts.model_id, entity),
                entity,
                req.prompt,
                &opts.model_id,
                resp.text,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRule {
    phrase: String,
    needle: String,
}

impl FilterRule {
    pub fn new(phrase: impl Into<String>) -> Result<Self, IngestError> {
        let phrase = phrase.into();
        let stem = phrase.trim();
        let stem = stem
            .strip_suffix("...")
            .or_else(|| stem.strip_suffix('\u{2026}'))
            .unwrap_or(stem)
            .trim();
        if stem.is_empty() {
            return Err(IngestError::EmptyFilterPhrase);
        }
        Ok(FilterRule {
            needle: normalize(stem),
            phrase,
        })
    }

    pub fn defaults() -> Vec<FilterRule> {
        DEFAULT_FILTER_PHRASES
            .iter()
            .map(|p| FilterRule::new(*p).expect("default phrases are nonempty"))
            .collect()
    }

    pub fn phrase(&self) -> &str {
        &self.phrase
    }

    fn matches(&self, normalized: &str) -> bool {
        normalized.contains(&self.needle)
    }
}

fn normalize(text: &str) -> String {
    text.replace(['\u{2019}', '\u{2018}'], "'").to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterScope {
    /// Only the first [`DEFAULT_FILTER_WINDOW`] characters.
    Opening,
    FullText,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilteredStats {
    pub total: usize,
    pub filtered: usize,
    pub filtered_rate: f64,
}

/// Flags every record whose text contains a rule phrase. Records are kept.
pub fn apply_filters(
    mut records: Vec<GenerationRecord>,
    rules: &[FilterRule],
    scope: FilterScope,
) -> (Vec<GenerationRecord>, FilteredStats) {
    for r in &mut records {
        let window: String = match scope {
            FilterScope::Opening => r.text.chars().take(DEFAULT_FILTER_WINDOW).collect(),
            FilterScope::FullText => r.text.clone(),
        };
        let normalized = normalize(&window);
        r.filtered = rules.iter().any(|rule| rule.matches(&normalized));
    }
    let stats = filter_stats(&records);
    (records, stats)
}

pub fn filter_stats(records: &[GenerationRecord]) -> FilteredStats {
    let total = records.len();
    let filtered = records.iter().filter(|r| r.filtered).count();
    FilteredStats {
        total,
        filtered,
        filtered_rate: if total == 0 { 0.0 } else { filtered as f64 / total as f64 },
    }
}
