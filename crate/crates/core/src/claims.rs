//! Sentence segmentation, LLM-driven atomic claim decomposition, and
//! question/answer derivation from claims.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::model::{AtomicClaim, ClaimLabel, GenerationRecord, Sentence};
use crate::prompts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClaimError {
    #[error("cannot segment empty text")]
    EmptyText,
    #[error("decomposition response is not a list: {raw:?}")]
    UnparseableDecomposition { raw: String },
    #[error("QA response lacks the '#' separator: {raw:?}")]
    MissingSeparator { raw: String },
    #[error("QA response has an empty question: {raw:?}")]
    EmptyQuestion { raw: String },
    #[error("QA response has an empty answer: {raw:?}")]
    EmptyAnswer { raw: String },
    #[error("claim {0} has empty text")]
    EmptyClaim(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Tokens that end in a period without ending a sentence. Compared
/// lowercase, leading brackets and quotes stripped.
const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "mt.", "jr.", "sr.", "st.", "prof.", "rev.", "hon.", "gen.",
    "col.", "lt.", "capt.", "sgt.", "gov.", "sen.", "rep.", "pres.", "vs.", "etc.", "inc.",
    "ltd.", "co.", "corp.", "no.", "vol.", "approx.", "ca.", "fig.", "jan.", "feb.", "mar.",
    "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

fn is_guarded(token: &str) -> bool {
    let token = token.trim_start_matches(['(', '[', '"', '\'', '\u{201c}', '\u{2018}']);
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Initials and dotted acronyms such as "A.", "U.S.", "e.g.".
    let chars: Vec<char> = token.chars().collect();
    !chars.is_empty()
        && chars.len().is_multiple_of(2)
        && chars.chunks(2).all(|pair| pair[0].is_alphabetic() && pair[1] == '.')
}

/// Rule-based split on sentence-final `.`, `?`, `!` followed by whitespace,
/// and on newlines. Periods closing an abbreviation or initial do not split.
/// Indices are 1-based and every sentence carries the total count.
pub fn segment_sentences(text: &str) -> Result<Vec<Sentence>, ClaimError> {
    if text.trim().is_empty() {
        return Err(ClaimError::EmptyText);
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut pieces: Vec<&str> = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            pieces.push(&text[start..pos]);
            start = pos + 1;
            i += 1;
            continue;
        }
        if matches!(c, '.' | '?' | '!') {
            let mut j = i + 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let at_break = j == chars.len() || chars[j].1.is_whitespace();
            if at_break && !(c == '.' && is_guarded(token_before(text, start, pos + 1))) {
                let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
                pieces.push(&text[start..end]);
                start = end;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    pieces.push(&text[start..]);

    let texts: Vec<&str> = pieces.into_iter().map(str::trim).filter(|p| !p.is_empty()).collect();
    let total = texts.len();
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(k, t)| Sentence {
            index: k + 1,
            total,
            text: t.to_string(),
        })
        .collect())
}

fn token_before(text: &str, start: usize, end: usize) -> &str {
    let slice = &text[start..end];
    slice.rsplit(char::is_whitespace).next().unwrap_or(slice)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub sentence_index: usize,
    pub claims: Vec<String>,
}

impl DecompositionResult {
    /// Unlabeled claims with ids `<generation>:s<sentence>:c<ordinal>`.
    pub fn into_claims(self, generation_id: &str) -> Vec<AtomicClaim> {
        self.claims
            .into_iter()
            .enumerate()
            .map(|(k, text)| AtomicClaim {
                id: claim_id(generation_id, self.sentence_index, k + 1),
                generation_id: generation_id.to_string(),
                sentence_index: self.sentence_index,
                text,
                label: ClaimLabel::Unlabeled,
            })
            .collect()
    }
}

pub fn claim_id(generation_id: &str, sentence_index: usize, ordinal: usize) -> String {
    format!("{generation_id}:s{sentence_index}:c{ordinal}")
}

pub fn decomposition_prompt(sentence: &Sentence, context: &GenerationRecord) -> String {
    prompts::render(
        prompts::DECOMPOSITION,
        &[
            ("person", &context.entity),
            ("context", &context.text),
            ("sentence", &sentence.text),
        ],
    )
}

/// Parses a bulleted or numbered list. A lone `NONE` item means the sentence
/// carries no facts.
pub fn parse_claim_list(raw: &str) -> Result<Vec<String>, ClaimError> {
    let mut items = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if let Some(item) = strip_list_marker(line) {
            let item = item.trim();
            if !item.is_empty() {
                items.push(item.to_string());
            }
        }
    }
    let is_none = |s: &str| s.trim_end_matches('.').eq_ignore_ascii_case("none");
    if items.is_empty() {
        return if is_none(raw.trim()) {
            Ok(Vec::new())
        } else {
            Err(ClaimError::UnparseableDecomposition { raw: raw.to_string() })
        };
    }
    if items.len() == 1 && is_none(&items[0]) {
        return Ok(Vec::new());
    }
    Ok(items)
}

fn strip_list_marker(line: &str) -> Option<&str> {
    for marker in ["- ", "* ", "\u{2022} "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return Some(rest);
        }
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(rest);
        }
    }
    None
}

pub fn decompose_claims(
    sentence: &Sentence,
    context: &GenerationRecord,
    gateway: &Gateway,
    model_id: &str,
) -> Result<DecompositionResult, ClaimError> {
    let req = ModelRequest::new(model_id, decomposition_prompt(sentence, context));
    let resp = gateway.complete(&req)?;
    Ok(DecompositionResult {
        sentence_index: sentence.index,
        claims: parse_claim_list(&resp.text)?,
    })
}

/// Decomposes every sentence of a generation, fanning out through the
/// gateway. Results are in sentence order.
pub fn decompose_generation(
    generation: &GenerationRecord,
    gateway: &Gateway,
    model_id: &str,
    max_in_flight: usize,
) -> Vec<Result<DecompositionResult, ClaimError>> {
    let reqs: Vec<ModelRequest> = generation
        .sentences
        .iter()
        .map(|s| ModelRequest::new(model_id, decomposition_prompt(s, generation)))
        .collect();
    gateway
        .complete_many(&reqs, max_in_flight)
        .into_iter()
        .zip(&generation.sentences)
        .map(|(resp, s)| {
            let resp = resp?;
            Ok(DecompositionResult {
                sentence_index: s.index,
                claims: parse_claim_list(&resp.text)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub claim_id: String,
    pub question: String,
    pub answer: String,
}

pub fn qa_prompt(claim_text: &str, entity: &str) -> String {
    prompts::render(prompts::QA_DERIVATION, &[("person", entity), ("claim", claim_text)])
}

/// Splits on the first `#`; both halves are trimmed and must be nonempty.
pub fn parse_qa(claim_id: &str, raw: &str) -> Result<QaPair, ClaimError> {
    let (question, answer) = raw
        .split_once('#')
        .ok_or_else(|| ClaimError::MissingSeparator { raw: raw.to_string() })?;
    let (question, answer) = (question.trim(), answer.trim());
    if question.is_empty() {
        return Err(ClaimError::EmptyQuestion { raw: raw.to_string() });
    }
    if answer.is_empty() {
        return Err(ClaimError::EmptyAnswer { raw: raw.to_string() });
    }
    Ok(QaPair {
        claim_id: claim_id.to_string(),
        question: question.to_string(),
        answer: answer.to_string(),
    })
}

pub fn derive_qa(
    claim: &AtomicClaim,
    entity: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<QaPair, ClaimError> {
    if claim.text.trim().is_empty() {
        return Err(ClaimError::EmptyClaim(claim.id.clone()));
    }
    let resp = gateway.complete(&ModelRequest::new(model_id, qa_prompt(&claim.text, entity)))?;
    parse_qa(&claim.id, &resp.text)
}

#[derive(Debug, Clone)]
pub struct QaOptions {
    pub model_id: String,
    pub max_in_flight: usize,
    /// Temperature of the single retry after a parse failure. A retry at the
    /// original temperature would hit the same cache entry.
    pub retry_temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Underivable {
    pub claim_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QaBatch {
    pub pairs: Vec<QaPair>,
    pub underivable: Vec<Underivable>,
    pub retried: usize,
}

/// Derives QA pairs for `(claim, entity)` items. A parse failure is retried
/// once; a second failure (or any gateway error) marks the claim
/// underivable. Output is sorted by claim id.
pub fn derive_qa_batch(items: &[(&AtomicClaim, &str)], gateway: &Gateway, opts: &QaOptions) -> QaBatch {
    let mut batch = QaBatch::default();
    let mut retry: Vec<usize> = Vec::new();
    let mut runnable: Vec<usize> = Vec::new();
    for (k, (claim, _)) in items.iter().enumerate() {
        if claim.text.trim().is_empty() {
            batch.underivable.push(Underivable {
                claim_id: claim.id.clone(),
                reason: ClaimError::EmptyClaim(claim.id.clone()).to_string(),
            });
        } else {
            runnable.push(k);
        }
    }
    let request = |k: usize, temperature: f64| {
        let (claim, entity) = items[k];
        ModelRequest::new(&opts.model_id, qa_prompt(&claim.text, entity)).with_temperature(temperature)
    };

    let first: Vec<ModelRequest> = runnable.iter().map(|&k| request(k, 0.0)).collect();
    for (&k, resp) in runnable.iter().zip(gateway.complete_many(&first, opts.max_in_flight)) {
        let claim = items[k].0;
        match resp {
            Ok(resp) => match parse_qa(&claim.id, &resp.text) {
                Ok(pair) => batch.pairs.push(pair),
                Err(e) => {
                    log::info!("QA parse failed for {}, retrying once: {e}", claim.id);
                    retry.push(k);
                }
            },
            Err(e) => batch.underivable.push(Underivable {
                claim_id: claim.id.clone(),
                reason: e.to_string(),
            }),
        }
    }

    batch.retried = retry.len();
    let second: Vec<ModelRequest> = retry.iter().map(|&k| request(k, opts.retry_temperature)).collect();
    for (&k, resp) in retry.iter().zip(gateway.complete_many(&second, opts.max_in_flight)) {
        let claim = items[k].0;
        let outcome = resp
            .map_err(ClaimError::from)
            .and_then(|r| parse_qa(&claim.id, &r.text));
        match outcome {
            Ok(pair) => batch.pairs.push(pair),
            Err(e) => batch.underivable.push(Underivable {
                claim_id: claim.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    batch.pairs.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    batch.underivable.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    batch
}
