//! Domain vocabulary shared by every stage, plus the relative-position
//! bucket arithmetic and the per-bucket aggregations built on it.
//!
//! A sentence at index `i` of an `n`-sentence generation sits at relative
//! position `i / n`. Positions are grouped into five buckets that partition
//! `(0, 1]` as `(0, .2], (.2, .4], (.4, .6], (.6, .8], (.8, 1]`. Claim-label
//! fractions are macro-averaged: each sentence with at least one claim
//! contributes one vote to its bucket.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of relative-position buckets.
pub const N_BUCKETS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("sentence index {index} out of range for a {total}-sentence generation")]
    PositionOutOfRange { index: usize, total: usize },
    #[error("relative position {0} outside (0, 1]")]
    BucketDomain(f64),
    #[error("no sentence in the corpus carries a labeled claim")]
    EmptyCorpus,
    #[error("no Supported or Unsupported claim in the set")]
    EmptyClaimSet,
    #[error("claim {claim_id} is unlabeled")]
    UnlabeledClaim { claim_id: String },
    #[error("claim {claim_id} references missing sentence {sentence_index} of generation {generation_id}")]
    DanglingClaim {
        claim_id: String,
        generation_id: String,
        sentence_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub total: usize,
    pub text: String,
}

/// One long-form model output with its prompt and sentence segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub entity: String,
    pub prompt: String,
    pub model_id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    #[serde(default)]
    pub filtered: bool,
}

impl GenerationRecord {
    pub fn sentence(&self, index: usize) -> Option<&Sentence> {
        if index == 0 {
            return None;
        }
        self.sentences.get(index - 1).filter(|s| s.index == index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimLabel {
    Supported,
    Unsupported,
    Irrelevant,
    Unlabeled,
}

impl ClaimLabel {
    /// Short code used in annotation files (`S`, `NS`, `IR`).
    pub fn code(self) -> Option<&'static str> {
        match self {
            ClaimLabel::Supported => Some("S"),
            ClaimLabel::Unsupported => Some("NS"),
            ClaimLabel::Irrelevant => Some("IR"),
            ClaimLabel::Unlabeled => None,
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "S" => Some(ClaimLabel::Supported),
            "NS" => Some(ClaimLabel::Unsupported),
            "IR" => Some(ClaimLabel::Irrelevant),
            _ => None,
        }
    }
}

impl fmt::Display for ClaimLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClaimLabel::Supported => "supported",
            ClaimLabel::Unsupported => "unsupported",
            ClaimLabel::Irrelevant => "irrelevant",
            ClaimLabel::Unlabeled => "unlabeled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicClaim {
    pub id: String,
    pub generation_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub label: ClaimLabel,
}

/// One of the five relative-position ranges; lower bound exclusive, upper
/// bound inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PositionBucket {
    pub index: usize,
}

impl PositionBucket {
    pub fn all() -> [PositionBucket; N_BUCKETS] {
        [0, 1, 2, 3, 4].map(|index| PositionBucket { index })
    }

    pub fn lower(self) -> f64 {
        self.index as f64 / N_BUCKETS as f64
    }

    pub fn upper(self) -> f64 {
        (self.index + 1) as f64 / N_BUCKETS as f64
    }

    pub fn midpoint(self) -> f64 {
        (self.index as f64 + 0.5) / N_BUCKETS as f64
    }

    /// Percent label such as `"40-60"`.
    pub fn label(self) -> String {
        format!("{}-{}", self.index * 20, (self.index + 1) * 20)
    }
}

/// Per-bucket statistics. Each aggregation fills the fields it owns and
/// leaves the others at their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub bucket: PositionBucket,
    pub frac_supported: f64,
    pub frac_unsupported: f64,
    pub frac_irrelevant: f64,
    pub n_sentences: usize,
    pub avg_supported_count: f64,
    pub avg_unsupported_count: f64,
    pub self_known: Option<f64>,
    pub self_unknown: Option<f64>,
    pub n_judged_supported: usize,
    pub n_judged_unsupported: usize,
}

impl BucketStats {
    pub fn empty(bucket: PositionBucket) -> Self {
        BucketStats {
            bucket,
            frac_supported: 0.0,
            frac_unsupported: 0.0,
            frac_irrelevant: 0.0,
            n_sentences: 0,
            avg_supported_count: 0.0,
            avg_unsupported_count: 0.0,
            self_known: None,
            self_unknown: None,
            n_judged_supported: 0,
            n_judged_unsupported: 0,
        }
    }
}

pub fn relative_position(index: usize, total: usize) -> Result<f64, ModelError> {
    if total == 0 || index == 0 || index > total {
        return Err(ModelError::PositionOutOfRange { index, total });
    }
    Ok(index as f64 / total as f64)
}

pub fn bucket_of(pos: f64) -> Result<PositionBucket, ModelError> {
    if !(pos > 0.0 && pos <= 1.0) {
        return Err(ModelError::BucketDomain(pos));
    }
    // ceil(pos * 5) - 1 misplaces boundary values such as 0.6 (= 3.0000000000000004 / 5),
    // so compare against the bounds directly.
    let index = PositionBucket::all()
        .into_iter()
        .find(|b| pos > b.lower() && pos <= b.upper())
        .map(|b| b.index)
        .unwrap_or(N_BUCKETS - 1);
    Ok(PositionBucket { index })
}

/// Bucket for sentence `index` of `total`, computed with exact integer
/// arithmetic: `i/n` lies in bucket `k` iff `k*n < 5*i <= (k+1)*n`.
pub fn bucket_of_sentence(index: usize, total: usize) -> Result<PositionBucket, ModelError> {
    relative_position(index, total)?;
    let scaled = N_BUCKETS * index;
    let k = scaled.div_ceil(total) - 1;
    Ok(PositionBucket { index: k })
}

struct SentenceKey<'a> {
    generation_id: &'a str,
    index: usize,
    bucket: PositionBucket,
}

type SentenceGroups<'a> = BTreeMap<(&'a str, usize), (PositionBucket, Vec<&'a AtomicClaim>)>;

/// Resolves every claim to its sentence's bucket, grouped per sentence in
/// sorted `(generation_id, sentence_index)` order so floating-point sums do
/// not depend on input order.
fn group_claims<'a>(
    generations: &'a [GenerationRecord],
    claims: &'a [AtomicClaim],
) -> Result<SentenceGroups<'a>, ModelError> {
    let by_id: HashMap<&str, &GenerationRecord> =
        generations.iter().map(|g| (g.id.as_str(), g)).collect();
    let mut grouped: SentenceGroups = BTreeMap::new();
    for claim in claims {
        if claim.label == ClaimLabel::Unlabeled {
            return Err(ModelError::UnlabeledClaim {
                claim_id: claim.id.clone(),
            });
        }
        let key = locate(&by_id, claim)?;
        grouped
            .entry((key.generation_id, key.index))
            .or_insert_with(|| (key.bucket, Vec::new()))
            .1
            .push(claim);
    }
    for (_, list) in grouped.values_mut() {
        list.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(grouped)
}

fn locate<'a>(
    by_id: &HashMap<&'a str, &'a GenerationRecord>,
    claim: &AtomicClaim,
) -> Result<SentenceKey<'a>, ModelError> {
    let dangling = || ModelError::DanglingClaim {
        claim_id: claim.id.clone(),
        generation_id: claim.generation_id.clone(),
        sentence_index: claim.sentence_index,
    };
    let generation = by_id.get(claim.generation_id.as_str()).ok_or_else(dangling)?;
    let sentence = generation.sentence(claim.sentence_index).ok_or_else(dangling)?;
    let bucket = bucket_of_sentence(sentence.index, generation.sentences.len()).map_err(|_| dangling())?;
    Ok(SentenceKey {
        generation_id: generation.id.as_str(),
        index: sentence.index,
        bucket,
    })
}

/// Bucket of the sentence a claim came from.
pub fn claim_buckets<'a>(
    generations: &[GenerationRecord],
    claims: &'a [AtomicClaim],
) -> Result<Vec<(&'a AtomicClaim, PositionBucket)>, ModelError> {
    let by_id: HashMap<&str, &GenerationRecord> =
        generations.iter().map(|g| (g.id.as_str(), g)).collect();
    claims
        .iter()
        .map(|c| locate(&by_id, c).map(|k| (c, k.bucket)))
        .collect()
}

/// Macro-averaged label fractions per bucket: per-sentence fractions first,
/// then the unweighted mean over the sentences in each bucket. Sentences
/// without claims are skipped.
pub fn macro_average_fractions(
    generations: &[GenerationRecord],
    claims: &[AtomicClaim],
) -> Result<Vec<BucketStats>, ModelError> {
    let grouped = group_claims(generations, claims)?;
    if grouped.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut sums = [[0.0f64; 3]; N_BUCKETS];
    let mut counts = [0usize; N_BUCKETS];
    for (bucket, list) in grouped.values() {
        let n = list.len() as f64;
        let tally = |label| list.iter().filter(|c| c.label == label).count() as f64 / n;
        let s = &mut sums[bucket.index];
        s[0] += tally(ClaimLabel::Supported);
        s[1] += tally(ClaimLabel::Unsupported);
        s[2] += tally(ClaimLabel::Irrelevant);
        counts[bucket.index] += 1;
    }
    Ok(PositionBucket::all()
        .into_iter()
        .map(|bucket| {
            let mut stats = BucketStats::empty(bucket);
            let n = counts[bucket.index];
            if n > 0 {
                let s = sums[bucket.index];
                stats.frac_supported = s[0] / n as f64;
                stats.frac_unsupported = s[1] / n as f64;
                stats.frac_irrelevant = s[2] / n as f64;
            }
            stats.n_sentences = n;
            stats
        })
        .collect())
}

/// Per-generation average counts of Supported and Unsupported claims in each
/// bucket. Every generation counts toward the denominator.
pub fn bucket_claim_counts(
    generations: &[GenerationRecord],
    claims: &[AtomicClaim],
) -> Result<Vec<BucketStats>, ModelError> {
    let grouped = group_claims(generations, claims)?;
    if grouped.is_empty() || generations.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let mut supported = [0usize; N_BUCKETS];
    let mut unsupported = [0usize; N_BUCKETS];
    for (bucket, list) in grouped.values() {
        for claim in list {
            match claim.label {
                ClaimLabel::Supported => supported[bucket.index] += 1,
                ClaimLabel::Unsupported => unsupported[bucket.index] += 1,
                _ => {}
            }
        }
    }
    let n_gen = generations.len() as f64;
    Ok(PositionBucket::all()
        .into_iter()
        .map(|bucket| {
            let mut stats = BucketStats::empty(bucket);
            stats.avg_supported_count = supported[bucket.index] as f64 / n_gen;
            stats.avg_unsupported_count = unsupported[bucket.index] as f64 / n_gen;
            stats
        })
        .collect())
}

/// Fractions and counts merged into one table.
pub fn analyze_buckets(
    generations: &[GenerationRecord],
    claims: &[AtomicClaim],
) -> Result<Vec<BucketStats>, ModelError> {
    let fractions = macro_average_fractions(generations, claims)?;
    let counts = bucket_claim_counts(generations, claims)?;
    Ok(fractions
        .into_iter()
        .zip(counts)
        .map(|(mut f, c)| {
            f.avg_supported_count = c.avg_supported_count;
            f.avg_unsupported_count = c.avg_unsupported_count;
            f
        })
        .collect())
}

/// `|Supported| / (|Supported| + |Unsupported|)`; Irrelevant and Unlabeled
/// claims are ignored.
pub fn factuality_of_set<'a, I>(claims: I) -> Result<f64, ModelError>
where
    I: IntoIterator<Item = &'a AtomicClaim>,
{
    let (mut s, mut u) = (0usize, 0usize);
    for c in claims {
        match c.label {
            ClaimLabel::Supported => s += 1,
            ClaimLabel::Unsupported => u += 1,
            _ => {}
        }
    }
    if s + u == 0 {
        return Err(ModelError::EmptyClaimSet);
    }
    Ok(s as f64 / (s + u) as f64)
}
