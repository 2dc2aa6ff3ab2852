//! Self-judgment: the generating model grades its own atomic claims under
//! three prompting strategies, and the verdicts are reduced to Self-Known,
//! Self-Unknown, and flip rates per position bucket.
//!
//! * Self-Known: share of Supported claims the model judges true.
//! * Self-Unknown: share of Unsupported claims the model judges false or
//!   answers "None of the above".
//! * Flip rate: among claims judged true under question answering, the share
//!   judged false or NOA once the NOA option is offered.
//!
//! Unparseable verdicts are dropped from every denominator and reported as a
//! separate rate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::QaPair;
use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::model::{claim_buckets, AtomicClaim, ClaimLabel, GenerationRecord, ModelError, PositionBucket, N_BUCKETS};
use crate::prompts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("strategy {strategy} {}", if *.has_qa { "takes no QA pair" } else { "needs a QA pair" })]
    QaMismatch { strategy: JudgmentStrategy, has_qa: bool },
    #[error("judgments mix strategies {0} and {1}")]
    MixedStrategies(JudgmentStrategy, JudgmentStrategy),
    #[error("claim {0} judged more than once")]
    DuplicateJudgment(String),
    #[error("judgment for unknown claim {0}")]
    UnknownClaim(String),
    #[error("judgment sets cover different claims ({only_b} only in the first, {only_c} only in the second)")]
    MismatchedClaims { only_b: usize, only_c: usize },
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JudgmentStrategy {
    #[serde(rename = "direct")]
    DirectAsking,
    #[serde(rename = "qa")]
    QuestionAnswering,
    #[serde(rename = "qa-noa")]
    QaWithNoa,
}

impl JudgmentStrategy {
    pub const ALL: [JudgmentStrategy; 3] = [
        JudgmentStrategy::DirectAsking,
        JudgmentStrategy::QuestionAnswering,
        JudgmentStrategy::QaWithNoa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JudgmentStrategy::DirectAsking => "direct",
            JudgmentStrategy::QuestionAnswering => "qa",
            JudgmentStrategy::QaWithNoa => "qa-noa",
        }
    }

    pub fn needs_qa(self) -> bool {
        self != JudgmentStrategy::DirectAsking
    }
}

impl fmt::Display for JudgmentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JudgmentStrategy {
    type Err = JudgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" | "direct-asking" | "a" => Ok(JudgmentStrategy::DirectAsking),
            "qa" | "question-answering" | "b" => Ok(JudgmentStrategy::QuestionAnswering),
            "qa-noa" | "qa-with-noa" | "noa" | "c" => Ok(JudgmentStrategy::QaWithNoa),
            _ => Err(JudgeError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "true")]
    JudgedTrue,
    #[serde(rename = "false")]
    JudgedFalse,
    #[serde(rename = "noa")]
    JudgedNoa,
    #[serde(rename = "unparseable")]
    Unparseable,
}

impl Verdict {
    /// False and NOA both count as "judged incorrect".
    pub fn is_incorrect(self) -> bool {
        matches!(self, Verdict::JudgedFalse | Verdict::JudgedNoa)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub claim_id: String,
    pub strategy: JudgmentStrategy,
    pub raw_response: String,
    pub verdict: Verdict,
}

pub fn render_prompt(
    strategy: JudgmentStrategy,
    claim: &AtomicClaim,
    qa: Option<&QaPair>,
    entity: &str,
) -> Result<String, JudgeError> {
    match (strategy, qa) {
        (JudgmentStrategy::DirectAsking, None) => Ok(prompts::render(
            prompts::DIRECT_ASKING,
            &[("person", entity), ("claim", &claim.text)],
        )),
        (JudgmentStrategy::QuestionAnswering, Some(qa)) => Ok(prompts::render(
            prompts::QUESTION_ANSWERING,
            &[("q", &qa.question), ("a", &qa.answer)],
        )),
        (JudgmentStrategy::QaWithNoa, Some(qa)) => Ok(prompts::render(
            prompts::QA_WITH_NOA,
            &[("q", &qa.question), ("a", &qa.answer)],
        )),
        (strategy, qa) => Err(JudgeError::QaMismatch {
            strategy,
            has_qa: qa.is_some(),
        }),
    }
}

fn verdict_pattern(strategy: JudgmentStrategy) -> &'static Regex {
    static DIRECT: OnceLock<Regex> = OnceLock::new();
    static QA: OnceLock<Regex> = OnceLock::new();
    static NOA: OnceLock<Regex> = OnceLock::new();
    // Alternation order is the tie-break among matches starting at the same
    // offset; the leftmost match wins overall.
    match strategy {
        JudgmentStrategy::DirectAsking => {
            DIRECT.get_or_init(|| Regex::new(r"(?i)\b(?P<word>true|false)\b").unwrap())
        }
        JudgmentStrategy::QuestionAnswering => QA.get_or_init(|| {
            Regex::new(r"(?i)\((?P<paren>[ab])\)|^\s*(?P<bare>[ab])[).:,]|\b(?P<word>true|false)\b").unwrap()
        }),
        JudgmentStrategy::QaWithNoa => NOA.get_or_init(|| {
            Regex::new(
                r"(?i)\((?P<paren>[abc])\)|^\s*(?P<bare>[abc])[).:,]|\b(?P<word>true|false|none\s+of\s+the\s+above)\b",
            )
            .unwrap()
        }),
    }
}

/// Scans for an option letter in parentheses, a bare leading option letter
/// followed by punctuation, or the words true / false / none of the above.
/// The leftmost match decides; letters and NOA are only recognised where the
/// strategy offers them.
pub fn parse_verdict(raw: &str, strategy: JudgmentStrategy) -> Verdict {
    let Some(caps) = verdict_pattern(strategy).captures(raw) else {
        return Verdict::Unparseable;
    };
    let token = ["paren", "bare", "word"]
        .iter()
        .find_map(|g| caps.name(g))
        .map(|m| m.as_str().to_ascii_lowercase())
        .unwrap_or_default();
    match token.as_str() {
        "a" | "true" => Verdict::JudgedTrue,
        "b" | "false" => Verdict::JudgedFalse,
        "c" => Verdict::JudgedNoa,
        t if t.starts_with("none") => Verdict::JudgedNoa,
        _ => Verdict::Unparseable,
    }
}

#[derive(Debug, Clone)]
pub struct JudgeOptions {
    pub model_id: String,
    pub max_in_flight: usize,
    pub max_tokens: u32,
}

fn judge_request(prompt: String, opts: &JudgeOptions) -> ModelRequest {
    ModelRequest::new(&opts.model_id, prompt)
        .with_temperature(0.0)
        .with_max_tokens(opts.max_tokens)
}

pub fn judge(
    claim: &AtomicClaim,
    qa: Option<&QaPair>,
    entity: &str,
    strategy: JudgmentStrategy,
    gateway: &Gateway,
    opts: &JudgeOptions,
) -> Result<JudgmentRecord, JudgeError> {
    let prompt = render_prompt(strategy, claim, qa, entity)?;
    let resp = gateway.complete(&judge_request(prompt, opts))?;
    Ok(JudgmentRecord {
        claim_id: claim.id.clone(),
        strategy,
        verdict: parse_verdict(&resp.text, strategy),
        raw_response: resp.text,
    })
}

#[derive(Debug, Clone)]
pub struct JudgeItem<'a> {
    pub claim: &'a AtomicClaim,
    pub qa: Option<&'a QaPair>,
    pub entity: &'a str,
}

#[derive(Debug, Clone, Default)]
pub struct JudgeBatch {
    pub records: Vec<JudgmentRecord>,
    pub errors: Vec<(String, JudgeError)>,
}

impl JudgeBatch {
    pub fn error_rate(&self) -> f64 {
        let n = self.records.len() + self.errors.len();
        if n == 0 {
            0.0
        } else {
            self.errors.len() as f64 / n as f64
        }
    }
}

/// Judges every item through the gateway's bounded fan-out. Records and
/// errors come back sorted by claim id.
pub fn judge_batch(items: &[JudgeItem<'_>], strategy: JudgmentStrategy, gateway: &Gateway, opts: &JudgeOptions) -> JudgeBatch {
    let mut batch = JudgeBatch::default();
    let mut runnable = Vec::new();
    let mut reqs = Vec::new();
    for item in items {
        match render_prompt(strategy, item.claim, item.qa, item.entity) {
            Ok(prompt) => {
                runnable.push(item);
                reqs.push(judge_request(prompt, opts));
            }
            Err(e) => batch.errors.push((item.claim.id.clone(), e)),
        }
    }
    for (item, resp) in runnable.into_iter().zip(gateway.complete_many(&reqs, opts.max_in_flight)) {
        match resp {
            Ok(resp) => batch.records.push(JudgmentRecord {
                claim_id: item.claim.id.clone(),
                strategy,
                verdict: parse_verdict(&resp.text, strategy),
                raw_response: resp.text,
            }),
            Err(e) => batch.errors.push((item.claim.id.clone(), e.into())),
        }
    }
    batch.records.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));
    batch.errors.sort_by(|a, b| a.0.cmp(&b.0));
    batch
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SelfScoreRow {
    pub self_known: Option<f64>,
    pub self_unknown: Option<f64>,
    /// Supported claims with a parseable verdict.
    pub n_judged_supported: usize,
    /// Unsupported claims with a parseable verdict.
    pub n_judged_unsupported: usize,
    pub n_unparseable: usize,
}

impl SelfScoreRow {
    pub fn unparseable_rate(&self) -> Option<f64> {
        let n = self.n_judged_supported + self.n_judged_unsupported + self.n_unparseable;
        (n > 0).then(|| self.n_unparseable as f64 / n as f64)
    }
}

#[derive(Default)]
struct Tally {
    known: usize,
    supported: usize,
    unknown: usize,
    unsupported: usize,
    unparseable: usize,
}

impl Tally {
    fn add(&mut self, label: ClaimLabel, verdict: Verdict) {
        if verdict == Verdict::Unparseable {
            self.unparseable += 1;
            return;
        }
        match label {
            ClaimLabel::Supported => {
                self.supported += 1;
                self.known += usize::from(verdict == Verdict::JudgedTrue);
            }
            ClaimLabel::Unsupported => {
                self.unsupported += 1;
                self.unknown += usize::from(verdict.is_incorrect());
            }
            _ => {}
        }
    }

    fn row(&self) -> SelfScoreRow {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        SelfScoreRow {
            self_known: ratio(self.known, self.supported),
            self_unknown: ratio(self.unknown, self.unsupported),
            n_judged_supported: self.supported,
            n_judged_unsupported: self.unsupported,
            n_unparseable: self.unparseable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfScores {
    pub strategy: JudgmentStrategy,
    pub overall: SelfScoreRow,
    pub buckets: Vec<SelfScoreRow>,
}

fn index_judgments(judgments: &[JudgmentRecord]) -> Result<HashMap<&str, Verdict>, JudgeError> {
    let mut map = HashMap::with_capacity(judgments.len());
    for j in judgments {
        if map.insert(j.claim_id.as_str(), j.verdict).is_some() {
            return Err(JudgeError::DuplicateJudgment(j.claim_id.clone()));
        }
    }
    Ok(map)
}

fn single_strategy(judgments: &[JudgmentRecord]) -> Result<Option<JudgmentStrategy>, JudgeError> {
    let mut strategy = None;
    for j in judgments {
        match strategy {
            None => strategy = Some(j.strategy),
            Some(s) if s != j.strategy => return Err(JudgeError::MixedStrategies(s, j.strategy)),
            _ => {}
        }
    }
    Ok(strategy)
}

/// Self-Known and Self-Unknown overall and per bucket of each claim's source
/// sentence. Claims without a judgment, and Irrelevant or Unlabeled claims,
/// are ignored. A score with an empty denominator is absent.
pub fn self_scores(
    generations: &[GenerationRecord],
    claims: &[AtomicClaim],
    judgments: &[JudgmentRecord],
) -> Result<SelfScores, JudgeError> {
    let strategy = single_strategy(judgments)?.unwrap_or(JudgmentStrategy::QaWithNoa);
    let verdicts = index_judgments(judgments)?;
    let known_ids: HashSet<&str> = claims.iter().map(|c| c.id.as_str()).collect();
    if let Some(j) = judgments.iter().find(|j| !known_ids.contains(j.claim_id.as_str())) {
        return Err(JudgeError::UnknownClaim(j.claim_id.clone()));
    }
    let mut overall = Tally::default();
    let mut per_bucket: Vec<Tally> = (0..N_BUCKETS).map(|_| Tally::default()).collect();
    let relevant: Vec<AtomicClaim> = claims
        .iter()
        .filter(|c| matches!(c.label, ClaimLabel::Supported | ClaimLabel::Unsupported))
        .filter(|c| verdicts.contains_key(c.id.as_str()))
        .cloned()
        .collect();
    for (claim, bucket) in claim_buckets(generations, &relevant)? {
        let verdict = verdicts[claim.id.as_str()];
        overall.add(claim.label, verdict);
        per_bucket[bucket.index].add(claim.label, verdict);
    }
    Ok(SelfScores {
        strategy,
        overall: overall.row(),
        buckets: per_bucket.iter().map(Tally::row).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRateRecord {
    pub bucket: PositionBucket,
    pub label_class: ClaimLabel,
    pub n_correct_in_b: usize,
    pub n_flipped: usize,
    pub flip_rate: Option<f64>,
}

/// Flip rates from question answering (`judgments_b`) to question answering
/// with NOA (`judgments_c`), per bucket and per Supported / Unsupported
/// class. A claim unparseable in either setting is excluded.
pub fn flip_rate(
    generations: &[GenerationRecord],
    claims: &[AtomicClaim],
    judgments_b: &[JudgmentRecord],
    judgments_c: &[JudgmentRecord],
) -> Result<Vec<FlipRateRecord>, JudgeError> {
    let b = index_judgments(judgments_b)?;
    let c = index_judgments(judgments_c)?;
    let only_b = b.keys().filter(|k| !c.contains_key(*k)).count();
    let only_c = c.keys().filter(|k| !b.contains_key(*k)).count();
    if only_b + only_c > 0 {
        return Err(JudgeError::MismatchedClaims { only_b, only_c });
    }
    let known_ids: HashSet<&str> = claims.iter().map(|c| c.id.as_str()).collect();
    if let Some(id) = b.keys().find(|k| !known_ids.contains(*k)) {
        return Err(JudgeError::UnknownClaim(id.to_string()));
    }
    let classes = [ClaimLabel::Supported, ClaimLabel::Unsupported];
    let mut counts: BTreeMap<(usize, ClaimLabel), (usize, usize)> = BTreeMap::new();
    let judged: Vec<AtomicClaim> = claims
        .iter()
        .filter(|cl| classes.contains(&cl.label) && b.contains_key(cl.id.as_str()))
        .cloned()
        .collect();
    for (claim, bucket) in claim_buckets(generations, &judged)? {
        let (vb, vc) = (b[claim.id.as_str()], c[claim.id.as_str()]);
        if vb == Verdict::Unparseable || vc == Verdict::Unparseable || vb != Verdict::JudgedTrue {
            continue;
        }
        let entry = counts.entry((bucket.index, claim.label)).or_default();
        entry.0 += 1;
        entry.1 += usize::from(vc.is_incorrect());
    }
    let mut out = Vec::with_capacity(N_BUCKETS * 2);
    for bucket in PositionBucket::all() {
        for label in classes {
            let (n_correct_in_b, n_flipped) = counts.get(&(bucket.index, label)).copied().unwrap_or_default();
            out.push(FlipRateRecord {
                bucket,
                label_class: label,
                n_correct_in_b,
                n_flipped,
                flip_rate: (n_correct_in_b > 0).then(|| n_flipped as f64 / n_correct_in_b as f64),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::testing::scripted_gateway;
    use crate::model::testing::{claim, generation};
    use proptest::prelude::*;
    use JudgmentStrategy::*;
    use Verdict::*;

    fn lanny_claim() -> AtomicClaim {
        AtomicClaim {
            id: "g:s1:c1".into(),
            generation_id: "g".into(),
            sentence_index: 1,
            text: "Lanny Flaherty is an American.".into(),
            label: ClaimLabel::Supported,
        }
    }

    fn lanny_qa() -> QaPair {
        QaPair {
            claim_id: "g:s1:c1".into(),
            question: "What nationality is Lanny Flaherty?".into(),
            answer: "American".into(),
        }
    }

    #[test]
    fn renders_templates() {
        let c = lanny_claim();
        let qa = lanny_qa();
        assert_eq!(
            render_prompt(DirectAsking, &c, None, "Lanny Flaherty").unwrap(),
            "Following is a statement from a bio of Lanny Flaherty. Please check whether the statement is correct or wrong according to your knowledge.\n\nLanny Flaherty is an American.\nIs this statement true or false?"
        );
        assert_eq!(
            render_prompt(QaWithNoa, &c, Some(&qa), "Lanny Flaherty").unwrap(),
            "Question: What nationality is Lanny Flaherty?\nProposed Answer: American\nIs the proposed answer:\n(A) True\n(B) False\n(C) None of the above\nThe proposed answer is:"
        );
        assert!(matches!(
            render_prompt(QuestionAnswering, &c, None, "x"),
            Err(JudgeError::QaMismatch { has_qa: false, .. })
        ));
        assert!(matches!(
            render_prompt(DirectAsking, &c, Some(&qa), "x"),
            Err(JudgeError::QaMismatch { has_qa: true, .. })
        ));
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(parse_verdict("(A) True", QaWithNoa), JudgedTrue);
        assert_eq!(parse_verdict("The proposed answer is: (C) None of the above", QaWithNoa), JudgedNoa);
        assert_eq!(parse_verdict("I cannot determine this.", QaWithNoa), Unparseable);
        assert_eq!(parse_verdict("B) False", QuestionAnswering), JudgedFalse);
        assert_eq!(parse_verdict("True. The answer is supported.", QuestionAnswering), JudgedTrue);
        assert_eq!(parse_verdict("It is none of the above, (A) could…", QaWithNoa), JudgedNoa);
    }

    #[test]
    fn verdict_letters_respect_strategy() {
        assert_eq!(parse_verdict("(C) None of the above", QuestionAnswering), Unparseable);
        assert_eq!(parse_verdict("(c)", QaWithNoa), JudgedNoa);
        assert_eq!(parse_verdict("  a. true", QaWithNoa), JudgedTrue);
        assert_eq!(parse_verdict("The statement is false.", DirectAsking), JudgedFalse);
        assert_eq!(parse_verdict("(A)", DirectAsking), Unparseable);
        assert_eq!(parse_verdict("A statement like this is TRUE", QuestionAnswering), JudgedTrue);
        assert_eq!(parse_verdict("Untrue claims", DirectAsking), Unparseable);
        assert_eq!(parse_verdict("None  of the\nabove", QaWithNoa), JudgedNoa);
    }

    #[test]
    fn judge_through_gateway() {
        let dir = tempfile::tempdir().unwrap();
        let gw = scripted_gateway(dir.path(), |r| {
            assert_eq!(r.temperature, 0.0);
            Ok("(A) True".into())
        });
        let opts = JudgeOptions {
            model_id: "m".into(),
            max_in_flight: 1,
            max_tokens: 32,
        };
        let qa = lanny_qa();
        let rec = judge(&lanny_claim(), Some(&qa), "Lanny Flaherty", QaWithNoa, &gw, &opts).unwrap();
        assert_eq!(rec.verdict, JudgedTrue);
        assert_eq!(rec.raw_response, "(A) True");
        assert_eq!(rec.strategy, QaWithNoa);
    }

    fn jr(id: &str, strategy: JudgmentStrategy, verdict: Verdict) -> JudgmentRecord {
        JudgmentRecord {
            claim_id: id.into(),
            strategy,
            raw_response: String::new(),
            verdict,
        }
    }

    #[test]
    fn self_known_counts() {
        let gens = vec![generation("g", 1)];
        let claims: Vec<_> = (1..=4).map(|k| claim("g", 1, k, ClaimLabel::Supported)).collect();
        let verdicts = [JudgedTrue, JudgedTrue, JudgedTrue, JudgedFalse];
        let js: Vec<_> = claims.iter().zip(verdicts).map(|(c, v)| jr(&c.id, QaWithNoa, v)).collect();
        let s = self_scores(&gens, &claims, &js).unwrap();
        assert_eq!(s.overall.self_known, Some(0.75));
        assert_eq!(s.overall.self_unknown, None);
        assert_eq!(s.buckets[4].self_known, Some(0.75));
    }

    #[test]
    fn noa_counts_as_incorrect_for_unsupported() {
        let gens = vec![generation("g", 1)];
        let claims: Vec<_> = (1..=2).map(|k| claim("g", 1, k, ClaimLabel::Unsupported)).collect();
        let js = vec![jr(&claims[0].id, QaWithNoa, JudgedFalse), jr(&claims[1].id, QaWithNoa, JudgedNoa)];
        let s = self_scores(&gens, &claims, &js).unwrap();
        assert_eq!(s.overall.self_unknown, Some(1.0));
        assert!(s.buckets[0].self_unknown.is_none());
    }

    #[test]
    fn unparseable_excluded_and_reported() {
        let gens = vec![generation("g", 1)];
        let claims: Vec<_> = (1..=3).map(|k| claim("g", 1, k, ClaimLabel::Supported)).collect();
        let js = vec![
            jr(&claims[0].id, QaWithNoa, JudgedTrue),
            jr(&claims[1].id, QaWithNoa, Unparseable),
            jr(&claims[2].id, QaWithNoa, JudgedNoa),
        ];
        let s = self_scores(&gens, &claims, &js).unwrap();
        assert_eq!(s.overall.self_known, Some(0.5));
        assert_eq!(s.overall.n_judged_supported, 2);
        assert_eq!(s.overall.unparseable_rate(), Some(1.0 / 3.0));
    }

    #[test]
    fn self_scores_rejects_bad_tables() {
        let gens = vec![generation("g", 1)];
        let claims = vec![claim("g", 1, 1, ClaimLabel::Supported)];
        let dup = vec![jr(&claims[0].id, QaWithNoa, JudgedTrue), jr(&claims[0].id, QaWithNoa, JudgedTrue)];
        assert!(matches!(self_scores(&gens, &claims, &dup), Err(JudgeError::DuplicateJudgment(_))));
        let mixed = vec![jr(&claims[0].id, QaWithNoa, JudgedTrue), jr("x", QuestionAnswering, JudgedTrue)];
        assert!(matches!(self_scores(&gens, &claims, &mixed), Err(JudgeError::MixedStrategies(..))));
        let unknown = vec![jr("nope", QaWithNoa, JudgedTrue)];
        assert!(matches!(self_scores(&gens, &claims, &unknown), Err(JudgeError::UnknownClaim(_))));
    }

    #[test]
    fn flip_rate_example() {
        let gens = vec![generation("g", 1)];
        let claims: Vec<_> = (1..=4).map(|k| claim("g", 1, k, ClaimLabel::Supported)).collect();
        let b: Vec<_> = claims
            .iter()
            .zip([JudgedTrue, JudgedTrue, JudgedTrue, JudgedFalse])
            .map(|(c, v)| jr(&c.id, QuestionAnswering, v))
            .collect();
        let c: Vec<_> = claims
            .iter()
            .zip([JudgedTrue, JudgedNoa, JudgedFalse, JudgedFalse])
            .map(|(c, v)| jr(&c.id, QaWithNoa, v))
            .collect();
        let out = flip_rate(&gens, &claims, &b, &c).unwrap();
        assert_eq!(out.len(), 10);
        let rec = out
            .iter()
            .find(|r| r.bucket.index == 4 && r.label_class == ClaimLabel::Supported)
            .unwrap();
        assert_eq!((rec.n_correct_in_b, rec.n_flipped), (3, 2));
        assert!((rec.flip_rate.unwrap() - 0.667).abs() < 1e-3);
        let unsupported = out
            .iter()
            .find(|r| r.bucket.index == 4 && r.label_class == ClaimLabel::Unsupported)
            .unwrap();
        assert_eq!(unsupported.flip_rate, None);
    }

    #[test]
    fn flip_rate_mismatch() {
        let gens = vec![generation("g", 1)];
        let claims: Vec<_> = (1..=2).map(|k| claim("g", 1, k, ClaimLabel::Supported)).collect();
        let b = vec![jr(&claims[0].id, QuestionAnswering, JudgedTrue)];
        let c = vec![jr(&claims[1].id, QaWithNoa, JudgedTrue)];
        assert_eq!(
            flip_rate(&gens, &claims, &b, &c),
            Err(JudgeError::MismatchedClaims { only_b: 1, only_c: 1 })
        );
    }

    fn verdict_strategy() -> impl Strategy<Value = Verdict> {
        prop_oneof![Just(JudgedTrue), Just(JudgedFalse), Just(JudgedNoa), Just(Unparseable)]
    }

    fn label_strategy() -> impl Strategy<Value = ClaimLabel> {
        prop_oneof![
            Just(ClaimLabel::Supported),
            Just(ClaimLabel::Unsupported),
            Just(ClaimLabel::Irrelevant)
        ]
    }

    proptest! {
        #[test]
        fn score_invariants(
            table in proptest::collection::vec((1usize..=6, label_strategy(), verdict_strategy(), verdict_strategy()), 1..60),
            extra_irrelevant in 0usize..5,
        ) {
            let gens = vec![generation("g", 6)];
            let claims: Vec<_> = table.iter().enumerate().map(|(k, (s, l, _, _))| claim("g", *s, k, *l)).collect();
            let b: Vec<_> = claims.iter().zip(&table).map(|(c, t)| jr(&c.id, QaWithNoa, t.2)).collect();
            let c: Vec<_> = claims.iter().zip(&table).map(|(c, t)| jr(&c.id, QaWithNoa, t.3)).collect();

            let s = self_scores(&gens, &claims, &b).unwrap();
            for row in s.buckets.iter().chain([&s.overall]) {
                for v in [row.self_known, row.self_unknown].into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }

            // Order and extra Irrelevant claims do not matter.
            let mut shuffled = claims.clone();
            shuffled.reverse();
            for k in 0..extra_irrelevant {
                shuffled.push(claim("g", 1 + k % 6, 1000 + k, ClaimLabel::Irrelevant));
            }
            let mut b_rev = b.clone();
            b_rev.reverse();
            prop_assert_eq!(self_scores(&gens, &shuffled, &b_rev).unwrap(), s.clone());

            // NOA behaves exactly like False for Self-Unknown.
            let as_false: Vec<_> = b.iter().map(|j| {
                let mut j = j.clone();
                if j.verdict == JudgedNoa { j.verdict = JudgedFalse; }
                j
            }).collect();
            let s2 = self_scores(&gens, &claims, &as_false).unwrap();
            prop_assert_eq!(s2.overall.self_unknown, s.overall.self_unknown);
            for (x, y) in s2.buckets.iter().zip(&s.buckets) {
                prop_assert_eq!(x.self_unknown, y.self_unknown);
            }

            // flip_rate(X, X) is zero wherever defined.
            for r in flip_rate(&gens, &claims, &b, &b).unwrap() {
                prop_assert!(r.flip_rate.is_none_or(|v| v == 0.0));
            }
            prop_assert!(flip_rate(&gens, &claims, &b, &c).is_ok());
        }
    }
}
