//! Rebuilds the shipped replay fixture: a synthetic annotated corpus of
//! fictional people and the cached model responses the full report needs.
//!
//! ```text
//! cargo run -p factcurve --example record_fixture -- crates/core/tests/fixtures
//! ```
//!
//! The scripted model below answers from the annotation labels with
//! position-dependent noise, so the cache exercises every verdict kind,
//! unparseable replies and QA responses missing their `#` separator.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use factcurve::claims::{claim_id, segment_sentences, QaOptions};
use factcurve::gateway::{Gateway, ModelRequest, ModelResponse, RetryPolicy, Transport, TransportError};
use factcurve::ingestion::{apply_filters, write_annotated, AnnotatedCorpus, FilterRule, FilterScope};
use factcurve::judgment::JudgeOptions;
use factcurve::model::{AtomicClaim, ClaimLabel, GenerationRecord};
use factcurve::pipeline;
use factcurve::prompts;

pub const MODEL_ID: &str = "fixture-model";

struct Person {
    name: &'static str,
    pronoun: &'static str,
    possessive: &'static str,
    nationality: &'static str,
    occupation: &'static str,
    city: &'static str,
    year: u32,
    field: &'static str,
    school: &'static str,
    org: &'static str,
    work: &'static str,
    award: &'static str,
    later_city: &'static str,
}

const PEOPLE: [Person; 12] = [
    Person { name: "Mira Castellan", pronoun: "She", possessive: "her", nationality: "Portuguese", occupation: "architect", city: "Porto", year: 1961, field: "civil engineering", school: "the University of Coimbra", org: "Atelier Norte", work: "the Ribeira Library", award: "Premio Tavora", later_city: "Lisbon" },
    Person { name: "Tobias Wren", pronoun: "He", possessive: "his", nationality: "Canadian", occupation: "cellist", city: "Halifax", year: 1974, field: "music performance", school: "McGill University", org: "the Atlantic Chamber Orchestra", work: "the album Tidewater Suites", award: "Juno Award", later_city: "Montreal" },
    Person { name: "Anika Solberg", pronoun: "She", possessive: "her", nationality: "Norwegian", occupation: "glaciologist", city: "Tromso", year: 1958, field: "geophysics", school: "the University of Bergen", org: "the Polar Survey Institute", work: "a survey of the Svalbard ice caps", award: "Nansen Medal", later_city: "Oslo" },
    Person { name: "Dario Vennet", pronoun: "He", possessive: "his", nationality: "Italian", occupation: "film director", city: "Turin", year: 1969, field: "film studies", school: "the Centro Sperimentale", org: "Lumen Pictures", work: "the film Quiet Harbour", award: "Silver Ribbon", later_city: "Rome" },
    Person { name: "Helena Marchetti", pronoun: "She", possessive: "her", nationality: "Argentine", occupation: "novelist", city: "Rosario", year: 1952, field: "literature", school: "the University of Buenos Aires", org: "Editorial Sur", work: "the novel The Salt Orchard", award: "Premio Clarin", later_city: "Madrid" },
    Person { name: "Kwame Adjei", pronoun: "He", possessive: "his", nationality: "Ghanaian", occupation: "economist", city: "Kumasi", year: 1966, field: "economics", school: "the University of Ghana", org: "the West African Monetary Institute", work: "a study of rural credit markets", award: "Volta Prize", later_city: "Accra" },
    Person { name: "Liesel Brandt", pronoun: "She", possessive: "her", nationality: "German", occupation: "chemist", city: "Leipzig", year: 1971, field: "chemistry", school: "the Technical University of Dresden", org: "Halden Laboratories", work: "a catalyst for cold water treatment", award: "Liebig Medal", later_city: "Munich" },
    Person { name: "Rafael Okonkwo", pronoun: "He", possessive: "his", nationality: "Nigerian", occupation: "sculptor", city: "Enugu", year: 1957, field: "fine art", school: "the University of Nigeria", org: "the Nsukka Workshop", work: "the bronze series River Voices", award: "Ulli Beier Award", later_city: "Lagos" },
    Person { name: "Sun-hee Park", pronoun: "She", possessive: "her", nationality: "South Korean", occupation: "marine biologist", city: "Busan", year: 1979, field: "biology", school: "Seoul National University", org: "the Korea Ocean Research Center", work: "a census of coastal kelp forests", award: "Ocean Science Prize", later_city: "Incheon" },
    Person { name: "Emil Farkas", pronoun: "He", possessive: "his", nationality: "Hungarian", occupation: "mathematician", city: "Szeged", year: 1948, field: "mathematics", school: "Eotvos Lorand University", org: "the Renyi Institute", work: "a theorem on sparse graphs", award: "Bolyai Prize", later_city: "Budapest" },
    Person { name: "Ines Duval", pronoun: "She", possessive: "her", nationality: "French", occupation: "journalist", city: "Nantes", year: 1964, field: "political science", school: "Sciences Po", org: "Le Courrier de l'Ouest", work: "a series on harbour labour", award: "Prix Albert Londres", later_city: "Paris" },
    Person { name: "Oren Halevi", pronoun: "He", possessive: "his", nationality: "Israeli", occupation: "computer scientist", city: "Haifa", year: 1976, field: "computer science", school: "the Technion", org: "Carmel Systems", work: "a compiler for embedded devices", award: "Rothschild Prize", later_city: "Tel Aviv" },
];

const REFUSALS: [(&str, &str); 2] = [
    ("Perrin Aldous", "I apologize, but I could not find reliable information about Perrin Aldous. Could you share more details?"),
    ("Velma Ostrander", "I don't have any information about Velma Ostrander. If you can provide more information, I can try to help."),
];

/// Deterministic uniform draw in [0, 1) keyed by arbitrary text.
fn unit(parts: &[&str]) -> f64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().unwrap()) as f64 / 2f64.powi(64)
}

/// Sentences with their atomic claims; a `true` flag marks an Irrelevant
/// claim.
fn sentences(p: &Person) -> Vec<(String, Vec<(String, bool)>)> {
    let n = p.name;
    let f = |s: String| (s, false);
    let mut out = vec![
        (
            format!("{n} is a {} {} born in {} in {}.", p.nationality, p.occupation, p.year, p.city),
            vec![
                f(format!("{n} is {}.", p.nationality)),
                f(format!("{n} is a {}.", p.occupation)),
                f(format!("{n} was born in {}.", p.year)),
                f(format!("{n} was born in {}.", p.city)),
            ],
        ),
        (
            format!("{} studied {} at {}.", p.pronoun, p.field, p.school),
            vec![f(format!("{n} studied {}.", p.field)), f(format!("{n} attended {}.", p.school))],
        ),
        (
            format!("{} began {} career at {} in {}.", p.pronoun, p.possessive, p.org, p.year + 24),
            vec![f(format!("{n} began a career at {}.", p.org)), f(format!("{n} began a career in {}.", p.year + 24))],
        ),
        (
            format!("{} is best known for {}, completed in {}.", p.pronoun, p.work, p.year + 31),
            vec![f(format!("{n} is best known for {}.", p.work)), f(format!("{n} completed {} in {}.", p.work, p.year + 31))],
        ),
        (
            format!("{} received the {} in {}.", p.pronoun, p.award, p.year + 38),
            vec![f(format!("{n} received the {}.", p.award)), f(format!("{n} received the {} in {}.", p.award, p.year + 38))],
        ),
        (
            format!("{} later moved to {} and taught {} there.", p.pronoun, p.later_city, p.field),
            vec![f(format!("{n} moved to {}.", p.later_city)), f(format!("{n} taught {} in {}.", p.field, p.later_city))],
        ),
        (
            format!("{n}'s work continues to inspire many people."),
            vec![(format!("{n}'s work continues to inspire many people."), true)],
        ),
    ];
    // Vary generation length between five and seven sentences.
    let drop = (unit(&[n, "length"]) * 3.0) as usize;
    for _ in 0..drop {
        out.remove(out.len() - 2);
    }
    out
}

fn corpus() -> AnnotatedCorpus {
    let mut corpus = AnnotatedCorpus {
        source_name: "corpus.jsonl".into(),
        ..Default::default()
    };
    for p in &PEOPLE {
        let id = format!("{MODEL_ID}::{}", p.name);
        let sents = sentences(p);
        let text = sents.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(" ");
        let segmented = segment_sentences(&text).expect("nonempty");
        assert_eq!(segmented.len(), sents.len(), "segmenter disagrees on {}", p.name);
        let total = sents.len();
        for (k, (_, claims)) in sents.iter().enumerate() {
            let position = (k + 1) as f64 / total as f64;
            for (j, (claim, irrelevant)) in claims.iter().enumerate() {
                // Later sentences are more often unsupported.
                let label = if *irrelevant {
                    ClaimLabel::Irrelevant
                } else if unit(&[claim, "label"]) < 0.05 + 0.45 * position {
                    ClaimLabel::Unsupported
                } else {
                    ClaimLabel::Supported
                };
                corpus.claims.push(AtomicClaim {
                    id: claim_id(&id, k + 1, j + 1),
                    generation_id: id.clone(),
                    sentence_index: k + 1,
                    text: claim.clone(),
                    label,
                });
            }
        }
        corpus.records.push(GenerationRecord {
            id,
            entity: p.name.into(),
            prompt: prompts::bio_prompt(p.name),
            model_id: MODEL_ID.into(),
            text,
            sentences: segmented,
            filtered: false,
        });
    }
    for (name, text) in REFUSALS {
        corpus.records.push(GenerationRecord {
            id: format!("{MODEL_ID}::{name}"),
            entity: name.into(),
            prompt: prompts::bio_prompt(name),
            model_id: MODEL_ID.into(),
            text: text.into(),
            sentences: segment_sentences(text).unwrap(),
            filtered: false,
        });
    }
    let records = std::mem::take(&mut corpus.records);
    corpus.records = apply_filters(records, &FilterRule::defaults(), FilterScope::Opening).0;
    corpus
}

/// Answers from the annotation labels with deterministic noise.
struct ScriptedModel {
    label_of_claim: HashMap<String, ClaimLabel>,
    label_of_question: HashMap<String, ClaimLabel>,
}

fn split_claim(claim: &str) -> (String, String) {
    let body = claim.trim_end_matches('.');
    let (head, tail) = body.rsplit_once(' ').unwrap_or(("What is", body));
    (format!("{head} what?"), tail.to_string())
}

impl ScriptedModel {
    fn new(corpus: &AnnotatedCorpus) -> Self {
        let mut label_of_claim = HashMap::new();
        let mut label_of_question = HashMap::new();
        for c in &corpus.claims {
            label_of_claim.insert(c.text.clone(), c.label);
            label_of_question.entry(split_claim(&c.text).0).or_insert(c.label);
        }
        ScriptedModel {
            label_of_claim,
            label_of_question,
        }
    }

    fn derive_qa(&self, prompt: &str, temperature: f64) -> String {
        let claim = prompt.rsplit("\n\n").next().unwrap_or_default();
        let u = unit(&[claim, "qa", &temperature.to_string()]);
        let (question, answer) = split_claim(claim);
        if temperature == 0.0 && u < 0.06 || temperature > 0.0 && u < 0.2 {
            format!("Question: {question} Answer: {answer}")
        } else {
            format!("{question} # {answer}")
        }
    }

    /// Option letter chosen for a claim, or `None` for an unusable reply.
    fn verdict(&self, key: &str, label: Option<ClaimLabel>, noa: bool, seed: &str) -> Option<char> {
        if unit(&[key, seed]) < 0.03 {
            return None;
        }
        let supported = label == Some(ClaimLabel::Supported);
        let (p_true, p_noa) = match (supported, noa) {
            (true, false) => (0.85, 0.0),
            (true, true) => (0.76, 0.10),
            (false, false) => (0.62, 0.0),
            (false, true) => (0.45, 0.25),
        };
        let v = unit(&[key, seed, "verdict"]);
        Some(if v < p_true {
            'A'
        } else if v < p_true + p_noa {
            'C'
        } else {
            'B'
        })
    }
}

const UNUSABLE: &str = "I cannot determine this from what I know.";

fn option_reply(letter: Option<char>, style: f64) -> String {
    let Some(letter) = letter else {
        return UNUSABLE.into();
    };
    let word = match letter {
        'A' => "True",
        'B' => "False",
        _ => "None of the above",
    };
    match (style * 3.0) as u32 {
        0 => format!("({letter}) {word}"),
        1 => format!("{letter}."),
        _ => format!("The proposed answer is ({letter}) {word}."),
    }
}

fn direct_reply(letter: Option<char>, style: f64) -> String {
    match (letter, style < 0.5) {
        (None, _) => UNUSABLE.into(),
        (Some('A'), true) => "True.".into(),
        (Some('A'), false) => "The statement is true.".into(),
        (Some(_), true) => "False.".into(),
        (Some(_), false) => "This statement is false.".into(),
    }
}

impl Transport for ScriptedModel {
    fn send(&self, req: &ModelRequest) -> Result<ModelResponse, TransportError> {
        let p = &req.prompt;
        let text = if p.contains("separetd with #") {
            self.derive_qa(p, req.temperature)
        } else if p.ends_with("Is this statement true or false?") {
            let claim = p.lines().rev().nth(1).unwrap_or_default();
            let label = self.label_of_claim.get(claim).copied();
            direct_reply(self.verdict(claim, label, false, "direct"), unit(&[claim, "style"]))
        } else if let Some(q) = p.strip_prefix("Question: ") {
            let question = q.lines().next().unwrap_or_default();
            let label = self.label_of_question.get(question).copied();
            let noa = p.contains("(C) None of the above");
            let seed = if noa { "qa-noa" } else { "qa" };
            option_reply(self.verdict(question, label, noa, seed), unit(&[question, seed, "style"]))
        } else {
            return Err(TransportError::Malformed(format!("unscripted prompt: {p}")));
        };
        Ok(ModelResponse {
            text,
            cached: false,
            provider_meta: Default::default(),
        })
    }
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/tests/fixtures".into()));
    let cache = root.join("cache");
    if cache.exists() {
        fs::remove_dir_all(&cache).expect("clear old cache");
    }
    fs::create_dir_all(&root).expect("fixture dir");
    let corpus = corpus();
    let mut buf = Vec::new();
    write_annotated(&corpus, &mut buf).unwrap();
    fs::write(root.join("corpus.jsonl"), buf).unwrap();

    let gateway = Gateway::record(&cache, Arc::new(ScriptedModel::new(&corpus))).with_retry(RetryPolicy {
        attempts: 1,
        initial_backoff: std::time::Duration::ZERO,
    });
    let qa = QaOptions {
        model_id: MODEL_ID.into(),
        max_in_flight: 8,
        retry_temperature: 0.7,
    };
    let judge = JudgeOptions {
        model_id: MODEL_ID.into(),
        max_in_flight: 8,
        max_tokens: 1024,
    };
    let out = pipeline::full_report(&corpus, &gateway, &qa, &judge).expect("report");
    for f in &out.failures {
        println!("{}: {} of {} failed", f.stage, f.failed, f.total);
    }
    println!(
        "{} generations, {} claims, {} cached responses",
        corpus.records.len(),
        corpus.claims.len(),
        gateway.provider_calls()
    );
}
