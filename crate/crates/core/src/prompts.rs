//! Versioned prompt templates, embedded from `assets/prompts/`.
//!
//! Templates are compared byte-for-byte against golden checksums; any edit
//! must bump the file version so replay caches keyed on the old text stay
//! meaningful.

use sha2::{Digest, Sha256};

pub const BIO_GENERATION: &str = include_str!("../assets/prompts/bio_generation.v1.txt");
pub const DIRECT_ASKING: &str = include_str!("../assets/prompts/direct_asking.v1.txt");
pub const QUESTION_ANSWERING: &str = include_str!("../assets/prompts/question_answering.v1.txt");
pub const QA_WITH_NOA: &str = include_str!("../assets/prompts/qa_with_noa.v1.txt");
pub const QA_DERIVATION: &str = include_str!("../assets/prompts/qa_derivation.v1.txt");
pub const DECOMPOSITION: &str = include_str!("../assets/prompts/decomposition.v1.txt");

/// `(asset name, template)` for every shipped template.
pub fn all() -> [(&'static str, &'static str); 6] {
    [
        ("bio_generation.v1", BIO_GENERATION),
        ("decomposition.v1", DECOMPOSITION),
        ("direct_asking.v1", DIRECT_ASKING),
        ("qa_derivation.v1", QA_DERIVATION),
        ("qa_with_noa.v1", QA_WITH_NOA),
        ("question_answering.v1", QUESTION_ANSWERING),
    ]
}

pub fn checksum(template: &str) -> String {
    hex::encode(Sha256::digest(template.as_bytes()))
}

/// Single-pass substitution of `{name}` placeholders. Substituted values are
/// never rescanned, so braces inside a claim or entity come through intact.
/// Unknown placeholders are left as written.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn bio_prompt(entity: &str) -> String {
    render(BIO_GENERATION, &[("entity", entity)])
}
