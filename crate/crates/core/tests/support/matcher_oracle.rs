//! Naive sliding-window reference matcher and a random document generator
//! with injected surface forms.

use std::collections::BTreeSet;

use motif_core::{compile_rules, match_document, tokenize, Document};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct OracleRule {
    pub motif_id: &'static str,
    /// pattern -> element -> alternatives
    pub patterns: Vec<Vec<Vec<&'static str>>>,
    pub allow_possessive: bool,
    pub case_sensitive: bool,
}

fn p(elements: &[&[&'static str]]) -> Vec<Vec<&'static str>> {
    elements.iter().map(|e| e.to_vec()).collect()
}

pub fn rules() -> Vec<OracleRule> {
    vec![
        OracleRule {
            motif_id: "finn-mccool",
            patterns: vec![p(&[&["finn"], &["mccool"]]), p(&[&["finn"], &["mac"], &["cool"]]), p(&[&["fionn"]])],
            allow_possessive: true,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "coqui",
            patterns: vec![p(&[&["coqui", "coquí"]])],
            allow_possessive: true,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "tower-of-babel",
            patterns: vec![p(&[&["tower"], &["of"], &["babel"]]), p(&[&["babel"]])],
            allow_possessive: false,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "pot-of-gold",
            patterns: vec![p(&[&["pot"], &["of"], &["gold"]])],
            allow_possessive: false,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "golem",
            patterns: vec![p(&[&["Golem"]])],
            allow_possessive: true,
            case_sensitive: true,
        },
        OracleRule {
            motif_id: "david-and-goliath",
            patterns: vec![p(&[&["david"], &["and", "&"], &["goliath"]]), p(&[&["goliath"]])],
            allow_possessive: true,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "la-llorona",
            patterns: vec![p(&[&["la"], &["llorona"]]), p(&[&["llorona"]])],
            allow_possessive: false,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "el-cuco",
            patterns: vec![p(&[&["el"], &["cuco", "coco"]])],
            allow_possessive: false,
            case_sensitive: false,
        },
        OracleRule {
            motif_id: "giant",
            patterns: vec![p(&[&["giant"]]), p(&[&["the"], &["giant"]])],
            allow_possessive: true,
            case_sensitive: false,
        },
    ]
}

pub fn rules_jsonl(rules: &[OracleRule]) -> String {
    rules
        .iter()
        .map(|r| {
            let patterns: Vec<Vec<String>> = r
                .patterns
                .iter()
                .map(|pat| pat.iter().map(|alts| alts.join("|")).collect())
                .collect();
            serde_json::json!({
                "motif_id": r.motif_id,
                "culture": "other",
                "type": "character",
                "patterns": patterns,
                "allow_possessive": r.allow_possessive,
                "case_sensitive": r.case_sensitive,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

const FILLER: &[&str] = &[
    "the", "a", "of", "and", "la", "el", "mac", "tower", "pot", "gold", "said", "news", "river", "council", "cool",
    "golem", "GOLEM", "coco", "finny", "babels", "week", "Island", "s", "’", "'", "—", "it's", "Finnish",
];

fn fold(s: &str) -> String {
    s.to_lowercase().replace('\u{2019}', "'")
}

fn is_clitic(s: &str) -> bool {
    let c: Vec<char> = s.chars().collect();
    c.len() == 2 && (c[0] == '\'' || c[0] == '\u{2019}') && (c[1] == 's' || c[1] == 'S')
}

/// Every (begin, end, motif) the reference semantics produce: per rule,
/// scan left to right and at each position take the longest hit, then
/// resume after it.
pub fn naive_matches(text: &str, rules: &[OracleRule]) -> BTreeSet<(usize, usize, String)> {
    let tokens = tokenize(text);
    let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
    let mut out = BTreeSet::new();
    for rule in rules {
        let same = |alt: &str, word: &str| {
            if rule.case_sensitive {
                alt == word
            } else {
                fold(alt) == fold(word)
            }
        };
        let mut pos = 0;
        while pos < words.len() {
            let mut best: Option<usize> = None;
            for pattern in &rule.patterns {
                let n = pattern.len();
                if pos + n > words.len() {
                    continue;
                }
                let ok = (0..n).all(|k| pattern[k].iter().any(|alt| same(alt, words[pos + k])));
                if !ok {
                    continue;
                }
                let mut end = pos + n;
                if rule.allow_possessive && end < words.len() && is_clitic(words[end]) {
                    end += 1;
                }
                best = Some(best.map_or(end, |b| b.max(end)));
            }
            match best {
                Some(end) => {
                    out.insert((tokens[pos].span.begin, tokens[end - 1].span.end, rule.motif_id.to_string()));
                    pos = end;
                }
                None => pos += 1,
            }
        }
    }
    out
}

fn surface(rng: &mut ChaCha8Rng, rule: &OracleRule) -> String {
    let pattern = rule.patterns.choose(rng).expect("rule has patterns");
    let mut words: Vec<String> = pattern
        .iter()
        .map(|alts| {
            let w = alts.choose(rng).expect("element has alternatives").to_string();
            match rng.random_range(0..4) {
                0 => w.to_uppercase(),
                1 => {
                    let mut c = w.chars();
                    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
                }
                _ => w,
            }
        })
        .collect();
    // sometimes cut a multi-token form short
    if words.len() > 1 && rng.random_bool(0.15) {
        words.truncate(rng.random_range(1..words.len()));
    }
    let mut s = words.join(" ");
    match rng.random_range(0..10) {
        0 => s.push_str("'s"),
        1 => s.push_str("’s"),
        2 => s.push_str(" 's"),
        3 => s.push(','),
        4 => s = format!("\"{s}\""),
        5 => s.push_str("'S."),
        _ => {}
    }
    s
}

pub fn random_document(rng: &mut ChaCha8Rng, rules: &[OracleRule], doc_id: &str) -> Document {
    let n = rng.random_range(0..60);
    let mut parts = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random_bool(0.3) {
            let rule = rules.choose(rng).expect("rules exist");
            parts.push(surface(rng, rule));
        } else {
            let mut w = FILLER.choose(rng).expect("filler").to_string();
            if rng.random_bool(0.1) {
                w.push('.');
            }
            parts.push(w);
        }
    }
    let sep = if rng.random_bool(0.2) { "  " } else { " " };
    Document::new(doc_id, parts.join(sep)).expect("non-empty id")
}

/// Compares the matcher with the oracle on `n_docs` generated documents.
/// Returns the number of matches checked, or the first disagreement.
pub fn check_equivalence(n_docs: usize, seed: u64) -> Result<usize, String> {
    let rules = rules();
    let compiled = compile_rules(&rules_jsonl(&rules)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0;
    for i in 0..n_docs {
        let doc = random_document(&mut rng, &rules, &format!("doc{i}"));
        let expected = naive_matches(&doc.text, &rules);
        let found = match_document(&doc, &compiled, None);
        let got: BTreeSet<(usize, usize, String)> = found
            .iter()
            .map(|c| (c.span.begin, c.span.end, c.motif_id.clone()))
            .collect();
        if got.len() != found.len() {
            return Err(format!("{}: duplicate candidates in {:?}", doc.doc_id, doc.text));
        }
        if got != expected {
            return Err(format!(
                "{}: text {:?}\n  matcher only: {:?}\n  oracle only: {:?}",
                doc.doc_id,
                doc.text,
                got.difference(&expected).collect::<Vec<_>>(),
                expected.difference(&got).collect::<Vec<_>>()
            ));
        }
        for (k, c) in found.iter().enumerate() {
            if c.candidate_id != format!("{}#{}", doc.doc_id, k + 1) {
                return Err(format!("{}: unexpected id {}", doc.doc_id, c.candidate_id));
            }
            if doc.slice(c.span).map_err(|e| e.to_string())? != c.surface {
                return Err(format!("{}: surface mismatch for {}", doc.doc_id, c.candidate_id));
            }
        }
        total += expected.len();
    }
    Ok(total)
}
