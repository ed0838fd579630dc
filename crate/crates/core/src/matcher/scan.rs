use std::borrow::Cow;

use crate::corpus::{Candidate, Document, Span, Token};

use super::{is_possessive_clitic, tokenize, RuleSet};

/// A token-range match `[start, end)` for one rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Hit {
    start: usize,
    end: usize,
}

/// Scans a document for motif candidates.
///
/// Per motif, matches are chosen leftmost-longest and never overlap;
/// different motifs may overlap. Candidates are ordered by
/// `(begin, motif_id)` and numbered from 1.
pub fn match_document(doc: &Document, rules: &RuleSet, tokens: Option<&[Token]>) -> Vec<Candidate> {
    let owned;
    let tokens = match tokens {
        Some(t) => t,
        None => {
            owned = tokenize(&doc.text);
            &owned
        }
    };

    let mut hits: Vec<Vec<Hit>> = vec![Vec::new(); rules.rules.len()];
    for start in 0..tokens.len() {
        for (r, p) in rules.lookup(&tokens[start].text) {
            let rule = &rules.rules[r];
            let pattern = &rule.patterns[p];
            let end = start + pattern.len();
            if end > tokens.len() {
                continue;
            }
            let matched = pattern[1..].iter().zip(&tokens[start + 1..end]).all(|(alts, tok)| {
                let key: Cow<str> = rule.key(&tok.text);
                alts.iter().any(|a| a == key.as_ref())
            });
            if !matched {
                continue;
            }
            let end = if rule.allow_possessive && tokens.get(end).is_some_and(|t| is_possessive_clitic(&t.text)) {
                end + 1
            } else {
                end
            };
            hits[r].push(Hit { start, end });
        }
    }

    let mut found: Vec<(Span, &str)> = Vec::new();
    for (r, mut rule_hits) in hits.into_iter().enumerate() {
        // leftmost first, longest first at the same start
        rule_hits.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
        let mut frontier = 0;
        for hit in rule_hits {
            if hit.start < frontier {
                continue;
            }
            frontier = hit.end;
            let span = Span::new(tokens[hit.start].span.begin, tokens[hit.end - 1].span.end);
            found.push((span, rules.rules[r].motif_id.as_str()));
        }
    }
    found.sort_by(|a, b| a.0.begin.cmp(&b.0.begin).then_with(|| a.1.cmp(b.1)));

    found
        .into_iter()
        .enumerate()
        .filter_map(|(i, (span, motif_id))| match Candidate::from_doc(doc, i + 1, span, motif_id) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("{}: dropping match outside the text: {e}", doc.doc_id);
                None
            }
        })
        .collect()
}
