use crate::corpus::{Span, Token};

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

pub(crate) fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// True for the possessive clitic `'s` with a straight or curly apostrophe.
pub fn is_possessive_clitic(text: &str) -> bool {
    let mut chars = text.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(a), Some('s' | 'S'), None) if is_apostrophe(a)
    )
}

/// Whitespace tokenizer used when a document has no tokens layer.
///
/// Leading and trailing punctuation characters are split off one per
/// token, and a trailing possessive `'s` becomes its own token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut spans);
    }
    spans
        .into_iter()
        .enumerate()
        .map(|(index, span)| Token {
            index,
            span,
            text: chars[span.begin..span.end].iter().collect(),
            pos: String::new(),
            lemma: String::new(),
        })
        .collect()
}

fn split_chunk(chars: &[char], mut lo: usize, mut hi: usize, out: &mut Vec<Span>) {
    while lo < hi && is_punct(chars[lo]) {
        out.push(Span::new(lo, lo + 1));
        lo += 1;
    }
    let mut trailing = Vec::new();
    while hi > lo && is_punct(chars[hi - 1]) {
        hi -= 1;
        trailing.push(Span::new(hi, hi + 1));
    }
    if hi > lo {
        let clitic = hi - lo > 2 && is_apostrophe(chars[hi - 2]) && matches!(chars[hi - 1], 's' | 'S');
        if clitic {
            out.push(Span::new(lo, hi - 2));
            out.push(Span::new(hi - 2, hi));
        } else {
            out.push(Span::new(lo, hi));
        }
    }
    out.extend(trailing.into_iter().rev());
}
