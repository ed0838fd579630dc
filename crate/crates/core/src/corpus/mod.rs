//! Documents, candidates and usage labels, plus the stand-off readers and
//! writers that move them between the matcher, annotators and the
//! feature pipeline.
//!
//! All offsets are Unicode code-point indices into [`Document::text`].

mod brat;
mod layers;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use brat::{load_brat_annotations, read_brat, write_brat, LabeledCandidate};
pub use layers::{
    read_layers, read_layers_unchecked, validate_layers, CandFlags, CorefChain, DepArc,
    Finding, LayerBundle, NerSpan, Severity, SrlArg, SrlFrame, Token, ValidationReport,
    LAYER_FILES,
};
pub(crate) use brat::sorted_subdirs;
pub use layers::{parse_jsonl, write_jsonl};

/// Half-open code-point range `[begin, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl Span {
    pub fn new(begin: usize, end: usize) -> Self {
        Span { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        self.begin >= self.end
    }

    /// True when `0 <= begin < end <= text_len`.
    pub fn is_valid_for(&self, text_len: usize) -> bool {
        self.begin < self.end && self.end <= text_len
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.begin < other.end && other.begin < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.begin, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub meta: BTreeMap<String, String>,
    /// Byte offset of every code point, plus `text.len()` as a sentinel.
    char_starts: Vec<usize>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let doc_id = doc_id.into();
        if doc_id.is_empty() {
            return Err(Error::Config("document id must be non-empty".into()));
        }
        let text = text.into();
        let mut char_starts: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
        char_starts.push(text.len());
        Ok(Document {
            doc_id,
            text,
            meta: BTreeMap::new(),
            char_starts,
        })
    }

    /// Length of the text in code points.
    pub fn len(&self) -> usize {
        self.char_starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_span(&self, span: Span) -> Result<()> {
        if span.is_valid_for(self.len()) {
            Ok(())
        } else {
            Err(Error::SpanOutOfBounds {
                begin: span.begin,
                end: span.end,
                len: self.len(),
            })
        }
    }

    /// The text covered by `span`.
    pub fn slice(&self, span: Span) -> Result<&str> {
        self.check_span(span)?;
        Ok(&self.text[self.char_starts[span.begin]..self.char_starts[span.end]])
    }
}

/// Reads a plain-text document. The id is the file stem; a leading BOM is dropped.
pub fn load_document(path: impl AsRef<Path>) -> Result<Document> {
    let path = path.as_ref();
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("cannot derive a document id from {}", path.display())))?;
    let text = read_text(path)?;
    Document::new(stem, text)
}

pub fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from_utf8(bytes).map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    if text.starts_with('\u{feff}') {
        text.drain(..'\u{feff}'.len_utf8());
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Culture {
    Irish,
    Jewish,
    PuertoRican,
    Other,
}

impl FromStr for Culture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "irish" => Ok(Culture::Irish),
            "jewish" => Ok(Culture::Jewish),
            "puertorican" => Ok(Culture::PuertoRican),
            "other" => Ok(Culture::Other),
            _ => Err(Error::Rules(format!("unknown culture `{s}`"))),
        }
    }
}

impl fmt::Display for Culture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Culture::Irish => "Irish",
            Culture::Jewish => "Jewish",
            Culture::PuertoRican => "Puerto Rican",
            Culture::Other => "Other",
        })
    }
}

/// The three kinds of motif: actors, background items, and incidents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotifType {
    Character,
    Prop,
    Event,
}

impl MotifType {
    pub const ALL: [MotifType; 3] = [MotifType::Character, MotifType::Prop, MotifType::Event];

    pub fn as_str(&self) -> &'static str {
        match self {
            MotifType::Character => "character",
            MotifType::Prop => "prop",
            MotifType::Event => "event",
        }
    }
}

impl FromStr for MotifType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "character" => Ok(MotifType::Character),
            "prop" => Ok(MotifType::Prop),
            "event" => Ok(MotifType::Event),
            _ => Err(Error::Rules(format!("unknown motif type `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MotifEntry {
    pub motif_id: String,
    pub culture: Culture,
    pub motif_type: MotifType,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub index_codes: Vec<String>,
}

/// A matched text span for a motif, prior to usage classification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub doc_id: String,
    #[serde(flatten)]
    pub span: Span,
    pub motif_id: String,
    pub surface: String,
}

impl Candidate {
    /// Builds a candidate whose surface is taken from the document.
    pub fn from_doc(doc: &Document, ordinal: usize, span: Span, motif_id: impl Into<String>) -> Result<Self> {
        Ok(Candidate {
            candidate_id: candidate_id(&doc.doc_id, ordinal),
            doc_id: doc.doc_id.clone(),
            span,
            motif_id: motif_id.into(),
            surface: doc.slice(span)?.to_string(),
        })
    }

    /// Checks span bounds and surface integrity against `doc`.
    pub fn check(&self, doc: &Document) -> Result<()> {
        let covered = doc.slice(self.span)?;
        if covered != self.surface {
            return Err(Error::Config(format!(
                "candidate {} surface {:?} does not match document text {:?}",
                self.candidate_id, self.surface, covered
            )));
        }
        Ok(())
    }
}

/// Candidate ids are `<doc_id>#<ordinal>` with 1-based ordinals.
pub fn candidate_id(doc_id: &str, ordinal: usize) -> String {
    format!("{doc_id}#{ordinal}")
}

/// Four-way usage category. Declaration order is the canonical order used
/// for tie-breaking, matrix indexing and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UsageLabel {
    Motific,
    Referential,
    Eponymic,
    Unrelated,
}

impl UsageLabel {
    pub const ALL: [UsageLabel; 4] = [
        UsageLabel::Motific,
        UsageLabel::Referential,
        UsageLabel::Eponymic,
        UsageLabel::Unrelated,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UsageLabel::Motific => "Motific",
            UsageLabel::Referential => "Referential",
            UsageLabel::Eponymic => "Eponymic",
            UsageLabel::Unrelated => "Unrelated",
        }
    }
}

impl fmt::Display for UsageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UsageLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        UsageLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown usage label `{s}`")))
    }
}

/// One annotator's label for one candidate within an annotation batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(flatten)]
    pub candidate: Candidate,
    pub annotator_id: String,
    pub label: UsageLabel,
    pub batch_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_document_reads_plain_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a1.txt");
        std::fs::write(&path, "Finn McCool ran.").unwrap();
        let doc = load_document(&path).unwrap();
        assert_eq!(doc.doc_id, "a1");
        assert_eq!(doc.len(), 16);
    }

    #[test]
    fn load_document_strips_bom() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.txt");
        std::fs::write(&path, "\u{feff}x").unwrap();
        let doc = load_document(&path).unwrap();
        assert_eq!(doc.text, "x");
        assert_eq!(doc.len(), 1);
    }

    #[test]
    fn load_document_counts_code_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt");
        std::fs::write(&path, "coquí").unwrap();
        let doc = load_document(&path).unwrap();
        // 6 bytes, 5 code points
        assert_eq!(doc.text.len(), 6);
        assert_eq!(doc.len(), 5);
        assert_eq!(doc.slice(Span::new(3, 5)).unwrap(), "uí");
    }

    #[test]
    fn load_document_accepts_empty_and_rejects_bad_utf8() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("e.txt");
        std::fs::write(&empty, "").unwrap();
        assert!(load_document(&empty).unwrap().is_empty());

        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, [0x66, 0xff, 0x66]).unwrap();
        assert!(matches!(load_document(&bad), Err(Error::Decode { .. })));
    }

    #[test]
    fn span_bounds() {
        let doc = Document::new("d", "abc").unwrap();
        assert!(doc.slice(Span::new(0, 3)).is_ok());
        assert!(doc.slice(Span::new(1, 4)).is_err());
        assert!(doc.slice(Span::new(2, 2)).is_err());
    }

    #[test]
    fn usage_label_order_is_canonical() {
        let mut labels = vec![
            UsageLabel::Unrelated,
            UsageLabel::Motific,
            UsageLabel::Eponymic,
            UsageLabel::Referential,
        ];
        labels.sort();
        assert_eq!(labels, UsageLabel::ALL);
        for l in UsageLabel::ALL {
            assert_eq!(l.as_str().parse::<UsageLabel>().unwrap(), l);
            assert_eq!(UsageLabel::from_index(l.index()), Some(l));
        }
    }

    #[test]
    fn culture_parsing_is_lenient_on_spelling() {
        assert_eq!("Puerto Rican".parse::<Culture>().unwrap(), Culture::PuertoRican);
        assert_eq!("puerto-rican".parse::<Culture>().unwrap(), Culture::PuertoRican);
        assert_eq!("IRISH".parse::<Culture>().unwrap(), Culture::Irish);
        assert!("Martian".parse::<Culture>().is_err());
    }
}
