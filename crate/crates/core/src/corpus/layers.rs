//! Per-document cache of NLP annotation layers.
//!
//! Each layer lives in its own line-delimited JSON file inside the
//! document directory. Only `tokens.jsonl` is mandatory; any other file in
//! the directory (for example OpenIE triples) is ignored.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Document, Span};

pub const TOKENS_FILE: &str = "tokens.jsonl";
pub const SENTENCES_FILE: &str = "sentences.jsonl";
pub const DEPS_FILE: &str = "deps.jsonl";
pub const NER_FILE: &str = "ner.jsonl";
pub const COREF_FILE: &str = "coref.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SRL_FILE: &str = "srl.jsonl";
pub const CANDFLAGS_FILE: &str = "candflags.jsonl";

pub const LAYER_FILES: [&str; 8] = [
    TOKENS_FILE,
    SENTENCES_FILE,
    DEPS_FILE,
    NER_FILE,
    COREF_FILE,
    EVENTS_FILE,
    SRL_FILE,
    CANDFLAGS_FILE,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    #[serde(rename = "i")]
    pub index: usize,
    #[serde(flatten)]
    pub span: Span,
    pub text: String,
    #[serde(default)]
    pub pos: String,
    #[serde(default)]
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepArc {
    #[serde(rename = "i")]
    pub token_index: usize,
    /// `-1` marks the root of a tree.
    #[serde(rename = "head")]
    pub head_index: i64,
    #[serde(rename = "rel")]
    pub relation: String,
}

impl DepArc {
    pub fn head(&self) -> Option<usize> {
        usize::try_from(self.head_index).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerSpan {
    #[serde(flatten)]
    pub span: Span,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefChain {
    #[serde(rename = "chain")]
    pub chain_id: u64,
    pub mentions: Vec<Span>,
    #[serde(default)]
    pub animate: bool,
    #[serde(default)]
    pub character: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlArg {
    pub role: String,
    #[serde(flatten)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlFrame {
    #[serde(rename = "pred")]
    pub predicate: Span,
    #[serde(default)]
    pub args: Vec<SrlArg>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandFlags {
    #[serde(default)]
    pub metaphor: bool,
    #[serde(default)]
    pub simile: bool,
    #[serde(default)]
    pub possession: bool,
}

#[derive(Serialize, Deserialize)]
struct CandFlagsRecord {
    candidate_id: String,
    #[serde(flatten)]
    flags: CandFlags,
}

/// Everything the preprocessors know about one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LayerBundle {
    pub tokens: Vec<Token>,
    pub sentences: Vec<Span>,
    pub deps: Vec<DepArc>,
    pub ner: Vec<NerSpan>,
    pub coref: Vec<CorefChain>,
    pub events: Vec<Span>,
    pub srl: Vec<SrlFrame>,
    pub cand_flags: BTreeMap<String, CandFlags>,
}

impl LayerBundle {
    /// Writes every non-empty layer into `dir` (tokens are always written).
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(TOKENS_FILE), &self.tokens)?;
        write_layer(dir, SENTENCES_FILE, &self.sentences)?;
        write_layer(dir, DEPS_FILE, &self.deps)?;
        write_layer(dir, NER_FILE, &self.ner)?;
        write_layer(dir, COREF_FILE, &self.coref)?;
        write_layer(dir, EVENTS_FILE, &self.events)?;
        write_layer(dir, SRL_FILE, &self.srl)?;
        let flags: Vec<CandFlagsRecord> = self
            .cand_flags
            .iter()
            .map(|(id, flags)| CandFlagsRecord {
                candidate_id: id.clone(),
                flags: *flags,
            })
            .collect();
        write_layer(dir, CANDFLAGS_FILE, &flags)
    }
}

fn write_layer<T: Serialize>(dir: &Path, name: &str, records: &[T]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    write_jsonl(&dir.join(name), records)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record)?;
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Parses a JSONL file; blank lines are skipped, malformed lines report
/// `file:line`.
pub fn parse_jsonl<T: DeserializeOwned>(name: &str, content: &str) -> Result<Vec<T>> {
    content
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::record(name, i + 1, e.to_string()))
        })
        .collect()
}

fn read_optional<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let content = super::read_text(&path)?;
    parse_jsonl(name, &content)
}

/// Parses the layer files of `dir` without checking them against the text.
pub fn read_layers_unchecked(dir: &Path) -> Result<LayerBundle> {
    let tokens_path = dir.join(TOKENS_FILE);
    if !tokens_path.exists() {
        return Err(Error::Layer(format!("{} is missing", tokens_path.display())));
    }
    let mut cand_flags = BTreeMap::new();
    for (line, record) in read_optional::<CandFlagsRecord>(dir, CANDFLAGS_FILE)?
        .into_iter()
        .enumerate()
    {
        if cand_flags.insert(record.candidate_id.clone(), record.flags).is_some() {
            return Err(Error::record(
                CANDFLAGS_FILE,
                line + 1,
                format!("duplicate candidate id `{}`", record.candidate_id),
            ));
        }
    }
    Ok(LayerBundle {
        tokens: read_optional(dir, TOKENS_FILE)?,
        sentences: read_optional(dir, SENTENCES_FILE)?,
        deps: read_optional(dir, DEPS_FILE)?,
        ner: read_optional(dir, NER_FILE)?,
        coref: read_optional(dir, COREF_FILE)?,
        events: read_optional(dir, EVENTS_FILE)?,
        srl: read_optional(dir, SRL_FILE)?,
        cand_flags,
    })
}

/// Reads and validates the layers in `dir`. Any error-severity finding
/// aborts the load; warnings are logged.
pub fn read_layers(dir: &Path, doc: &Document) -> Result<LayerBundle> {
    let bundle = read_layers_unchecked(dir)?;
    let report = validate_layers(&bundle, doc);
    for finding in &report.findings {
        match finding.severity {
            Severity::Error => {
                return Err(Error::record(
                    finding.file,
                    finding.record,
                    finding.message.clone(),
                ))
            }
            Severity::Warning => log::warn!("{}: {}", doc.doc_id, finding),
        }
    }
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    /// Layer file the offending record belongs to.
    pub file: &'static str,
    /// 1-based record number within that file.
    pub record: usize,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{severity}: {}:{}: {}", self.file, self.record, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_consistent(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }
}

struct Checker<'a> {
    doc: &'a Document,
    begins: HashSet<usize>,
    ends: HashSet<usize>,
    findings: Vec<Finding>,
}

impl Checker<'_> {
    fn push(&mut self, severity: Severity, file: &'static str, record: usize, message: String) {
        self.findings.push(Finding {
            severity,
            file,
            record: record + 1,
            message,
        });
    }

    /// Bounds are an error; token misalignment is a warning.
    fn span(&mut self, file: &'static str, record: usize, what: &str, span: Span) {
        if !span.is_valid_for(self.doc.len()) {
            self.push(
                Severity::Error,
                file,
                record,
                format!("{what} span {span} is outside the text (length {})", self.doc.len()),
            );
        } else if !(self.begins.contains(&span.begin) && self.ends.contains(&span.end)) {
            self.push(
                Severity::Warning,
                file,
                record,
                format!("{what} span {span} is not aligned to token boundaries"),
            );
        }
    }
}

/// Checks a bundle against its document. Token-layer and structural
/// violations are errors; spans in other layers that do not fall on token
/// boundaries are warnings.
pub fn validate_layers(bundle: &LayerBundle, doc: &Document) -> ValidationReport {
    let mut checker = Checker {
        doc,
        begins: bundle.tokens.iter().map(|t| t.span.begin).collect(),
        ends: bundle.tokens.iter().map(|t| t.span.end).collect(),
        findings: Vec::new(),
    };
    let n_tokens = bundle.tokens.len();

    let mut previous_end = 0;
    for (k, token) in bundle.tokens.iter().enumerate() {
        if token.index != k {
            checker.push(
                Severity::Error,
                TOKENS_FILE,
                k,
                format!("token index {} out of sequence (expected {k})", token.index),
            );
        }
        match doc.slice(token.span) {
            Err(_) => checker.push(
                Severity::Error,
                TOKENS_FILE,
                k,
                format!("token span {} is outside the text (length {})", token.span, doc.len()),
            ),
            Ok(covered) if covered != token.text => checker.push(
                Severity::Error,
                TOKENS_FILE,
                k,
                format!("token text {:?} does not match document text {covered:?}", token.text),
            ),
            Ok(_) => {}
        }
        if k > 0 && token.span.begin < previous_end {
            checker.push(
                Severity::Error,
                TOKENS_FILE,
                k,
                format!("token span {} overlaps or precedes the previous token", token.span),
            );
        }
        previous_end = previous_end.max(token.span.end);
    }

    for (k, sentence) in bundle.sentences.iter().enumerate() {
        checker.span(SENTENCES_FILE, k, "sentence", *sentence);
    }

    let mut seen = HashSet::new();
    for (k, arc) in bundle.deps.iter().enumerate() {
        if arc.token_index >= n_tokens {
            checker.push(
                Severity::Error,
                DEPS_FILE,
                k,
                format!("dependent {} is not a token index (have {n_tokens})", arc.token_index),
            );
        }
        let head_ok = arc.head_index == -1
            || arc.head().is_some_and(|h| h < n_tokens && h != arc.token_index);
        if !head_ok {
            checker.push(
                Severity::Error,
                DEPS_FILE,
                k,
                format!("head {} of token {} is not a valid token index", arc.head_index, arc.token_index),
            );
        }
        if !seen.insert(arc.token_index) {
            checker.push(
                Severity::Error,
                DEPS_FILE,
                k,
                format!("token {} has more than one head", arc.token_index),
            );
        }
    }

    for (k, ner) in bundle.ner.iter().enumerate() {
        checker.span(NER_FILE, k, "entity", ner.span);
    }

    for (k, chain) in bundle.coref.iter().enumerate() {
        if chain.mentions.is_empty() {
            checker.push(
                Severity::Error,
                COREF_FILE,
                k,
                format!("chain {} has no mentions", chain.chain_id),
            );
        }
        for mention in &chain.mentions {
            checker.span(COREF_FILE, k, "mention", *mention);
        }
    }

    for (k, event) in bundle.events.iter().enumerate() {
        checker.span(EVENTS_FILE, k, "event", *event);
    }

    for (k, frame) in bundle.srl.iter().enumerate() {
        checker.span(SRL_FILE, k, "predicate", frame.predicate);
        for arg in &frame.args {
            checker.span(SRL_FILE, k, "argument", arg.span);
        }
    }

    ValidationReport {
        findings: checker.findings,
    }
}
