//! brat stand-off `.ann` files.
//!
//! Candidates are text-bound `T` lines whose entity label is the motif id.
//! The usage category lives in an attribute line `A<n>\tUsage T<k> <Label>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::{candidate_id, AnnotationRecord, Candidate, Document, Span, UsageLabel};

pub type LabeledCandidate = (Candidate, Option<UsageLabel>);

const USAGE_ATTRIBUTE: &str = "Usage";

/// brat stores covered text on a single line.
fn single_line(text: &str) -> String {
    text.replace(['\n', '\r'], " ")
}

/// Parses an `.ann` file against its document. Candidates come back in
/// `T`-index order with ids `<doc_id>#<T-index>`.
pub fn read_brat(ann_text: &str, doc: &Document) -> Result<Vec<LabeledCandidate>> {
    let file = format!("{}.ann", doc.doc_id);
    let mut entities: BTreeMap<usize, Candidate> = BTreeMap::new();
    let mut attributes: Vec<(usize, &str)> = Vec::new();

    for (lineno, raw) in ann_text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::record(file.clone(), lineno, msg);
        match line.as_bytes()[0] {
            b'T' => {
                let mut fields = line.splitn(3, '\t');
                let id = fields.next().unwrap_or_default();
                let annotation = fields
                    .next()
                    .ok_or_else(|| err("text-bound line has no annotation field".into()))?;
                let covered = fields
                    .next()
                    .ok_or_else(|| err("text-bound line has no covered-text field".into()))?;
                let index = parse_id(id, 'T').ok_or_else(|| err(format!("bad entity id `{id}`")))?;
                if annotation.contains(';') {
                    return Err(err("discontinuous spans are not supported".into()));
                }
                let parts: Vec<&str> = annotation.split(' ').collect();
                let [motif_id, begin, end] = parts[..] else {
                    return Err(err(format!("expected `<label> <begin> <end>`, found `{annotation}`")));
                };
                let begin: usize = begin.parse().map_err(|_| err(format!("bad begin offset `{begin}`")))?;
                let end: usize = end.parse().map_err(|_| err(format!("bad end offset `{end}`")))?;
                let span = Span::new(begin, end);
                let slice = doc.slice(span).map_err(|e| err(e.to_string()))?;
                if single_line(slice) != covered {
                    return Err(err(format!(
                        "covered text {covered:?} does not match document text {slice:?} at {span}"
                    )));
                }
                let candidate = Candidate {
                    candidate_id: candidate_id(&doc.doc_id, index),
                    doc_id: doc.doc_id.clone(),
                    span,
                    motif_id: motif_id.to_string(),
                    surface: slice.to_string(),
                };
                if entities.insert(index, candidate).is_some() {
                    return Err(err(format!("duplicate entity id `{id}`")));
                }
            }
            b'A' => {
                let mut fields = line.splitn(2, '\t');
                let id = fields.next().unwrap_or_default();
                parse_id(id, 'A').ok_or_else(|| err(format!("bad attribute id `{id}`")))?;
                let body = fields
                    .next()
                    .ok_or_else(|| err("attribute line has no body".into()))?;
                let parts: Vec<&str> = body.split_whitespace().collect();
                if parts.first() != Some(&USAGE_ATTRIBUTE) {
                    continue;
                }
                attributes.push((lineno, body));
            }
            // Notes, relations, events and other annotation kinds are not ours.
            _ => continue,
        }
    }

    let mut labels: BTreeMap<usize, UsageLabel> = BTreeMap::new();
    for (lineno, body) in attributes {
        let err = |msg: String| Error::record(file.clone(), lineno, msg);
        let parts: Vec<&str> = body.split_whitespace().collect();
        let [_, target, value] = parts[..] else {
            return Err(err(format!("expected `Usage T<n> <Label>`, found `{body}`")));
        };
        let index = parse_id(target, 'T')
            .filter(|i| entities.contains_key(i))
            .ok_or_else(|| err(format!("attribute references unknown entity `{target}`")))?;
        let label: UsageLabel = value
            .parse()
            .map_err(|_| err(format!("unknown Usage value `{value}`")))?;
        if labels.insert(index, label).is_some() {
            return Err(err(format!("entity `{target}` has more than one Usage attribute")));
        }
    }

    Ok(entities
        .into_iter()
        .map(|(index, candidate)| (candidate, labels.get(&index).copied()))
        .collect())
}

fn parse_id(id: &str, prefix: char) -> Option<usize> {
    id.strip_prefix(prefix)?.parse().ok()
}

/// Serializes candidates as `T` lines numbered from 1 in input order,
/// followed by one `A` line per labeled candidate.
pub fn write_brat(items: &[LabeledCandidate], doc: &Document) -> Result<String> {
    let mut out = String::new();
    for (i, (candidate, _)) in items.iter().enumerate() {
        candidate.check(doc)?;
        if candidate.motif_id.is_empty() || candidate.motif_id.contains(char::is_whitespace) {
            return Err(Error::Config(format!(
                "motif id {:?} cannot be written as a brat entity label",
                candidate.motif_id
            )));
        }
        let _ = writeln!(
            out,
            "T{}\t{} {} {}\t{}",
            i + 1,
            candidate.motif_id,
            candidate.span.begin,
            candidate.span.end,
            single_line(&candidate.surface)
        );
    }
    let labeled = items
        .iter()
        .enumerate()
        .filter_map(|(i, (_, label))| label.map(|l| (i + 1, l)));
    for (n, (target, label)) in labeled.enumerate() {
        let _ = writeln!(out, "A{}\t{} T{} {}", n + 1, USAGE_ATTRIBUTE, target, label);
    }
    Ok(out)
}

/// Loads per-annotator brat files laid out as
/// `<root>/<batch_id>/<annotator_id>/<doc_id>.ann`, resolving each document
/// against `<corpus>/<doc_id>/text.txt`. Unlabeled candidates are skipped.
pub fn load_brat_annotations(root: &Path, corpus: &Path) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    let mut docs: BTreeMap<String, Document> = BTreeMap::new();
    for batch_dir in sorted_subdirs(root)? {
        let batch_id = file_name(&batch_dir);
        for annotator_dir in sorted_subdirs(&batch_dir)? {
            let annotator_id = file_name(&annotator_dir);
            for ann_path in sorted_files(&annotator_dir, "ann")? {
                let doc_id = ann_path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                if !docs.contains_key(&doc_id) {
                    let text = super::read_text(&corpus.join(&doc_id).join("text.txt"))?;
                    docs.insert(doc_id.clone(), Document::new(doc_id.clone(), text)?);
                }
                let doc = &docs[&doc_id];
                let ann = super::read_text(&ann_path)?;
                for (candidate, label) in read_brat(&ann, doc)? {
                    if let Some(label) = label {
                        records.push(AnnotationRecord {
                            candidate,
                            annotator_id: annotator_id.clone(),
                            label,
                            batch_id: batch_id.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(records)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub(crate) fn sorted_subdirs(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == extension) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
