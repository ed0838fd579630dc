use std::collections::BTreeMap;
use std::ops::Range;

use indexmap::IndexMap;

use crate::corpus::{Candidate, LayerBundle, MotifEntry, MotifType, Span};
use crate::error::{Error, Result};

use super::{DepGraph, FeatureConfig, FeatureGroup, FeatureVector, Schema};

/// Precomputed per-document state shared by every candidate of a document.
#[derive(Debug)]
pub struct Extractor<'a> {
    bundle: &'a LayerBundle,
    graph: DepGraph,
    /// Head index (`-1` for root) and relation of each token, when parsed.
    heads: Vec<Option<(i64, &'a str)>>,
}

impl<'a> Extractor<'a> {
    pub fn new(bundle: &'a LayerBundle) -> Result<Self> {
        if bundle.tokens.is_empty() {
            return Err(Error::Feature("the tokens layer is missing or empty".into()));
        }
        let n = bundle.tokens.len();
        let mut heads = vec![None; n];
        for arc in &bundle.deps {
            if arc.token_index < n {
                heads[arc.token_index] = Some((arc.head_index, arc.relation.as_str()));
            }
        }
        Ok(Extractor {
            bundle,
            graph: DepGraph::new(n, &bundle.deps),
            heads,
        })
    }

    /// Tokens overlapping `span`; empty when the span falls between tokens.
    fn token_range(&self, span: Span) -> Range<usize> {
        let tokens = &self.bundle.tokens;
        let lo = tokens.partition_point(|t| t.span.end <= span.begin);
        let hi = tokens.partition_point(|t| t.span.begin < span.end);
        lo..hi.max(lo)
    }

    /// The first token in `range` whose head lies outside it, else the last.
    fn head_of(&self, range: Range<usize>) -> usize {
        range
            .clone()
            .find(|&k| match self.heads[k] {
                Some((head, _)) => head < range.start as i64 || head >= range.end as i64,
                None => false,
            })
            .unwrap_or(range.end - 1)
    }

    fn animate_mentions(&self) -> impl Iterator<Item = &Span> {
        self.bundle
            .coref
            .iter()
            .filter(|c| c.animate)
            .flat_map(|c| c.mentions.iter())
    }

    fn overlaps_animate(&self, span: Span) -> bool {
        self.animate_mentions().any(|m| m.overlaps(&span))
    }

    fn sentence_of(&self, span: Span) -> Option<Span> {
        if self.bundle.sentences.is_empty() {
            let end = self.bundle.tokens.last().map_or(span.end, |t| t.span.end.max(span.end));
            return Some(Span::new(0, end));
        }
        self.bundle
            .sentences
            .iter()
            .find(|s| s.begin <= span.begin && span.begin < s.end)
            .copied()
    }

    pub fn extract(
        &self,
        candidate: &Candidate,
        registry: &BTreeMap<String, MotifEntry>,
        config: &FeatureConfig,
        schema: &Schema,
    ) -> Result<FeatureVector> {
        let entry = registry
            .get(&candidate.motif_id)
            .ok_or_else(|| Error::UnknownMotif(candidate.motif_id.clone()))?;
        let range = self.token_range(candidate.span);
        if range.is_empty() {
            return Err(Error::Feature(format!(
                "candidate {} at {} covers no token",
                candidate.candidate_id, candidate.span
            )));
        }
        let head = self.head_of(range.clone());
        let ctx = Context {
            ex: self,
            candidate,
            range,
            head,
        };

        let mut values = IndexMap::new();
        for group in FeatureGroup::ALL {
            if !config.groups.contains(&group) {
                continue;
            }
            let group_values = match group {
                FeatureGroup::Position => ctx.position(),
                FeatureGroup::Semantic => ctx.semantic(config.parse_cap)?,
                FeatureGroup::Figurative => ctx.figurative(),
                FeatureGroup::Ner => ctx.ner(config.window),
                FeatureGroup::Grammar => ctx.grammar(),
                FeatureGroup::TypeCheck => ctx.type_check(entry.motif_type),
            };
            debug_assert_eq!(group_values.len(), group.feature_names().len());
            for (name, value) in group.feature_names().iter().zip(group_values) {
                values.insert(name.to_string(), value);
            }
        }
        values.retain(|name, _| schema.names.iter().any(|n| n == name));
        debug_assert!(values.keys().eq(schema.names.iter()));
        debug_assert!(values.values().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));

        Ok(FeatureVector {
            candidate_id: candidate.candidate_id.clone(),
            schema_id: schema.id.clone(),
            values,
        })
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn one_hot(n: usize, hot: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| flag(i == hot))
}

/// Gap in tokens between two token ranges; 0 when they overlap.
fn token_gap(a: &Range<usize>, b: &Range<usize>) -> usize {
    if b.start >= a.end {
        b.start - (a.end - 1)
    } else if a.start >= b.end {
        a.start - (b.end - 1)
    } else {
        0
    }
}

const SRL_ROLES: [&str; 5] = ["ARG0", "ARG1", "ARG2", "ARGM", "PRED"];

/// Index into [`SRL_ROLES`]; `None` for roles outside the coarse inventory.
fn srl_role_slot(role: &str) -> Option<usize> {
    let role = role.to_ascii_uppercase();
    let role = role.strip_prefix("R-").or_else(|| role.strip_prefix("C-")).unwrap_or(&role);
    match role {
        "ARG0" | "A0" => Some(0),
        "ARG1" | "A1" => Some(1),
        "ARG2" | "A2" => Some(2),
        r if r.starts_with("ARGM") || r.starts_with("AM-") => Some(3),
        _ => None,
    }
}

const NER_LABELS: [&str; 4] = ["PERSON", "ORG", "LOC", "MISC"];

fn ner_slot(label: &str) -> usize {
    let label = label.to_ascii_uppercase();
    let label = label
        .strip_prefix("B-")
        .or_else(|| label.strip_prefix("I-"))
        .unwrap_or(&label);
    match label {
        "PERSON" | "PER" => 0,
        "ORG" | "ORGANIZATION" => 1,
        "LOC" | "LOCATION" | "GPE" | "FAC" => 2,
        _ => 3,
    }
}

fn pos_slot(tag: &str) -> usize {
    let tag = tag.to_ascii_uppercase();
    match tag.as_str() {
        "NOUN" | "NN" | "NNS" => 0,
        "PROPN" | "NNP" | "NNPS" => 1,
        "VERB" => 2,
        t if t.starts_with("VB") => 2,
        "ADJ" => 3,
        t if t.starts_with("JJ") => 3,
        _ => 4,
    }
}

fn dep_slot(relation: &str) -> usize {
    let base = relation.split(':').next().unwrap_or_default().to_ascii_lowercase();
    match base.as_str() {
        "nsubj" | "nsubjpass" => 0,
        "obj" | "dobj" => 1,
        "obl" => 2,
        "poss" => 3,
        "appos" => 4,
        _ => 5,
    }
}

fn type_slot(t: MotifType) -> usize {
    match t {
        MotifType::Character => 0,
        MotifType::Prop => 1,
        MotifType::Event => 2,
    }
}

struct Context<'e, 'a> {
    ex: &'e Extractor<'a>,
    candidate: &'e Candidate,
    range: Range<usize>,
    head: usize,
}

impl Context<'_, '_> {
    fn span(&self) -> Span {
        self.candidate.span
    }

    fn position(&self) -> Vec<f64> {
        let bundle = self.ex.bundle;
        let n = bundle.tokens.len() as f64;
        let nearest = bundle
            .events
            .iter()
            .map(|e| self.ex.token_range(*e))
            .filter(|r| !r.is_empty())
            .map(|r| token_gap(&self.range, &r))
            .min();
        let tok_dist = nearest.map_or(1.0, |d| d as f64 / n);
        let in_event = bundle.events.iter().any(|e| e.overlaps(&self.span()));
        let same_sentence = self
            .ex
            .sentence_of(self.span())
            .is_some_and(|s| bundle.events.iter().any(|e| e.overlaps(&s)));
        vec![tok_dist, flag(in_event), flag(same_sentence)]
    }

    fn semantic(&self, parse_cap: usize) -> Result<Vec<f64>> {
        let bundle = self.ex.bundle;
        let span = self.span();
        let in_animate = self.ex.overlaps_animate(span);
        let in_character = bundle
            .coref
            .iter()
            .filter(|c| c.character)
            .flat_map(|c| c.mentions.iter())
            .any(|m| m.overlaps(&span));

        let distances = self.ex.graph.distances_from(self.head)?;
        let nearest_animate = self
            .ex
            .animate_mentions()
            .map(|m| self.ex.token_range(*m))
            .filter(|r| !r.is_empty())
            .filter_map(|r| distances[self.ex.head_of(r)])
            .min();
        let cap = parse_cap as f64;
        let parse_dist = nearest_animate.map_or(1.0, |d| (d as f64).min(cap) / cap);

        let mut role: Option<usize> = None;
        let mut with_animate = false;
        for frame in &bundle.srl {
            let mut participates = false;
            if frame.predicate.overlaps(&span) {
                participates = true;
                role = Some(role.map_or(4, |r| r.min(4)));
            }
            for arg in frame.args.iter().filter(|a| a.span.overlaps(&span)) {
                participates = true;
                if let Some(slot) = srl_role_slot(&arg.role) {
                    role = Some(role.map_or(slot, |r| r.min(slot)));
                }
            }
            if participates {
                with_animate |= frame
                    .args
                    .iter()
                    .filter(|a| !a.span.overlaps(&span))
                    .any(|a| self.ex.overlaps_animate(a.span));
            }
        }
        let role_slot = role.unwrap_or(SRL_ROLES.len());

        let mut out = vec![flag(in_animate), flag(in_character), parse_dist];
        out.extend(one_hot(SRL_ROLES.len() + 1, role_slot));
        out.push(flag(with_animate));
        out.push(flag(self.flags().possession));
        Ok(out)
    }

    fn flags(&self) -> crate::corpus::CandFlags {
        match self.ex.bundle.cand_flags.get(&self.candidate.candidate_id) {
            Some(f) => *f,
            None => {
                log::warn!(
                    "no metaphor/simile/possession flags for {}; assuming all false",
                    self.candidate.candidate_id
                );
                Default::default()
            }
        }
    }

    fn figurative(&self) -> Vec<f64> {
        let flags = self.flags();
        vec![flag(flags.metaphor), flag(flags.simile)]
    }

    fn ner(&self, window: usize) -> Vec<f64> {
        let bundle = self.ex.bundle;
        let span = self.span();
        let own = bundle
            .ner
            .iter()
            .find(|e| e.span.overlaps(&span))
            .map_or(NER_LABELS.len(), |e| ner_slot(&e.label));
        let lo = self.range.start.saturating_sub(window);
        let hi = (self.range.end + window).min(bundle.tokens.len());
        let mut counts = [0usize; 4];
        for entity in bundle.ner.iter().filter(|e| !e.span.overlaps(&span)) {
            let r = self.ex.token_range(entity.span);
            if !r.is_empty() && r.start < hi && lo < r.end {
                counts[ner_slot(&entity.label)] += 1;
            }
        }
        let denom = (2 * window + 1) as f64;
        let mut out: Vec<f64> = one_hot(NER_LABELS.len() + 1, own).collect();
        out.extend(counts.iter().map(|&c| (c as f64 / denom).min(1.0)));
        out
    }

    fn grammar(&self) -> Vec<f64> {
        let token = &self.ex.bundle.tokens[self.head];
        let relation = self.ex.heads[self.head].map_or("", |(_, rel)| rel);
        let mut out: Vec<f64> = one_hot(5, pos_slot(&token.pos)).collect();
        out.extend(one_hot(6, dep_slot(relation)));
        out
    }

    fn type_check(&self, expected: MotifType) -> Vec<f64> {
        let predicted = predict_type(self.ex.bundle, self.span());
        let mut out: Vec<f64> = one_hot(3, type_slot(expected)).collect();
        out.extend(one_hot(3, type_slot(predicted)));
        out.push(flag(expected == predicted));
        out
    }
}

fn predict_type(bundle: &LayerBundle, span: Span) -> MotifType {
    let in_chain = bundle
        .coref
        .iter()
        .filter(|c| c.animate || c.character)
        .flat_map(|c| c.mentions.iter())
        .any(|m| m.overlaps(&span));
    if in_chain {
        MotifType::Character
    } else if bundle.events.iter().any(|e| e.overlaps(&span)) {
        MotifType::Event
    } else {
        MotifType::Prop
    }
}

/// Guesses the motif type from the layers: animate or character chain
/// membership first, then event overlap, otherwise a prop.
pub fn predict_motif_type(candidate: &Candidate, bundle: &LayerBundle) -> MotifType {
    predict_type(bundle, candidate.span)
}

/// Syntactic head token of a candidate: the first covered token whose
/// head lies outside the candidate, or the last covered token.
pub fn head_token(candidate: &Candidate, bundle: &LayerBundle) -> Result<usize> {
    let ex = Extractor::new(bundle)?;
    let range = ex.token_range(candidate.span);
    if range.is_empty() {
        return Err(Error::Feature(format!(
            "candidate {} covers no token",
            candidate.candidate_id
        )));
    }
    Ok(ex.head_of(range))
}

pub fn extract_features(
    candidate: &Candidate,
    bundle: &LayerBundle,
    registry: &BTreeMap<String, MotifEntry>,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let schema = config.schema()?;
    Extractor::new(bundle)?.extract(candidate, registry, config, &schema)
}
