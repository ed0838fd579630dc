//! Rule-based lexical matcher: compiles hand-written surface-form rules and
//! scans token sequences for high-recall motif candidates.

mod scan;
mod tokenize;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Culture, MotifEntry, MotifType};
use crate::error::{Error, Result};

pub use scan::match_document;
pub use tokenize::{is_possessive_clitic, tokenize};

/// Separator for alternatives inside one pattern element, e.g. `"mccool|mccoul"`.
pub const ALTERNATIVE_SEPARATOR: char = '|';

/// Case folding applied to rule patterns and token text.
pub fn fold(text: &str) -> String {
    text.chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .collect()
}

/// One element of a pattern: the set of strings accepted at that position.
pub type Alternatives = Vec<String>;
/// A token-sequence pattern.
pub type Pattern = Vec<Alternatives>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchRule {
    pub motif_id: String,
    pub patterns: Vec<Pattern>,
    pub allow_possessive: bool,
    pub case_sensitive: bool,
}

impl MatchRule {
    /// Key used to compare a token against this rule's alternatives.
    pub fn key<'a>(&self, token_text: &'a str) -> std::borrow::Cow<'a, str> {
        if self.case_sensitive {
            std::borrow::Cow::Borrowed(token_text)
        } else {
            std::borrow::Cow::Owned(fold(token_text))
        }
    }
}

/// On-disk rule record, one JSON object per line.
#[derive(Debug, Clone, Deserialize)]
struct RuleRecord {
    motif_id: String,
    culture: String,
    #[serde(rename = "type")]
    motif_type: String,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default)]
    index_codes: Vec<String>,
    patterns: Vec<Vec<String>>,
    #[serde(default)]
    allow_possessive: bool,
    #[serde(default)]
    case_sensitive: bool,
}

/// Compiled, immutable rule set.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub registry: BTreeMap<String, MotifEntry>,
    pub rules: Vec<MatchRule>,
    pub version: String,
    /// First-element lookup: key -> (rule, pattern) pairs.
    folded_index: HashMap<String, Vec<(usize, usize)>>,
    exact_index: HashMap<String, Vec<(usize, usize)>>,
}

impl RuleSet {
    pub fn empty() -> Self {
        Self::build(BTreeMap::new(), Vec::new())
    }

    fn build(registry: BTreeMap<String, MotifEntry>, rules: Vec<MatchRule>) -> Self {
        let mut folded_index: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        let mut exact_index: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        for (r, rule) in rules.iter().enumerate() {
            let index = if rule.case_sensitive {
                &mut exact_index
            } else {
                &mut folded_index
            };
            for (p, pattern) in rule.patterns.iter().enumerate() {
                for alternative in &pattern[0] {
                    let slot = index.entry(alternative.clone()).or_default();
                    if !slot.contains(&(r, p)) {
                        slot.push((r, p));
                    }
                }
            }
        }
        let version = {
            let canonical = serde_json::to_vec(&(&registry, &rules)).expect("rule set serializes");
            hex::encode(&Sha256::digest(&canonical)[..8])
        };
        RuleSet {
            registry,
            rules,
            version,
            folded_index,
            exact_index,
        }
    }

    pub fn entry(&self, motif_id: &str) -> Option<&MotifEntry> {
        self.registry.get(motif_id)
    }

    pub(crate) fn lookup(&self, token_text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
        let folded = self.folded_index.get(fold(token_text).as_str());
        let exact = self.exact_index.get(token_text);
        folded
            .into_iter()
            .chain(exact)
            .flat_map(|v| v.iter().copied())
    }
}

/// Parses a rule file: one JSON record per line, blank lines ignored.
pub fn compile_rules(content: &str) -> Result<RuleSet> {
    let mut registry = BTreeMap::new();
    let mut rules = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let err = |msg: String| Error::Rules(format!("line {lineno}: {msg}"));
        let record: RuleRecord =
            serde_json::from_str(line).map_err(|e| err(format!("malformed rule: {e}")))?;
        if record.motif_id.is_empty() || record.motif_id.contains(char::is_whitespace) {
            return Err(err(format!("motif id {:?} must be a non-empty slug", record.motif_id)));
        }
        let motif_type: MotifType = record.motif_type.parse().map_err(|e: Error| err(e.to_string()))?;
        let culture: Culture = record.culture.parse().map_err(|e: Error| err(e.to_string()))?;
        if record.patterns.is_empty() {
            return Err(err(format!("rule `{}` has no patterns", record.motif_id)));
        }
        let mut patterns = Vec::with_capacity(record.patterns.len());
        for raw in &record.patterns {
            if raw.is_empty() {
                return Err(err(format!("rule `{}` has an empty pattern", record.motif_id)));
            }
            let mut pattern = Vec::with_capacity(raw.len());
            for element in raw {
                let mut alternatives: Alternatives = Vec::new();
                for alternative in element.split(ALTERNATIVE_SEPARATOR) {
                    let alternative = alternative.trim();
                    if alternative.is_empty() {
                        return Err(err(format!(
                            "rule `{}` has an empty alternative in {element:?}",
                            record.motif_id
                        )));
                    }
                    let alternative = if record.case_sensitive {
                        alternative.to_string()
                    } else {
                        fold(alternative)
                    };
                    if !alternatives.contains(&alternative) {
                        alternatives.push(alternative);
                    }
                }
                pattern.push(alternatives);
            }
            patterns.push(pattern);
        }
        let entry = MotifEntry {
            motif_id: record.motif_id.clone(),
            culture,
            motif_type,
            display_name: record.display_name.unwrap_or_else(|| record.motif_id.clone()),
            index_codes: record.index_codes,
        };
        if registry.insert(record.motif_id.clone(), entry).is_some() {
            return Err(err(format!("duplicate motif id `{}`", record.motif_id)));
        }
        rules.push(MatchRule {
            motif_id: record.motif_id,
            patterns,
            allow_possessive: record.allow_possessive,
            case_sensitive: record.case_sensitive,
        });
    }
    Ok(RuleSet::build(registry, rules))
}
