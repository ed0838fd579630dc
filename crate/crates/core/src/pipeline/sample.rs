use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Candidate, Culture, MotifEntry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub batch_id: String,
    pub seed: u64,
    pub min_candidates: usize,
    pub max_candidates: usize,
    /// Restricts sampling to candidates whose motif belongs to this culture.
    pub culture: Option<Culture>,
}

impl SampleConfig {
    pub fn new(batch_id: impl Into<String>, seed: u64) -> Self {
        SampleConfig {
            batch_id: batch_id.into(),
            seed,
            min_candidates: 500,
            max_candidates: 1000,
            culture: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub batch_id: String,
    pub doc_ids: Vec<String>,
    pub candidate_count: usize,
    pub seed: u64,
    /// Every eligible document was taken and the minimum was still not met.
    pub exhausted: bool,
    /// Candidates above the maximum, all contributed by the last document.
    pub overshoot: usize,
}

/// Seeded Fisher-Yates. Written out so the order does not depend on the
/// shuffle algorithm of a particular `rand` release.
pub(crate) fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// Draws whole documents in seeded random order until the batch holds at
/// least `min_candidates` candidates. The result depends only on the
/// candidate list, the registry (when filtering by culture) and `config`.
pub fn sample_batch(
    candidates: &[Candidate],
    registry: &BTreeMap<String, MotifEntry>,
    config: &SampleConfig,
) -> Result<BatchManifest> {
    if config.min_candidates > config.max_candidates {
        return Err(Error::Config(format!(
            "minimum batch size {} exceeds maximum {}",
            config.min_candidates, config.max_candidates
        )));
    }
    let mut per_doc: BTreeMap<&str, usize> = BTreeMap::new();
    for c in candidates {
        if let Some(culture) = config.culture {
            let entry = registry
                .get(&c.motif_id)
                .ok_or_else(|| Error::UnknownMotif(c.motif_id.clone()))?;
            if entry.culture != culture {
                continue;
            }
        }
        *per_doc.entry(&c.doc_id).or_default() += 1;
    }
    let mut order: Vec<(&str, usize)> = per_doc.into_iter().collect();
    shuffle(&mut order, &mut ChaCha8Rng::seed_from_u64(config.seed));

    let mut doc_ids = Vec::new();
    let mut count = 0usize;
    for (doc_id, n) in order {
        if count >= config.min_candidates {
            break;
        }
        doc_ids.push(doc_id.to_string());
        count += n;
    }
    Ok(BatchManifest {
        batch_id: config.batch_id.clone(),
        doc_ids,
        candidate_count: count,
        seed: config.seed,
        exhausted: count < config.min_candidates,
        overshoot: count.saturating_sub(config.max_candidates),
    })
}
