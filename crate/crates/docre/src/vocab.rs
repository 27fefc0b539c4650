//! Token and relation vocabularies.
//!
//! Both are corpus-derived and persisted as JSON so reruns and later
//! inference see identical mappings. The token vocabulary reserves three
//! ids: padding, unknown, and the entity marker `*`. Relation names map to
//! dense ids in sorted-name order; the virtual threshold class sits at index
//! `len()`, one past the last real relation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, CorpusError};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const MARKER: usize = 2;
pub const MARKER_TOKEN: &str = "*";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TokenVocab {
    /// Token to id, specials included.
    map: BTreeMap<String, usize>,
    size: usize,
}

impl TokenVocab {
    /// Build from corpus tokens. Tokens occurring fewer than `min_count`
    /// times fall back to the unknown id.
    pub fn build(corpus: &Corpus, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in &corpus.docs {
            for sent in &doc.sents {
                for tok in sent {
                    *counts.entry(tok.as_str()).or_insert(0) += 1;
                }
            }
        }
        let mut map = BTreeMap::new();
        map.insert("[PAD]".to_string(), PAD);
        map.insert("[UNK]".to_string(), UNK);
        map.insert(MARKER_TOKEN.to_string(), MARKER);
        let mut next = 3;
        // BTreeMap iteration gives sorted tokens: ids are corpus-order independent
        for (tok, count) in counts {
            if count < min_count || tok == MARKER_TOKEN {
                continue;
            }
            map.entry(tok.to_string()).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
        }
        TokenVocab { size: next, map }
    }

    pub fn id(&self, token: &str) -> usize {
        *self.map.get(token).unwrap_or(&UNK)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        read_json(path)
    }

    /// Hex digest over the sorted `token\tid` lines.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (tok, id) in &self.map {
            hasher.update(tok.as_bytes());
            hasher.update(b"\t");
            hasher.update(id.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hex(&hasher.finalize())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RelationVocab {
    names: Vec<String>,
    map: BTreeMap<String, usize>,
}

impl RelationVocab {
    pub fn build(corpus: &Corpus) -> Self {
        let mut set: BTreeMap<&str, ()> = BTreeMap::new();
        for doc in &corpus.docs {
            for fact in &doc.facts {
                set.insert(&fact.relation, ());
            }
        }
        Self::from_names(set.keys().map(|s| s.to_string()).collect())
    }

    /// Names are sorted and deduplicated; ids follow that order.
    pub fn from_names(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        let map = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        RelationVocab { names, map }
    }

    pub fn id(&self, relation: &str) -> Option<usize> {
        self.map.get(relation).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Index of the virtual threshold class in the logit vector.
    pub fn threshold_index(&self) -> usize {
        self.names.len()
    }

    /// Logit vector length: real relations plus the threshold class.
    pub fn logit_len(&self) -> usize {
        self.names.len() + 1
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        read_json(path)
    }

    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(value).expect("vocab serialization");
    std::fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.display().to_string(),
        source,
    })
}
