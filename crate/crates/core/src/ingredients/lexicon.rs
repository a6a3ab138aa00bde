use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize_name;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("lexicon csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate additive code `{0}`")]
    DuplicateCode(String),
    #[error("name `{name}` is listed under both {first} and {second}")]
    AmbiguousName { name: String, first: String, second: String },
    #[error("empty code or name in lexicon")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdditiveEntry {
    pub code: String,
    pub names: Vec<String>,
}

/// E-number codes and their synonyms.
#[derive(Debug, Clone, Default)]
pub struct AdditiveLexicon {
    entries: Vec<AdditiveEntry>,
    by_name: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct Row {
    code: String,
    name: String,
}

/// Lookup normalization: lowercase, collapse whitespace, strip one trailing
/// parenthetical annotation.
pub(crate) fn lookup_key(name: &str) -> String {
    let n = normalize_name(name);
    if n.ends_with(')') {
        if let Some(open) = n.rfind('(') {
            let head = n[..open].trim_end();
            if !head.is_empty() {
                return head.to_string();
            }
        }
    }
    n
}

impl AdditiveLexicon {
    pub fn from_entries(entries: Vec<AdditiveEntry>) -> Result<Self, LexiconError> {
        let mut normalized = Vec::with_capacity(entries.len());
        let mut codes = BTreeMap::new();
        let mut by_name = HashMap::new();
        for entry in entries {
            let code = entry.code.trim().to_string();
            if code.is_empty() {
                return Err(LexiconError::Empty);
            }
            if codes.insert(code.to_lowercase(), ()).is_some() {
                return Err(LexiconError::DuplicateCode(code));
            }
            let idx = normalized.len();
            let mut names: Vec<String> = Vec::new();
            for name in std::iter::once(code.clone()).chain(entry.names) {
                let key = lookup_key(&name);
                if key.is_empty() {
                    return Err(LexiconError::Empty);
                }
                if let Some(&other) = by_name.get(&key) {
                    if other != idx {
                        let first: &AdditiveEntry = &normalized[other];
                        return Err(LexiconError::AmbiguousName {
                            name: key,
                            first: first.code.clone(),
                            second: code,
                        });
                    }
                    continue;
                }
                by_name.insert(key.clone(), idx);
                if key != code.to_lowercase() {
                    names.push(key);
                }
            }
            normalized.push(AdditiveEntry { code, names });
        }
        Ok(AdditiveLexicon { entries: normalized, by_name })
    }

    /// Reads `code,name` rows, one per synonym.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, LexiconError> {
        let mut grouped: Vec<AdditiveEntry> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
            let row = row?;
            let code = row.code.trim().to_string();
            let slot = *index.entry(code.clone()).or_insert_with(|| {
                grouped.push(AdditiveEntry { code: code.clone(), names: Vec::new() });
                grouped.len() - 1
            });
            grouped[slot].names.push(row.name);
        }
        Self::from_entries(grouped)
    }

    pub fn from_path(path: &Path) -> Result<Self, LexiconError> {
        let file = std::fs::File::open(path)
            .map_err(|e| LexiconError::Io { path: path.display().to_string(), source: e })?;
        Self::from_csv(file)
    }

    /// The lexicon shipped in `data/additives_v1.csv`.
    pub fn builtin() -> Self {
        Self::from_csv(include_str!("../../data/additives_v1.csv").as_bytes())
            .expect("builtin lexicon is valid")
    }

    pub fn entries(&self) -> &[AdditiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Code for an ingredient name, matched exactly after normalization.
    pub fn lookup(&self, name: &str) -> Option<&str> {
        self.by_name
            .get(&lookup_key(name))
            .map(|&i| self.entries[i].code.as_str())
    }
}
