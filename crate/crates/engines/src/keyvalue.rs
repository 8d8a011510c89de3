//! Embedded ordered key-value store: named stores of key → field-map
//! documents, iterated in lexicographic key order. Term counting over a
//! text field is the engine-side primitive behind term-frequency
//! workloads.

use std::collections::BTreeMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KvError {
    #[error("unknown store `{0}`")]
    UnknownStore(String),
    #[error("store `{0}` already exists")]
    DuplicateStore(String),
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
}

/// One record: a key and a flat field map. Field values are text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub key: String,
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Default)]
struct Store {
    docs: BTreeMap<String, BTreeMap<String, String>>,
}

/// The engine: named stores, each an ordered map. Scans take a read
/// lock; puts take the write lock.
#[derive(Debug, Default)]
pub struct KvEngine {
    stores: RwLock<BTreeMap<String, Store>>,
}

impl KvEngine {
    pub fn new() -> KvEngine {
        KvEngine::default()
    }

    pub fn create_store(&self, name: &str) -> Result<(), KvError> {
        let mut stores = self.stores.write().unwrap();
        if stores.contains_key(name) {
            return Err(KvError::DuplicateStore(name.to_string()));
        }
        stores.insert(name.to_string(), Store::default());
        Ok(())
    }

    pub fn drop_store(&self, name: &str) -> Result<(), KvError> {
        self.stores
            .write()
            .unwrap()
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| KvError::UnknownStore(name.to_string()))
    }

    pub fn has_store(&self, name: &str) -> bool {
        self.stores.read().unwrap().contains_key(name)
    }

    pub fn store_names(&self) -> Vec<String> {
        self.stores.read().unwrap().keys().cloned().collect()
    }

    /// Upsert: the newest fields win. Creates the store on first use.
    pub fn put(&self, store: &str, key: &str, fields: BTreeMap<String, String>) {
        let mut stores = self.stores.write().unwrap();
        stores
            .entry(store.to_string())
            .or_default()
            .docs
            .insert(key.to_string(), fields);
    }

    pub fn get(&self, store: &str, key: &str) -> Result<Option<Document>, KvError> {
        let stores = self.stores.read().unwrap();
        let s = stores
            .get(store)
            .ok_or_else(|| KvError::UnknownStore(store.to_string()))?;
        Ok(s.docs.get(key).map(|fields| Document {
            key: key.to_string(),
            fields: fields.clone(),
        }))
    }

    /// All documents whose key starts with `prefix`, in key order.
    pub fn scan(&self, store: &str, prefix: &str) -> Result<Vec<Document>, KvError> {
        let stores = self.stores.read().unwrap();
        let s = stores
            .get(store)
            .ok_or_else(|| KvError::UnknownStore(store.to_string()))?;
        Ok(s.docs
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, fields)| Document {
                key: k.clone(),
                fields: fields.clone(),
            })
            .collect())
    }

    /// Term frequencies of `field` across documents matching `prefix`:
    /// whitespace-tokenized, lowercased, leading/trailing punctuation
    /// stripped. Result is term-sorted. Documents without the field
    /// contribute nothing.
    pub fn termcount(
        &self,
        store: &str,
        prefix: &str,
        field: &str,
    ) -> Result<Vec<(String, u64)>, KvError> {
        let stores = self.stores.read().unwrap();
        let s = stores
            .get(store)
            .ok_or_else(|| KvError::UnknownStore(store.to_string()))?;
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (key, fields) in s.docs.range(prefix.to_string()..) {
            if !key.starts_with(prefix) {
                break;
            }
            let Some(text) = fields.get(field) else { continue };
            for raw in text.split_whitespace() {
                let term = raw
                    .trim_matches(|c: char| c.is_ascii_punctuation())
                    .to_lowercase();
                if !term.is_empty() {
                    *counts.entry(term).or_insert(0) += 1;
                }
            }
        }
        Ok(counts.into_iter().collect())
    }

    /// Loads JSON-lines text: one `{"key":…, "fields":{…}}` per line.
    /// Returns the number of documents loaded.
    pub fn load_jsonl(&self, store: &str, text: &str) -> Result<usize, KvError> {
        let mut docs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: Document = serde_json::from_str(line).map_err(|e| KvError::BadLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(doc);
        }
        let n = docs.len();
        let mut stores = self.stores.write().unwrap();
        let s = stores.entry(store.to_string()).or_default();
        for doc in docs {
            s.docs.insert(doc.key, doc.fields);
        }
        Ok(n)
    }

    // estimate only; kept O(catalog) so usage snapshots stay cheap
    pub fn resident_bytes(&self) -> usize {
        let stores = self.stores.read().unwrap();
        stores.values().map(|s| s.docs.len() * 96).sum()
    }
}
