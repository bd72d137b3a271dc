//! Content-addressed store of validated models.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use cellulat_core::scenario::bundled;
use cellulat_core::{parse, Diagnostic, ModelDef};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct StoredModel {
    pub id: String,
    pub text: String,
    pub model: Arc<ModelDef>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Default)]
pub struct ModelStore {
    by_id: RwLock<BTreeMap<String, Arc<StoredModel>>>,
    /// Model name to id, for bundled and directory models.
    aliases: RwLock<BTreeMap<String, String>>,
}

/// `m-` followed by the first 12 hex digits of the SHA-256 of the text.
pub fn model_id(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    format!("m-{}", &hex::encode(digest)[..12])
}

impl ModelStore {
    /// Store holding the bundled scenarios, reachable by id and by name.
    pub fn with_bundled() -> Self {
        let store = ModelStore::default();
        for s in bundled() {
            store
                .insert_aliased(&s.text)
                .expect("bundled scenarios are valid");
        }
        store
    }

    /// Parses and stores `text`. Identical text always yields the same id.
    pub fn insert(&self, text: &str) -> Result<Arc<StoredModel>, Vec<Diagnostic>> {
        let id = model_id(text);
        if let Some(m) = self.get(&id) {
            return Ok(m);
        }
        let parsed = parse(text)?;
        let stored = Arc::new(StoredModel {
            id: id.clone(),
            text: text.to_string(),
            model: Arc::new(parsed.model),
            warnings: parsed.warnings,
        });
        self.by_id
            .write()
            .expect("model store lock")
            .entry(id)
            .or_insert(stored.clone());
        Ok(stored)
    }

    fn insert_aliased(&self, text: &str) -> Result<Arc<StoredModel>, Vec<Diagnostic>> {
        let stored = self.insert(text)?;
        self.aliases
            .write()
            .expect("model store lock")
            .insert(stored.model.name.clone(), stored.id.clone());
        Ok(stored)
    }

    /// Looks a model up by id, or by name for preloaded models.
    pub fn get(&self, key: &str) -> Option<Arc<StoredModel>> {
        let by_id = self.by_id.read().expect("model store lock");
        if let Some(m) = by_id.get(key) {
            return Some(m.clone());
        }
        let aliases = self.aliases.read().expect("model store lock");
        aliases.get(key).and_then(|id| by_id.get(id)).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.by_id.read().expect("model store lock").keys().cloned().collect()
    }

    /// Loads every `*.cellulat` file in `dir`. Invalid files are logged and
    /// skipped. Returns the number of models loaded.
    pub fn load_dir(&self, dir: &Path) -> std::io::Result<usize> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "cellulat"))
            .collect();
        paths.sort();
        let mut loaded = 0;
        for path in paths {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    tracing::warn!(path = %path.display(), error = %e, "cannot read model");
                    continue;
                }
            };
            match self.insert_aliased(&text) {
                Ok(m) => {
                    tracing::info!(path = %path.display(), id = %m.id, "loaded model");
                    loaded += 1;
                }
                Err(diags) => {
                    let errors = diags.iter().filter(|d| d.is_error()).count();
                    tracing::warn!(path = %path.display(), errors, "skipping invalid model");
                }
            }
        }
        Ok(loaded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_content_hashes() {
        let a = model_id("model a\nlevel c kind cytosol rank 0\n");
        assert!(a.starts_with("m-") && a.len() == 14);
        assert_eq!(a, model_id("model a\nlevel c kind cytosol rank 0\n"));
        assert_ne!(a, model_id("model b\nlevel c kind cytosol rank 0\n"));
    }

    #[test]
    fn bundled_models_resolve_by_name() {
        let store = ModelStore::with_bundled();
        let by_name = store.get("ca2plus").unwrap();
        assert_eq!(store.get(&by_name.id).unwrap().id, by_name.id);
        assert!(by_name.warnings.is_empty());
    }

    #[test]
    fn invalid_text_is_rejected() {
        let store = ModelStore::default();
        let diags = store.insert("model x\n").unwrap_err();
        assert!(diags.iter().any(|d| d.is_error()));
        assert!(store.ids().is_empty());
    }

    #[test]
    fn directory_loading_skips_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("good.cellulat"), "model good\nlevel c kind cytosol rank 0\n").unwrap();
        std::fs::write(dir.path().join("bad.cellulat"), "model bad\n").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "model other\nlevel c kind cytosol rank 0\n").unwrap();
        let store = ModelStore::default();
        assert_eq!(store.load_dir(dir.path()).unwrap(), 1);
        assert!(store.get("good").is_some());
        assert!(store.get("other").is_none());
    }
}
