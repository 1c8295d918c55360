use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{ProviderError, TranslateError, TranslationProvider};

/// Looks translations up in a fixed bilingual dictionary.
///
/// The dictionary file has one `source<TAB>translation` pair per line;
/// blank lines and lines starting with `#` are skipped.
#[derive(Debug, Clone, Default)]
pub struct DictionaryProvider {
    entries: HashMap<String, String>,
}

impl DictionaryProvider {
    pub fn new(entries: HashMap<String, String>) -> Self {
        DictionaryProvider { entries }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        DictionaryProvider {
            entries: pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TranslateError> {
        let raw = fs::read_to_string(path)?;
        let mut entries = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, tgt) = line.split_once('\t').ok_or_else(|| TranslateError::Parse {
                line: i + 1,
                reason: "expected source<TAB>translation".into(),
            })?;
            entries.insert(src.to_string(), tgt.to_string());
        }
        Ok(DictionaryProvider { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TranslationProvider for DictionaryProvider {
    fn name(&self) -> &str {
        "dict"
    }

    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, ProviderError>> {
        texts
            .iter()
            .map(|t| self.entries.get(t).cloned().ok_or(ProviderError::NotFound))
            .collect()
    }
}

/// Never translates; every token falls back to its own text.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityProvider;

impl TranslationProvider for IdentityProvider {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, ProviderError>> {
        texts.iter().map(|_| Err(ProviderError::NotFound)).collect()
    }
}
