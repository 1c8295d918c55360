//! Token translation with a persistent cache.
//!
//! Every target-language token is rendered into the source language by a
//! [`TranslationProvider`]. Outcomes, including failures, are kept in a
//! [`TranslationTable`] so that long runs against a remote service can be
//! resumed without re-querying tokens that were already handled.

mod providers;
pub mod remote;
mod table;

use thiserror::Error;

pub use providers::{DictionaryProvider, IdentityProvider};
pub use table::{FetchPolicy, FetchStats, TranslationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TranslationStatus {
    Translated,
    Failed,
}

impl TranslationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TranslationStatus::Translated => "OK",
            TranslationStatus::Failed => "FAIL",
        }
    }
}

/// Result of translating one normalized token. On failure `text` is the
/// normalized token itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TranslationOutcome {
    pub status: TranslationStatus,
    pub text: String,
}

impl TranslationOutcome {
    pub fn translated(text: impl Into<String>) -> Self {
        TranslationOutcome {
            status: TranslationStatus::Translated,
            text: text.into(),
        }
    }

    pub fn failed(normalized: impl Into<String>) -> Self {
        TranslationOutcome {
            status: TranslationStatus::Failed,
            text: normalized.into(),
        }
    }

    pub fn is_translated(&self) -> bool {
        self.status == TranslationStatus::Translated
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("no translation available")]
    NotFound,
    #[error("provider returned an empty translation")]
    Empty,
    #[error("request timed out")]
    Timeout,
    #[error("{0}")]
    Service(String),
}

/// A source of translations.
///
/// `translate_batch` returns one result per input, in order. Providers that
/// talk to a service receive up to [`batch_size`](Self::batch_size) texts per
/// call and may be driven from up to [`max_in_flight`](Self::max_in_flight)
/// threads at once.
pub trait TranslationProvider: Send + Sync {
    fn name(&self) -> &str;

    fn translate_batch(&self, texts: &[String]) -> Vec<Result<String, ProviderError>>;

    fn batch_size(&self) -> usize {
        usize::MAX
    }

    fn max_in_flight(&self) -> usize {
        1
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("failed to read translation cache: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cache record at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    /// The outcomes were fetched and are held in memory, but could not be
    /// appended to the cache file.
    #[error("failed to persist {} fetched translations: {source}", .undelivered.len())]
    Persist {
        undelivered: Vec<(String, TranslationOutcome)>,
        #[source]
        source: std::io::Error,
    },
}

/// Strips one leading boundary marker; everything else, case included, is
/// kept.
pub fn normalize_token(token: &str, boundary_marker: char) -> &str {
    token.strip_prefix(boundary_marker).unwrap_or(token)
}

/// Whether a normalized token carries anything a translator could use.
///
/// Tokens made only of digits, punctuation, symbols, whitespace or boundary
/// markers are recorded as failures with identity text and never sent to a
/// provider.
pub fn needs_translation(normalized: &str) -> bool {
    normalized.chars().any(char::is_alphabetic)
}
