//! Subword vocabularies with special-token roles and a deterministic
//! greedy longest-match tokenizer.
//!
//! A vocabulary file holds one token per line; the line index is the token
//! id. Anything after the first tab on a line (typically a unigram score) is
//! discarded. Sentinel tokens occupy the top of the id range in descending
//! order, so sentinel `k` has id `size - 1 - k`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type TokenId = u32;

pub const DEFAULT_BOUNDARY_MARKER: char = '\u{2581}';

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("failed to read vocabulary {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate token {token:?} at line {line}")]
    DuplicateToken { token: String, line: usize },
    #[error("vocabulary of size {size} is too small for 3 special tokens and {sentinels} sentinels")]
    TooSmall { size: usize, sentinels: usize },
    #[error("special id {role}={id} is out of range for vocabulary of size {size}")]
    SpecialOutOfRange {
        role: &'static str,
        id: TokenId,
        size: usize,
    },
    #[error("special ids must be distinct (pad={pad}, eos={eos}, unk={unk})")]
    SpecialsNotDistinct { pad: TokenId, eos: TokenId, unk: TokenId },
    #[error("special id {role}={id} collides with the sentinel range")]
    SpecialIsSentinel { role: &'static str, id: TokenId },
    #[error("token id {id} is out of range for vocabulary of size {size}")]
    IdOutOfRange { id: TokenId, size: usize },
}

/// Ids of the special roles plus the number of sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub pad: TokenId,
    pub eos: TokenId,
    pub unk: TokenId,
    pub sentinel_count: usize,
}

impl Default for SpecialIds {
    fn default() -> Self {
        SpecialIds {
            pad: 0,
            eos: 1,
            unk: 2,
            sentinel_count: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    specials: SpecialIds,
    boundary_marker: char,
    /// Tokens eligible for greedy matching: everything except pad, eos, unk
    /// and the sentinels.
    matchable: HashMap<String, TokenId>,
    max_match_chars: usize,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>, specials: SpecialIds) -> Result<Self, VocabError> {
        Self::with_marker(tokens, specials, DEFAULT_BOUNDARY_MARKER)
    }

    pub fn with_marker(
        tokens: Vec<String>,
        specials: SpecialIds,
        boundary_marker: char,
    ) -> Result<Self, VocabError> {
        let size = tokens.len();
        if size < 3 + specials.sentinel_count {
            return Err(VocabError::TooSmall {
                size,
                sentinels: specials.sentinel_count,
            });
        }
        for (role, id) in [("pad", specials.pad), ("eos", specials.eos), ("unk", specials.unk)] {
            if id as usize >= size {
                return Err(VocabError::SpecialOutOfRange { role, id, size });
            }
        }
        let SpecialIds { pad, eos, unk, .. } = specials;
        if pad == eos || pad == unk || eos == unk {
            return Err(VocabError::SpecialsNotDistinct { pad, eos, unk });
        }
        let first_sentinel = size - specials.sentinel_count;
        for (role, id) in [("pad", pad), ("eos", eos), ("unk", unk)] {
            if id as usize >= first_sentinel {
                return Err(VocabError::SpecialIsSentinel { role, id });
            }
        }

        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(size);
        for (line, token) in tokens.iter().enumerate() {
            if seen.insert(token.as_str(), line).is_some() {
                return Err(VocabError::DuplicateToken {
                    token: token.clone(),
                    line: line + 1,
                });
            }
        }

        let mut matchable = HashMap::with_capacity(size);
        let mut max_match_chars = 0;
        for (id, token) in tokens.iter().enumerate().take(first_sentinel) {
            let id = id as TokenId;
            if id == pad || id == eos || id == unk || token.is_empty() {
                continue;
            }
            max_match_chars = max_match_chars.max(token.chars().count());
            matchable.insert(token.clone(), id);
        }

        Ok(Vocabulary {
            tokens,
            specials,
            boundary_marker,
            matchable,
            max_match_chars,
        })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn specials(&self) -> SpecialIds {
        self.specials
    }

    pub fn pad_id(&self) -> TokenId {
        self.specials.pad
    }

    pub fn eos_id(&self) -> TokenId {
        self.specials.eos
    }

    pub fn unk_id(&self) -> TokenId {
        self.specials.unk
    }

    pub fn sentinel_count(&self) -> usize {
        self.specials.sentinel_count
    }

    pub fn boundary_marker(&self) -> char {
        self.boundary_marker
    }

    /// Id of sentinel `k`, or `None` when `k` exceeds the sentinel budget.
    pub fn sentinel_id(&self, k: usize) -> Option<TokenId> {
        (k < self.specials.sentinel_count).then(|| (self.size() - 1 - k) as TokenId)
    }

    /// Inverse of [`Vocabulary::sentinel_id`].
    pub fn sentinel_index(&self, id: TokenId) -> Option<usize> {
        let id = id as usize;
        let first = self.size() - self.specials.sentinel_count;
        (id >= first && id < self.size()).then(|| self.size() - 1 - id)
    }

    pub fn is_sentinel(&self, id: TokenId) -> bool {
        self.sentinel_index(id).is_some()
    }

    /// Pad, eos, unk, or a sentinel.
    pub fn is_special(&self, id: TokenId) -> bool {
        id == self.specials.pad || id == self.specials.eos || id == self.specials.unk || self.is_sentinel(id)
    }

    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        self.matchable.get(token).copied().or_else(|| {
            self.tokens
                .iter()
                .position(|t| t == token)
                .map(|i| i as TokenId)
        })
    }

    /// Greedy longest-match tokenization of free text.
    ///
    /// Spaces become the boundary marker and one marker is prepended, so
    /// every word is matched in its word-initial form.
    pub fn tokenize_greedy(&self, text: &str) -> Vec<TokenId> {
        if text.is_empty() {
            return Vec::new();
        }
        let mut marked = String::with_capacity(text.len() + 3);
        marked.push(self.boundary_marker);
        marked.extend(text.chars().map(|c| if c == ' ' { self.boundary_marker } else { c }));
        self.segment(&marked)
    }

    /// Greedy longest-match over text that is already in piece form
    /// (boundary markers in place, no preprocessing applied).
    ///
    /// Where nothing matches, one scalar is skipped; consecutive skipped
    /// scalars produce a single unk id.
    pub fn segment(&self, pieces: &str) -> Vec<TokenId> {
        let chars: Vec<(usize, char)> = pieces.char_indices().collect();
        let mut out = Vec::new();
        let mut pos = 0;
        let mut last_was_unknown = false;
        while pos < chars.len() {
            let start = chars[pos].0;
            let longest = self.max_match_chars.min(chars.len() - pos);
            let hit = (1..=longest).rev().find_map(|n| {
                let end = chars.get(pos + n).map_or(pieces.len(), |&(b, _)| b);
                self.matchable.get(&pieces[start..end]).map(|&id| (id, n))
            });
            match hit {
                Some((id, n)) => {
                    out.push(id);
                    last_was_unknown = false;
                    pos += n;
                }
                None => {
                    // a run of unmatched scalars becomes a single unk
                    if !last_was_unknown {
                        out.push(self.specials.unk);
                    }
                    last_was_unknown = true;
                    pos += 1;
                }
            }
        }
        out
    }

    pub fn detokenize(&self, ids: &[TokenId]) -> Result<String, VocabError> {
        let mut text = String::new();
        for &id in ids {
            let token = self.token(id).ok_or(VocabError::IdOutOfRange {
                id,
                size: self.size(),
            })?;
            text.extend(token.chars().map(|c| if c == self.boundary_marker { ' ' } else { c }));
        }
        Ok(match text.strip_prefix(' ') {
            Some(rest) => rest.to_string(),
            None => text,
        })
    }
}

/// Reads a vocabulary file: one token per line, id = 0-based line index,
/// anything after the first tab ignored.
pub fn load_vocab(path: impl AsRef<Path>, specials: SpecialIds) -> Result<Vocabulary, VocabError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| VocabError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let tokens = parse_vocab(&raw);
    Vocabulary::from_tokens(tokens, specials)
}

pub fn parse_vocab(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|line| match line.split_once('\t') {
            Some((token, _score)) => token.to_string(),
            None => line.to_string(),
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn toy_tokens() -> Vec<String> {
        [
            "<pad>", "</s>", "<unk>", "▁here", "▁you", "▁go", "▁doc", "tor", "▁the", "▁document",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    pub(crate) fn toy() -> Vocabulary {
        Vocabulary::from_tokens(
            toy_tokens(),
            SpecialIds {
                sentinel_count: 0,
                ..SpecialIds::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn greedy_matches_hand_traces() {
        let v = toy();
        assert_eq!(v.tokenize_greedy("here you go"), vec![3, 4, 5]);
        assert_eq!(v.tokenize_greedy("doctor"), vec![6, 7]);
        assert_eq!(v.tokenize_greedy("the document"), vec![8, 9]);
        assert_eq!(v.tokenize_greedy(""), Vec::<TokenId>::new());
        assert_eq!(v.tokenize_greedy("ζ"), vec![2]);
    }

    #[test]
    fn unknown_runs_collapse_to_one_unk() {
        let v = toy();
        // "▁" is not a token of its own, so "▁ζζ" is one unknown run
        assert_eq!(v.tokenize_greedy("ζζ"), vec![2]);
        assert_eq!(v.tokenize_greedy("go ζ go"), vec![5, 2, 5]);
        assert_eq!(v.tokenize_greedy("doctorζtor"), vec![6, 7, 2, 7]);
    }

    #[test]
    fn detokenize_inverts_greedy_examples() {
        let v = toy();
        assert_eq!(v.detokenize(&[3, 4, 5]).unwrap(), "here you go");
        assert_eq!(v.detokenize(&[]).unwrap(), "");
        assert_eq!(v.detokenize(&[6, 7]).unwrap(), "doctor");
        assert!(matches!(
            v.detokenize(&[10]),
            Err(VocabError::IdOutOfRange { id: 10, size: 10 })
        ));
    }

    #[test]
    fn sentinels_descend_from_the_top() {
        let mut tokens: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        tokens[0] = "<pad>".into();
        let v = Vocabulary::from_tokens(
            tokens,
            SpecialIds {
                sentinel_count: 2,
                ..SpecialIds::default()
            },
        )
        .unwrap();
        assert_eq!(v.sentinel_id(0), Some(9));
        assert_eq!(v.sentinel_id(1), Some(8));
        assert_eq!(v.sentinel_id(2), None);
        assert_eq!(v.sentinel_index(8), Some(1));
        assert!(v.is_special(9) && !v.is_special(7));
    }

    #[test]
    fn scores_after_tab_are_dropped() {
        assert_eq!(parse_vocab("tor\t-3.2\n▁go\n"), vec!["tor", "▁go"]);
    }

    #[test]
    fn rejects_bad_special_layouts() {
        let s = |pad, eos, unk, sentinel_count| SpecialIds {
            pad,
            eos,
            unk,
            sentinel_count,
        };
        assert!(matches!(
            Vocabulary::from_tokens(toy_tokens(), s(0, 0, 2, 0)),
            Err(VocabError::SpecialsNotDistinct { .. })
        ));
        assert!(matches!(
            Vocabulary::from_tokens(toy_tokens(), s(0, 1, 12, 0)),
            Err(VocabError::SpecialOutOfRange { role: "unk", .. })
        ));
        assert!(matches!(
            Vocabulary::from_tokens(toy_tokens(), s(0, 1, 9, 2)),
            Err(VocabError::SpecialIsSentinel { role: "unk", .. })
        ));
        assert!(matches!(
            Vocabulary::from_tokens(toy_tokens(), s(0, 1, 2, 8)),
            Err(VocabError::TooSmall { .. })
        ));
    }

    #[test]
    fn duplicate_tokens_are_rejected() {
        let mut tokens = toy_tokens();
        tokens.push("▁go".into());
        assert!(matches!(
            Vocabulary::from_tokens(tokens, SpecialIds { sentinel_count: 0, ..SpecialIds::default() }),
            Err(VocabError::DuplicateToken { line: 11, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip_for_in_vocabulary_words(words in prop::collection::vec(
            prop::sample::select(vec!["here", "you", "go", "doc", "the", "document", "doctor"]), 0..12)) {
            let v = toy();
            let text = words.join(" ");
            let ids = v.tokenize_greedy(&text);
            prop_assert_eq!(v.detokenize(&ids).unwrap(), text);
        }

        #[test]
        fn greedy_is_deterministic(text in "\\PC{0,24}") {
            let v = toy();
            prop_assert_eq!(v.tokenize_greedy(&text), v.tokenize_greedy(&text));
        }
    }
}
