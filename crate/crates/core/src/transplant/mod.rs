//! Warm-start embeddings for a new vocabulary.
//!
//! Each target token is translated into the source language, the
//! translation is segmented with the source vocabulary, and the target row
//! becomes the plain arithmetic mean of the source rows of those pieces.
//! Special tokens (pad, eos, unk, sentinels) are copied role by role. The
//! input and output embeddings of the source model are tied, so a single
//! matrix covers both.

mod embedding;

use std::fmt;

use num_rational::Ratio;
use rayon::prelude::*;
use thiserror::Error;

use crate::translate::{needs_translation, normalize_token, TranslationOutcome, TranslationStatus, TranslationTable};
use crate::vocab::{TokenId, Vocabulary};

pub use embedding::{EmbeddingError, EmbeddingMatrix, EMBEDDING_MAGIC, EMBEDDING_VERSION};

#[derive(Debug, Error)]
pub enum TransplantError {
    #[error("source embedding has {rows} rows but the source vocabulary has {vocab} tokens")]
    DimensionMismatch { rows: usize, vocab: usize },
    #[error("target vocabulary needs {target} sentinels but the source only has {source_count}")]
    SentinelMismatch { target: usize, source_count: usize },
    #[error("no translation entry for target token {token:?} (id {id})")]
    MissingTranslation { token: String, id: TokenId },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransplantReport {
    pub total_tokens: usize,
    pub translated_count: usize,
    pub failed_count: usize,
    pub bypassed_count: usize,
    pub specials_copied: usize,
    /// Source pieces per non-special target token.
    pub mean_pieces_per_token: Ratio<u64>,
    pub unk_only_count: usize,
}

impl TransplantReport {
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("total_tokens", self.total_tokens.to_string()),
            ("translated_count", self.translated_count.to_string()),
            ("failed_count", self.failed_count.to_string()),
            ("bypassed_count", self.bypassed_count.to_string()),
            ("specials_copied", self.specials_copied.to_string()),
            ("special_init", "role-copy".to_string()),
            (
                "mean_pieces_per_token",
                format!(
                    "{}/{}",
                    self.mean_pieces_per_token.numer(),
                    self.mean_pieces_per_token.denom()
                ),
            ),
            ("unk_only_count", self.unk_only_count.to_string()),
        ]
    }
}

impl fmt::Display for TransplantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.key_values() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Source-vocabulary pieces whose mean initializes `target_token`.
///
/// Translations are tokenized as free text. A failed translation keeps the
/// target token's word position: the boundary marker is restored only when
/// the target token carried one, so an untranslatable continuation piece is
/// matched as a continuation piece. Empty or unk-only segmentations
/// collapse to the source unk id.
pub fn map_token(target_token: &str, outcome: &TranslationOutcome, src: &Vocabulary) -> Vec<TokenId> {
    let marker = src.boundary_marker();
    let pieces = match outcome.status {
        TranslationStatus::Translated => src.tokenize_greedy(&outcome.text),
        TranslationStatus::Failed => {
            let mut text = String::with_capacity(outcome.text.len() + 3);
            if target_token.starts_with(marker) {
                text.push(marker);
            }
            text.extend(outcome.text.chars().map(|c| if c == ' ' { marker } else { c }));
            src.segment(&text)
        }
    };
    if pieces.iter().all(|&id| id == src.unk_id()) {
        vec![src.unk_id()]
    } else {
        pieces
    }
}

#[derive(Clone, Copy)]
enum Path {
    Special,
    Translated,
    Failed,
    Bypassed,
}

struct RowPlan {
    path: Path,
    pieces: Vec<TokenId>,
    unk_only: bool,
}

pub fn transplant(
    src_emb: &EmbeddingMatrix,
    src: &Vocabulary,
    tgt: &Vocabulary,
    table: &TranslationTable,
) -> Result<(EmbeddingMatrix, TransplantReport), TransplantError> {
    if src_emb.rows() != src.size() {
        return Err(TransplantError::DimensionMismatch {
            rows: src_emb.rows(),
            vocab: src.size(),
        });
    }
    if tgt.sentinel_count() > src.sentinel_count() {
        return Err(TransplantError::SentinelMismatch {
            target: tgt.sentinel_count(),
            source_count: src.sentinel_count(),
        });
    }

    let marker = tgt.boundary_marker();
    let plans: Vec<RowPlan> = (0..tgt.size() as TokenId)
        .into_par_iter()
        .map(|id| {
            if let Some(src_id) = special_counterpart(id, src, tgt) {
                return Ok(RowPlan {
                    path: Path::Special,
                    pieces: vec![src_id],
                    unk_only: false,
                });
            }
            let token = tgt.token(id).expect("id below vocabulary size");
            let normalized = normalize_token(token, marker);
            let outcome = table
                .get(normalized)
                .ok_or_else(|| TransplantError::MissingTranslation {
                    token: token.to_string(),
                    id,
                })?;
            let path = if !needs_translation(normalized) {
                Path::Bypassed
            } else if outcome.is_translated() {
                Path::Translated
            } else {
                Path::Failed
            };
            let pieces = map_token(token, &outcome, src);
            let unk_only = pieces == [src.unk_id()];
            Ok(RowPlan {
                path,
                pieces,
                unk_only,
            })
        })
        .collect::<Result<_, TransplantError>>()?;

    let dim = src_emb.dim();
    let rows: Vec<Vec<f32>> = plans
        .par_iter()
        .map(|plan| mean_row(src_emb, &plan.pieces))
        .collect();
    let mut data = Vec::with_capacity(tgt.size() * dim);
    for r in rows {
        data.extend(r);
    }
    let out = EmbeddingMatrix::new(tgt.size(), dim, data)?;

    let mut report = TransplantReport {
        total_tokens: tgt.size(),
        translated_count: 0,
        failed_count: 0,
        bypassed_count: 0,
        specials_copied: 0,
        mean_pieces_per_token: Ratio::new_raw(0, 1),
        unk_only_count: 0,
    };
    let (mut pieces, mut regular) = (0u64, 0u64);
    for plan in &plans {
        match plan.path {
            Path::Special => report.specials_copied += 1,
            Path::Translated => report.translated_count += 1,
            Path::Failed => report.failed_count += 1,
            Path::Bypassed => report.bypassed_count += 1,
        }
        if !matches!(plan.path, Path::Special) {
            pieces += plan.pieces.len() as u64;
            regular += 1;
            report.unk_only_count += usize::from(plan.unk_only);
        }
    }
    report.mean_pieces_per_token = if regular == 0 {
        Ratio::new_raw(0, 1)
    } else {
        Ratio::new(pieces, regular)
    };
    Ok((out, report))
}

/// Source id that a special target id copies from, if `id` is special.
fn special_counterpart(id: TokenId, src: &Vocabulary, tgt: &Vocabulary) -> Option<TokenId> {
    if id == tgt.pad_id() {
        Some(src.pad_id())
    } else if id == tgt.eos_id() {
        Some(src.eos_id())
    } else if id == tgt.unk_id() {
        Some(src.unk_id())
    } else {
        tgt.sentinel_index(id).map(|k| {
            src.sentinel_id(k)
                .expect("sentinel counts checked before planning")
        })
    }
}

/// Arithmetic mean of the given source rows, repeats included.
fn mean_row(emb: &EmbeddingMatrix, pieces: &[TokenId]) -> Vec<f32> {
    if let [single] = pieces {
        return emb.row(*single as usize).to_vec();
    }
    let dim = emb.dim();
    let mut sum = vec![0f64; dim];
    let mut lo = vec![f32::INFINITY; dim];
    let mut hi = vec![f32::NEG_INFINITY; dim];
    for &p in pieces {
        for (j, &v) in emb.row(p as usize).iter().enumerate() {
            sum[j] += f64::from(v);
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let n = pieces.len() as f64;
    // rounding must not push the mean outside the contributing range
    sum.iter()
        .enumerate()
        .map(|(j, s)| ((s / n) as f32).clamp(lo[j], hi[j]))
        .collect()
}
