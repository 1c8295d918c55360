//! Just-in-time span corruption.
//!
//! A mask is a pure function of `(seed, epoch, seq_index)` and the sequence
//! length, so every epoch sees a different corruption of the same sequence
//! while any worker can regenerate any mask without storing it.
//!
//! The number of masked positions is fixed: `round(rate * len)` clamped to
//! `[1, len - 1]`. Those positions are split into runs (spans) separated by
//! at least one unmasked token; position 0 is never masked. Each span is
//! replaced by one sentinel in the input, and the target lists each
//! sentinel followed by the tokens it hid, then a closing sentinel and eos.
//! The closing sentinel is always the last one in the vocabulary (lowest
//! sentinel id), which is why a sequence may use at most
//! `sentinel_count - 1` spans.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("sequence of length {0} is too short to mask (need at least 2)")]
    TooShort(usize),
    #[error("invalid mask spec: {0}")]
    InvalidSpec(String),
    #[error("{spans} spans need {needed} sentinels but the vocabulary has {available}")]
    SentinelBudget {
        spans: usize,
        needed: usize,
        available: usize,
    },
    #[error("invalid spans for a sequence of length {len}: {reason}")]
    InvalidSpans { len: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Contiguous spans with the configured mean length.
    Span,
    /// Independent single-token masking.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub rate: f64,
    pub mean_span: f64,
    pub mode: MaskMode,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            rate: 0.15,
            mean_span: 3.0,
            mode: MaskMode::Span,
        }
    }
}

impl MaskSpec {
    pub fn new(rate: f64, mean_span: f64, mode: MaskMode) -> Result<Self, MaskError> {
        let spec = MaskSpec { rate, mean_span, mode };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), MaskError> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(MaskError::InvalidSpec(format!("rate {} not in (0, 1)", self.rate)));
        }
        if !(self.mean_span >= 1.0 && self.mean_span.is_finite()) {
            return Err(MaskError::InvalidSpec(format!("mean span {} below 1", self.mean_span)));
        }
        Ok(())
    }
}

/// Identifies one mask draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskKey {
    pub seed: u64,
    pub epoch: u64,
    pub seq_index: u64,
}

impl MaskKey {
    pub fn new(seed: u64, epoch: u64, seq_index: u64) -> Self {
        MaskKey {
            seed,
            epoch,
            seq_index,
        }
    }

    /// A generator whose stream depends on every field of the key.
    fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.epoch.to_le_bytes());
        seed[16..24].copy_from_slice(&self.seq_index.to_le_bytes());
        seed[24..].copy_from_slice(b"spanmask");
        ChaCha8Rng::from_seed(seed)
    }
}

/// Half-open run of masked positions `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub input_ids: Vec<TokenId>,
    pub target_ids: Vec<TokenId>,
}

/// `(num_masked, num_spans)` for a sequence of `len` tokens.
pub fn mask_counts(len: usize, spec: &MaskSpec) -> Result<(usize, usize), MaskError> {
    if len < 2 {
        return Err(MaskError::TooShort(len));
    }
    spec.validate()?;
    let masked = ((spec.rate * len as f64).round() as usize).clamp(1, len - 1);
    let spans = match spec.mode {
        MaskMode::Iid => masked,
        MaskMode::Span => ((masked as f64 / spec.mean_span).round() as usize).clamp(1, masked),
    };
    Ok((masked, spans))
}

/// Draws the spans for one sequence.
///
/// Span lengths are a uniformly random composition of `num_masked` into
/// `num_spans` positive parts; the unmasked tokens are a uniformly random
/// arrangement of gaps with at least one token before each span (the first
/// gap includes position 0). Together this is uniform over all valid
/// layouts. If `num_spans` gaps cannot fit, the span count drops to the
/// largest feasible value.
pub fn draw_mask(len: usize, spec: &MaskSpec, key: MaskKey) -> Result<Vec<Span>, MaskError> {
    let (masked, wanted) = mask_counts(len, spec)?;
    let unmasked = len - masked;
    let spans = wanted.min(unmasked);
    let mut rng = key.rng();

    let mut cuts: Vec<usize> = index::sample(&mut rng, masked - 1, spans - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let span_lens = parts_from_cuts(&cuts, masked);

    // Stars and bars: `unmasked - spans` free tokens over `spans + 1` gaps.
    let free = unmasked - spans;
    let mut bars = index::sample(&mut rng, free + spans, spans).into_vec();
    bars.sort_unstable();
    let mut extra = Vec::with_capacity(spans + 1);
    let mut prev: Option<usize> = None;
    for &b in &bars {
        extra.push(match prev {
            None => b,
            Some(p) => b - p - 1,
        });
        prev = Some(b);
    }
    extra.push(free + spans - 1 - bars[spans - 1]);

    let mut out = Vec::with_capacity(spans);
    let mut pos = 0;
    for (k, &span_len) in span_lens.iter().enumerate() {
        pos += 1 + extra[k];
        out.push(Span {
            start: pos,
            len: span_len,
        });
        pos += span_len;
    }
    debug_assert_eq!(pos + extra[spans], len);
    Ok(out)
}

/// Lengths of the pieces between sorted cut points in `0..total`.
fn parts_from_cuts(cuts: &[usize], total: usize) -> Vec<usize> {
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut last = 0;
    for &c in cuts {
        parts.push(c - last);
        last = c;
    }
    parts.push(total - last);
    parts
}

/// Checks that spans are sorted, non-empty, in range, separated by at least
/// one unmasked token, and leave position 0 alone.
pub fn validate_spans(len: usize, spans: &[Span]) -> Result<(), MaskError> {
    let bad = |reason: String| Err(MaskError::InvalidSpans { len, reason });
    if spans.is_empty() {
        return bad("no spans".into());
    }
    let mut min_start = 1;
    for s in spans {
        if s.len == 0 {
            return bad(format!("empty span at {}", s.start));
        }
        if s.start < min_start {
            return bad(format!("span at {} overlaps, touches its predecessor or masks position 0", s.start));
        }
        if s.end() > len {
            return bad(format!("span {}..{} runs past the end", s.start, s.end()));
        }
        min_start = s.end() + 1;
    }
    Ok(())
}

pub fn apply_span_corruption(seq: &[TokenId], spans: &[Span], vocab: &Vocabulary) -> Result<MaskedExample, MaskError> {
    validate_spans(seq.len(), spans)?;
    let needed = spans.len() + 1;
    if needed > vocab.sentinel_count() {
        return Err(MaskError::SentinelBudget {
            spans: spans.len(),
            needed,
            available: vocab.sentinel_count(),
        });
    }
    let sentinel = |k: usize| vocab.sentinel_id(k).expect("sentinel budget checked");
    let masked: usize = spans.iter().map(|s| s.len).sum();
    let mut input = Vec::with_capacity(seq.len() - masked + spans.len() + 1);
    let mut target = Vec::with_capacity(masked + spans.len() + 2);
    let mut pos = 0;
    for (k, span) in spans.iter().enumerate() {
        input.extend_from_slice(&seq[pos..span.start]);
        input.push(sentinel(k));
        target.push(sentinel(k));
        target.extend_from_slice(&seq[span.start..span.end()]);
        pos = span.end();
    }
    input.extend_from_slice(&seq[pos..]);
    input.push(vocab.eos_id());
    target.push(closing_sentinel(vocab));
    target.push(vocab.eos_id());
    Ok(MaskedExample {
        input_ids: input,
        target_ids: target,
    })
}

fn closing_sentinel(vocab: &Vocabulary) -> TokenId {
    vocab
        .sentinel_id(vocab.sentinel_count() - 1)
        .expect("vocabulary has sentinels")
}

/// Draws a fresh mask for `seq` under `key` and applies it.
pub fn mask_sequence(seq: &[TokenId], spec: &MaskSpec, key: MaskKey, vocab: &Vocabulary) -> Result<MaskedExample, MaskError> {
    let spans = draw_mask(seq.len(), spec, key)?;
    apply_span_corruption(seq, &spans, vocab)
}

/// Inverse of span corruption: interleaves input context with target spans.
/// Returns `None` if the pair is not well formed.
pub fn reconstruct(example: &MaskedExample, vocab: &Vocabulary) -> Option<Vec<TokenId>> {
    if vocab.sentinel_count() == 0 {
        return None;
    }
    let input = example.input_ids.strip_suffix(&[vocab.eos_id()])?;
    let target = example.target_ids.strip_suffix(&[vocab.eos_id()])?;
    let body = target.strip_suffix(&[closing_sentinel(vocab)])?;

    let mut spans: Vec<&[TokenId]> = Vec::new();
    let mut rest = body;
    while let Some((&first, tail)) = rest.split_first() {
        if vocab.sentinel_id(spans.len()) != Some(first) {
            return None;
        }
        let next = tail.iter().position(|&t| vocab.is_sentinel(t)).unwrap_or(tail.len());
        if next == 0 {
            return None;
        }
        spans.push(&tail[..next]);
        rest = &tail[next..];
    }

    let mut out = Vec::new();
    let mut used = 0;
    for &id in input {
        match vocab.sentinel_index(id) {
            Some(k) if k == used => {
                out.extend_from_slice(spans.get(k)?);
                used += 1;
            }
            Some(_) => return None,
            None => out.push(id),
        }
    }
    (used == spans.len()).then_some(out)
}
