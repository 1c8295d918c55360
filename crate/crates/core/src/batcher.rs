//! Dynamic padding and gradient accumulation.
//!
//! Each micro-batch is padded only to the longest member on each side
//! (input and target), never to a global maximum. Several micro-batches
//! make one optimizer step when the effective batch is larger than what
//! fits in a single forward pass.

use num_rational::Ratio;
use thiserror::Error;

use crate::corpus::{SequenceStore, StoreError};
use crate::masking::{mask_sequence, MaskError, MaskKey, MaskSpec, MaskedExample};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("micro batch {micro} does not divide effective batch {effective}")]
    NonDivisible { effective: usize, micro: usize },
    #[error("batch sizes must be positive")]
    ZeroSize,
    #[error("cannot assemble an empty batch")]
    Empty,
    #[error("{got} examples exceed the micro batch size {micro}")]
    TooMany { got: usize, micro: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("sequence {seq_index}: {source}")]
    Mask {
        seq_index: u64,
        #[source]
        source: MaskError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccumulationPlan {
    pub micro_batch_size: usize,
    pub accumulation_steps: usize,
    pub effective_batch: usize,
}

pub fn plan_accumulation(effective: usize, micro: usize) -> Result<AccumulationPlan, BatchError> {
    if effective == 0 || micro == 0 {
        return Err(BatchError::ZeroSize);
    }
    if effective % micro != 0 {
        return Err(BatchError::NonDivisible { effective, micro });
    }
    Ok(AccumulationPlan {
        micro_batch_size: micro,
        accumulation_steps: effective / micro,
        effective_batch: effective,
    })
}

/// A `rows x width` id matrix with a 0/1 presence mask of the same shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedBlock {
    pub rows: usize,
    pub width: usize,
    pub ids: Vec<TokenId>,
    pub mask: Vec<u8>,
}

impl PaddedBlock {
    fn pad(seqs: &[&[TokenId]], pad_id: TokenId) -> Self {
        let rows = seqs.len();
        let width = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![pad_id; rows * width];
        let mut mask = vec![0u8; rows * width];
        for (r, s) in seqs.iter().enumerate() {
            ids[r * width..r * width + s.len()].copy_from_slice(s);
            mask[r * width..r * width + s.len()].fill(1);
        }
        PaddedBlock { rows, width, ids, mask }
    }

    pub fn row(&self, r: usize) -> &[TokenId] {
        &self.ids[r * self.width..(r + 1) * self.width]
    }

    pub fn row_mask(&self, r: usize) -> &[u8] {
        &self.mask[r * self.width..(r + 1) * self.width]
    }

    /// The unpadded ids of row `r`, recovered through the presence mask.
    pub fn real_tokens(&self, r: usize) -> Vec<TokenId> {
        self.row(r)
            .iter()
            .zip(self.row_mask(r))
            .filter(|(_, &m)| m == 1)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn real_cells(&self) -> u64 {
        self.mask.iter().map(|&m| u64::from(m)).sum()
    }

    pub fn total_cells(&self) -> u64 {
        (self.rows * self.width) as u64
    }

    pub fn efficiency(&self) -> Ratio<u64> {
        ratio_or_one(self.real_cells(), self.total_cells())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedBatch {
    pub input: PaddedBlock,
    pub target: PaddedBlock,
}

impl PaddedBatch {
    pub fn rows(&self) -> usize {
        self.input.rows
    }
}

/// Pads `examples` into one batch, preserving their order.
pub fn assemble(examples: &[MaskedExample], micro: usize, pad_id: TokenId) -> Result<PaddedBatch, BatchError> {
    if examples.is_empty() {
        return Err(BatchError::Empty);
    }
    if examples.len() > micro {
        return Err(BatchError::TooMany {
            got: examples.len(),
            micro,
        });
    }
    let inputs: Vec<&[TokenId]> = examples.iter().map(|e| e.input_ids.as_slice()).collect();
    let targets: Vec<&[TokenId]> = examples.iter().map(|e| e.target_ids.as_slice()).collect();
    Ok(PaddedBatch {
        input: PaddedBlock::pad(&inputs, pad_id),
        target: PaddedBlock::pad(&targets, pad_id),
    })
}

/// Real cells over total cells, input and target blocks pooled.
pub fn padding_efficiency(batch: &PaddedBatch) -> Ratio<u64> {
    ratio_or_one(
        batch.input.real_cells() + batch.target.real_cells(),
        batch.input.total_cells() + batch.target.total_cells(),
    )
}

fn ratio_or_one(real: u64, total: u64) -> Ratio<u64> {
    if total == 0 {
        Ratio::from_integer(1)
    } else {
        Ratio::new(real, total)
    }
}

/// Order in which an epoch visits the store.
///
/// Store order by default. With `sort_by_length`, indices are grouped into
/// consecutive buckets of `bucket` sequences and each bucket is sorted by
/// length (stable), so micro-batches inside one optimizer step have
/// similar lengths while the coarse corpus order is kept.
pub fn epoch_order(lengths: &[usize], bucket: usize, sort_by_length: bool) -> Vec<u64> {
    let mut order: Vec<u64> = (0..lengths.len() as u64).collect();
    if sort_by_length && bucket > 1 {
        for chunk in order.chunks_mut(bucket) {
            chunk.sort_by_key(|&i| lengths[i as usize]);
        }
    }
    order
}

#[derive(Debug, Clone)]
pub struct EpochConfig {
    pub seed: u64,
    pub epoch: u64,
    pub mask: MaskSpec,
    pub plan: AccumulationPlan,
    pub sort_by_length: bool,
}

#[derive(Debug, Clone)]
pub struct MicroBatch {
    /// Optimizer step this micro-batch contributes to.
    pub step: u64,
    /// Position within the step, `0..accumulation_steps`.
    pub micro_index: usize,
    pub seq_indices: Vec<u64>,
    pub examples: Vec<MaskedExample>,
    pub batch: PaddedBatch,
}

/// Streams the masked, padded micro-batches of one epoch.
///
/// Masks are keyed by `(seed, epoch, store index)`, so the stream for a
/// given epoch is reproducible and independent of how it is consumed.
pub fn epoch_batches<'a>(
    store: &'a SequenceStore,
    vocab: &'a Vocabulary,
    config: &EpochConfig,
) -> Result<impl Iterator<Item = Result<MicroBatch, BatchError>> + 'a, BatchError> {
    let lengths = store.lengths()?;
    let order = epoch_order(&lengths, config.plan.effective_batch, config.sort_by_length);
    let config = config.clone();
    let micro = config.plan.micro_batch_size;
    let groups: Vec<Vec<u64>> = order.chunks(micro).map(<[u64]>::to_vec).collect();
    Ok(groups.into_iter().enumerate().map(move |(n, seq_indices)| {
        let mut examples = Vec::with_capacity(seq_indices.len());
        for &i in &seq_indices {
            let ids = store.get(i)?;
            let key = MaskKey::new(config.seed, config.epoch, i);
            let ex = mask_sequence(&ids, &config.mask, key, vocab)
                .map_err(|source| BatchError::Mask { seq_index: i, source })?;
            examples.push(ex);
        }
        let batch = assemble(&examples, micro, vocab.pad_id())?;
        Ok(MicroBatch {
            step: (n / config.plan.accumulation_steps) as u64,
            micro_index: n % config.plan.accumulation_steps,
            seq_indices,
            examples,
            batch,
        })
    }))
}
