use num_rational::Ratio;
use proptest::prelude::*;
use warmstart_core::batcher::{assemble, epoch_batches, padding_efficiency, plan_accumulation, EpochConfig};
use warmstart_core::corpus::{write_store, SequenceStore};
use warmstart_core::masking::{MaskSpec, MaskedExample};
use warmstart_core::vocab::{SpecialIds, TokenId, Vocabulary};

fn example(input_len: usize, target_len: usize, salt: u32) -> MaskedExample {
    MaskedExample {
        input_ids: (0..input_len as u32).map(|i| 3 + (i + salt) % 50).collect(),
        target_ids: (0..target_len as u32).map(|i| 3 + (i * 7 + salt) % 50).collect(),
    }
}

proptest! {
    #[test]
    fn padding_is_minimal_and_lossless(lens in prop::collection::vec((1usize..600, 1usize..200), 1..=16)) {
        let examples: Vec<_> = lens.iter().enumerate().map(|(i, &(a, b))| example(a, b, i as u32)).collect();
        let batch = assemble(&examples, 16, 0).unwrap();

        let max_in = lens.iter().map(|l| l.0).max().unwrap();
        let max_tgt = lens.iter().map(|l| l.1).max().unwrap();
        prop_assert_eq!(batch.input.width, max_in);
        prop_assert_eq!(batch.target.width, max_tgt);
        prop_assert_eq!(batch.rows(), examples.len());

        let mut real = 0u64;
        for (r, ex) in examples.iter().enumerate() {
            prop_assert_eq!(&batch.input.real_tokens(r), &ex.input_ids);
            prop_assert_eq!(&batch.target.real_tokens(r), &ex.target_ids);
            prop_assert!(batch.input.row(r)[ex.input_ids.len()..].iter().all(|&t| t == 0));
            prop_assert_eq!(batch.input.row_mask(r).iter().filter(|&&m| m == 1).count(), ex.input_ids.len());
            real += (ex.input_ids.len() + ex.target_ids.len()) as u64;
        }
        let cells = (examples.len() * (max_in + max_tgt)) as u64;
        prop_assert_eq!(padding_efficiency(&batch), Ratio::new(real, cells));
    }

    #[test]
    fn accepted_plans_multiply_out(effective in 1usize..1024, micro in 1usize..256) {
        match plan_accumulation(effective, micro) {
            Ok(plan) => prop_assert_eq!(plan.micro_batch_size * plan.accumulation_steps, effective),
            Err(_) => prop_assert!(effective % micro != 0),
        }
    }
}

#[test]
fn epoch_stream_covers_every_sequence_once() {
    let mut tokens = vec!["<pad>".to_string(), "</s>".into(), "<unk>".into()];
    tokens.extend((3..60).map(|i| format!("t{i}")));
    tokens.extend((0..100).rev().map(|k| format!("<extra_id_{k}>")));
    let vocab = Vocabulary::from_tokens(tokens, SpecialIds::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.seqs");
    let seqs: Vec<Vec<TokenId>> = (0..70u32).map(|i| (0..(5 + i * 7 % 90)).map(|j| 3 + j % 57).collect()).collect();
    write_store(&path, seqs.iter().map(Vec::as_slice), true).unwrap();
    let store = SequenceStore::open(&path).unwrap();

    for sort in [false, true] {
        let cfg = EpochConfig {
            seed: 1,
            epoch: 0,
            mask: MaskSpec::default(),
            plan: plan_accumulation(32, 8).unwrap(),
            sort_by_length: sort,
        };
        let batches: Vec<_> = epoch_batches(&store, &vocab, &cfg).unwrap().collect::<Result<_, _>>().unwrap();
        let mut seen: Vec<u64> = batches.iter().flat_map(|b| b.seq_indices.clone()).collect();
        if !sort {
            assert_eq!(seen, (0..70).collect::<Vec<_>>());
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..70).collect::<Vec<_>>());
        assert_eq!(batches.len(), 9);
        assert_eq!((batches[4].step, batches[4].micro_index), (1, 0));
        assert_eq!(batches[8].seq_indices.len(), 6);
    }
}
