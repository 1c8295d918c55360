use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warmstart_core::masking::{
    draw_mask, mask_counts, mask_sequence, reconstruct, MaskKey, MaskMode, MaskSpec, MaskedExample,
};
use warmstart_core::vocab::{SpecialIds, TokenId, Vocabulary};

const SENTINELS: usize = 100;

/// 3 specials, ids 3..100 ordinary, ids 100..200 sentinels.
fn vocab() -> Vocabulary {
    let mut tokens = vec!["<pad>".to_string(), "</s>".into(), "<unk>".into()];
    tokens.extend((3..100).map(|i| format!("t{i}")));
    tokens.extend((0..SENTINELS).rev().map(|k| format!("<extra_id_{k}>")));
    Vocabulary::from_tokens(tokens, SpecialIds::default()).unwrap()
}

fn random_seq(rng: &mut impl Rng, len: usize) -> Vec<TokenId> {
    (0..len).map(|_| rng.random_range(3..100)).collect()
}

/// Written independently of the library: fills each sentinel slot of the
/// input with the target run that follows the same sentinel.
fn oracle_reconstruct(ex: &MaskedExample, v: &Vocabulary) -> Vec<TokenId> {
    let mut out = Vec::new();
    for &id in &ex.input_ids[..ex.input_ids.len() - 1] {
        if !v.is_sentinel(id) {
            out.push(id);
            continue;
        }
        let at = ex.target_ids.iter().position(|&t| t == id).unwrap();
        out.extend(ex.target_ids[at + 1..].iter().take_while(|&&t| !v.is_sentinel(t)));
    }
    out
}

fn check_sentinel_discipline(ex: &MaskedExample, v: &Vocabulary) {
    assert_eq!(ex.input_ids.last(), Some(&v.eos_id()));
    assert_eq!(ex.target_ids.last(), Some(&v.eos_id()));
    assert_eq!(ex.target_ids.first().copied(), v.sentinel_id(0));
    let in_sentinels: Vec<TokenId> = ex.input_ids.iter().copied().filter(|&t| v.is_sentinel(t)).collect();
    assert!(in_sentinels.windows(2).all(|w| w[0] > w[1]), "input sentinels must descend in id");
    for &s in &in_sentinels {
        let hits: Vec<usize> = (0..ex.target_ids.len()).filter(|&i| ex.target_ids[i] == s).collect();
        assert_eq!(hits.len(), 1);
        let next = ex.target_ids[hits[0] + 1];
        assert!(!v.is_sentinel(next) && next != v.eos_id());
    }
}

#[test]
fn exact_rate_and_reconstruction_on_random_sequences() {
    let v = vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = MaskSpec::default();
    for i in 0..2_000u64 {
        let len = rng.random_range(2..=600);
        let seq = random_seq(&mut rng, len);
        let key = MaskKey::new(17, rng.random_range(0..10), i);
        let ex = mask_sequence(&seq, &spec, key, &v).unwrap();
        let (masked, _) = mask_counts(len, &spec).unwrap();
        let expected = ((0.15 * len as f64).round() as usize).clamp(1, len - 1);
        assert_eq!(masked, expected);
        let n_sentinels = ex.input_ids.iter().filter(|&&t| v.is_sentinel(t)).count();
        let target_tokens = ex.target_ids.len() - n_sentinels - 2;
        assert_eq!(target_tokens, expected, "len {len}");
        assert_eq!(ex.input_ids.len() - n_sentinels - 1, len - expected);
        assert_eq!(ex.input_ids[0], seq[0], "position 0 is never masked");
        check_sentinel_discipline(&ex, &v);
        assert_eq!(oracle_reconstruct(&ex, &v), seq);
        assert_eq!(reconstruct(&ex, &v), Some(seq));
    }
}

#[test]
fn span_count_is_26_at_length_512_when_geometry_allows() {
    let spec = MaskSpec::default();
    for i in 0..500 {
        let spans = draw_mask(512, &spec, MaskKey::new(1, 0, i)).unwrap();
        assert_eq!(spans.len(), 26);
        assert_eq!(spans.iter().map(|s| s.len).sum::<usize>(), 77);
    }
    // 9 masked of 10 leaves a single unmasked token, so one span only
    let dense = MaskSpec::new(0.9, 1.0, MaskMode::Span).unwrap();
    let spans = draw_mask(10, &dense, MaskKey::new(1, 0, 0)).unwrap();
    assert_eq!(spans.len(), 1);
    assert_eq!(spans[0].start, 1);
}

#[test]
fn epochs_give_distinct_masks() {
    let spec = MaskSpec::default();
    let mut collisions = 0;
    for i in 0..300 {
        let masks: HashSet<_> = (0..10).map(|e| draw_mask(512, &spec, MaskKey::new(3, e, i)).unwrap()).collect();
        collisions += 10 - masks.len();
    }
    assert_eq!(collisions, 0);
    let a = draw_mask(512, &spec, MaskKey::new(3, 4, 9)).unwrap();
    assert_eq!(a, draw_mask(512, &spec, MaskKey::new(3, 4, 9)).unwrap());
    assert_ne!(a, draw_mask(512, &spec, MaskKey::new(4, 4, 9)).unwrap());
    assert_ne!(a, draw_mask(512, &spec, MaskKey::new(3, 4, 10)).unwrap());
}

proptest! {
    #[test]
    fn iid_and_span_mask_the_same_count(len in 2usize..2000, rate in 0.01f64..0.99, mean in 1.0f64..8.0) {
        let span = MaskSpec::new(rate, mean, MaskMode::Span).unwrap();
        let iid = MaskSpec::new(rate, mean, MaskMode::Iid).unwrap();
        let (a, spans) = mask_counts(len, &span).unwrap();
        let (b, iid_spans) = mask_counts(len, &iid).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(iid_spans, b);
        prop_assert!(spans >= 1 && spans <= a);
    }

    #[test]
    fn iid_mode_masks_single_tokens(len in 2usize..300, seed in any::<u64>()) {
        let v = vocab();
        let spec = MaskSpec { mode: MaskMode::Iid, rate: 0.15, mean_span: 3.0 };
        let (masked, _) = mask_counts(len, &spec).unwrap();
        let spans = draw_mask(len, &spec, MaskKey::new(seed, 0, 0)).unwrap();
        prop_assert_eq!(spans.iter().map(|s| s.len).sum::<usize>(), masked);
        // only as many single-token spans as there are separating gaps
        prop_assert_eq!(spans.len(), masked.min(len - masked));
        let seq: Vec<TokenId> = (0..len as u32).map(|i| 3 + i % 97).collect();
        if spans.len() < SENTINELS {
            let ex = mask_sequence(&seq, &spec, MaskKey::new(seed, 0, 0), &v).unwrap();
            prop_assert_eq!(reconstruct(&ex, &v), Some(seq));
        }
    }
}
