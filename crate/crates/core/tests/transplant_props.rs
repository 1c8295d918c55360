use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warmstart_core::translate::{
    normalize_token, DictionaryProvider, FetchPolicy, IdentityProvider, TranslationOutcome, TranslationTable,
};
use warmstart_core::transplant::{map_token, transplant, EmbeddingMatrix};
use warmstart_core::vocab::{SpecialIds, TokenId, Vocabulary};

const MARK: char = '▁';

fn random_vocab(rng: &mut impl Rng, alphabet: &[char], max_size: usize, sentinels: usize) -> Vocabulary {
    let mut set = BTreeSet::new();
    let want = rng.random_range(4..=max_size - 3 - sentinels);
    while set.len() < want {
        let len = rng.random_range(1..=3);
        let mut t = String::new();
        if rng.random_bool(0.6) {
            t.push(MARK);
        }
        for _ in 0..len {
            t.push(alphabet[rng.random_range(0..alphabet.len())]);
        }
        set.insert(t);
    }
    let mut tokens = vec!["<pad>".to_string(), "</s>".into(), "<unk>".into()];
    let mut body: Vec<String> = set.into_iter().collect();
    body.shuffle(rng);
    tokens.extend(body);
    for k in (0..sentinels).rev() {
        tokens.push(format!("<extra_id_{k}>"));
    }
    Vocabulary::from_tokens(
        tokens,
        SpecialIds {
            sentinel_count: sentinels,
            ..SpecialIds::default()
        },
    )
    .unwrap()
}

fn random_embedding(rng: &mut impl Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
    let data = (0..rows * dim).map(|_| rng.random_range(-10.0f32..10.0)).collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

/// Random translations for every non-special target token.
fn random_table(rng: &mut impl Rng, tgt: &Vocabulary) -> TranslationTable {
    let words = ["a", "ab", "ba", "cab", "c", "abc", "zz"];
    let table = TranslationTable::new(MARK);
    for (id, tok) in tgt.tokens().iter().enumerate() {
        if tgt.is_special(id as TokenId) {
            continue;
        }
        let key = normalize_token(tok, MARK).to_string();
        let outcome = if rng.random_bool(0.7) {
            let n = rng.random_range(1..=3);
            let text: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
            TranslationOutcome::translated(text.join(" "))
        } else {
            TranslationOutcome::failed(key.clone())
        };
        table.insert(key, outcome, "test");
    }
    table
}

/// Independent mean: exact sum in f64 by index order, reversed.
fn oracle_mean(emb: &EmbeddingMatrix, pieces: &[TokenId]) -> Vec<f64> {
    (0..emb.dim())
        .map(|j| {
            let s: f64 = pieces.iter().rev().map(|&p| f64::from(emb.row(p as usize)[j])).sum();
            s / pieces.len() as f64
        })
        .collect()
}

fn norm(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn randomized_transplants_hold_row_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    for _ in 0..300 {
        let sentinels = rng.random_range(0..3);
        let src = random_vocab(&mut rng, &['a', 'b', 'c'], 64, sentinels + 1);
        let tgt = random_vocab(&mut rng, &['a', 'b', 'c', 'd'], 64, sentinels);
        let dim = rng.random_range(1..=8);
        let emb = random_embedding(&mut rng, src.size(), dim);
        let table = random_table(&mut rng, &tgt);
        let (out, report) = transplant(&emb, &src, &tgt, &table).unwrap();
        assert_eq!(out.rows(), tgt.size());
        assert_eq!(
            report.translated_count + report.failed_count + report.bypassed_count + report.specials_copied,
            report.total_tokens
        );
        assert!(out.data().iter().all(|v| v.is_finite()));

        for (t, tok) in tgt.tokens().iter().enumerate() {
            let row = out.row(t);
            if tgt.is_special(t as TokenId) {
                continue;
            }
            let outcome = table.get(normalize_token(tok, MARK)).unwrap();
            let pieces = map_token(tok, &outcome, &src);
            assert!(!pieces.is_empty());
            assert!(pieces.iter().all(|&p| !src.is_sentinel(p) && p != src.pad_id() && p != src.eos_id()));
            if let [single] = pieces[..] {
                assert_eq!(row, emb.row(single as usize), "single piece must copy bits");
            }
            let expected = oracle_mean(&emb, &pieces);
            for j in 0..dim {
                let col = pieces.iter().map(|&p| emb.row(p as usize)[j]);
                let lo = col.clone().fold(f32::INFINITY, f32::min);
                let hi = col.fold(f32::NEG_INFINITY, f32::max);
                assert!(lo <= row[j] && row[j] <= hi, "coordinate outside bounding box");
                assert!((f64::from(row[j]) - expected[j]).abs() <= 1e-5 * (1.0 + expected[j].abs()));
            }
            let max_norm = pieces
                .iter()
                .map(|&p| norm(emb.row(p as usize).iter().map(|&v| f64::from(v))))
                .fold(0.0, f64::max);
            let row_norm = norm(row.iter().map(|&v| f64::from(v)));
            // allow for the final f32 rounding of each coordinate
            assert!(row_norm <= max_norm * (1.0 + 1e-6));
        }
    }
}

#[test]
fn identity_round_trip_for_random_vocabularies() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let src = random_vocab(&mut rng, &['a', 'b', '1', '.'], 64, 2);
        let emb = random_embedding(&mut rng, src.size(), 4);
        let table = TranslationTable::new(MARK);
        table
            .fetch_all(&IdentityProvider, src.tokens().iter().map(String::as_str), FetchPolicy::default())
            .unwrap();
        let (out, report) = transplant(&emb, &src, &src, &table).unwrap();
        assert_eq!(out.to_bytes().unwrap(), emb.to_bytes().unwrap());
        assert_eq!(report.specials_copied, 3 + 2);
        assert_eq!(report.translated_count, 0);
    }
}

#[test]
fn permuting_target_tokens_permutes_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let src = random_vocab(&mut rng, &['a', 'b', 'c'], 40, 2);
        let tgt = random_vocab(&mut rng, &['a', 'b', 'c'], 40, 2);
        let emb = random_embedding(&mut rng, src.size(), 3);
        let table = random_table(&mut rng, &tgt);
        let (out, _) = transplant(&emb, &src, &tgt, &table).unwrap();

        // shuffle the non-special block, keep specials in place
        let first_sentinel = tgt.size() - tgt.sentinel_count();
        let mut perm: Vec<usize> = (3..first_sentinel).collect();
        perm.shuffle(&mut rng);
        let mut tokens = tgt.tokens().to_vec();
        for (slot, &from) in (3..first_sentinel).zip(&perm) {
            tokens[slot] = tgt.tokens()[from].clone();
        }
        let permuted = Vocabulary::from_tokens(tokens, tgt.specials()).unwrap();
        let (out2, _) = transplant(&emb, &src, &permuted, &table).unwrap();
        for (slot, &from) in (3..first_sentinel).zip(&perm) {
            assert_eq!(out2.row(slot), out.row(from));
        }
        for t in (0..3).chain(first_sentinel..tgt.size()) {
            assert_eq!(out2.row(t), out.row(t));
        }
    }
}

#[test]
fn sentinels_and_specials_copy_by_role() {
    let src = Vocabulary::from_tokens(
        ["</s>", "<pad>", "<unk>", "▁x", "<s2>", "<s1>", "<s0>"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        SpecialIds {
            pad: 1,
            eos: 0,
            unk: 2,
            sentinel_count: 3,
        },
    )
    .unwrap();
    let tgt = Vocabulary::from_tokens(
        ["<pad>", "</s>", "<unk>", "▁y", "▁z", "<t1>", "<t0>"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        SpecialIds {
            sentinel_count: 2,
            ..SpecialIds::default()
        },
    )
    .unwrap();
    let rows: Vec<Vec<f32>> = (0..7).map(|i| vec![i as f32]).collect();
    let emb = EmbeddingMatrix::from_rows(&rows).unwrap();
    let table = TranslationTable::new(MARK);
    table
        .fetch_all(
            &DictionaryProvider::from_pairs([("y", "x")]),
            ["▁y", "▁z"],
            FetchPolicy::default(),
        )
        .unwrap();
    let (out, report) = transplant(&emb, &src, &tgt, &table).unwrap();
    // pad <- src pad (1), eos <- src eos (0), unk <- unk, S0 <- 6, S1 <- 5
    assert_eq!(out.data(), &[1.0, 0.0, 2.0, 3.0, 2.0, 5.0, 6.0]);
    assert_eq!(report.specials_copied, 5);
    assert_eq!(report.unk_only_count, 1);
}
