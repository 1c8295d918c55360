//! Fixtures shared by the CLI test targets: toy vocabularies, a source
//! embedding matrix, a translation dictionary and a generated corpus.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warmstart_core::transplant::EmbeddingMatrix;

pub const SENTINELS: usize = 100;
pub const DIM: usize = 16;

/// Target-language words and their dictionary translations.
pub const LEXICON: &[(&str, &str)] = &[
    ("hund", "dog"),
    ("kat", "cat"),
    ("hus", "house"),
    ("huset", "the house"),
    ("og", "and"),
    ("en", "a"),
    ("et", "a"),
    ("er", "is"),
    ("det", "it"),
    ("ikke", "not"),
    ("stor", "big"),
    ("lille", "small"),
    ("barn", "child"),
    ("børn", "children"),
    ("bil", "car"),
    ("vej", "road"),
    ("by", "town"),
    ("mand", "man"),
    ("kvinde", "woman"),
    ("spiser", "eats"),
    ("løber", "runs"),
    ("ser", "sees"),
    ("god", "good"),
    ("dag", "day"),
    ("nat", "night"),
    ("vand", "water"),
    ("mad", "food"),
    ("bog", "book"),
    ("skole", "school"),
    ("doktor", "doctor"),
    ("dokumentet", "the document"),
    ("værsgo", "here you go"),
    ("tak", "thanks"),
    ("meget", "very"),
    ("har", "has"),
    ("til", "to"),
    ("fra", "from"),
    ("med", "with"),
    ("på", "on"),
];

/// Words with no dictionary entry.
pub const UNTRANSLATED: &[&str] = &["aarhus", "jylland", "fjord", "hygge"];

const PUNCT: &[&str] = &[".", ",", "!", "?"];

fn with_specials(body: Vec<String>) -> Vec<String> {
    let mut tokens = vec!["<pad>".to_string(), "</s>".into(), "<unk>".into()];
    tokens.extend(body);
    tokens.extend((0..SENTINELS).rev().map(|k| format!("<extra_id_{k}>")));
    tokens
}

fn letters(alphabet: &str) -> Vec<String> {
    alphabet
        .chars()
        .flat_map(|c| [format!("▁{c}"), c.to_string()])
        .collect()
}

pub fn target_tokens() -> Vec<String> {
    let mut body: Vec<String> = LEXICON.iter().map(|(da, _)| format!("▁{da}")).collect();
    body.extend(UNTRANSLATED.iter().map(|w| format!("▁{w}")));
    body.extend(["ne", "ene", "erne", "s"].iter().map(|s| s.to_string()));
    body.extend(PUNCT.iter().map(|s| s.to_string()));
    body.extend(letters("abcdefghijklmnopqrstuvwxyzæøå"));
    with_specials(dedup(body))
}

pub fn source_tokens() -> Vec<String> {
    let mut words: Vec<&str> = LEXICON.iter().flat_map(|(_, en)| en.split(' ')).collect();
    words.sort_unstable();
    words.dedup();
    let mut body: Vec<String> = words.iter().map(|w| format!("▁{w}")).collect();
    body.extend(PUNCT.iter().map(|s| s.to_string()));
    body.extend(letters("abcdefghijklmnopqrstuvwxyz"));
    with_specials(dedup(body))
}

fn dedup(tokens: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    tokens.into_iter().filter(|t| seen.insert(t.clone())).collect()
}

pub fn write_vocab(path: &Path, tokens: &[String]) {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        writeln!(out, "{t}\t-{i}").unwrap();
    }
    fs::write(path, out).unwrap();
}

pub fn random_embedding(rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(rows, dim, data).unwrap()
}

/// Writes `files` text files of roughly `bytes_per_file` bytes: sentences
/// of lexicon words, paragraphs separated by blank lines.
pub fn write_corpus(dir: &Path, files: usize, bytes_per_file: usize, seed: u64) {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<&str> = LEXICON.iter().map(|(da, _)| *da).collect();
    words.extend(UNTRANSLATED);
    for f in 0..files {
        let mut text = String::with_capacity(bytes_per_file + 200);
        while text.len() < bytes_per_file {
            let sentences = rng.random_range(1..40);
            for _ in 0..sentences {
                let n = rng.random_range(3..15);
                let sentence: Vec<&str> = (0..n).map(|_| *words.choose(&mut rng).unwrap()).collect();
                text.push_str(&sentence.join(" "));
                text.push_str(PUNCT.choose(&mut rng).unwrap());
                text.push(if rng.random_bool(0.3) { '\n' } else { ' ' });
            }
            text.push_str("\n\n");
        }
        fs::write(dir.join(format!("part{f:03}.txt")), text).unwrap();
    }
}

/// Toy inputs for the whole pipeline under one directory.
pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture { dir };
        let src = source_tokens();
        write_vocab(&f.path("src_vocab.txt"), &src);
        write_vocab(&f.path("tgt_vocab.txt"), &target_tokens());
        random_embedding(src.len(), DIM, 1)
            .save(f.path("src.emb"))
            .unwrap();
        let mut dict = String::from("# target\tsource\n");
        for (da, en) in LEXICON {
            writeln!(dict, "{da}\t{en}").unwrap();
        }
        fs::write(f.path("dict.tsv"), dict).unwrap();
        f
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn s(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_warmstart")
}

/// Runs the CLI in `cwd` with a private run log and no inherited seed.
pub fn run_in(cwd: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("WARMSTART_SEED")
        .env_remove("WARMSTART_API_KEY")
        .env("WARMSTART_RUN_LOG", cwd.join("runs.log"))
        .output()
        .expect("spawn warmstart")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `key=value` lines as pairs; other lines are skipped.
pub fn key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn value(text: &str, key: &str) -> Option<String> {
    key_values(text).into_iter().find(|(k, _)| k == key).map(|(_, v)| v)
}
