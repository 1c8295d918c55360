use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_rational::Ratio;
use warmstart_core::corpus::{chunk_corpus, write_store, ChunkConfig, SequenceStore};
use warmstart_core::vocab::load_vocab;

use super::{require_dir, require_file, require_parent, seed_field};
use crate::args::{PrepareArgs, StatsArgs};

/// All `.txt` files below `dir`, in path order.
fn text_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "txt") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Documents are separated by blank lines; the lines of a document are
/// joined with single spaces.
fn split_documents(raw: &str) -> Vec<String> {
    let mut docs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                docs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        docs.push(current.join(" "));
    }
    docs
}

pub fn prepare(a: &PrepareArgs, seed: Option<u64>) -> anyhow::Result<()> {
    require_file("vocabulary", &a.vocab)?;
    require_dir("corpus directory", &a.input)?;
    require_parent("output", &a.out)?;
    let config = ChunkConfig::new(a.seq_len, a.min_tail)?;
    let vocab = load_vocab(&a.vocab, a.specials.ids()).with_context(|| format!("vocabulary {}", a.vocab.display()))?;
    let files = text_files(&a.input).with_context(|| format!("listing {}", a.input.display()))?;

    let mut texts = Vec::with_capacity(files.len());
    for f in &files {
        let raw = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        texts.push(raw);
    }
    let documents = Cell::new(0u64);
    let tokens_in = Cell::new(0u64);
    let docs = texts.iter().flat_map(|t| split_documents(t)).map(|d| {
        let ids = vocab.tokenize_greedy(&d);
        documents.set(documents.get() + 1);
        tokens_in.set(tokens_in.get() + ids.len() as u64);
        ids
    });
    let summary = write_store(&a.out, chunk_corpus(docs, config).map(|s| s.ids), !a.no_index)
        .with_context(|| format!("writing {}", a.out.display()))?;

    println!("files={}", files.len());
    println!("documents={}", documents.get());
    println!("tokens_in={}", tokens_in.get());
    println!("sequences={}", summary.count);
    println!("tokens_kept={}", summary.tokens);
    println!("tokens_dropped={}", tokens_in.get() - summary.tokens);
    println!("seq_len={}", a.seq_len);
    println!("min_tail={}", a.min_tail);
    println!("seed={}", seed_field(seed));
    Ok(())
}

pub fn stats(a: &StatsArgs, seed: Option<u64>) -> anyhow::Result<()> {
    require_file("store", &a.store)?;
    let store = SequenceStore::open(&a.store).with_context(|| format!("store {}", a.store.display()))?;
    let lengths = store.lengths()?;
    let tokens: u64 = lengths.iter().map(|&l| l as u64).sum();
    let mut histogram = BTreeMap::new();
    for &l in &lengths {
        *histogram.entry(l as u64 / a.bin_width).or_insert(0u64) += 1;
    }
    println!("sequences={}", lengths.len());
    println!("tokens={tokens}");
    if !lengths.is_empty() {
        let mean = Ratio::new(tokens, lengths.len() as u64);
        println!("min_length={}", lengths.iter().min().unwrap());
        println!("max_length={}", lengths.iter().max().unwrap());
        println!("mean_length={}/{}", mean.numer(), mean.denom());
    }
    println!("seed={}", seed_field(seed));
    for (bin, count) in histogram {
        if a.bin_width == 1 {
            println!("length={bin}\tcount={count}");
        } else {
            let lo = bin * a.bin_width;
            println!("length={lo}..{}\tcount={count}", lo + a.bin_width);
        }
    }
    Ok(())
}
