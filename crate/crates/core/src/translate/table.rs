use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Condvar, Mutex, RwLock};
use std::thread;

use super::{
    needs_translation, normalize_token, TranslateError, TranslationOutcome, TranslationProvider,
    TranslationStatus,
};

const PROVENANCE_CACHE: &str = "cache";
const PROVENANCE_BYPASS: &str = "bypass";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FetchPolicy {
    /// Re-query entries cached as failures (once per table instance).
    pub retry_failed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FetchStats {
    pub distinct: usize,
    pub cache_hits: usize,
    pub bypassed: usize,
    pub fetched: usize,
    pub translated: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    outcome: TranslationOutcome,
    provenance: String,
}

/// Normalized token text to translation outcome, with per-entry provenance.
///
/// Lookups take a shared lock. A cache miss claims its key in an in-flight
/// set, so concurrent misses on the same key produce a single provider
/// call; the losers wait for the winner's result.
///
/// When opened with [`TranslationTable::open_journaled`] every newly fetched
/// outcome is appended to the cache file as it arrives. Later records for
/// the same key override earlier ones on load; [`TranslationTable::save`]
/// writes the compact, sorted form.
#[derive(Debug)]
pub struct TranslationTable {
    boundary_marker: char,
    entries: RwLock<BTreeMap<String, Entry>>,
    inflight: Mutex<HashSet<String>>,
    settled: Condvar,
    retried: Mutex<HashSet<String>>,
    journal: Option<Mutex<BufWriter<File>>>,
}

impl TranslationTable {
    pub fn new(boundary_marker: char) -> Self {
        TranslationTable {
            boundary_marker,
            entries: RwLock::new(BTreeMap::new()),
            inflight: Mutex::new(HashSet::new()),
            settled: Condvar::new(),
            retried: Mutex::new(HashSet::new()),
            journal: None,
        }
    }

    pub fn parse(raw: &str, boundary_marker: char) -> Result<Self, TranslateError> {
        let table = TranslationTable::new(boundary_marker);
        {
            let mut entries = table.entries.write().unwrap();
            for (i, line) in raw.lines().enumerate() {
                let (key, outcome) = parse_record(line).map_err(|reason| TranslateError::Parse {
                    line: i + 1,
                    reason,
                })?;
                entries.insert(
                    key,
                    Entry {
                        outcome,
                        provenance: PROVENANCE_CACHE.to_string(),
                    },
                );
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>, boundary_marker: char) -> Result<Self, TranslateError> {
        let raw = fs::read_to_string(path)?;
        Self::parse(&raw, boundary_marker)
    }

    /// Loads `path` if it exists and appends every new outcome to it.
    pub fn open_journaled(path: impl AsRef<Path>, boundary_marker: char) -> Result<Self, TranslateError> {
        let path = path.as_ref();
        let mut table = if path.exists() {
            Self::load(path, boundary_marker)?
        } else {
            TranslationTable::new(boundary_marker)
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        table.journal = Some(Mutex::new(BufWriter::new(file)));
        Ok(table)
    }

    pub fn boundary_marker(&self) -> char {
        self.boundary_marker
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Exact-match lookup on normalized text.
    pub fn get(&self, normalized: &str) -> Option<TranslationOutcome> {
        self.entries
            .read()
            .unwrap()
            .get(normalized)
            .map(|e| e.outcome.clone())
    }

    /// Lookup by raw token (normalized first).
    pub fn get_token(&self, token: &str) -> Option<TranslationOutcome> {
        self.get(normalize_token(token, self.boundary_marker))
    }

    pub fn provenance(&self, normalized: &str) -> Option<String> {
        self.entries
            .read()
            .unwrap()
            .get(normalized)
            .map(|e| e.provenance.clone())
    }

    /// Inserts or replaces an entry without touching the journal.
    pub fn insert(&self, normalized: impl Into<String>, outcome: TranslationOutcome, provenance: &str) {
        self.entries.write().unwrap().insert(
            normalized.into(),
            Entry {
                outcome,
                provenance: provenance.to_string(),
            },
        );
    }

    /// Sorted snapshot of all entries.
    pub fn entries(&self) -> Vec<(String, TranslationOutcome)> {
        self.entries
            .read()
            .unwrap()
            .iter()
            .map(|(k, e)| (k.clone(), e.outcome.clone()))
            .collect()
    }

    /// Canonical serialized form: one record per key, sorted by key.
    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.entries.read().unwrap();
        let mut out = String::new();
        for (key, entry) in entries.iter() {
            out.push_str(&format_record(key, &entry.outcome));
        }
        out.into_bytes()
    }

    /// Writes the canonical form to `path` via a temporary sibling file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TranslateError> {
        let path = path.as_ref();
        let mut tmp_name = path.as_os_str().to_owned();
        tmp_name.push(".tmp");
        let tmp = Path::new(&tmp_name);
        fs::write(tmp, self.to_bytes())?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn lookup_or_fetch(
        &self,
        provider: &dyn TranslationProvider,
        token: &str,
        policy: FetchPolicy,
    ) -> Result<TranslationOutcome, TranslateError> {
        self.fetch_all(provider, [token], policy)?;
        let normalized = normalize_token(token, self.boundary_marker);
        Ok(self
            .get(normalized)
            .expect("fetch_all records every requested key"))
    }

    /// Makes sure every token has an entry, querying `provider` for the
    /// misses in batches.
    pub fn fetch_all<'a>(
        &self,
        provider: &dyn TranslationProvider,
        tokens: impl IntoIterator<Item = &'a str>,
        policy: FetchPolicy,
    ) -> Result<FetchStats, TranslateError> {
        let mut stats = FetchStats::default();
        let mut seen = HashSet::new();
        let mut candidates = Vec::new();
        let mut bypass = Vec::new();
        for token in tokens {
            let key = normalize_token(token, self.boundary_marker);
            if !seen.insert(key.to_string()) {
                continue;
            }
            if needs_translation(key) {
                candidates.push(key.to_string());
            } else {
                bypass.push(key.to_string());
            }
        }
        stats.distinct = seen.len();

        let mut undelivered = Vec::new();
        let mut journal_error = None;

        // Bypassed tokens never reach a provider.
        let mut new_bypass = Vec::new();
        {
            let mut entries = self.entries.write().unwrap();
            for key in bypass {
                if entries.contains_key(&key) {
                    stats.cache_hits += 1;
                    continue;
                }
                let outcome = TranslationOutcome::failed(key.clone());
                entries.insert(
                    key.clone(),
                    Entry {
                        outcome: outcome.clone(),
                        provenance: PROVENANCE_BYPASS.to_string(),
                    },
                );
                stats.bypassed += 1;
                new_bypass.push((key, outcome));
            }
        }
        if let Err(e) = self.append_journal(&new_bypass) {
            journal_error = Some(e);
            undelivered.extend(new_bypass);
        }

        let (mine, waiting, hits) = self.claim(candidates, policy);
        stats.cache_hits += hits;
        let claim = ClaimGuard {
            table: self,
            keys: &mine,
        };

        let outcomes = query_provider(provider, &mine);
        stats.fetched = outcomes.len();
        for (_, outcome) in &outcomes {
            match outcome.status {
                TranslationStatus::Translated => stats.translated += 1,
                TranslationStatus::Failed => stats.failed += 1,
            }
        }
        {
            let mut entries = self.entries.write().unwrap();
            for (key, outcome) in &outcomes {
                entries.insert(
                    key.clone(),
                    Entry {
                        outcome: outcome.clone(),
                        provenance: provider.name().to_string(),
                    },
                );
            }
        }
        if let Err(e) = self.append_journal(&outcomes) {
            journal_error.get_or_insert(e);
            undelivered.extend(outcomes);
        }
        drop(claim);

        self.wait_for(&waiting);

        match journal_error {
            Some(source) => Err(TranslateError::Persist { undelivered, source }),
            None => Ok(stats),
        }
    }

    /// Splits candidate keys into those this call must fetch, those another
    /// thread is already fetching, and a count of plain cache hits.
    fn claim(&self, candidates: Vec<String>, policy: FetchPolicy) -> (Vec<String>, Vec<String>, usize) {
        let mut inflight = self.inflight.lock().unwrap();
        let entries = self.entries.read().unwrap();
        let mut retried = self.retried.lock().unwrap();
        let mut mine = Vec::new();
        let mut waiting = Vec::new();
        let mut hits = 0;
        for key in candidates {
            if inflight.contains(&key) {
                waiting.push(key);
                continue;
            }
            let wanted = match entries.get(&key) {
                None => true,
                Some(e) => {
                    policy.retry_failed
                        && e.outcome.status == TranslationStatus::Failed
                        && !retried.contains(&key)
                }
            };
            if wanted {
                if policy.retry_failed {
                    retried.insert(key.clone());
                }
                inflight.insert(key.clone());
                mine.push(key);
            } else {
                hits += 1;
            }
        }
        (mine, waiting, hits)
    }

    fn wait_for(&self, keys: &[String]) {
        if keys.is_empty() {
            return;
        }
        let mut inflight = self.inflight.lock().unwrap();
        while keys.iter().any(|k| inflight.contains(k)) {
            inflight = self.settled.wait(inflight).unwrap();
        }
    }

    fn append_journal(&self, records: &[(String, TranslationOutcome)]) -> std::io::Result<()> {
        let Some(journal) = &self.journal else {
            return Ok(());
        };
        if records.is_empty() {
            return Ok(());
        }
        let mut w = journal.lock().unwrap();
        for (key, outcome) in records {
            w.write_all(format_record(key, outcome).as_bytes())?;
        }
        w.flush()
    }
}

struct ClaimGuard<'a> {
    table: &'a TranslationTable,
    keys: &'a [String],
}

impl Drop for ClaimGuard<'_> {
    fn drop(&mut self) {
        if self.keys.is_empty() {
            return;
        }
        let mut inflight = self.table.inflight.lock().unwrap();
        for k in self.keys {
            inflight.remove(k);
        }
        self.table.settled.notify_all();
    }
}

fn query_provider(provider: &dyn TranslationProvider, keys: &[String]) -> Vec<(String, TranslationOutcome)> {
    if keys.is_empty() {
        return Vec::new();
    }
    let batch = provider.batch_size().max(1);
    let batches: Vec<&[String]> = keys.chunks(batch).collect();
    let workers = provider.max_in_flight().clamp(1, batches.len());

    let run = |chunk: &[String]| -> Vec<(String, TranslationOutcome)> {
        let results = provider.translate_batch(chunk);
        chunk
            .iter()
            .enumerate()
            .map(|(i, key)| {
                let outcome = match results.get(i) {
                    Some(Ok(text)) if !text.trim().is_empty() => {
                        TranslationOutcome::translated(text.trim())
                    }
                    _ => TranslationOutcome::failed(key.clone()),
                };
                (key.clone(), outcome)
            })
            .collect()
    };

    if workers == 1 {
        return batches.into_iter().flat_map(run).collect();
    }
    // Round-robin batches over workers, then restore the original order.
    let mut per_worker: Vec<Vec<(usize, Vec<(String, TranslationOutcome)>)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let batches = &batches;
                let run = &run;
                s.spawn(move || {
                    batches
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(workers)
                        .map(|(i, chunk)| (i, run(chunk)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut ordered: Vec<(usize, Vec<(String, TranslationOutcome)>)> =
        per_worker.iter_mut().flat_map(std::mem::take).collect();
    ordered.sort_by_key(|(i, _)| *i);
    ordered.into_iter().flat_map(|(_, v)| v).collect()
}

fn format_record(key: &str, outcome: &TranslationOutcome) -> String {
    format!(
        "{}\t{}\t{}\n",
        escape(key),
        outcome.status.as_str(),
        escape(&outcome.text)
    )
}

fn parse_record(line: &str) -> Result<(String, TranslationOutcome), String> {
    let mut fields = line.split('\t');
    let (Some(key), Some(status), Some(text), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err("expected exactly three tab-separated fields".into());
    };
    let status = match status {
        "OK" => TranslationStatus::Translated,
        "FAIL" => TranslationStatus::Failed,
        other => return Err(format!("unknown status {other:?}")),
    };
    Ok((
        unescape(key)?,
        TranslationOutcome {
            status,
            text: unescape(text)?,
        },
    ))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}
