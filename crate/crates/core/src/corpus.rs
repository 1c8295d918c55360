//! Fixed-length training sequences and their on-disk store.
//!
//! Documents are cut into consecutive, non-overlapping chunks of `seq_len`
//! ids. Chunks never span two documents; a document's final partial chunk
//! is kept only when it has at least `min_tail` ids. No masking happens
//! here: masks are drawn fresh each epoch by [`crate::masking`].
//!
//! Store layout (little-endian):
//! - magic `b"SEQS"`, version u32 (= 1), count u64
//! - per sequence: length u32, then `length` ids as u32
//!
//! Side index: magic `b"SEQI"`, version u32 (= 1), count u64, then `count`
//! u64 byte offsets into the store, one per sequence.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::vocab::TokenId;

pub const STORE_MAGIC: [u8; 4] = *b"SEQS";
pub const INDEX_MAGIC: [u8; 4] = *b"SEQI";
pub const STORE_VERSION: u32 = 1;
const STORE_HEADER_LEN: u64 = 16;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("sequence store io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported store version {0}")]
    BadVersion(u32),
    #[error("index {index} out of range for store of {count} sequences")]
    IndexOutOfRange { index: u64, count: u64 },
    #[error("store is corrupt: {0}")]
    Corrupt(String),
    #[error("invalid chunking parameters: seq_len={seq_len}, min_tail={min_tail}")]
    InvalidParams { seq_len: usize, min_tail: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<TokenId>,
    pub source_doc: u64,
    pub seq_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkConfig {
    pub seq_len: usize,
    pub min_tail: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig {
            seq_len: 512,
            min_tail: 16,
        }
    }
}

impl ChunkConfig {
    pub fn new(seq_len: usize, min_tail: usize) -> Result<Self, StoreError> {
        if seq_len < 2 || min_tail > seq_len {
            return Err(StoreError::InvalidParams { seq_len, min_tail });
        }
        Ok(ChunkConfig { seq_len, min_tail })
    }
}

/// Streaming chunker over tokenized documents.
pub struct Chunker<I> {
    docs: I,
    config: ChunkConfig,
    doc_ordinal: u64,
    next_index: u64,
    current: Vec<TokenId>,
    offset: usize,
}

impl<I> Iterator for Chunker<I>
where
    I: Iterator<Item = Vec<TokenId>>,
{
    type Item = TokenSequence;

    fn next(&mut self) -> Option<TokenSequence> {
        loop {
            let remaining = self.current.len() - self.offset;
            let take = remaining.min(self.config.seq_len);
            // a zero-length remainder is never kept, even with min_tail = 0
            if take > 0 && (take == self.config.seq_len || take >= self.config.min_tail) {
                let ids = self.current[self.offset..self.offset + take].to_vec();
                self.offset += take;
                let seq = TokenSequence {
                    ids,
                    source_doc: self.doc_ordinal - 1,
                    seq_index: self.next_index,
                };
                self.next_index += 1;
                return Some(seq);
            }
            self.current = self.docs.next()?;
            self.offset = 0;
            self.doc_ordinal += 1;
        }
    }
}

pub fn chunk_corpus<D>(docs: D, config: ChunkConfig) -> Chunker<D::IntoIter>
where
    D: IntoIterator<Item = Vec<TokenId>>,
{
    Chunker {
        docs: docs.into_iter(),
        config,
        doc_ordinal: 0,
        next_index: 0,
        current: Vec::new(),
        offset: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreSummary {
    pub count: u64,
    pub tokens: u64,
}

/// Side index path for a store: the store path with `.idx` appended.
pub fn index_path(store: &Path) -> PathBuf {
    let mut s = store.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

/// Writes sequences to `path` and, when `with_index` is set, a side index
/// next to it.
pub fn write_store<S>(path: impl AsRef<Path>, seqs: S, with_index: bool) -> Result<StoreSummary, StoreError>
where
    S: IntoIterator,
    S::Item: AsRef<[TokenId]>,
{
    let path = path.as_ref();
    let mut offsets = Vec::new();
    let summary = {
        let mut w = BufWriter::new(File::create(path)?);
        let summary = write_store_to(&mut w, seqs, &mut offsets)?;
        w.flush()?;
        summary
    };
    if with_index {
        let mut w = BufWriter::new(File::create(index_path(path))?);
        w.write_all(&INDEX_MAGIC)?;
        w.write_all(&STORE_VERSION.to_le_bytes())?;
        w.write_all(&(offsets.len() as u64).to_le_bytes())?;
        for off in &offsets {
            w.write_all(&off.to_le_bytes())?;
        }
        w.flush()?;
    } else {
        match std::fs::remove_file(index_path(path)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
            _ => {}
        }
    }
    Ok(summary)
}

/// Serializes a store into `w`, recording the byte offset of every
/// sequence. The count field is patched once the stream is exhausted.
pub fn write_store_to<W, S>(w: &mut W, seqs: S, offsets: &mut Vec<u64>) -> Result<StoreSummary, StoreError>
where
    W: Write + Seek,
    S: IntoIterator,
    S::Item: AsRef<[TokenId]>,
{
    let start = w.stream_position()?;
    w.write_all(&STORE_MAGIC)?;
    w.write_all(&STORE_VERSION.to_le_bytes())?;
    w.write_all(&0u64.to_le_bytes())?;
    let mut pos = STORE_HEADER_LEN;
    let mut summary = StoreSummary { count: 0, tokens: 0 };
    let mut buf = Vec::new();
    for ids in seqs {
        let ids = ids.as_ref();
        let len = u32::try_from(ids.len()).map_err(|_| StoreError::Corrupt("sequence too long".into()))?;
        buf.clear();
        buf.extend_from_slice(&len.to_le_bytes());
        for id in ids {
            buf.extend_from_slice(&id.to_le_bytes());
        }
        w.write_all(&buf)?;
        offsets.push(pos);
        pos += buf.len() as u64;
        summary.count += 1;
        summary.tokens += ids.len() as u64;
    }
    let end = w.stream_position()?;
    w.seek(SeekFrom::Start(start + 8))?;
    w.write_all(&summary.count.to_le_bytes())?;
    w.seek(SeekFrom::Start(end))?;
    Ok(summary)
}

/// Random-access reader over a sequence store.
///
/// Offsets come from the side index when one exists and agrees with the
/// store header; otherwise they are rebuilt with one scan over the length
/// prefixes.
#[derive(Debug)]
pub struct SequenceStore {
    file: Mutex<BufReader<File>>,
    offsets: Vec<u64>,
}

impl SequenceStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut reader = BufReader::new(File::open(path)?);
        let file_len = reader.get_ref().metadata()?.len();
        let count = read_header(&mut reader, STORE_MAGIC)?;

        let idx = index_path(path);
        let offsets = match File::open(&idx) {
            Ok(f) => {
                let offsets = read_index(BufReader::new(f))?;
                if offsets.len() as u64 != count {
                    return Err(StoreError::Corrupt(format!(
                        "index lists {} sequences, store header says {count}",
                        offsets.len()
                    )));
                }
                offsets
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => scan_offsets(&mut reader, count, file_len)?,
            Err(e) => return Err(e.into()),
        };
        Ok(SequenceStore {
            file: Mutex::new(reader),
            offsets,
        })
    }

    pub fn len(&self) -> u64 {
        self.offsets.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn get(&self, index: u64) -> Result<Vec<TokenId>, StoreError> {
        let offset = *self
            .offsets
            .get(index as usize)
            .ok_or(StoreError::IndexOutOfRange {
                index,
                count: self.len(),
            })?;
        let mut file = self.file.lock().unwrap();
        file.seek(SeekFrom::Start(offset))?;
        let len = read_u32(&mut *file)? as usize;
        let mut bytes = vec![0u8; len * 4];
        file.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<Vec<TokenId>, StoreError>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Length of every stored sequence, in order.
    pub fn lengths(&self) -> Result<Vec<usize>, StoreError> {
        let mut file = self.file.lock().unwrap();
        self.offsets
            .iter()
            .map(|&off| {
                file.seek(SeekFrom::Start(off))?;
                Ok(read_u32(&mut *file)? as usize)
            })
            .collect()
    }
}

/// Reads sequence `index` from the store at `path`.
pub fn read_store(path: impl AsRef<Path>, index: u64) -> Result<Vec<TokenId>, StoreError> {
    SequenceStore::open(path)?.get(index)
}

fn read_header(r: &mut impl Read, expected: [u8; 4]) -> Result<u64, StoreError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != expected {
        return Err(StoreError::BadMagic { found: magic, expected });
    }
    let version = read_u32(r)?;
    if version != STORE_VERSION {
        return Err(StoreError::BadVersion(version));
    }
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_index(mut r: impl Read) -> Result<Vec<u64>, StoreError> {
    let count = read_header(&mut r, INDEX_MAGIC)?;
    let mut offsets = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b)?;
        offsets.push(u64::from_le_bytes(b));
    }
    Ok(offsets)
}

fn scan_offsets(r: &mut BufReader<File>, count: u64, file_len: u64) -> Result<Vec<u64>, StoreError> {
    let mut offsets = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut pos = STORE_HEADER_LEN;
    for i in 0..count {
        if pos + 4 > file_len {
            return Err(StoreError::Corrupt(format!(
                "header promises {count} sequences, file ends after {i}"
            )));
        }
        r.seek(SeekFrom::Start(pos))?;
        let len = u64::from(read_u32(r)?);
        offsets.push(pos);
        pos += 4 + 4 * len;
    }
    if pos != file_len {
        return Err(StoreError::Corrupt(format!(
            "{} trailing or missing bytes after {count} sequences",
            file_len as i128 - pos as i128
        )));
    }
    Ok(offsets)
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
