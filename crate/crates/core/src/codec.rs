//! Binary hash codes and exact Hamming search.
//!
//! A code of `n` bits is stored LSB-first in `ceil(n / 64)` words: bit `j`
//! lives at position `j % 64` of word `j / 64`, and pad bits above `n` are
//! always zero. This layout is also the on-disk layout of `PDHC` files.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{PdhError, Result};
use crate::model::PosteriorVector;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashCode {
    bits: usize,
    words: Vec<u64>,
}

fn word_count(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl HashCode {
    pub fn zeros(bits: usize) -> Self {
        Self { bits, words: vec![0; word_count(bits)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut code = Self::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            code.set(j, b);
        }
        code
    }

    /// Builds a code from raw words, rejecting set pad bits.
    pub fn from_words(bits: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != word_count(bits) {
            return Err(PdhError::LengthMismatch { left: words.len(), right: word_count(bits) });
        }
        let rem = bits % 64;
        if rem != 0 && words[words.len() - 1] >> rem != 0 {
            return Err(PdhError::Format(format!("pad bits above bit {bits} are set")));
        }
        Ok(Self { bits, words })
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.bits, "bit {j} out of range for {}-bit code", self.bits);
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.bits, "bit {j} out of range for {}-bit code", self.bits);
        let mask = 1u64 << (j % 64);
        if value {
            self.words[j / 64] |= mask;
        } else {
            self.words[j / 64] &= !mask;
        }
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.bits).map(|j| self.get(j)).collect()
    }
}

/// MAP binarization: bit `j` is 1 iff `q_j >= 0.5` (ties go to 1).
pub fn binarize(q: &PosteriorVector) -> HashCode {
    let mut code = HashCode::zeros(q.len());
    for (j, &v) in q.0.iter().enumerate() {
        if v >= 0.5 {
            code.words[j / 64] |= 1u64 << (j % 64);
        }
    }
    code
}

pub fn hamming(a: &HashCode, b: &HashCode) -> Result<u32> {
    if a.bits != b.bits {
        return Err(PdhError::LengthMismatch { left: a.bits, right: b.bits });
    }
    Ok(hamming_words(&a.words, &b.words))
}

#[inline]
fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// MAP estimate of the hash distance between two posterior vectors: the
/// Hamming distance of their thresholded codes.
pub fn map_distance(q: &PosteriorVector, q2: &PosteriorVector) -> Result<u32> {
    if q.len() != q2.len() {
        return Err(PdhError::LengthMismatch { left: q.len(), right: q2.len() });
    }
    hamming(&binarize(q), &binarize(q2))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeEntry {
    pub id: u64,
    pub label: u16,
    pub code: HashCode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub id: u64,
    pub distance: u32,
    pub label: u16,
}

/// Immutable gallery of labelled codes with unique ids and uniform length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeBook {
    bits: usize,
    entries: Vec<CodeEntry>,
    // entry indices sorted by id; fixes the tie order of rankings
    by_id: Vec<usize>,
}

impl CodeBook {
    pub fn new(bits: usize, entries: Vec<CodeEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.code.len() != bits {
                return Err(PdhError::LengthMismatch { left: e.code.len(), right: bits });
            }
            if !seen.insert(e.id) {
                return Err(PdhError::DuplicateId(e.id));
            }
        }
        let mut by_id: Vec<usize> = (0..entries.len()).collect();
        by_id.sort_unstable_by_key(|&i| entries[i].id);
        Ok(Self { bits, entries, by_id })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> &[CodeEntry] {
        &self.entries
    }

    fn check_query(&self, query: &HashCode) -> Result<()> {
        if self.entries.is_empty() {
            return Err(PdhError::EmptyBook);
        }
        if query.len() != self.bits {
            return Err(PdhError::LengthMismatch { left: query.len(), right: self.bits });
        }
        Ok(())
    }

    /// The whole gallery ordered by `(distance, id)`.
    ///
    /// Distances are bounded by `n`, so this is a counting sort over an
    /// id-ordered scan: `O(|book| + n)` per query.
    pub fn rank_all(&self, query: &HashCode) -> Result<Vec<Neighbor>> {
        self.check_query(query)?;
        let dists: Vec<u32> = self
            .by_id
            .iter()
            .map(|&i| hamming_words(&self.entries[i].code.words, &query.words))
            .collect();
        let mut starts = vec![0usize; self.bits + 2];
        for &d in &dists {
            starts[d as usize + 1] += 1;
        }
        for d in 1..starts.len() {
            starts[d] += starts[d - 1];
        }
        let placeholder = Neighbor { id: 0, distance: 0, label: 0 };
        let mut out = vec![placeholder; dists.len()];
        for (&i, &d) in self.by_id.iter().zip(&dists) {
            let e = &self.entries[i];
            let slot = &mut starts[d as usize];
            out[*slot] = Neighbor { id: e.id, distance: d, label: e.label };
            *slot += 1;
        }
        Ok(out)
    }
}

/// The `k` nearest entries by Hamming distance, ties broken by ascending id.
/// Returns the whole ranking when `k >= book.len()`.
pub fn search_topk(book: &CodeBook, query: &HashCode, k: usize) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(PdhError::InvalidArgument("k must be >= 1".into()));
    }
    book.check_query(query)?;
    let mut all: Vec<Neighbor> = book
        .entries
        .iter()
        .map(|e| Neighbor { id: e.id, distance: hamming_words(&e.code.words, &query.words), label: e.label })
        .collect();
    let key = |n: &Neighbor| (n.distance, n.id);
    if k < all.len() {
        all.select_nth_unstable_by_key(k - 1, key);
        all.truncate(k);
    }
    all.sort_unstable_by_key(key);
    Ok(all)
}

pub const CODES_MAGIC: &[u8; 4] = b"PDHC";
pub const CODES_VERSION: u32 = 1;

/// `PDHC` layout: magic, version u32 LE, n u32 LE, count u64 LE, then per
/// entry `id u64 LE, label u16 LE, ceil(n/64) x u64 LE`.
pub fn write_codes<W: Write>(w: &mut W, book: &CodeBook) -> Result<()> {
    w.write_all(CODES_MAGIC)?;
    w.write_all(&CODES_VERSION.to_le_bytes())?;
    let n = u32::try_from(book.bits).map_err(|_| PdhError::Format("code length exceeds u32".into()))?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&(book.entries.len() as u64).to_le_bytes())?;
    for e in &book.entries {
        w.write_all(&e.id.to_le_bytes())?;
        w.write_all(&e.label.to_le_bytes())?;
        for word in &e.code.words {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_codes<R: Read>(r: &mut R) -> Result<CodeBook> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b4)?;
    if &b4 != CODES_MAGIC {
        return Err(PdhError::Format(format!("bad code file magic {b4:?}")));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CODES_VERSION {
        return Err(PdhError::Format(format!("unsupported code file version {version}")));
    }
    r.read_exact(&mut b4)?;
    let bits = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8);
    let mut entries = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        let id = u64::from_le_bytes(b8);
        r.read_exact(&mut b2)?;
        let label = u16::from_le_bytes(b2);
        let mut words = Vec::with_capacity(word_count(bits));
        for _ in 0..word_count(bits) {
            r.read_exact(&mut b8)?;
            words.push(u64::from_le_bytes(b8));
        }
        entries.push(CodeEntry { id, label, code: HashCode::from_words(bits, words)? });
    }
    if r.read(&mut b8)? != 0 {
        return Err(PdhError::Format("trailing bytes after code file".into()));
    }
    CodeBook::new(bits, entries)
}
