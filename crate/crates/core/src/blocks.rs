//! Alphabets, symbol sequences and their partition into non-overlapping
//! blocks.
//!
//! A block of length `ℓ` over an alphabet of size `A` is stored as a
//! [`BlockKey`]. When `A^ℓ` fits in a `u128` the key is the base-`A` value of
//! the block (most significant symbol first); otherwise the raw symbols are
//! kept. Within one [`BlockSequence`] every key uses the same encoding, so two
//! keys compare equal exactly when the underlying symbol strings do.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported alphabet; symbols are stored as bytes.
pub const MAX_ALPHABET: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("alphabet size {0} is outside 2..={MAX_ALPHABET}")]
    AlphabetSize(usize),
    #[error("symbol table has {got} entries for an alphabet of size {size}")]
    TableLength { size: usize, got: usize },
    #[error("symbol table maps {0:?} to more than one index")]
    TableNotInjective(char),
    #[error("symbol {symbol} at position {position} is not below the alphabet size {size}")]
    SymbolOutOfRange {
        position: usize,
        symbol: u8,
        size: usize,
    },
    #[error("block length must be at least 1")]
    ZeroBlockLength,
    #[error("need at least {needed} symbols to form one block, got {got}")]
    EmptyInput { needed: usize, got: usize },
    #[error("cannot append blocks with a different alphabet or block length")]
    Incompatible,
}

/// A finite alphabet `{0, .., size-1}` with an optional external spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    symbols: Option<Vec<char>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self, SequenceError> {
        if !(2..=MAX_ALPHABET).contains(&size) {
            return Err(SequenceError::AlphabetSize(size));
        }
        Ok(Self {
            size,
            symbols: None,
        })
    }

    /// Alphabet whose index `i` is spelled `table[i]`.
    pub fn with_table(table: Vec<char>) -> Result<Self, SequenceError> {
        let mut alphabet = Self::new(table.len())?;
        let mut seen = HashMap::with_capacity(table.len());
        for (i, &c) in table.iter().enumerate() {
            if seen.insert(c, i).is_some() {
                return Err(SequenceError::TableNotInjective(c));
            }
        }
        alphabet.symbols = Some(table);
        Ok(alphabet)
    }

    /// The decimal digits `'0'..'9'` truncated to `size` symbols.
    pub fn digits(size: usize) -> Result<Self, SequenceError> {
        if size > 10 {
            return Err(SequenceError::AlphabetSize(size));
        }
        Self::with_table(('0'..='9').take(size).collect())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn table(&self) -> Option<&[char]> {
        self.symbols.as_deref()
    }

    pub fn index_of(&self, c: char) -> Option<u8> {
        self.symbols
            .as_ref()?
            .iter()
            .position(|&s| s == c)
            .map(|i| i as u8)
    }

    /// `size^len` when it fits in a `u128`.
    pub fn block_space(&self, block_length: usize) -> Option<u128> {
        let exp = u32::try_from(block_length).ok()?;
        (self.size as u128).checked_pow(exp)
    }
}

/// An immutable string over an [`Alphabet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    alphabet: Alphabet,
    symbols: Vec<u8>,
}

impl SymbolSequence {
    pub fn new(alphabet: Alphabet, symbols: Vec<u8>) -> Result<Self, SequenceError> {
        let size = alphabet.size();
        if let Some((position, &symbol)) = symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s as usize >= size)
        {
            return Err(SequenceError::SymbolOutOfRange {
                position,
                symbol,
                size,
            });
        }
        Ok(Self { alphabet, symbols })
    }

    /// Caller guarantees every symbol is below the alphabet size.
    pub(crate) fn from_trusted(alphabet: Alphabet, symbols: Vec<u8>) -> Self {
        debug_assert!(symbols.iter().all(|&s| (s as usize) < alphabet.size()));
        Self { alphabet, symbols }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Copy of the symbols in `range` as a new sequence.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            alphabet: self.alphabet.clone(),
            symbols: self.symbols[range].to_vec(),
        }
    }

    pub fn into_symbols(self) -> Vec<u8> {
        self.symbols
    }
}

/// Canonical encoding of one block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BlockKey {
    Packed(u128),
    Raw(Box<[u8]>),
}

/// Packs and unpacks blocks for a fixed alphabet size and block length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyCodec {
    alphabet_size: usize,
    block_length: usize,
    space: Option<u128>,
}

impl KeyCodec {
    pub fn new(alphabet: &Alphabet, block_length: usize) -> Self {
        Self {
            alphabet_size: alphabet.size(),
            block_length,
            space: alphabet.block_space(block_length),
        }
    }

    pub fn is_packed(&self) -> bool {
        self.space.is_some()
    }

    /// Number of distinct blocks, if representable.
    pub fn space(&self) -> Option<u128> {
        self.space
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    #[inline]
    pub fn pack(&self, block: &[u8]) -> u128 {
        let base = self.alphabet_size as u128;
        block.iter().fold(0u128, |acc, &s| acc * base + s as u128)
    }

    pub fn encode(&self, block: &[u8]) -> BlockKey {
        debug_assert_eq!(block.len(), self.block_length);
        if self.is_packed() {
            BlockKey::Packed(self.pack(block))
        } else {
            BlockKey::Raw(block.into())
        }
    }

    pub fn decode(&self, key: &BlockKey) -> Vec<u8> {
        match key {
            BlockKey::Raw(raw) => raw.to_vec(),
            BlockKey::Packed(mut value) => {
                let base = self.alphabet_size as u128;
                let mut out = vec![0u8; self.block_length];
                for slot in out.iter_mut().rev() {
                    *slot = (value % base) as u8;
                    value /= base;
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum BlockStore {
    Packed(Vec<u128>),
    Raw(Vec<Box<[u8]>>),
}

/// The sequence `X_1, X_2, ..` of consecutive non-overlapping blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSequence {
    alphabet: Alphabet,
    codec: KeyCodec,
    store: BlockStore,
    source_length: usize,
    discarded: usize,
}

impl BlockSequence {
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn codec(&self) -> &KeyCodec {
        &self.codec
    }

    pub fn block_length(&self) -> usize {
        self.codec.block_length
    }

    /// Number of symbols in the source, including the discarded tail.
    pub fn source_length(&self) -> usize {
        self.source_length
    }

    /// Trailing symbols that did not fill a whole block.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    pub fn len(&self) -> usize {
        match &self.store {
            BlockStore::Packed(v) => v.len(),
            BlockStore::Raw(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Blocks generated directly as keys; `source_length` is `len * ℓ`.
    pub(crate) fn from_store(alphabet: Alphabet, codec: KeyCodec, store: BlockStore) -> Self {
        let blocks = match &store {
            BlockStore::Packed(v) => v.len(),
            BlockStore::Raw(v) => v.len(),
        };
        Self {
            alphabet,
            codec,
            store,
            source_length: blocks * codec.block_length,
            discarded: 0,
        }
    }

    pub(crate) fn store(&self) -> &BlockStore {
        &self.store
    }

    /// Key of the block at 0-based position `i`.
    pub fn key(&self, i: usize) -> BlockKey {
        match &self.store {
            BlockStore::Packed(v) => BlockKey::Packed(v[i]),
            BlockStore::Raw(v) => BlockKey::Raw(v[i].clone()),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = BlockKey> + '_ {
        (0..self.len()).map(|i| self.key(i))
    }

    /// Symbols of the block at 0-based position `i`.
    pub fn block_symbols(&self, i: usize) -> Vec<u8> {
        match &self.store {
            BlockStore::Packed(v) => self.codec.decode(&BlockKey::Packed(v[i])),
            BlockStore::Raw(v) => v[i].to_vec(),
        }
    }

    /// The consumed prefix of the source, rebuilt from the blocks.
    pub fn reconstruct(&self) -> SymbolSequence {
        let mut out = Vec::with_capacity(self.len() * self.block_length());
        for i in 0..self.len() {
            out.extend(self.block_symbols(i));
        }
        SymbolSequence::from_trusted(self.alphabet.clone(), out)
    }

    /// Appends blocks cut from a continuation of the same source.
    ///
    /// The discard count of `self` must be zero, otherwise the blocks of
    /// `other` would not sit on the same grid.
    pub fn append(&mut self, other: BlockSequence) -> Result<(), SequenceError> {
        if other.codec != self.codec || self.discarded != 0 {
            return Err(SequenceError::Incompatible);
        }
        match (&mut self.store, other.store) {
            (BlockStore::Packed(a), BlockStore::Packed(b)) => a.extend(b),
            (BlockStore::Raw(a), BlockStore::Raw(b)) => a.extend(b),
            _ => return Err(SequenceError::Incompatible),
        }
        self.source_length += other.source_length;
        self.discarded = other.discarded;
        Ok(())
    }
}

/// Cuts `seq` into `floor(n / block_length)` consecutive blocks; the
/// remaining `n mod block_length` symbols are dropped and counted in
/// [`BlockSequence::discarded`].
pub fn blockify(seq: &SymbolSequence, block_length: usize) -> Result<BlockSequence, SequenceError> {
    if block_length == 0 {
        return Err(SequenceError::ZeroBlockLength);
    }
    if seq.len() < block_length {
        return Err(SequenceError::EmptyInput {
            needed: block_length,
            got: seq.len(),
        });
    }
    let codec = KeyCodec::new(seq.alphabet(), block_length);
    let chunks = seq.symbols().chunks_exact(block_length);
    let discarded = chunks.remainder().len();
    let store = if codec.is_packed() {
        BlockStore::Packed(chunks.map(|c| codec.pack(c)).collect())
    } else {
        BlockStore::Raw(chunks.map(Box::<[u8]>::from).collect())
    };
    Ok(BlockSequence {
        alphabet: seq.alphabet().clone(),
        codec,
        store,
        source_length: seq.len(),
        discarded,
    })
}
