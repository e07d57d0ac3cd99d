//! Non-overlapping return times `S_j` and the modified return times `R_j`.
//!
//! Indices reported here (`ReturnEntry::index`, the early-match set) are
//! 1-based: entry `j` refers to block `X_j`, the `j`-th block of the
//! sequence.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::blocks::{BlockKey, BlockSequence, BlockStore, KeyCodec};
use crate::rng::rng_from_seed;

/// Block spaces up to this size use a flat table instead of a hash map.
const DENSE_LIMIT: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReturnError {
    #[error("k = {k} must lie in 1..={blocks}")]
    InvalidK { k: usize, blocks: usize },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("block space of size {space} cannot supply {k} distinct targets")]
    AlphabetTooSmall { space: u128, k: usize },
    #[error("scanner fed blocks with a different encoding")]
    CodecMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReturnTime {
    Observed(u64),
    Censored,
}

impl ReturnTime {
    pub fn observed(self) -> Option<u64> {
        match self {
            ReturnTime::Observed(t) => Some(t),
            ReturnTime::Censored => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReturnEntry {
    /// 1-based block index.
    pub index: usize,
    pub time: ReturnTime,
    /// Candidate positions examined: the return time itself when observed,
    /// otherwise the horizon clipped to the available data.
    pub horizon_used: u64,
}

/// Return times for the first `k` blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnTimeSet {
    entries: Vec<ReturnEntry>,
    blocks_scanned: usize,
}

impl ReturnTimeSet {
    pub fn from_entries(entries: Vec<ReturnEntry>, blocks_scanned: usize) -> Self {
        Self {
            entries,
            blocks_scanned,
        }
    }

    /// Builds an uncensored set directly from return-time values.
    pub fn from_values(values: &[u64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &t)| ReturnEntry {
                index: i + 1,
                time: ReturnTime::Observed(t),
                horizon_used: t,
            })
            .collect();
        Self {
            entries,
            blocks_scanned: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[ReturnEntry] {
        &self.entries
    }

    /// Blocks read by the scan, including the `k` sources.
    pub fn blocks_scanned(&self) -> usize {
        self.blocks_scanned
    }

    pub fn censored(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.time == ReturnTime::Censored)
            .map(|e| e.index)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|e| e.time != ReturnTime::Censored)
    }

    /// All values, or the 1-based indices of the censored entries.
    pub fn values(&self) -> Result<Vec<u64>, Vec<usize>> {
        let censored = self.censored();
        if !censored.is_empty() {
            return Err(censored);
        }
        Ok(self
            .entries
            .iter()
            .filter_map(|e| e.time.observed())
            .collect())
    }
}

enum PendingIndex {
    Dense(Vec<u32>),
    Packed(HashMap<u128, u32>),
    Raw(HashMap<Box<[u8]>, u32>),
}

/// Incremental computation of `S_1, .., S_k`.
///
/// Blocks are fed in order. The scanner remembers, for each block value, the
/// most recent source index `j <= k` still waiting for that value to recur,
/// so each block costs one table lookup and the total work is linear in the
/// number of blocks read. Feeding stops early once every return time is
/// either observed or beyond the horizon.
pub struct ReturnTimeScanner {
    codec: KeyCodec,
    k: usize,
    horizon: u64,
    position: usize,
    pending: PendingIndex,
    values: Vec<Option<u64>>,
    open: usize,
}

impl ReturnTimeScanner {
    pub fn new(codec: KeyCodec, k: usize, horizon: u64) -> Result<Self, ReturnError> {
        if k == 0 {
            return Err(ReturnError::InvalidK { k, blocks: 0 });
        }
        if horizon == 0 {
            return Err(ReturnError::InvalidHorizon);
        }
        let pending = match codec.space() {
            Some(space) if space <= DENSE_LIMIT => PendingIndex::Dense(vec![0; space as usize]),
            Some(_) => PendingIndex::Packed(HashMap::with_capacity(k)),
            None => PendingIndex::Raw(HashMap::with_capacity(k)),
        };
        Ok(Self {
            codec,
            k,
            horizon,
            position: 0,
            pending,
            values: vec![None; k],
            open: k,
        })
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_complete(&self) -> bool {
        self.position >= self.k
            && (self.open == 0
                || (self.position as u64) > (self.k as u64 - 1).saturating_add(self.horizon))
    }

    #[inline]
    fn settle(&mut self, source: Option<u32>) {
        if let Some(slot) = source {
            let j = slot as usize - 1;
            let s = (self.position - j) as u64;
            if s <= self.horizon {
                self.values[j] = Some(s);
            }
            self.open -= 1;
        }
    }

    /// Feeds blocks until the input runs out or the scan is complete.
    /// Returns how many blocks were consumed.
    pub fn feed(&mut self, blocks: &BlockSequence) -> Result<usize, ReturnError> {
        if *blocks.codec() != self.codec {
            return Err(ReturnError::CodecMismatch);
        }
        let start = self.position;
        match (blocks.store(), &mut self.pending) {
            (BlockStore::Packed(keys), PendingIndex::Dense(_)) => {
                for &key in keys {
                    if self.is_complete() {
                        break;
                    }
                    let PendingIndex::Dense(table) = &mut self.pending else {
                        unreachable!()
                    };
                    let slot = &mut table[key as usize];
                    let source = (*slot != 0).then_some(*slot);
                    *slot = if self.position < self.k {
                        self.position as u32 + 1
                    } else {
                        0
                    };
                    self.settle(source);
                    self.position += 1;
                }
            }
            (BlockStore::Packed(keys), PendingIndex::Packed(_)) => {
                for &key in keys {
                    if self.is_complete() {
                        break;
                    }
                    let PendingIndex::Packed(map) = &mut self.pending else {
                        unreachable!()
                    };
                    let source = if self.position < self.k {
                        map.insert(key, self.position as u32 + 1)
                    } else {
                        map.remove(&key)
                    };
                    self.settle(source);
                    self.position += 1;
                }
            }
            (BlockStore::Raw(keys), PendingIndex::Raw(_)) => {
                for key in keys {
                    if self.is_complete() {
                        break;
                    }
                    let PendingIndex::Raw(map) = &mut self.pending else {
                        unreachable!()
                    };
                    let source = if self.position < self.k {
                        map.insert(key.clone(), self.position as u32 + 1)
                    } else {
                        map.remove(key)
                    };
                    self.settle(source);
                    self.position += 1;
                }
            }
            _ => return Err(ReturnError::CodecMismatch),
        }
        Ok(self.position - start)
    }

    pub fn finish(self) -> Result<ReturnTimeSet, ReturnError> {
        if self.position < self.k {
            return Err(ReturnError::InvalidK {
                k: self.k,
                blocks: self.position,
            });
        }
        let scanned = self.position;
        let horizon = self.horizon;
        let entries = self
            .values
            .into_iter()
            .enumerate()
            .map(|(j, value)| match value {
                Some(s) => ReturnEntry {
                    index: j + 1,
                    time: ReturnTime::Observed(s),
                    horizon_used: s,
                },
                None => ReturnEntry {
                    index: j + 1,
                    time: ReturnTime::Censored,
                    horizon_used: horizon.min((scanned - 1 - j) as u64),
                },
            })
            .collect();
        Ok(ReturnTimeSet {
            entries,
            blocks_scanned: scanned,
        })
    }
}

fn check_k(blocks: &BlockSequence, k: usize) -> Result<(), ReturnError> {
    if k == 0 || k > blocks.len() {
        return Err(ReturnError::InvalidK {
            k,
            blocks: blocks.len(),
        });
    }
    Ok(())
}

/// `S_j = min { t >= 1 : X_{j+t} = X_j }` for `j = 1..k`, searching at most
/// `horizon` blocks ahead and never past the end of `blocks`.
pub fn return_times(
    blocks: &BlockSequence,
    k: usize,
    horizon: u64,
) -> Result<ReturnTimeSet, ReturnError> {
    check_k(blocks, k)?;
    let mut scanner = ReturnTimeScanner::new(*blocks.codec(), k, horizon)?;
    scanner.feed(blocks)?;
    scanner.finish()
}

/// The set `D` of indices `i <= k` whose block does not recur among
/// `X_{i+1}, .., X_k`. Index `k` is always a member.
pub fn early_match_set(blocks: &BlockSequence, k: usize) -> Result<Vec<usize>, ReturnError> {
    check_k(blocks, k)?;
    Ok(early_match_flags(blocks, k)
        .iter()
        .enumerate()
        .filter(|(_, &in_d)| in_d)
        .map(|(i, _)| i + 1)
        .collect())
}

fn early_match_flags(blocks: &BlockSequence, k: usize) -> Vec<bool> {
    let mut seen = HashSet::with_capacity(k);
    let mut flags = vec![false; k];
    for i in (0..k).rev() {
        flags[i] = seen.insert(blocks.key(i));
    }
    flags
}

/// The targets `b_j` and waiting times `R_j` built from a realisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifiedReturnSet {
    in_d: Vec<bool>,
    targets: Vec<BlockKey>,
    returns: ReturnTimeSet,
    rng_seed: u64,
}

impl ModifiedReturnSet {
    pub fn k(&self) -> usize {
        self.targets.len()
    }

    /// 1-based members of `D`.
    pub fn early_match_set(&self) -> Vec<usize> {
        self.in_d
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn all_in_d(&self) -> bool {
        self.in_d.iter().all(|&d| d)
    }

    /// `b_1, .., b_k`, in index order.
    pub fn targets(&self) -> &[BlockKey] {
        &self.targets
    }

    pub fn returns(&self) -> &ReturnTimeSet {
        &self.returns
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

fn draw_unseen(codec: &KeyCodec, rng: &mut impl Rng, taken: &HashSet<BlockKey>) -> BlockKey {
    loop {
        let key = match codec.space() {
            Some(space) => BlockKey::Packed(rng.random_range(0..space)),
            None => {
                let size = codec.alphabet_size() as u8;
                let raw: Box<[u8]> = (0..codec.block_length())
                    .map(|_| rng.random_range(0..size))
                    .collect();
                BlockKey::Raw(raw)
            }
        };
        if !taken.contains(&key) {
            return key;
        }
    }
}

/// Targets `b_j` and waiting times `R_j = min { t >= 1 : X_{k+t} = b_j }`.
///
/// For `j` in `D` the target is the block itself. The remaining indices are
/// processed in increasing order, each drawing a block uniformly (by
/// rejection, seeded by `seed`) from those not already used as a target, so
/// all targets are distinct.
pub fn modified_return_times(
    blocks: &BlockSequence,
    k: usize,
    horizon: u64,
    seed: u64,
) -> Result<ModifiedReturnSet, ReturnError> {
    check_k(blocks, k)?;
    if horizon == 0 {
        return Err(ReturnError::InvalidHorizon);
    }
    let codec = *blocks.codec();
    if let Some(space) = codec.space() {
        if space < k as u128 {
            return Err(ReturnError::AlphabetTooSmall { space, k });
        }
    }
    let in_d = early_match_flags(blocks, k);
    let mut taken: HashSet<BlockKey> = (0..k).filter(|&i| in_d[i]).map(|i| blocks.key(i)).collect();
    let mut rng = rng_from_seed(seed);
    let mut targets = Vec::with_capacity(k);
    for (i, &member) in in_d.iter().enumerate() {
        if member {
            targets.push(blocks.key(i));
        } else {
            let key = draw_unseen(&codec, &mut rng, &taken);
            taken.insert(key.clone());
            targets.push(key);
        }
    }

    let mut waiting: HashMap<BlockKey, usize> =
        targets.iter().cloned().enumerate().map(|(j, b)| (b, j)).collect();
    let mut values = vec![None; k];
    let available = (blocks.len() - k) as u64;
    let limit = horizon.min(available);
    let mut scanned = k;
    for t in 1..=limit {
        if waiting.is_empty() {
            break;
        }
        let idx = k - 1 + t as usize;
        scanned = idx + 1;
        if let Some(j) = waiting.remove(&blocks.key(idx)) {
            values[j] = Some(t);
        }
    }
    let entries = values
        .into_iter()
        .enumerate()
        .map(|(j, v)| ReturnEntry {
            index: j + 1,
            time: v.map_or(ReturnTime::Censored, ReturnTime::Observed),
            horizon_used: v.unwrap_or(limit),
        })
        .collect();
    Ok(ModifiedReturnSet {
        in_d,
        targets,
        returns: ReturnTimeSet::from_entries(entries, scanned),
        rng_seed: seed,
    })
}
