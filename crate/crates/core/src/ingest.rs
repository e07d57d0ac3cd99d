//! Digit files of mathematical constants: parsing, segmentation and
//! per-segment statistics.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::blocks::{blockify, Alphabet, SymbolSequence};
use crate::returns::{ReturnError, ReturnTimeScanner};
use crate::statistics::{clt_statistic, entropy_estimate, ProcessModel};

/// Blocks handed to the scanner at a time when scanning past a segment.
const CONTINUATION_BLOCKS: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("unexpected byte 0x{byte:02x} at offset {offset}")]
    BadCharacter { offset: u64, byte: u8 },
    #[error("no digits found")]
    EmptyFile,
    #[error("alphabet size must be 2 or 10, got {0}")]
    UnsupportedAlphabet(usize),
    #[error("segment length must be at least 1")]
    InvalidSegmentLength,
    #[error("invalid analysis parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitFileSpec {
    pub path: PathBuf,
    /// 10 for decimal digits, 2 for binary.
    pub alphabet_size: usize,
}

impl DigitFileSpec {
    pub fn decimal(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            alphabet_size: 10,
        }
    }

    pub fn binary(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            alphabet_size: 2,
        }
    }
}

/// A parsed digit stream together with the byte offset of every digit.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDigits {
    pub sequence: SymbolSequence,
    /// Bytes read, including skipped layout characters.
    pub bytes_read: u64,
    /// `(symbol index, bytes skipped before it)` at each point where the
    /// skip count changes.
    skips: Vec<(usize, u64)>,
}

impl ParsedDigits {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Byte offset in the input of symbol `i` (0-based).
    pub fn offset_of(&self, i: usize) -> u64 {
        let at = self.skips.partition_point(|&(idx, _)| idx <= i);
        let skipped = if at == 0 { 0 } else { self.skips[at - 1].1 };
        i as u64 + skipped
    }

    pub fn into_sequence(self) -> SymbolSequence {
        self.sequence
    }
}

fn is_layout(b: u8) -> bool {
    matches!(b, b'.' | b' ' | b'\t' | b'\r' | b'\n')
}

/// Parses ASCII digits, skipping `.`, space, tab, CR and LF.
pub fn parse_digits(bytes: &[u8], alphabet_size: usize) -> Result<ParsedDigits, IngestError> {
    if alphabet_size != 2 && alphabet_size != 10 {
        return Err(IngestError::UnsupportedAlphabet(alphabet_size));
    }
    let mut symbols = Vec::with_capacity(bytes.len());
    let mut skips = Vec::new();
    let mut skipped = 0u64;
    let mut recorded = 0u64;
    for (offset, &b) in bytes.iter().enumerate() {
        if is_layout(b) {
            skipped += 1;
            continue;
        }
        let d = b.wrapping_sub(b'0');
        if (d as usize) >= alphabet_size {
            return Err(IngestError::BadCharacter {
                offset: offset as u64,
                byte: b,
            });
        }
        if skipped != recorded {
            skips.push((symbols.len(), skipped));
            recorded = skipped;
        }
        symbols.push(d);
    }
    if symbols.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let alphabet = Alphabet::digits(alphabet_size).expect("2 and 10 are valid digit alphabets");
    Ok(ParsedDigits {
        sequence: SymbolSequence::from_trusted(alphabet, symbols),
        bytes_read: bytes.len() as u64,
        skips,
    })
}

pub fn parse_digit_file(spec: &DigitFileSpec) -> Result<ParsedDigits, IngestError> {
    let bytes = std::fs::read(&spec.path).map_err(|e| IngestError::Io {
        path: spec.path.clone(),
        message: e.to_string(),
    })?;
    parse_digits(&bytes, spec.alphabet_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub segments: Vec<SymbolSequence>,
    pub segment_length: usize,
    /// Trailing symbols that did not fill a segment.
    pub discarded: usize,
}

/// `floor(n / segment_length)` consecutive disjoint segments.
pub fn segment(seq: &SymbolSequence, segment_length: usize) -> Result<Segmentation, IngestError> {
    if segment_length == 0 {
        return Err(IngestError::InvalidSegmentLength);
    }
    let count = seq.len() / segment_length;
    let segments = (0..count)
        .map(|i| seq.slice(i * segment_length..(i + 1) * segment_length))
        .collect();
    Ok(Segmentation {
        segments,
        segment_length,
        discarded: seq.len() - count * segment_length,
    })
}

/// How far past its own end a segment's return times may look.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanScope {
    /// Only inside the segment.
    Segment,
    /// Through the rest of the file.
    Rest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeConfig {
    pub k: usize,
    pub ell: usize,
    pub segment_length: usize,
    pub scope: ScanScope,
}

impl AnalyzeConfig {
    /// `k = 1000`, `ℓ = 4`, 400000-digit segments.
    pub fn decimal_default() -> Self {
        Self {
            k: 1000,
            ell: 4,
            segment_length: 400_000,
            scope: ScanScope::Rest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentResult {
    pub segment: usize,
    /// Index of the segment's first symbol in the full sequence.
    pub start: usize,
    pub z: Option<f64>,
    pub h_hat: Option<f64>,
    pub blocks_scanned: usize,
    /// 1-based indices of unresolved return times.
    pub censored: Vec<usize>,
    pub error: Option<String>,
}

impl SegmentResult {
    pub fn is_ok(&self) -> bool {
        self.z.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentAnalysis {
    pub config: AnalyzeConfig,
    pub entropy_bits: f64,
    pub discarded: usize,
    pub results: Vec<SegmentResult>,
}

impl SegmentAnalysis {
    pub fn z_values(&self) -> Vec<f64> {
        self.results.iter().filter_map(|r| r.z).collect()
    }

    pub fn all_ok(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(SegmentResult::is_ok)
    }
}

/// Computes `z` and `Ĥ` for every segment against the equidistributed
/// entropy `log₂ A`. Segments that cannot be analyzed get an error row.
pub fn analyze_segments(seq: &SymbolSequence, config: &AnalyzeConfig) -> Result<SegmentAnalysis, IngestError> {
    if config.k == 0 || config.ell == 0 {
        return Err(IngestError::InvalidParams("k and ℓ must be at least 1".into()));
    }
    let model = ProcessModel::equidistributed(seq.alphabet().size())
        .map_err(|e| IngestError::InvalidParams(e.to_string()))?;
    let h = model.entropy_bits();
    if config.segment_length == 0 {
        return Err(IngestError::InvalidSegmentLength);
    }
    let count = seq.len() / config.segment_length;
    let results = (0..count)
        .map(|i| analyze_one(seq, config, i, h))
        .collect();
    Ok(SegmentAnalysis {
        config: config.clone(),
        entropy_bits: h,
        discarded: seq.len() - count * config.segment_length,
        results,
    })
}

fn analyze_one(seq: &SymbolSequence, config: &AnalyzeConfig, index: usize, h: f64) -> SegmentResult {
    let start = index * config.segment_length;
    let mut row = SegmentResult {
        segment: index,
        start,
        z: None,
        h_hat: None,
        blocks_scanned: 0,
        censored: Vec::new(),
        error: None,
    };
    let needed = config.k * config.ell;
    if config.segment_length < needed {
        row.error = Some(format!(
            "segment of {} symbols is shorter than k·ℓ = {needed}",
            config.segment_length
        ));
        return row;
    }
    match scan_segment(seq, config, start) {
        Ok(set) => {
            row.blocks_scanned = set.blocks_scanned();
            row.censored = set.censored();
            if row.censored.is_empty() {
                row.z = clt_statistic(&set, config.ell, h).ok();
                row.h_hat = entropy_estimate(&set, config.ell).ok();
            } else {
                row.error = Some(format!("{} return times unresolved", row.censored.len()));
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn scan_segment(
    seq: &SymbolSequence,
    config: &AnalyzeConfig,
    start: usize,
) -> Result<crate::returns::ReturnTimeSet, ReturnError> {
    let ell = config.ell;
    let segment_end = start + config.segment_length;
    let end = match config.scope {
        ScanScope::Segment => segment_end,
        ScanScope::Rest => seq.len(),
    };
    let blockify_range = |from: usize, to: usize| {
        blockify(&seq.slice(from..to), ell).expect("ranges hold at least one block")
    };
    let first_end = start + (config.segment_length / ell) * ell;
    let first = blockify_range(start, first_end);
    let mut scanner = ReturnTimeScanner::new(*first.codec(), config.k, u64::MAX)?;
    scanner.feed(&first)?;
    let mut at = first_end;
    while !scanner.is_complete() && at + ell <= end {
        let to = (at + CONTINUATION_BLOCKS * ell).min(at + (end - at) / ell * ell);
        scanner.feed(&blockify_range(at, to))?;
        at = to;
    }
    scanner.finish()
}

pub fn read_and_analyze(spec: &DigitFileSpec, config: &AnalyzeConfig) -> Result<SegmentAnalysis, IngestError> {
    let parsed = parse_digit_file(spec)?;
    analyze_segments(&parsed.sequence, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::returns::return_times;
    use proptest::prelude::*;

    #[test]
    fn decimal_point_is_skipped() {
        let p = parse_digits(b"3.14159", 10).unwrap();
        assert_eq!(p.sequence.symbols(), &[3, 1, 4, 1, 5, 9]);
        assert_eq!(p.offset_of(0), 0);
        assert_eq!(p.offset_of(1), 2);
        assert_eq!(p.offset_of(5), 6);
    }

    #[test]
    fn whitespace_is_skipped() {
        let p = parse_digits(b"0110\n01", 2).unwrap();
        assert_eq!(p.sequence.symbols(), &[0, 1, 1, 0, 0, 1]);
        assert_eq!(p.offset_of(4), 5);
        let p = parse_digits(b"\r\n 12\t3 \n", 10).unwrap();
        assert_eq!(p.sequence.symbols(), &[1, 2, 3]);
        assert_eq!(p.offset_of(2), 6);
    }

    #[test]
    fn bad_characters_report_offset() {
        assert_eq!(
            parse_digits(b"31x4", 10),
            Err(IngestError::BadCharacter { offset: 2, byte: b'x' })
        );
        assert_eq!(
            parse_digits(b"0102", 2),
            Err(IngestError::BadCharacter { offset: 3, byte: b'2' })
        );
        assert_eq!(parse_digits(b"3,1", 10), Err(IngestError::BadCharacter { offset: 1, byte: b',' }));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(parse_digits(b"", 10), Err(IngestError::EmptyFile));
        assert_eq!(parse_digits(b" .\n", 10), Err(IngestError::EmptyFile));
        assert_eq!(parse_digits(b"1", 3), Err(IngestError::UnsupportedAlphabet(3)));
    }

    #[test]
    fn reads_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        std::fs::write(&path, "2.71828\n18284\n").unwrap();
        let p = parse_digit_file(&DigitFileSpec::decimal(&path)).unwrap();
        assert_eq!(p.len(), 11);
        assert_eq!(p.bytes_read, 14);
        let missing = parse_digit_file(&DigitFileSpec::decimal(dir.path().join("none")));
        assert!(matches!(missing, Err(IngestError::Io { .. })));
    }

    #[test]
    fn segment_counts() {
        let seq = parse_digits(b"0123456789", 10).unwrap().sequence;
        let s = segment(&seq, 4).unwrap();
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.discarded, 2);
        assert_eq!(s.segments[1].symbols(), &[4, 5, 6, 7]);
        assert_eq!(segment(&seq, 11).unwrap().segments.len(), 0);
        assert_eq!(segment(&seq, 0), Err(IngestError::InvalidSegmentLength));
    }

    #[test]
    fn twenty_million_digits_make_fifty_segments() {
        let seq = SymbolSequence::from_trusted(Alphabet::digits(10).unwrap(), vec![0; 20_000_000]);
        let count = seq.len() / 400_000;
        assert_eq!(count, 50);
        assert_eq!(seq.len() % 400_000, 0);
        let s = segment(&seq.slice(0..1_000_123), 400_000).unwrap();
        assert_eq!((s.segments.len(), s.discarded), (2, 200_123));
    }

    fn digits_strategy() -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(prop_oneof![
            8 => b'0'..=b'9',
            1 => Just(b'.'),
            1 => Just(b'\n'),
            1 => Just(b' '),
        ], 1..200)
    }

    proptest! {
        #[test]
        fn offsets_point_at_their_digits(bytes in digits_strategy()) {
            match parse_digits(&bytes, 10) {
                Ok(p) => {
                    for (i, &d) in p.sequence.symbols().iter().enumerate() {
                        prop_assert_eq!(bytes[p.offset_of(i) as usize], b'0' + d);
                    }
                    let rendered: Vec<u8> = p.sequence.symbols().iter().map(|d| b'0' + d).collect();
                    let again = parse_digits(&rendered, 10).unwrap();
                    prop_assert_eq!(again.sequence, p.sequence);
                }
                Err(e) => prop_assert_eq!(e, IngestError::EmptyFile),
            }
        }

        #[test]
        fn segments_and_tail_reconstruct(n in 1usize..300, len in 1usize..50, seed in any::<u64>()) {
            let model = ProcessModel::equidistributed(10).unwrap();
            let seq = crate::simulate::gen_iid(&model, n, seed).unwrap();
            let s = segment(&seq, len).unwrap();
            let mut joined: Vec<u8> = s.segments.iter().flat_map(|x| x.symbols().to_vec()).collect();
            joined.extend_from_slice(&seq.symbols()[n - s.discarded..]);
            prop_assert_eq!(joined.as_slice(), seq.symbols());
        }
    }

    #[test]
    fn segment_scope_matches_direct_return_times() {
        let model = ProcessModel::equidistributed(10).unwrap();
        let seq = crate::simulate::gen_iid(&model, 60_000, 17).unwrap();
        let config = AnalyzeConfig {
            k: 50,
            ell: 2,
            segment_length: 20_000,
            scope: ScanScope::Segment,
        };
        let analysis = analyze_segments(&seq, &config).unwrap();
        assert_eq!(analysis.results.len(), 3);
        for r in &analysis.results {
            let blocks = blockify(&seq.slice(r.start..r.start + 20_000), 2).unwrap();
            let set = return_times(&blocks, 50, u64::MAX).unwrap();
            assert_eq!(r.z, Some(clt_statistic(&set, 2, 10f64.log2()).unwrap()));
        }
    }

    #[test]
    fn rest_scope_resolves_what_segment_scope_censors() {
        // 3-digit blocks with k = 200 in 700-digit segments: the segment alone
        // is far too short, the remaining file is long enough.
        let model = ProcessModel::equidistributed(10).unwrap();
        let seq = crate::simulate::gen_iid(&model, 700 + 300_000, 5).unwrap();
        let mut config = AnalyzeConfig {
            k: 200,
            ell: 3,
            segment_length: 700,
            scope: ScanScope::Segment,
        };
        let short = analyze_segments(&seq.slice(0..1400), &config).unwrap();
        assert!(short.results.iter().all(|r| r.z.is_none() && !r.censored.is_empty()));
        config.scope = ScanScope::Rest;
        let analysis = analyze_segments(&seq, &config).unwrap();
        let first = &analysis.results[0];
        assert!(first.is_ok(), "{first:?}");
        let blocks = blockify(&seq, 3).unwrap();
        let set = return_times(&blocks, 200, u64::MAX).unwrap();
        assert_eq!(first.z, Some(clt_statistic(&set, 3, 10f64.log2()).unwrap()));
        assert_eq!(first.blocks_scanned, set.blocks_scanned());
    }

    #[test]
    fn short_segments_get_error_rows() {
        let seq = parse_digits(b"0123456789012345", 10).unwrap().sequence;
        let config = AnalyzeConfig {
            k: 3,
            ell: 3,
            segment_length: 8,
            scope: ScanScope::Rest,
        };
        let a = analyze_segments(&seq, &config).unwrap();
        assert_eq!(a.results.len(), 2);
        assert!(a.results.iter().all(|r| r.error.is_some()));
        assert!(!a.all_ok());
    }
}
