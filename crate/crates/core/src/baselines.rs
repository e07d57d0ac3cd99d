//! Comparator estimators: overlapping return times with Wyner's
//! normalization, and Grassberger prefix lengths.

use serde::Serialize;
use thiserror::Error;

use crate::blocks::SymbolSequence;
use crate::rng::derive_seed;
use crate::simulate::{gen_iid, SimError};
use crate::statistics::{information_variance, ProcessModel};

/// Information variances below this count as zero.
const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("invalid prefix length {n} for a sequence of {len} symbols")]
    InvalidN { n: usize, len: usize },
    #[error("overlapping return time censored after {horizon} shifts")]
    Censored { horizon: u64 },
    #[error("information variance is zero; no Wyner normalization exists")]
    ZeroVariance,
    #[error("prefix length at position {0} needs more data than available")]
    Unresolved(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapReturn {
    pub n: usize,
    /// `None` when no match was found within the horizon.
    pub t: Option<u64>,
    /// Shifts actually tested.
    pub horizon_used: u64,
}

fn failure_function(pattern: &[u8]) -> Vec<usize> {
    let mut fail = vec![0; pattern.len()];
    let mut k = 0;
    for i in 1..pattern.len() {
        while k > 0 && pattern[i] != pattern[k] {
            k = fail[k - 1];
        }
        if pattern[i] == pattern[k] {
            k += 1;
        }
        fail[i] = k;
    }
    fail
}

/// `T_n = min{t ≥ 1 : Z_1^n = Z_{t+1}^{t+n}}`, found by Knuth–Morris–Pratt
/// over shifts `1..=horizon`.
pub fn overlapping_return_time(seq: &SymbolSequence, n: usize, horizon: u64) -> Result<OverlapReturn, BaselineError> {
    let z = seq.symbols();
    if n == 0 || n >= z.len() {
        return Err(BaselineError::InvalidN { n, len: z.len() });
    }
    let pattern = &z[..n];
    let fail = failure_function(pattern);
    // Shift t is testable when t + n ≤ len.
    let max_t = ((z.len() - n) as u64).min(horizon);
    let end = max_t as usize + n;
    let mut k = 0;
    for (pos, &c) in z.iter().enumerate().take(end).skip(1) {
        while k > 0 && c != pattern[k] {
            k = fail[k - 1];
        }
        if c == pattern[k] {
            k += 1;
        }
        if k == n {
            return Ok(OverlapReturn {
                n,
                t: Some((pos + 1 - n) as u64),
                horizon_used: max_t,
            });
        }
    }
    Ok(OverlapReturn {
        n,
        t: None,
        horizon_used: max_t,
    })
}

/// `(log₂ T_n − nH) / √(n𝒱)`.
pub fn wyner_statistic(seq: &SymbolSequence, n: usize, horizon: u64, model: &ProcessModel) -> Result<f64, BaselineError> {
    let v = information_variance(model);
    if v < VARIANCE_FLOOR {
        return Err(BaselineError::ZeroVariance);
    }
    let r = overlapping_return_time(seq, n, horizon)?;
    let t = r.t.ok_or(BaselineError::Censored { horizon: r.horizon_used })?;
    Ok(wyner_from_time(t, n, model.entropy_bits(), v))
}

pub fn wyner_from_time(t: u64, n: usize, h_bits: f64, v: f64) -> f64 {
    let n = n as f64;
    ((t as f64).log2() - n * h_bits) / (n * v).sqrt()
}

/// Monte Carlo estimate of `E[T_n P(Z_1^n)]` for an IID source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KacDiagnostic {
    pub n: usize,
    pub samples: usize,
    pub horizon: u64,
    /// Average of `T_n P(Z_1^n)` with censored samples contributing zero.
    pub truncated_mean: f64,
    pub standard_error: f64,
    pub censored: usize,
}

pub fn kac_diagnostic(
    model: &ProcessModel,
    n: usize,
    horizon: u64,
    samples: usize,
    seed: u64,
) -> Result<KacDiagnostic, BaselineError> {
    if samples < 2 {
        return Err(BaselineError::InvalidN { n: samples, len: 0 });
    }
    let len = n + horizon as usize;
    let mut values = Vec::with_capacity(samples);
    let mut censored = 0;
    for s in 0..samples {
        let seq = gen_iid(model, len, derive_seed(seed, s as u64))?;
        let r = overlapping_return_time(&seq, n, horizon)?;
        let p: f64 = seq.symbols()[..n].iter().map(|&c| model.prob(c as usize)).product();
        match r.t {
            Some(t) => values.push(t as f64 * p),
            None => {
                censored += 1;
                values.push(0.0);
            }
        }
    }
    let m = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (samples - 1) as f64;
    Ok(KacDiagnostic {
        n,
        samples,
        horizon,
        truncated_mean: m,
        standard_error: (var / samples as f64).sqrt(),
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrefixLengths {
    pub n: usize,
    /// `R_{i,n}` for `i = 1..=n`, stored 0-based.
    pub lengths: Vec<usize>,
}

/// Suffix array by prefix doubling.
fn suffix_array(s: &[u8]) -> Vec<usize> {
    let len = s.len();
    let mut sa: Vec<usize> = (0..len).collect();
    let mut rank: Vec<usize> = s.iter().map(|&c| c as usize).collect();
    let mut next = vec![0usize; len];
    let mut width = 1;
    while width < len {
        let key = |i: usize| (rank[i], if i + width < len { rank[i + width] + 1 } else { 0 });
        sa.sort_unstable_by_key(|&i| key(i));
        next[sa[0]] = 0;
        for w in 1..len {
            next[sa[w]] = next[sa[w - 1]] + usize::from(key(sa[w]) != key(sa[w - 1]));
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[len - 1]] == len - 1 {
            break;
        }
        width *= 2;
    }
    sa
}

/// Kasai et al.: `lcp[r]` is the common prefix of suffixes `sa[r-1]`, `sa[r]`.
fn lcp_array(s: &[u8], sa: &[usize]) -> Vec<usize> {
    let len = s.len();
    let mut rank = vec![0; len];
    for (r, &i) in sa.iter().enumerate() {
        rank[i] = r;
    }
    let mut lcp = vec![0; len];
    let mut h = 0;
    for i in 0..len {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < len && j + h < len && s[i + h] == s[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// `R_{i,n} = 1 + max_{j ≠ i} LCP(i, j)` over start positions `1..=n`.
/// The strings of length `R_{i,n}` started at every `j ≤ n` must lie inside
/// the sequence, otherwise position `i` is unresolved.
pub fn grassberger_lengths(seq: &SymbolSequence, n: usize) -> Result<PrefixLengths, BaselineError> {
    let z = seq.symbols();
    if n < 2 || n > z.len() {
        return Err(BaselineError::InvalidN { n, len: z.len() });
    }
    let sa = suffix_array(z);
    let lcp = lcp_array(z, &sa);
    let mut best = vec![0usize; n];
    let mut prev: Option<usize> = None;
    let mut run = usize::MAX;
    for (r, &pos) in sa.iter().enumerate() {
        if r > 0 {
            run = run.min(lcp[r]);
        }
        if pos < n {
            if let Some(p) = prev {
                best[p] = best[p].max(run);
                best[pos] = best[pos].max(run);
            }
            prev = Some(pos);
            run = usize::MAX;
        }
    }
    // All strings of length R started at 1..=n exist iff n + R − 1 ≤ len.
    let room = z.len() - n + 1;
    let lengths: Vec<usize> = best.iter().map(|&m| m + 1).collect();
    if let Some(i) = lengths.iter().position(|&r| r > room) {
        return Err(BaselineError::Unresolved(i + 1));
    }
    Ok(PrefixLengths { n, lengths })
}

/// Direct evaluation of the infimum definition, `O(n² max R)`.
pub fn grassberger_lengths_brute(seq: &SymbolSequence, n: usize) -> Result<PrefixLengths, BaselineError> {
    let z = seq.symbols();
    if n < 2 || n > z.len() {
        return Err(BaselineError::InvalidN { n, len: z.len() });
    }
    let mut lengths = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = 1;
        loop {
            if n - 1 + t > z.len() {
                return Err(BaselineError::Unresolved(i + 1));
            }
            let unique = (0..n).all(|j| j == i || z[i..i + t] != z[j..j + t]);
            if unique {
                break;
            }
            t += 1;
        }
        lengths.push(t);
    }
    Ok(PrefixLengths { n, lengths })
}

/// `(1/n) Σ log₂ n / R_{i,n}`, in bits.
pub fn grassberger_entropy(seq: &SymbolSequence, n: usize) -> Result<f64, BaselineError> {
    let r = grassberger_lengths(seq, n)?;
    let log_n = (n as f64).log2();
    Ok(r.lengths.iter().map(|&x| log_n / x as f64).sum::<f64>() / n as f64)
}
